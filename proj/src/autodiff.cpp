#include "tkg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace tkg::nn {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw std::runtime_error("autodiff: " + message);
}

void check_shape(bool ok, const char* op) {
  if (!ok) fail(std::string(op) + ": shape mismatch");
}

Var make_op(Mat value, std::vector<NodePtr> parents,
            std::function<void(const Node&, const Mat&, const std::vector<Mat*>&)> back,
            const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  node->backprop = std::move(back);
  node->op = op;
  return Var(node);
}

}  // namespace

Var Var::constant(Mat value, const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  return Var(node);
}

Var Var::scalar(double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m), "scalar");
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) fail("item() requires a 1x1 value");
  return node_->value(0, 0);
}

void backward(const Var& root, GradMap& sink) {
  if (!root.defined()) fail("backward on undefined var");
  if (root.rows() != 1 || root.cols() != 1) fail("backward root must be 1x1");

  // Iterative postorder DFS; reverse gives a topological order from the root.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* child = node->parents[next_child++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  GradMap local;
  local[root.node().get()] = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto found = local.find(node);
    if (found == local.end()) continue;  // unreached side branch
    Mat grad = std::move(found->second);
    local.erase(found);
    if (node->is_param) {
      auto& slot = sink[node];
      if (slot.size() == 0) slot = Mat::Zero(node->value.rows(), node->value.cols());
      slot += grad;
      continue;
    }
    if (!node->backprop) continue;  // constant leaf
    std::vector<Mat*> parent_grads;
    parent_grads.reserve(node->parents.size());
    for (const auto& parent : node->parents) {
      GradMap& target = parent->is_param ? sink : local;
      auto& slot = target[parent.get()];
      if (slot.size() == 0) slot = Mat::Zero(parent->value.rows(), parent->value.cols());
      parent_grads.push_back(&slot);
    }
    node->backprop(*node, grad, parent_grads);
  }
}

Var matmul(const Var& a, const Var& b) {
  check_shape(a.cols() == b.rows(), "matmul");
  return make_op(
      a.value() * b.value(), {a.node(), b.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g * self.parents[1]->value.transpose();
        *pg[1] += self.parents[0]->value.transpose() * g;
      },
      "matmul");
}

Var transpose(const Var& a) {
  return make_op(
      a.value().transpose(), {a.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g.transpose();
      },
      "transpose");
}

Var add(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  return make_op(
      a.value() + b.value(), {a.node(), b.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g;
        *pg[1] += g;
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  return make_op(
      a.value() - b.value(), {a.node(), b.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g;
        *pg[1] -= g;
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  return make_op(
      a.value().cwiseProduct(b.value()), {a.node(), b.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g.cwiseProduct(self.parents[1]->value);
        *pg[1] += g.cwiseProduct(self.parents[0]->value);
      },
      "mul");
}

Var scale(const Var& a, double c) {
  return make_op(
      a.value() * c, {a.node()},
      [c](const Node&, const Mat& g, const std::vector<Mat*>& pg) { *pg[0] += g * c; },
      "scale");
}

Var mul_scalar(const Var& a, const Var& s) {
  check_shape(s.rows() == 1 && s.cols() == 1, "mul_scalar");
  return make_op(
      a.value() * s.value()(0, 0), {a.node(), s.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g * self.parents[1]->value(0, 0);
        (*pg[1])(0, 0) += (g.cwiseProduct(self.parents[0]->value)).sum();
      },
      "mul_scalar");
}

Var add_rowvec(const Var& a, const Var& row) {
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_rowvec");
  return make_op(
      a.value().rowwise() + row.value().row(0), {a.node(), row.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g;
        pg[1]->row(0) += g.colwise().sum();
      },
      "add_rowvec");
}

Var mul_rowvec(const Var& a, const Var& row) {
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "mul_rowvec");
  Mat value = a.value().array().rowwise() * row.value().row(0).array();
  return make_op(
      std::move(value), {a.node(), row.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] +=
            (g.array().rowwise() * self.parents[1]->value.row(0).array()).matrix();
        pg[1]->row(0) +=
            g.cwiseProduct(self.parents[0]->value).colwise().sum();
      },
      "mul_rowvec");
}

Var add_colvec(const Var& a, const Var& col) {
  check_shape(col.cols() == 1 && col.rows() == a.rows(), "add_colvec");
  return make_op(
      a.value().colwise() + col.value().col(0), {a.node(), col.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g;
        pg[1]->col(0) += g.rowwise().sum();
      },
      "add_colvec");
}

Var add_const(const Var& a, const Mat& c) {
  check_shape(a.rows() == c.rows() && a.cols() == c.cols(), "add_const");
  return make_op(
      a.value() + c, {a.node()},
      [](const Node&, const Mat& g, const std::vector<Mat*>& pg) { *pg[0] += g; },
      "add_const");
}

Var relu(const Var& a) {
  return make_op(
      a.value().cwiseMax(0.0), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += (self.parents[0]->value.array() > 0.0).cast<double>().matrix().cwiseProduct(g);
      },
      "relu");
}

Var exp(const Var& a) {
  return make_op(
      a.value().array().exp().matrix(), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        *pg[0] += g.cwiseProduct(self.value);
      },
      "exp");
}

Var softplus(const Var& a) {
  Mat value = a.value().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return make_op(
      std::move(value), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        Mat sig = self.parents[0]->value.unaryExpr(
            [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        *pg[0] += g.cwiseProduct(sig);
      },
      "softplus");
}

Var sigmoid(const Var& a) {
  Mat value = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make_op(
      std::move(value), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        Mat s = self.value;
        *pg[0] += g.cwiseProduct(s.cwiseProduct(Mat::Ones(s.rows(), s.cols()) - s));
      },
      "sigmoid");
}

Var softmax_rows(const Var& a, std::shared_ptr<const Mat> mask) {
  if (mask) check_shape(mask->rows() == a.rows() && mask->cols() == a.cols(), "softmax_rows");
  Mat value(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (mask && (*mask)(r, c) == 0.0) continue;
      max_logit = std::max(max_logit, a.value()(r, c));
    }
    double denom = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      bool active = !mask || (*mask)(r, c) != 0.0;
      double e = active ? std::exp(a.value()(r, c) - max_logit) : 0.0;
      value(r, c) = e;
      denom += e;
    }
    if (denom > 0.0) value.row(r) /= denom;
  }
  return make_op(
      std::move(value), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        const Mat& y = self.value;
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          double inner = g.row(r).dot(y.row(r));
          pg[0]->row(r) +=
              y.row(r).cwiseProduct((g.row(r).array() - inner).matrix());
        }
      },
      "softmax_rows");
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  check_shape(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm gamma");
  check_shape(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm beta");
  const Eigen::Index n = x.cols();
  Mat normalized(x.rows(), n);
  Mat inv_std(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = x.value().row(r).mean();
    double var = (x.value().row(r).array() - mean).square().mean();
    double istd = 1.0 / std::sqrt(var + eps);
    inv_std(r, 0) = istd;
    normalized.row(r) = (x.value().row(r).array() - mean).matrix() * istd;
  }
  Mat value = (normalized.array().rowwise() * gamma.value().row(0).array()).matrix();
  value.rowwise() += beta.value().row(0);

  auto cache_norm = std::make_shared<Mat>(std::move(normalized));
  auto cache_istd = std::make_shared<Mat>(std::move(inv_std));
  return make_op(
      std::move(value), {x.node(), gamma.node(), beta.node()},
      [cache_norm, cache_istd, n](const Node& self, const Mat& g,
                                  const std::vector<Mat*>& pg) {
        const Mat& xhat = *cache_norm;
        const Mat& gamma_row = self.parents[1]->value;
        pg[2]->row(0) += g.colwise().sum();
        pg[1]->row(0) += g.cwiseProduct(xhat).colwise().sum();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          Eigen::RowVectorXd dy = g.row(r).cwiseProduct(gamma_row.row(0));
          double mean_dy = dy.mean();
          double mean_dy_xhat = dy.cwiseProduct(xhat.row(r)).mean();
          pg[0]->row(r) += ((dy.array() - mean_dy) -
                            xhat.row(r).array() * mean_dy_xhat)
                               .matrix() *
                           (*cache_istd)(r, 0);
        }
        (void)n;
      },
      "layer_norm");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_rows of nothing");
  Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    check_shape(p.cols() == cols, "concat_rows");
    rows += p.rows();
    parents.push_back(p.node());
  }
  Mat value(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_op(
      std::move(value), std::move(parents),
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          Eigen::Index r = self.parents[i]->value.rows();
          *pg[i] += g.middleRows(at, r);
          at += r;
        }
      },
      "concat_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_cols of nothing");
  Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    check_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
    parents.push_back(p.node());
  }
  Mat value(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(
      std::move(value), std::move(parents),
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          Eigen::Index c = self.parents[i]->value.cols();
          *pg[i] += g.middleCols(at, c);
          at += c;
        }
      },
      "concat_cols");
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && start + count <= a.rows(), "slice_rows");
  return make_op(
      a.value().middleRows(start, count), {a.node()},
      [start, count](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        pg[0]->middleRows(start, count) += g;
      },
      "slice_rows");
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && start + count <= a.cols(), "slice_cols");
  return make_op(
      a.value().middleCols(start, count), {a.node()},
      [start, count](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        pg[0]->middleCols(start, count) += g;
      },
      "slice_cols");
}

Var sum_all(const Var& a) {
  Mat value(1, 1);
  value(0, 0) = a.value().sum();
  return make_op(
      std::move(value), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        pg[0]->array() += g(0, 0);
        (void)self;
      },
      "sum_all");
}

Var mean_over_rows(const Var& a) {
  check_shape(a.rows() > 0, "mean_over_rows");
  Mat value = a.value().colwise().mean();
  return make_op(
      std::move(value), {a.node()},
      [](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        double inv = 1.0 / static_cast<double>(self.parents[0]->value.rows());
        pg[0]->rowwise() += (g.row(0) * inv).eval();
      },
      "mean_over_rows");
}

Var depthwise_conv1d(const Var& x, const Var& kernel, const Var& bias) {
  const Eigen::Index L = x.rows();
  const Eigen::Index C = x.cols();
  const Eigen::Index K = kernel.rows();
  check_shape(kernel.cols() == C, "depthwise_conv1d kernel");
  check_shape(bias.rows() == 1 && bias.cols() == C, "depthwise_conv1d bias");
  check_shape(K % 2 == 1, "depthwise_conv1d kernel width must be odd");
  const Eigen::Index half = K / 2;

  Mat value = Mat::Zero(L, C);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index j = 0; j < K; ++j) {
      Eigen::Index s = t + j - half;
      if (s < 0 || s >= L) continue;
      value.row(t) += x.value().row(s).cwiseProduct(kernel.value().row(j));
    }
    value.row(t) += bias.value().row(0);
  }
  return make_op(
      std::move(value), {x.node(), kernel.node(), bias.node()},
      [half, K, L](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        const Mat& xv = self.parents[0]->value;
        const Mat& kv = self.parents[1]->value;
        for (Eigen::Index t = 0; t < L; ++t) {
          for (Eigen::Index j = 0; j < K; ++j) {
            Eigen::Index s = t + j - half;
            if (s < 0 || s >= L) continue;
            pg[0]->row(s) += g.row(t).cwiseProduct(kv.row(j));
            pg[1]->row(j) += g.row(t).cwiseProduct(xv.row(s));
          }
          pg[2]->row(0) += g.row(t);
        }
      },
      "depthwise_conv1d");
}

Var gather_rows(const Var& table, std::vector<int> ids) {
  Mat value(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) fail("gather_rows: id out of range");
    value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return make_op(
      std::move(value), {table.node()},
      [ids = std::move(ids)](const Node&, const Mat& g, const std::vector<Mat*>& pg) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          pg[0]->row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
        }
      },
      "gather_rows");
}

Var nll_row(const Var& logits, int target) {
  check_shape(logits.rows() == 1, "nll_row");
  if (target < 0 || target >= logits.cols()) fail("nll_row: target out of range");
  double max_logit = logits.value().maxCoeff();
  double lse = std::log((logits.value().array() - max_logit).exp().sum()) + max_logit;
  Mat value(1, 1);
  value(0, 0) = lse - logits.value()(0, target);
  return make_op(
      std::move(value), {logits.node()},
      [target, lse](const Node& self, const Mat& g, const std::vector<Mat*>& pg) {
        Mat probs = (self.parents[0]->value.array() - lse).exp().matrix();
        probs(0, target) -= 1.0;
        *pg[0] += probs * g(0, 0);
      },
      "nll_row");
}

Var ParameterStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        Init init, bool trainable, double init_scale) {
  if (index_.count(name)) fail("duplicate parameter name: " + name);
  Mat value(rows, cols);
  switch (init) {
    case Init::Zero:
      value.setZero();
      break;
    case Init::One:
      value.setOnes();
      break;
    case Init::XavierUniform: {
      double bound = std::sqrt(6.0 / static_cast<double>(rows + cols)) * init_scale;
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = dist(rng_);
      }
      break;
    }
    case Init::Normal: {
      std::normal_distribution<double> dist(0.0, init_scale);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = dist(rng_);
      }
      break;
    }
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_param = true;
  node->op = "param";
  Entry entry;
  entry.name = name;
  entry.var = Var(node);
  entry.trainable = trainable;
  entry.adam_m = Mat::Zero(rows, cols);
  entry.adam_v = Mat::Zero(rows, cols);
  index_[name] = entries_.size();
  entries_.push_back(std::move(entry));
  return entries_.back().var;
}

Var ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("unknown parameter: " + name);
  return entries_[it->second].var;
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

void ParameterStore::set_trainable(const std::string& name, bool trainable) {
  auto it = index_.find(name);
  if (it == index_.end()) fail("unknown parameter: " + name);
  entries_[it->second].trainable = trainable;
}

std::size_t ParameterStore::total_parameters() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += static_cast<std::size_t>(e.var.value().size());
  return total;
}

void AdamW::step(const GradMap& grads) {
  ++steps_;
  double clip_scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& entry : store_.entries()) {
      if (!entry.trainable) continue;
      auto it = grads.find(entry.var.node().get());
      if (it == grads.end()) continue;
      sq += it->second.squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
  }

  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (auto& entry : store_.entries()) {
    if (!entry.trainable) continue;
    auto it = grads.find(entry.var.node().get());
    Mat grad = it == grads.end()
                   ? Mat::Zero(entry.var.rows(), entry.var.cols())
                   : Mat(it->second * clip_scale);
    entry.adam_m = config_.beta1 * entry.adam_m + (1.0 - config_.beta1) * grad;
    entry.adam_v = config_.beta2 * entry.adam_v +
                   (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    Mat m_hat = entry.adam_m / bc1;
    Mat v_hat = entry.adam_v / bc2;
    Mat update = m_hat.array() / (v_hat.array().sqrt() + config_.eps);
    Mat& value = entry.var.mutable_value();
    value -= config_.lr * (update + config_.weight_decay * value);
  }
}

}  // namespace tkg::nn
