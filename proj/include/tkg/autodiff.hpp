#pragma once

// Reverse-mode automatic differentiation over Eigen matrices. Graphs are
// built define-by-run; backward() walks the DAG once and accumulates
// gradients for parameter leaves into a caller-owned map, so several graphs
// (e.g. one per example) can be differentiated into the same accumulator.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace tkg::nn {

using Mat = Eigen::MatrixXd;

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Mat value;
  std::vector<NodePtr> parents;
  // Adds d(output)/d(parent_i) contributions into parent_grads[i].
  std::function<void(const Node& self, const Mat& grad,
                     const std::vector<Mat*>& parent_grads)>
      backprop;
  bool is_param = false;
  const char* op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Mat value, const char* op = "const");
  static Var scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;  // 1x1 only
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

using GradMap = std::unordered_map<Node*, Mat>;

// Reverse pass from a 1x1 root. Gradients of parameter nodes accumulate into
// `sink`; everything else is transient.
void backward(const Var& root, GradMap& sink);

// ---- primitive ops ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var mul_scalar(const Var& a, const Var& s);       // s is 1x1
Var add_rowvec(const Var& a, const Var& row);     // broadcast 1xn over rows
Var mul_rowvec(const Var& a, const Var& row);     // broadcast multiply
Var add_colvec(const Var& a, const Var& col);     // broadcast mx1 over columns
Var add_const(const Var& a, const Mat& c);
Var relu(const Var& a);
Var exp(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
// Row softmax; entries where mask == 0 get probability 0. A fully masked row
// yields an all-zero row. mask may be null.
Var softmax_rows(const Var& a, std::shared_ptr<const Mat> mask = nullptr);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var sum_all(const Var& a);                 // 1x1
Var mean_over_rows(const Var& a);          // 1xn
// Depthwise 1-D convolution along rows with SAME zero padding; x is LxC,
// kernel is KxC (K odd), bias is 1xC.
Var depthwise_conv1d(const Var& x, const Var& kernel, const Var& bias);
// Embedding lookup: one output row per id.
Var gather_rows(const Var& table, std::vector<int> ids);
// Negative log-likelihood of `target` under softmax(logits); logits is 1xK.
Var nll_row(const Var& logits, int target);

// ---- composite helpers ----
inline Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_rowvec(matmul(x, weight), bias);
}

// ---- parameters ----
enum class Init { Zero, One, XavierUniform, Normal };

class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var var;
    bool trainable = true;
    Mat adam_m;
    Mat adam_v;
  };

  explicit ParameterStore(unsigned seed) : rng_(seed) {}

  Var add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
          bool trainable = true, double init_scale = 1.0);
  Var find(const std::string& name) const;
  bool contains(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::mt19937_64& rng() { return rng_; }
  std::size_t total_parameters() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::mt19937_64 rng_;
};

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

class AdamW {
 public:
  AdamW(ParameterStore& store, AdamWConfig config) : store_(store), config_(config) {}

  // One decoupled-weight-decay update from accumulated gradients. Entries
  // absent from `grads` are treated as zero-gradient.
  void step(const GradMap& grads);
  long step_count() const { return steps_; }
  const AdamWConfig& config() const { return config_; }

 private:
  ParameterStore& store_;
  AdamWConfig config_;
  long steps_ = 0;
};

}  // namespace tkg::nn
