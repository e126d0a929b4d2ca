#pragma once

// Brute-force label-level oracles, independent of the event machinery under
// test. A graph here is just a set of (n1, n2, r) triples and commands apply
// with plain set semantics.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "tkg/graph.hpp"

namespace tkg::testing {

using TripleSet = std::set<RdfTriple>;

// The reference command applicator: add inserts the triple, delete removes it
// and is ignored when absent.
inline TripleSet apply_commands_label_level(TripleSet triples,
                                            const std::vector<UpdateCommand>& commands) {
  for (const auto& c : commands) {
    RdfTriple t{c.n1, c.n2, c.r};
    if (c.op == UpdateCommand::Op::Add) {
      triples.insert(t);
    } else {
      triples.erase(t);
    }
  }
  return triples;
}

// Rebuilds a belief graph from scratch by re-applying every event; used to
// cross-check incremental index bookkeeping in apply_event.
inline BeliefGraph rebuild_from_events(const std::vector<GraphEvent>& events) {
  BeliefGraph g;
  for (const auto& e : events) apply_event(g, e, ApplyMode::Lenient);
  return g;
}

// Random command-step generator for the oracle-equivalence properties.
// A step is a set batch the way graph diffs produce one: deletes of triples
// present at step start, adds of pairs free at step start (or freed by one of
// the step's deletes), never two relations on the same ordered pair, labels
// outside the exit/state sets.
class RandomCommandStream {
 public:
  explicit RandomCommandStream(unsigned seed) : rng_(seed) {}

  std::vector<UpdateCommand> next_step(const TripleSet& current, int max_commands) {
    std::vector<UpdateCommand> commands;
    int n = std::uniform_int_distribution<int>(0, max_commands)(rng_);

    std::set<std::pair<std::string, std::string>> free_pairs_lost;  // added this step
    TripleSet deletable = current;
    TripleSet deleted;
    for (int i = 0; i < n; ++i) {
      if (!deletable.empty() && chance(0.35)) {
        auto it = deletable.begin();
        std::advance(it,
                     std::uniform_int_distribution<size_t>(0, deletable.size() - 1)(rng_));
        commands.push_back({UpdateCommand::Op::Delete, it->subject, it->object, it->relation});
        deleted.insert(*it);
        deletable.erase(it);
      } else {
        UpdateCommand cmd = random_add(current, deleted, free_pairs_lost);
        if (cmd.n1.empty()) continue;
        commands.push_back(cmd);
        free_pairs_lost.insert({cmd.n1, cmd.n2});
      }
    }
    return commands;
  }

 private:
  bool chance(double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
  }

  std::string pick(const std::vector<std::string>& pool) {
    return pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng_)];
  }

  UpdateCommand random_add(const TripleSet& at_start, const TripleSet& deleted,
                           const std::set<std::pair<std::string, std::string>>& added) {
    static const std::vector<std::string> labels = {
        "apple",  "table", "chair",   "kitchen", "pantry", "knife",
        "carrot", "stove", "counter", "player",  "book",   "shelf"};
    static const std::vector<std::string> relations = {"on", "in", "under", "west_of"};
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::string n1 = pick(labels);
      std::string n2 = pick(labels);
      if (n1 == n2) continue;
      if (added.count({n1, n2})) continue;
      bool pair_taken = false;
      for (const auto& t : at_start) {
        if (t.subject == n1 && t.object == n2 && !deleted.count(t)) pair_taken = true;
      }
      if (pair_taken) continue;
      return {UpdateCommand::Op::Add, n1, n2, pick(relations)};
    }
    return {UpdateCommand::Op::Add, "", "", ""};
  }

  std::mt19937_64 rng_;
};

}  // namespace tkg::testing
