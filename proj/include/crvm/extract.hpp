// Witness extraction: run a term against a collecting oracle, evaluate the
// execution tree with dovetailing, and fold fork branches by majority — a
// value is certified only when at least two branches of every fork on the
// certifying subtree agree on it.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crvm/machine.hpp"

namespace crvm {

// Partial result of one branch during extraction.
struct PartialResult {
  enum class Kind : std::uint8_t { Pending, Value, Failed };
  Kind kind = Kind::Pending;
  std::uint64_t value = 0;

  static PartialResult pending() { return {}; }
  static PartialResult failed() { return {Kind::Failed, 0}; }
  static PartialResult of(std::uint64_t v) { return {Kind::Value, v}; }

  friend bool operator==(const PartialResult&, const PartialResult&) = default;
};

// Three-way majority: a value needs two agreeing children; failed means no
// pair can ever agree; pending otherwise.
inline PartialResult majority(const PartialResult& a, const PartialResult& b,
                              const PartialResult& c) {
  const PartialResult* xs[3] = {&a, &b, &c};
  int pending = 0;
  std::map<std::uint64_t, int> votes;
  int failed = 0;
  for (const PartialResult* x : xs) {
    switch (x->kind) {
      case PartialResult::Kind::Pending: ++pending; break;
      case PartialResult::Kind::Failed: ++failed; break;
      case PartialResult::Kind::Value: ++votes[x->value]; break;
    }
  }
  for (const auto& [v, n] : votes)
    if (n >= 2) return PartialResult::of(v);
  // can two equal values still appear?
  int best = 0;
  for (const auto& [v, n] : votes) best = std::max(best, n);
  if (best + pending >= 2) return PartialResult::pending();
  return PartialResult::failed();
}

struct BranchSummary {
  std::string status;  // value / ambiguous / failed / pending
  std::optional<std::uint64_t> value;
  std::vector<std::uint64_t> payloads;  // oracle payloads seen in the subtree
  std::uint64_t nodes = 0;
};

struct ExtractReport {
  enum class Kind : std::uint8_t { Value, Ambiguous, Fail };
  enum class FailReason : std::uint8_t { Fuel, Stuck, UndecodableLeaf };

  Kind kind = Kind::Fail;
  std::uint64_t value = 0;               // Value
  std::set<std::uint64_t> candidates;    // Ambiguous
  FailReason reason = FailReason::Fuel;  // Fail
  std::uint64_t steps = 0;
  std::vector<BranchSummary> branches;

  bool is_value(std::uint64_t v) const {
    return kind == Kind::Value && value == v;
  }
};

namespace detail {

// Evaluation status per tree node.
struct NodeEval {
  enum class Kind : std::uint8_t { Open, Value, Failed, Ambiguous };
  Kind kind = Kind::Open;
  std::uint64_t value = 0;
  std::set<std::uint64_t> cands;

  bool final_() const { return kind != Kind::Open; }
};

}  // namespace detail

inline ExtractReport extract_witness_process(
    Process root, std::uint64_t fuel, const std::string& oracle_name = "delta") {
  OracleConfig cfg = OracleConfig::collector();
  cfg.name = oracle_name;

  detail::TreeDriver drv(std::move(root), cfg);
  std::vector<detail::NodeEval> eval(1);
  bool undecodable_seen = false;

  auto at = [&](std::uint32_t i) -> detail::NodeEval& {
    if (i >= eval.size()) eval.resize(i + 1);
    return eval[i];
  };

  // Fold a fork whose children may still be open; strict majority first,
  // ambiguity/failure only once every child is final.
  auto fold_fork = [&](const ExecNode& n) -> detail::NodeEval {
    PartialResult parts[3];
    bool all_final = true;
    for (int k = 0; k < 3; ++k) {
      detail::NodeEval& ce = at(n.children[k]);
      switch (ce.kind) {
        case detail::NodeEval::Kind::Open:
          parts[k] = PartialResult::pending();
          all_final = false;
          break;
        case detail::NodeEval::Kind::Value:
          parts[k] = PartialResult::of(ce.value);
          break;
        default:
          // ambiguous children certify nothing at this fork
          parts[k] = PartialResult::failed();
          break;
      }
    }
    PartialResult m = majority(parts[0], parts[1], parts[2]);
    detail::NodeEval out;
    if (m.kind == PartialResult::Kind::Value) {
      out.kind = detail::NodeEval::Kind::Value;
      out.value = m.value;
      return out;
    }
    if (!all_final) return out;  // still open
    // final, no strict pair: distinct certified values form an ambiguity
    std::set<std::uint64_t> cands;
    for (int k = 0; k < 3; ++k) {
      detail::NodeEval& ce = at(n.children[k]);
      if (ce.kind == detail::NodeEval::Kind::Value) cands.insert(ce.value);
    }
    if (cands.size() >= 2) {
      out.kind = detail::NodeEval::Kind::Ambiguous;
      out.cands = std::move(cands);
    } else {
      out.kind = detail::NodeEval::Kind::Failed;
    }
    return out;
  };

  // Bubble a freshly finalized node towards the root; true if root final.
  // (at() can grow the eval vector, so values are copied, never referenced
  // across calls.)
  auto bubble = [&](std::uint32_t i) {
    auto& tree = drv.tree();
    while (true) {
      if (i == 0) return at(0).final_();
      std::uint32_t parent = static_cast<std::uint32_t>(tree.nodes[i].parent);
      if (at(parent).final_()) return false;
      if (tree.nodes[parent].rule == 3) {
        detail::NodeEval folded = fold_fork(tree.nodes[parent]);
        if (!folded.final_()) return false;
        at(parent) = folded;
        for (std::uint32_t c : tree.nodes[parent].children)
          if (!at(c).final_()) drv.prune(c);
      } else {
        detail::NodeEval child = at(i);
        at(parent) = child;
      }
      i = parent;
    }
  };

  auto on_closed = [&](std::uint32_t i) {
    const ExecNode& n = drv.tree().nodes[i];
    detail::NodeEval& e = at(i);
    if (n.leaf == ExecNode::Leaf::Accept && n.accept.kind == AcceptKind::Oracle) {
      e.kind = detail::NodeEval::Kind::Value;
      e.value = n.accept.payload;
    } else {
      if (n.leaf == ExecNode::Leaf::Stuck && n.stuck == StuckReason::NoRule &&
          n.proc.head.is_oracle() && n.proc.head.oracle_name() == oracle_name)
        undecodable_seen = true;
      e.kind = detail::NodeEval::Kind::Failed;
    }
    return bubble(i);
  };

  drv.run(fuel, on_closed, [](std::uint32_t) { return false; });

  const ExecTree& tree = drv.tree();
  ExtractReport rep;
  rep.steps = tree.steps;

  const detail::NodeEval& root_eval = eval[0];
  switch (root_eval.kind) {
    case detail::NodeEval::Kind::Value:
      rep.kind = ExtractReport::Kind::Value;
      rep.value = root_eval.value;
      break;
    case detail::NodeEval::Kind::Ambiguous:
      rep.kind = ExtractReport::Kind::Ambiguous;
      rep.candidates = root_eval.cands;
      break;
    case detail::NodeEval::Kind::Failed:
      rep.kind = ExtractReport::Kind::Fail;
      rep.reason = undecodable_seen ? ExtractReport::FailReason::UndecodableLeaf
                                    : ExtractReport::FailReason::Stuck;
      break;
    case detail::NodeEval::Kind::Open:
      rep.kind = ExtractReport::Kind::Fail;
      rep.reason = ExtractReport::FailReason::Fuel;
      break;
  }

  // Branch summaries at the first fork (or the sole linear branch).
  auto summarize = [&](std::uint32_t start) {
    BranchSummary s;
    std::vector<std::uint32_t> work{start};
    while (!work.empty()) {
      std::uint32_t i = work.back();
      work.pop_back();
      ++s.nodes;
      const ExecNode& n = tree.nodes[i];
      if (n.leaf == ExecNode::Leaf::Accept && n.accept.kind == AcceptKind::Oracle)
        s.payloads.push_back(n.accept.payload);
      for (std::uint32_t c : n.children) work.push_back(c);
    }
    std::sort(s.payloads.begin(), s.payloads.end());
    const detail::NodeEval& e =
        start < eval.size() ? eval[start] : detail::NodeEval{};
    switch (e.kind) {
      case detail::NodeEval::Kind::Value:
        s.status = "value";
        s.value = e.value;
        break;
      case detail::NodeEval::Kind::Ambiguous: s.status = "ambiguous"; break;
      case detail::NodeEval::Kind::Failed: s.status = "failed"; break;
      case detail::NodeEval::Kind::Open: s.status = "pending"; break;
    }
    return s;
  };

  std::uint32_t cur = 0;
  while (tree.nodes[cur].children.size() == 1) cur = tree.nodes[cur].children[0];
  if (tree.nodes[cur].children.size() == 3) {
    for (std::uint32_t c : tree.nodes[cur].children)
      rep.branches.push_back(summarize(c));
  } else {
    rep.branches.push_back(summarize(0));
  }
  return rep;
}

// The usual entry point: run theta against a collecting oracle on an
// otherwise empty stack.
inline ExtractReport extract_witness(const Term& theta, std::uint64_t fuel,
                                     const std::string& oracle_name = "delta") {
  return extract_witness_process(
      Process{theta, Stack{Term::oracle(oracle_name)}}, fuel, oracle_name);
}

}  // namespace crvm
