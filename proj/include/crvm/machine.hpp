// Execution engine for the base algebra: the single-step relation, linear
// runs, execution trees with a triple branch at the fork instruction, and the
// fuel-bounded pole-membership check.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "crvm/term.hpp"

namespace crvm {

// ---------------------------------------------------------------------------
// Oracle configuration. An oracle constant is an extra accepting instruction:
// in checker mode it accepts exactly its target value, in collector mode it
// accepts any decodable argument and reports the decoded value. Acceptance is
// behavioral (probe decoding), so it never depends on particular h-constants.
struct OracleConfig {
  enum class Mode { None, Checker, Collector };
  Mode mode = Mode::None;
  std::uint64_t target = 0;  // Checker only
  std::string name = "delta";
  std::uint64_t decode_fuel = 100000;
  // The extension-algebra machine collapses frak-c chains over certificates
  // when the read instruction delivers the end-of-stack item as an argument.
  bool collapse_cert_on_read = false;

  static OracleConfig none() { return {}; }
  static OracleConfig checker(std::uint64_t target) {
    OracleConfig c;
    c.mode = Mode::Checker;
    c.target = target;
    return c;
  }
  static OracleConfig collector() {
    OracleConfig c;
    c.mode = Mode::Collector;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Step results.

enum class StuckReason : std::uint8_t { HeadConstant, Arity, EmptyBack, NoRule };

inline std::string_view stuck_reason_name(StuckReason r) {
  switch (r) {
    case StuckReason::HeadConstant: return "head-constant";
    case StuckReason::Arity: return "arity";
    case StuckReason::EmptyBack: return "empty-back";
    case StuckReason::NoRule: return "no-rule";
  }
  return "?";
}

enum class AcceptKind : std::uint8_t { Stop, Oracle };

struct Accept {
  AcceptKind kind = AcceptKind::Stop;
  std::uint64_t payload = 0;  // decoded value, Oracle only
};

struct Stuck {
  StuckReason reason;
};

struct Next {
  Process proc;
  int rule;  // 1..15, numbering of the pole rules
};

// Fork: the three branch processes share the stack tail.
struct Branch3 {
  Process left, mid, right;
};

using StepResult = std::variant<Next, Branch3, Accept, Stuck>;

// ---------------------------------------------------------------------------
// Numeral decoding by probing. The candidate is run against two host
// instructions that exist only inside this loop: the first pops its argument
// and counts an iteration, the second accepts. The public instruction set is
// untouched.

struct DecodeResult {
  enum class Status { Ok, NotNumeral, Fuel };
  Status status = Status::Ok;
  std::uint64_t value = 0;
  std::uint64_t steps = 0;

  bool ok() const { return status == Status::Ok; }
};

// The process is consumed only when the machine advances (Next/Branch3); on
// Accept and Stuck it is left untouched, so callers may keep using it.
StepResult step(Process&& p, const OracleConfig& cfg);

inline StepResult step(const Process& p, const OracleConfig& cfg) {
  return step(Process(p), cfg);
}

namespace detail {
inline const char* kProbeIter = "#probe-iter";
inline const char* kProbeEnd = "#probe-end";
}  // namespace detail

inline DecodeResult decode_numeral(const Term& t, std::uint64_t fuel) {
  DecodeResult res;
  Process p{t, Stack{Term::oracle(detail::kProbeIter),
                     Term::oracle(detail::kProbeEnd)}};
  static const OracleConfig none_cfg{};
  for (std::uint64_t used = 0; used < fuel; ++used) {
    if (p.head.is_oracle()) {
      const std::string& nm = p.head.oracle_name();
      if (nm == detail::kProbeIter) {
        if (p.stack.empty()) {
          res.status = DecodeResult::Status::NotNumeral;
          res.steps = used;
          return res;
        }
        p.head = p.stack.pop_front();
        ++res.value;
        continue;
      }
      if (nm == detail::kProbeEnd) {
        res.status = DecodeResult::Status::Ok;
        res.steps = used;
        return res;
      }
    }
    StepResult r = step(std::move(p), none_cfg);
    if (auto* nx = std::get_if<Next>(&r)) {
      p = std::move(nx->proc);
      continue;
    }
    res.status = DecodeResult::Status::NotNumeral;
    res.steps = used;
    return res;
  }
  res.status = DecodeResult::Status::Fuel;
  res.steps = fuel;
  return res;
}

// ---------------------------------------------------------------------------
// The step relation. Exactly one rule can apply to a process: applications
// push (rule 7), every instruction has its own rule, and anything else is
// stuck. All failures are Stuck results, never errors.

inline StepResult step(Process&& p, const OracleConfig& cfg) {
  const Term& h = p.head;
  if (h.null()) return Stuck{StuckReason::NoRule};

  if (h.is_app()) {
    Term f = h.fun();
    Term x = h.arg();
    p.stack.push_front(std::move(x));
    return Next{Process{std::move(f), std::move(p.stack)}, 7};
  }

  if (h.is_h() || h.is_cert()) return Stuck{StuckReason::HeadConstant};

  if (h.is_oracle()) {
    if (cfg.mode == OracleConfig::Mode::None || h.oracle_name() != cfg.name)
      return Stuck{StuckReason::HeadConstant};
    if (p.stack.empty()) return Stuck{StuckReason::Arity};
    DecodeResult d = decode_numeral(p.stack.front(), cfg.decode_fuel);
    if (!d.ok()) return Stuck{StuckReason::NoRule};
    if (cfg.mode == OracleConfig::Mode::Checker && d.value != cfg.target)
      return Stuck{StuckReason::NoRule};
    return Accept{AcceptKind::Oracle, d.value};
  }

  auto need = [&](std::size_t n) { return p.stack.size() >= n; };

  switch (h.instr_kind()) {
    case Instr::P:
      return Accept{AcceptKind::Stop, 0};  // rule 1

    case Instr::A: {  // rule 2: jump to the empty stack
      if (!need(1)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      return Next{Process{std::move(xi), Stack{}}, 2};
    }

    case Instr::Gamma: {  // rule 3: triple branch over the shared tail
      if (!need(3)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      Term eta = p.stack.pop_front();
      Term zeta = p.stack.pop_front();
      Stack tail1 = p.stack;
      Stack tail2 = p.stack;
      return Branch3{Process{std::move(xi), std::move(tail1)},
                     Process{std::move(eta), std::move(tail2)},
                     Process{std::move(zeta), std::move(p.stack)}};
    }

    case Instr::E: {  // rules 4/5: compare two indexed constants
      if (!need(4)) return Stuck{StuckReason::Arity};
      if (!p.stack.item(0).is_h() || !p.stack.item(1).is_h())
        return Stuck{StuckReason::NoRule};
      std::uint64_t i = p.stack.item(0).h_index();
      std::uint64_t j = p.stack.item(1).h_index();
      p.stack.pop_front();
      p.stack.pop_front();
      Term third = p.stack.pop_front();
      Term fourth = p.stack.pop_front();
      if (i == j) return Next{Process{std::move(fourth), std::move(p.stack)}, 4};
      return Next{Process{std::move(third), std::move(p.stack)}, 5};
    }

    case Instr::Kappa: {  // rule 6: push the least h-constant absent from p
      if (!need(1)) return Stuck{StuckReason::Arity};
      std::uint64_t fresh = 0;
      while (occurs_h(fresh, p)) ++fresh;
      Term xi = p.stack.pop_front();
      p.stack.push_front(Term::h(fresh));
      return Next{Process{std::move(xi), std::move(p.stack)}, 6};
    }

    case Instr::I: {  // rule 8
      if (!need(1)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      return Next{Process{std::move(xi), std::move(p.stack)}, 8};
    }

    case Instr::K: {  // rule 9
      if (!need(2)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      p.stack.pop_front();
      return Next{Process{std::move(xi), std::move(p.stack)}, 9};
    }

    case Instr::W: {  // rule 10
      if (!need(2)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      Term eta = p.stack.front();
      p.stack.push_front(std::move(eta));
      return Next{Process{std::move(xi), std::move(p.stack)}, 10};
    }

    case Instr::C: {  // rule 11
      if (!need(3)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      Term eta = p.stack.pop_front();
      Term zeta = p.stack.pop_front();
      p.stack.push_front(std::move(eta));
      p.stack.push_front(std::move(zeta));
      return Next{Process{std::move(xi), std::move(p.stack)}, 11};
    }

    case Instr::B: {  // rule 12
      if (!need(3)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      Term eta = p.stack.pop_front();
      Term zeta = p.stack.pop_front();
      p.stack.push_front(Term::app(std::move(eta), std::move(zeta)));
      return Next{Process{std::move(xi), std::move(p.stack)}, 12};
    }

    case Instr::Cc: {  // rule 13
      if (!need(1)) return Stuck{StuckReason::Arity};
      Term xi = p.stack.pop_front();
      p.stack.push_front(k_term(p.stack));
      return Next{Process{std::move(xi), std::move(p.stack)}, 13};
    }

    case Instr::Chi: {  // rule 14: read the end of the stack
      if (!need(1)) return Stuck{StuckReason::Arity};
      if (p.stack.size() < 2) return Stuck{StuckReason::EmptyBack};
      Term xi = p.stack.pop_front();
      Term tau = p.stack.pop_back();
      if (cfg.collapse_cert_on_read) {
        if (auto payload = cert_chain_payload(tau); payload && !tau.is_cert())
          tau = Term::cert(std::move(*payload));
      }
      p.stack.push_front(std::move(tau));
      return Next{Process{std::move(xi), std::move(p.stack)}, 14};
    }

    case Instr::ChiP: {  // rule 15: write at the end of the stack
      if (!need(2)) return Stuck{StuckReason::Arity};
      Term tau = p.stack.pop_front();
      Term xi = p.stack.pop_front();
      p.stack.push_back(std::move(tau));
      return Next{Process{std::move(xi), std::move(p.stack)}, 15};
    }

    case Instr::FrakC:
      return Stuck{StuckReason::NoRule};

    default:
      return Stuck{StuckReason::NoRule};
  }
}

// ---------------------------------------------------------------------------
// Linear runs.

struct RunOutcome {
  enum class Kind { Accept, Stuck, Fuel, Fork };
  Kind kind = Kind::Fuel;
  Accept accept{};
  StuckReason stuck = StuckReason::NoRule;
  std::uint64_t steps = 0;
  Process final;  // last process; for Fork, the fork-headed process
};

template <class StepCb>
RunOutcome run_linear_cb(Process p, std::uint64_t fuel, const OracleConfig& cfg,
                         StepCb&& cb) {
  RunOutcome out;
  for (std::uint64_t n = 0; n < fuel; ++n) {
    // step leaves p intact unless it advances, so p is still the final state
    // in the Accept/Stuck arms below.
    StepResult r = step(std::move(p), cfg);
    if (auto* nx = std::get_if<Next>(&r)) {
      p = std::move(nx->proc);
      ++out.steps;
      cb(p, nx->rule);
      continue;
    }
    if (auto* ac = std::get_if<Accept>(&r)) {
      out.kind = RunOutcome::Kind::Accept;
      out.accept = *ac;
      ++out.steps;  // the accepting rule application counts as a step
      out.final = std::move(p);
      return out;
    }
    if (auto* st = std::get_if<Stuck>(&r)) {
      out.kind = RunOutcome::Kind::Stuck;
      out.stuck = st->reason;
      out.final = std::move(p);
      return out;
    }
    out.kind = RunOutcome::Kind::Fork;
    out.final = std::move(p);
    return out;
  }
  out.kind = RunOutcome::Kind::Fuel;
  out.final = std::move(p);
  return out;
}

inline RunOutcome run_linear(Process p, std::uint64_t fuel,
                             const OracleConfig& cfg = {}) {
  return run_linear_cb(std::move(p), fuel, cfg, [](const Process&, int) {});
}

// One line per step: the state reached, tagged with the rule applied.
inline RunOutcome run_trace(Process p, std::uint64_t fuel,
                            const OracleConfig& cfg,
                            std::vector<std::string>& lines) {
  std::uint64_t n = 0;
  return run_linear_cb(std::move(p), fuel, cfg,
                       [&](const Process& q, int rule) {
                         ++n;
                         lines.push_back("#" + std::to_string(n) + " " +
                                         print_process(q) + "  [rule " +
                                         std::to_string(rule) + "]");
                       });
}

// Convenience for tests: all states visited, starting state included.
inline std::vector<Process> run_states(Process p, std::uint64_t fuel,
                                       const OracleConfig& cfg = {}) {
  std::vector<Process> states;
  states.push_back(p);
  run_linear_cb(std::move(p), fuel, cfg,
                [&](const Process& q, int) { states.push_back(q); });
  return states;
}

inline bool run_passes_through(Process p, const Process& target,
                               std::uint64_t fuel,
                               const OracleConfig& cfg = {}) {
  if (p == target) return true;
  bool hit = false;
  run_linear_cb(std::move(p), fuel, cfg, [&](const Process& q, int) {
    if (!hit && q == target) hit = true;
  });
  return hit;
}

// ---------------------------------------------------------------------------
// Execution trees. Fuel is one global budget; open branches are stepped in
// round-robin order, one step per visit, which makes dovetailing
// deterministic and monotone in the budget.

struct ExecNode {
  enum class Leaf : std::uint8_t { None, Accept, Stuck, Fuel };
  Process proc;
  int rule = 0;  // rule applied at this node (0 = none yet)
  Leaf leaf = Leaf::None;
  Accept accept{};
  StuckReason stuck = StuckReason::NoRule;
  std::int32_t parent = -1;
  std::vector<std::uint32_t> children;
};

struct ExecTree {
  std::vector<ExecNode> nodes;
  std::uint64_t steps = 0;

  const ExecNode& root() const { return nodes.front(); }
};

namespace detail {

// Shared driver for exec_tree / in_pole / witness extraction. Expands the
// tree one step per open leaf in FIFO order; on_closed(i) fires when node i
// becomes an accept/stuck leaf, on_forked(i) after a triple branch. Either
// callback may return true to stop the whole evaluation (short-circuit);
// prune(i) tells the driver to stop visiting a still-open leaf.
class TreeDriver {
 public:
  TreeDriver(Process root, const OracleConfig& cfg) : cfg_(cfg) {
    ExecNode n;
    n.proc = std::move(root);
    tree_.nodes.push_back(std::move(n));
    open_.push_back(0);
  }

  template <class OnClosed, class OnForked>
  void run(std::uint64_t fuel, OnClosed&& on_closed, OnForked&& on_forked) {
    std::size_t cursor = 0;
    while (tree_.steps < fuel) {
      if (cursor >= open_.size()) {
        if (compact() == 0) break;
        cursor = 0;
        continue;
      }
      std::uint32_t idx = open_[cursor];
      if (pruned(idx)) {
        open_[cursor] = kDead;
        ++cursor;
        continue;
      }
      ++tree_.steps;
      StepResult r = step(tree_.nodes[idx].proc, cfg_);
      if (auto* nx = std::get_if<Next>(&r)) {
        tree_.nodes[idx].rule = nx->rule;
        std::uint32_t child = add_node(std::move(nx->proc), idx);
        tree_.nodes[idx].children.push_back(child);
        open_[cursor] = child;  // linear successor keeps the slot
        ++cursor;
        continue;
      }
      open_[cursor] = kDead;
      ++cursor;
      if (auto* br = std::get_if<Branch3>(&r)) {
        tree_.nodes[idx].rule = 3;
        for (Process* q : {&br->left, &br->mid, &br->right}) {
          std::uint32_t child = add_node(std::move(*q), idx);
          tree_.nodes[idx].children.push_back(child);
          open_.push_back(child);
        }
        if (on_forked(idx)) return;
        continue;
      }
      if (auto* ac = std::get_if<Accept>(&r)) {
        tree_.nodes[idx].leaf = ExecNode::Leaf::Accept;
        tree_.nodes[idx].accept = *ac;
      } else {
        tree_.nodes[idx].leaf = ExecNode::Leaf::Stuck;
        tree_.nodes[idx].stuck = std::get<Stuck>(r).reason;
      }
      if (on_closed(idx)) return;
    }
    // Budget exhausted: everything still open is a fuel leaf.
    for (std::uint32_t idx : open_) {
      if (idx == kDead || pruned(idx)) continue;
      tree_.nodes[idx].leaf = ExecNode::Leaf::Fuel;
    }
  }

  void prune(std::uint32_t idx) {
    if (idx >= pruned_.size()) pruned_.resize(idx + 1, false);
    pruned_[idx] = true;
  }

  ExecTree& tree() { return tree_; }

 private:
  static constexpr std::uint32_t kDead = 0xffffffffu;

  bool pruned(std::uint32_t idx) const {
    return idx < pruned_.size() && pruned_[idx];
  }

  std::uint32_t add_node(Process p, std::uint32_t parent) {
    ExecNode n;
    n.proc = std::move(p);
    n.parent = static_cast<std::int32_t>(parent);
    tree_.nodes.push_back(std::move(n));
    return static_cast<std::uint32_t>(tree_.nodes.size() - 1);
  }

  std::size_t compact() {
    std::size_t kept = 0;
    for (std::uint32_t idx : open_)
      if (idx != kDead && !pruned(idx)) open_[kept++] = idx;
    open_.resize(kept);
    return kept;
  }

  const OracleConfig& cfg_;
  ExecTree tree_;
  std::vector<std::uint32_t> open_;
  std::vector<bool> pruned_;
};

}  // namespace detail

inline ExecTree exec_tree(Process p, std::uint64_t fuel,
                          const OracleConfig& cfg = {}) {
  detail::TreeDriver drv(std::move(p), cfg);
  drv.run(
      fuel, [](std::uint32_t) { return false; },
      [](std::uint32_t) { return false; });
  return std::move(drv.tree());
}

// ---------------------------------------------------------------------------
// Pole membership, evaluated bottom-up over the execution tree: accept leaves
// are in, a fork node is in as soon as two children are, every other node
// follows its unique child. Dovetailing steps open branches fairly and
// short-circuits once the root is decided.

struct PoleResult {
  enum class Verdict { Yes, Unknown, NoEvidence };
  Verdict verdict = Verdict::Unknown;
  ExecTree tree;

  bool yes() const { return verdict == Verdict::Yes; }
};

inline PoleResult in_pole(Process p, std::uint64_t fuel,
                          const OracleConfig& cfg = {}) {
  enum class St : std::uint8_t { Open, In, Out };
  detail::TreeDriver drv(std::move(p), cfg);
  std::vector<St> status;
  status.resize(1, St::Open);

  auto node_status = [&](std::uint32_t i) {
    return i < status.size() ? status[i] : St::Open;
  };

  // Resolve node i and bubble the verdict towards the root. Returns true
  // once the root is decided.
  auto resolve = [&](std::uint32_t i, St st) {
    auto& tree = drv.tree();
    while (true) {
      if (i >= status.size()) status.resize(i + 1, St::Open);
      if (status[i] != St::Open) return false;
      status[i] = st;
      if (i == 0) return true;
      std::uint32_t parent = static_cast<std::uint32_t>(tree.nodes[i].parent);
      const ExecNode& pn = tree.nodes[parent];
      if (pn.rule == 3) {
        int in = 0, out = 0;
        for (std::uint32_t c : pn.children) {
          St cs = node_status(c);
          in += cs == St::In;
          out += cs == St::Out;
        }
        St next;
        if (in >= 2)
          next = St::In;
        else if (out >= 2)
          next = St::Out;
        else
          return false;
        // Fork decided: its other branches no longer need stepping.
        for (std::uint32_t c : pn.children)
          if (node_status(c) == St::Open) drv.prune(c);
        i = parent;
        st = next;
        continue;
      }
      i = parent;
      // Linear parent inherits the unique child's verdict.
    }
  };

  drv.run(
      fuel,
      [&](std::uint32_t i) {
        const ExecNode& n = drv.tree().nodes[i];
        return resolve(i, n.leaf == ExecNode::Leaf::Accept ? St::In : St::Out);
      },
      [&](std::uint32_t) { return false; });

  PoleResult res;
  switch (node_status(0)) {
    case St::In: res.verdict = PoleResult::Verdict::Yes; break;
    case St::Out: res.verdict = PoleResult::Verdict::NoEvidence; break;
    case St::Open: res.verdict = PoleResult::Verdict::Unknown; break;
  }
  res.tree = std::move(drv.tree());
  return res;
}

}  // namespace crvm
