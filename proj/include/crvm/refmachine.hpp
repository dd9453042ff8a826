// Reference environment machine: a call-by-name closure machine over lambda
// terms with the same instruction rules as the combinator machine. It shares
// no evaluation code with the combinator path, which is the point: the two
// are compared observationally in the differential tests.
#pragma once

#include <deque>
#include <memory>
#include <set>
#include <variant>
#include <vector>

#include "crvm/lambda.hpp"
#include "crvm/machine.hpp"

namespace crvm {

struct RefValue;
using RefValuePtr = std::shared_ptr<const RefValue>;

struct RefEnvNode;
using RefEnv = std::shared_ptr<const RefEnvNode>;

struct RefEnvNode {
  std::string name;
  RefValuePtr value;
  RefEnv next;
};

using RefStack = std::deque<RefValuePtr>;

struct RefValue {
  enum class Kind : std::uint8_t { Clo, AppV, Cont, ProbeIter, ProbeEnd };
  Kind kind = Kind::Clo;
  // Clo
  LamPtr term;
  RefEnv env;
  // AppV: an application of two runtime values (built by the B rule)
  RefValuePtr f, x;
  // Cont: saved stack
  std::shared_ptr<const RefStack> saved;
};

inline RefEnv env_lookup(const RefEnv& env, const std::string& name,
                         RefValuePtr& out) {
  for (RefEnv e = env; e; e = e->next) {
    if (e->name == name) {
      out = e->value;
      return e;
    }
  }
  return nullptr;
}

// Environments bind exactly the free variables of their term.
inline RefEnv env_restrict(const RefEnv& env, const std::set<std::string>& fv) {
  RefEnv out;
  std::set<std::string> missing = fv;
  for (RefEnv e = env; e && !missing.empty(); e = e->next) {
    if (missing.erase(e->name)) {
      auto n = std::make_shared<RefEnvNode>();
      n->name = e->name;
      n->value = e->value;
      n->next = out;
      out = n;
    }
  }
  return out;
}

inline RefValuePtr make_clo(LamPtr term, const RefEnv& env) {
  auto v = std::make_shared<RefValue>();
  v->kind = RefValue::Kind::Clo;
  v->env = env_restrict(env, term->fv);
  v->term = std::move(term);
  return v;
}

inline RefValuePtr make_const_value(const Term& t) {
  return make_clo(lconst(t), nullptr);
}

inline RefValuePtr make_appv(RefValuePtr f, RefValuePtr x) {
  auto v = std::make_shared<RefValue>();
  v->kind = RefValue::Kind::AppV;
  v->f = std::move(f);
  v->x = std::move(x);
  return v;
}

inline RefValuePtr make_cont(RefStack saved) {
  auto v = std::make_shared<RefValue>();
  v->kind = RefValue::Kind::Cont;
  v->saved = std::make_shared<const RefStack>(std::move(saved));
  return v;
}

struct RefState {
  RefValuePtr head;
  RefStack stack;
};

struct RefNext {
  RefState state;
  int rule;  // machine rule number; 0 for internal closure steps
};
struct RefBranch3 {
  RefState left, mid, right;
};
using RefStepResult = std::variant<RefNext, RefBranch3, Accept, Stuck>;

namespace detail {

// Follow variable chains; a value is a literal constant when it bottoms out
// in an embedded machine term.
inline const Term* deref_const(const RefValuePtr& v0) {
  const RefValue* v = v0.get();
  while (v && v->kind == RefValue::Kind::Clo) {
    if (v->term->kind == LamNode::Kind::Const) return &v->term->cst;
    if (v->term->kind == LamNode::Kind::Var) {
      RefValuePtr next;
      if (!env_lookup(v->env, v->term->name, next)) return nullptr;
      // hold the chain alive through the shared env nodes
      v = next.get();
      continue;
    }
    return nullptr;
  }
  return nullptr;
}

inline void collect_h_of_term(const Term& t, std::set<std::uint64_t>& used) {
  std::vector<const TermNode*> work{t.raw()};
  while (!work.empty()) {
    const TermNode* n = work.back();
    work.pop_back();
    if (!n) continue;
    if (n->kind == TermNode::Kind::HConst) used.insert(n->h_index);
    if (n->kind == TermNode::Kind::App) {
      work.push_back(n->fun.raw());
      work.push_back(n->arg.raw());
    }
  }
}

inline void collect_h_of_lam(const LamPtr& t, std::set<std::uint64_t>& used) {
  if (!t) return;
  if (t->kind == LamNode::Kind::Const) {
    collect_h_of_term(t->cst, used);
    return;
  }
  collect_h_of_lam(t->sub, used);
  collect_h_of_lam(t->arg, used);
}

inline void collect_h_of_value(const RefValuePtr& v,
                               std::set<std::uint64_t>& used,
                               std::set<const RefValue*>& seen) {
  if (!v || !seen.insert(v.get()).second) return;
  switch (v->kind) {
    case RefValue::Kind::Clo:
      collect_h_of_lam(v->term, used);
      for (RefEnv e = v->env; e; e = e->next)
        collect_h_of_value(e->value, used, seen);
      break;
    case RefValue::Kind::AppV:
      collect_h_of_value(v->f, used, seen);
      collect_h_of_value(v->x, used, seen);
      break;
    case RefValue::Kind::Cont:
      for (const RefValuePtr& s : *v->saved) collect_h_of_value(s, used, seen);
      break;
    default:
      break;
  }
}

inline std::uint64_t fresh_h_index(const RefState& s) {
  std::set<std::uint64_t> used;
  std::set<const RefValue*> seen;
  collect_h_of_value(s.head, used, seen);
  for (const RefValuePtr& v : s.stack) collect_h_of_value(v, used, seen);
  std::uint64_t idx = 0;
  while (used.count(idx)) ++idx;
  return idx;
}

}  // namespace detail

inline DecodeResult ref_decode_numeral(const RefValuePtr& v, std::uint64_t fuel,
                                       const OracleConfig& none_cfg);

inline RefStepResult ref_step(RefState&& s, const OracleConfig& cfg) {
  RefValuePtr h = s.head;
  if (!h) return Stuck{StuckReason::NoRule};

  if (h->kind == RefValue::Kind::AppV) {
    s.stack.push_front(h->x);
    s.head = h->f;
    return RefNext{std::move(s), 7};
  }
  if (h->kind == RefValue::Kind::Cont) {
    if (s.stack.empty()) return Stuck{StuckReason::Arity};
    RefValuePtr xi = s.stack.front();
    RefStack restored = *h->saved;
    return RefNext{RefState{std::move(xi), std::move(restored)}, 0};
  }
  if (h->kind != RefValue::Kind::Clo) return Stuck{StuckReason::HeadConstant};

  const LamPtr& t = h->term;
  switch (t->kind) {
    case LamNode::Kind::Var: {
      RefValuePtr val;
      if (!env_lookup(h->env, t->name, val)) return Stuck{StuckReason::NoRule};
      s.head = std::move(val);
      return RefNext{std::move(s), 0};
    }
    case LamNode::Kind::App: {
      s.stack.push_front(make_clo(t->arg, h->env));
      s.head = make_clo(t->sub, h->env);
      return RefNext{std::move(s), 7};
    }
    case LamNode::Kind::Lam: {
      if (s.stack.empty()) return Stuck{StuckReason::Arity};
      RefValuePtr v = s.stack.front();
      s.stack.pop_front();
      auto bind = std::make_shared<RefEnvNode>();
      bind->name = t->name;
      bind->value = std::move(v);
      bind->next = h->env;
      s.head = make_clo(t->sub, bind);
      return RefNext{std::move(s), 0};
    }
    case LamNode::Kind::Const:
      break;
  }

  const Term& c = t->cst;
  if (c.is_app()) {
    // unfold an embedded machine application into runtime values
    s.stack.push_front(make_const_value(c.arg()));
    s.head = make_const_value(c.fun());
    return RefNext{std::move(s), 7};
  }
  if (c.is_h() || c.is_cert()) return Stuck{StuckReason::HeadConstant};
  if (c.is_oracle()) {
    if (cfg.mode == OracleConfig::Mode::None || c.oracle_name() != cfg.name)
      return Stuck{StuckReason::HeadConstant};
    if (s.stack.empty()) return Stuck{StuckReason::Arity};
    DecodeResult d = ref_decode_numeral(s.stack.front(), cfg.decode_fuel, {});
    if (!d.ok()) return Stuck{StuckReason::NoRule};
    if (cfg.mode == OracleConfig::Mode::Checker && d.value != cfg.target)
      return Stuck{StuckReason::NoRule};
    return Accept{AcceptKind::Oracle, d.value};
  }

  auto need = [&](std::size_t n) { return s.stack.size() >= n; };
  auto pop = [&] {
    RefValuePtr v = s.stack.front();
    s.stack.pop_front();
    return v;
  };

  switch (c.instr_kind()) {
    case Instr::P:
      return Accept{AcceptKind::Stop, 0};
    case Instr::A: {
      if (!need(1)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop();
      return RefNext{RefState{std::move(xi), RefStack{}}, 2};
    }
    case Instr::Gamma: {
      if (!need(3)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop(), eta = pop(), zeta = pop();
      RefStack tail1 = s.stack, tail2 = s.stack;
      return RefBranch3{RefState{std::move(xi), std::move(tail1)},
                        RefState{std::move(eta), std::move(tail2)},
                        RefState{std::move(zeta), std::move(s.stack)}};
    }
    case Instr::E: {
      if (!need(4)) return Stuck{StuckReason::Arity};
      const Term* c1 = detail::deref_const(s.stack[0]);
      const Term* c2 = detail::deref_const(s.stack[1]);
      if (!c1 || !c2 || !c1->is_h() || !c2->is_h())
        return Stuck{StuckReason::NoRule};
      bool equal = c1->h_index() == c2->h_index();
      pop();
      pop();
      RefValuePtr third = pop();
      RefValuePtr fourth = pop();
      RefValuePtr next = equal ? std::move(fourth) : std::move(third);
      return RefNext{RefState{std::move(next), std::move(s.stack)}, equal ? 4 : 5};
    }
    case Instr::Kappa: {
      if (!need(1)) return Stuck{StuckReason::Arity};
      std::uint64_t idx = detail::fresh_h_index(s);
      RefValuePtr xi = pop();
      s.stack.push_front(make_const_value(Term::h(idx)));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 6};
    }
    case Instr::I: {
      if (!need(1)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop();
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 8};
    }
    case Instr::K: {
      if (!need(2)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop();
      pop();
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 9};
    }
    case Instr::W: {
      if (!need(2)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop();
      s.stack.push_front(s.stack.front());
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 10};
    }
    case Instr::C: {
      if (!need(3)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop(), eta = pop(), zeta = pop();
      s.stack.push_front(std::move(eta));
      s.stack.push_front(std::move(zeta));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 11};
    }
    case Instr::B: {
      if (!need(3)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop(), eta = pop(), zeta = pop();
      s.stack.push_front(make_appv(std::move(eta), std::move(zeta)));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 12};
    }
    case Instr::Cc: {
      if (!need(1)) return Stuck{StuckReason::Arity};
      RefValuePtr xi = pop();
      s.stack.push_front(make_cont(s.stack));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 13};
    }
    case Instr::Chi: {
      if (!need(1)) return Stuck{StuckReason::Arity};
      if (s.stack.size() < 2) return Stuck{StuckReason::EmptyBack};
      RefValuePtr xi = pop();
      RefValuePtr tau = s.stack.back();
      s.stack.pop_back();
      s.stack.push_front(std::move(tau));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 14};
    }
    case Instr::ChiP: {
      if (!need(2)) return Stuck{StuckReason::Arity};
      RefValuePtr tau = pop(), xi = pop();
      s.stack.push_back(std::move(tau));
      return RefNext{RefState{std::move(xi), std::move(s.stack)}, 15};
    }
    case Instr::FrakC:
      return Stuck{StuckReason::NoRule};
  }
  return Stuck{StuckReason::NoRule};
}

inline DecodeResult ref_decode_numeral(const RefValuePtr& v, std::uint64_t fuel,
                                       const OracleConfig&) {
  DecodeResult res;
  auto iter = std::make_shared<RefValue>();
  iter->kind = RefValue::Kind::ProbeIter;
  auto end = std::make_shared<RefValue>();
  end->kind = RefValue::Kind::ProbeEnd;
  RefState s{v, RefStack{iter, end}};
  static const OracleConfig none_cfg{};
  for (std::uint64_t used = 0; used < fuel; ++used) {
    if (s.head->kind == RefValue::Kind::ProbeIter) {
      if (s.stack.empty()) {
        res.status = DecodeResult::Status::NotNumeral;
        return res;
      }
      s.head = s.stack.front();
      s.stack.pop_front();
      ++res.value;
      continue;
    }
    if (s.head->kind == RefValue::Kind::ProbeEnd) {
      res.status = DecodeResult::Status::Ok;
      res.steps = used;
      return res;
    }
    RefStepResult r = ref_step(std::move(s), none_cfg);
    if (auto* nx = std::get_if<RefNext>(&r)) {
      s = std::move(nx->state);
      continue;
    }
    res.status = DecodeResult::Status::NotNumeral;
    return res;
  }
  res.status = DecodeResult::Status::Fuel;
  return res;
}

// ---------------------------------------------------------------------------
// Observable outcomes. Runs are compared as trees: linear segments collapse,
// forks branch, and leaves carry the outcome kind plus any oracle payload.
// A fuel leaf on either side makes the comparison vacuous at that subtree.

struct ObsTree {
  enum class Kind : std::uint8_t { Accept, Stuck, Fuel, Fork };
  Kind kind = Kind::Fuel;
  AcceptKind accept = AcceptKind::Stop;
  std::uint64_t payload = 0;
  StuckReason stuck = StuckReason::NoRule;
  std::vector<ObsTree> children;
};

// True when the trees agree wherever both are decided.
inline bool obs_agree(const ObsTree& a, const ObsTree& b) {
  if (a.kind == ObsTree::Kind::Fuel || b.kind == ObsTree::Kind::Fuel)
    return true;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ObsTree::Kind::Accept:
      return a.accept == b.accept && a.payload == b.payload;
    case ObsTree::Kind::Stuck:
      return a.stuck == b.stuck;
    case ObsTree::Kind::Fork: {
      if (a.children.size() != b.children.size()) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!obs_agree(a.children[i], b.children[i])) return false;
      return true;
    }
    default:
      return true;
  }
}

namespace detail {

template <class State, class Adapter>
ObsTree observe_generic(State s, std::uint64_t fuel, int fork_depth,
                        const Adapter& stepper) {
  using NextT = typename Adapter::NextT;
  using BranchT = typename Adapter::BranchT;
  ObsTree out;
  std::uint64_t used = 0;
  while (used < fuel) {
    auto r = stepper(std::move(s));
    ++used;
    if (auto* nx = std::get_if<NextT>(&r)) {
      s = std::move(nx->state);
      continue;
    }
    if (auto* ac = std::get_if<Accept>(&r)) {
      out.kind = ObsTree::Kind::Accept;
      out.accept = ac->kind;
      out.payload = ac->payload;
      return out;
    }
    if (auto* st = std::get_if<Stuck>(&r)) {
      out.kind = ObsTree::Kind::Stuck;
      out.stuck = st->reason;
      return out;
    }
    auto* br = std::get_if<BranchT>(&r);
    if (fork_depth <= 0) {
      out.kind = ObsTree::Kind::Fuel;
      return out;
    }
    out.kind = ObsTree::Kind::Fork;
    std::uint64_t rest = fuel - used;
    out.children.push_back(
        observe_generic(std::move(br->left), rest, fork_depth - 1, stepper));
    out.children.push_back(
        observe_generic(std::move(br->mid), rest, fork_depth - 1, stepper));
    out.children.push_back(
        observe_generic(std::move(br->right), rest, fork_depth - 1, stepper));
    return out;
  }
  out.kind = ObsTree::Kind::Fuel;
  return out;
}

struct MachineStepAdapter {
  struct NextT {
    Process state;
    int rule;
  };
  struct BranchT {
    Process left, mid, right;
  };
  using Result = std::variant<NextT, BranchT, Accept, Stuck>;
  const OracleConfig& cfg;
  Result operator()(Process&& p) const {
    StepResult r = step(std::move(p), cfg);
    if (auto* nx = std::get_if<Next>(&r))
      return NextT{std::move(nx->proc), nx->rule};
    if (auto* br = std::get_if<Branch3>(&r))
      return BranchT{std::move(br->left), std::move(br->mid),
                     std::move(br->right)};
    if (auto* ac = std::get_if<Accept>(&r)) return *ac;
    return std::get<Stuck>(r);
  }
};

struct RefStepAdapter {
  struct NextT {
    RefState state;
    int rule;
  };
  struct BranchT {
    RefState left, mid, right;
  };
  using Result = std::variant<NextT, BranchT, Accept, Stuck>;
  const OracleConfig& cfg;
  Result operator()(RefState&& s) const {
    RefStepResult r = ref_step(std::move(s), cfg);
    if (auto* nx = std::get_if<RefNext>(&r))
      return NextT{std::move(nx->state), nx->rule};
    if (auto* br = std::get_if<RefBranch3>(&r))
      return BranchT{std::move(br->left), std::move(br->mid),
                     std::move(br->right)};
    if (auto* ac = std::get_if<Accept>(&r)) return *ac;
    return std::get<Stuck>(r);
  }
};

}  // namespace detail

inline ObsTree observe_machine(Process p, std::uint64_t fuel,
                               const OracleConfig& cfg = {},
                               int fork_depth = 12) {
  detail::MachineStepAdapter ad{cfg};
  return detail::observe_generic(std::move(p), fuel, fork_depth, ad);
}

inline ObsTree observe_ref(RefState s, std::uint64_t fuel,
                           const OracleConfig& cfg = {}, int fork_depth = 12) {
  detail::RefStepAdapter ad{cfg};
  return detail::observe_generic(std::move(s), fuel, fork_depth, ad);
}

inline std::string print_ref_value(const RefValuePtr& v) {
  if (!v) return "<null>";
  switch (v->kind) {
    case RefValue::Kind::Clo:
      if (v->term->kind == LamNode::Kind::Const)
        return print_term(v->term->cst);
      return "clo{" + print_lambda(v->term) + "}";
    case RefValue::Kind::AppV: {
      std::string x = print_ref_value(v->x);
      if (v->x && v->x->kind == RefValue::Kind::AppV) x = "(" + x + ")";
      return print_ref_value(v->f) + " " + x;
    }
    case RefValue::Kind::Cont:
      return "cont[" + std::to_string(v->saved->size()) + "]";
    case RefValue::Kind::ProbeIter: return "#probe-iter";
    case RefValue::Kind::ProbeEnd: return "#probe-end";
  }
  return "?";
}

inline std::string print_ref_state(const RefState& s) {
  std::string out = print_ref_value(s.head) + " \xe2\x8b\x86 ";
  for (const RefValuePtr& v : s.stack) out += print_ref_value(v) + " \xc2\xb7 ";
  out += "\xcf\x80""0";
  return out;
}

struct RefRunOutcome {
  RunOutcome::Kind kind = RunOutcome::Kind::Fuel;
  Accept accept{};
  StuckReason stuck = StuckReason::NoRule;
  std::uint64_t steps = 0;
};

template <class StepCb>
RefRunOutcome ref_run_linear_cb(RefState s, std::uint64_t fuel,
                                const OracleConfig& cfg, StepCb&& cb) {
  RefRunOutcome out;
  for (std::uint64_t n = 0; n < fuel; ++n) {
    RefStepResult r = ref_step(std::move(s), cfg);
    if (auto* nx = std::get_if<RefNext>(&r)) {
      s = std::move(nx->state);
      ++out.steps;
      cb(s, nx->rule);
      continue;
    }
    if (auto* ac = std::get_if<Accept>(&r)) {
      out.kind = RunOutcome::Kind::Accept;
      out.accept = *ac;
      ++out.steps;
      return out;
    }
    if (auto* st = std::get_if<Stuck>(&r)) {
      out.kind = RunOutcome::Kind::Stuck;
      out.stuck = st->reason;
      return out;
    }
    out.kind = RunOutcome::Kind::Fork;
    return out;
  }
  out.kind = RunOutcome::Kind::Fuel;
  return out;
}

inline RefState ref_state_of(const LamPtr& t, const Stack& stack) {
  RefState s;
  s.head = make_clo(t, nullptr);
  for (std::size_t i = 0; i < stack.size(); ++i)
    s.stack.push_back(make_const_value(stack.item(i)));
  return s;
}

// Runs a lambda term on a stack of machine terms under the reference machine.
inline ObsTree ref_run_observe(const LamPtr& t, const Stack& stack,
                               std::uint64_t fuel,
                               const OracleConfig& cfg = {}) {
  RefState s;
  s.head = make_clo(t, nullptr);
  for (std::size_t i = 0; i < stack.size(); ++i)
    s.stack.push_back(make_const_value(stack.item(i)));
  return observe_ref(std::move(s), fuel, cfg);
}

// The combinator-side observable of the same program.
inline ObsTree machine_run_observe(const Term& t, const Stack& stack,
                                   std::uint64_t fuel,
                                   const OracleConfig& cfg = {}) {
  return observe_machine(Process{t, stack}, fuel, cfg);
}

}  // namespace crvm
