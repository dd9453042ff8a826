// The condition-carrying extension algebra: condition systems, certificate
// terms and their transformer, the star combinators that thread a certificate
// through the end of the stack, the pair-process pole, proof-like lifting,
// and the propositional transformer generators.
#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crvm/gen.hpp"
#include "crvm/lambda.hpp"
#include "crvm/machine.hpp"

namespace crvm {

// ---------------------------------------------------------------------------
// Condition systems.

// Finite inf-semilattice with a greatest element and a downward-closed set of
// false conditions; a sequence is compatible when its g.l.b. is not false.
class PosetTable {
 public:
  static PosetTable from_json(const nlohmann::json& j);
  static PosetTable from_file(const std::string& path);

  std::size_t size() const { return names_.size(); }
  std::uint32_t top() const { return top_; }
  const std::string& name(std::uint32_t i) const { return names_[i]; }
  std::uint32_t meet(std::uint32_t a, std::uint32_t b) const {
    return meet_[a * names_.size() + b];
  }
  bool is_false(std::uint32_t i) const { return false_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<std::uint32_t> meet_;
  std::vector<bool> false_;
  std::uint32_t top_ = 0;
};

inline PosetTable PosetTable::from_json(const nlohmann::json& j) {
  PosetTable t;
  t.names_ = j.at("elements").get<std::vector<std::string>>();
  std::size_t n = t.names_.size();
  if (n == 0) throw std::invalid_argument("poset: no elements");
  auto index = [&](const std::string& s) -> std::uint32_t {
    for (std::size_t i = 0; i < n; ++i)
      if (t.names_[i] == s) return static_cast<std::uint32_t>(i);
    throw std::invalid_argument("poset: unknown element '" + s + "'");
  };

  // reflexive-transitive closure of the declared order
  std::vector<bool> leq(n * n, false);
  for (std::size_t i = 0; i < n; ++i) leq[i * n + i] = true;
  for (const auto& pair : j.at("leq")) {
    std::uint32_t a = index(pair.at(0).get<std::string>());
    std::uint32_t b = index(pair.at(1).get<std::string>());
    leq[a * n + b] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (leq[i * n + k])
        for (std::size_t jj = 0; jj < n; ++jj)
          if (leq[k * n + jj]) leq[i * n + jj] = true;

  t.top_ = index(j.at("top").get<std::string>());
  for (std::size_t i = 0; i < n; ++i)
    if (!leq[i * n + t.top_])
      throw std::invalid_argument("poset: top is not greatest");

  // greatest lower bounds must exist and be unique
  t.meet_.assign(n * n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      std::optional<std::uint32_t> glb;
      for (std::size_t c = 0; c < n; ++c) {
        if (!leq[c * n + a] || !leq[c * n + b]) continue;
        if (!glb || leq[*glb * n + c]) {
          // candidate c above the current best, or first candidate
          if (!glb) {
            glb = static_cast<std::uint32_t>(c);
          } else if (leq[*glb * n + c]) {
            glb = static_cast<std::uint32_t>(c);
          }
        }
      }
      if (!glb) throw std::invalid_argument("poset: missing lower bound");
      // verify *glb dominates every common lower bound
      for (std::size_t c = 0; c < n; ++c)
        if (leq[c * n + a] && leq[c * n + b] && !leq[c * n + *glb])
          throw std::invalid_argument("poset: meets are not unique");
      t.meet_[a * n + b] = *glb;
    }

  t.false_.assign(n, false);
  if (j.contains("false"))
    for (const auto& s : j.at("false")) t.false_[index(s.get<std::string>())] = true;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (t.false_[b] && leq[a * n + b] && !t.false_[a])
        throw std::invalid_argument("poset: false set is not downward closed");
  if (t.false_[t.top_])
    throw std::invalid_argument("poset: the greatest element is false");
  return t;
}

inline PosetTable PosetTable::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open poset file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

class ConditionSystem {
 public:
  enum class Kind : std::uint8_t { Trivial, Cohen, Poset };

  static ConditionSystem trivial() { return ConditionSystem(Kind::Trivial); }
  static ConditionSystem cohen() { return ConditionSystem(Kind::Cohen); }
  static ConditionSystem poset(PosetTable table) {
    ConditionSystem cs(Kind::Poset);
    cs.table_ = std::make_shared<PosetTable>(std::move(table));
    return cs;
  }

  // `trivial`, `cohen`, or `poset:<file>`.
  static ConditionSystem by_name(const std::string& name) {
    if (name == "trivial") return trivial();
    if (name == "cohen") return cohen();
    if (name.rfind("poset:", 0) == 0)
      return poset(PosetTable::from_file(name.substr(6)));
    throw std::invalid_argument("unknown condition system: " + name);
  }

  Kind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Kind::Trivial: return "trivial";
      case Kind::Cohen: return "cohen";
      case Kind::Poset: return "poset";
    }
    return "?";
  }

  bool compatible(const CondSeq& seq) const {
    switch (kind_) {
      case Kind::Trivial:
        return true;
      case Kind::Cohen: {
        std::map<std::uint32_t, bool> merged;
        for (const Cond& c : seq) {
          const auto* cc = std::get_if<CohenCond>(&c);
          if (!cc) throw std::invalid_argument("cohen: foreign condition");
          for (const auto& [i, b] : cc->bits) {
            auto [pos, inserted] = merged.emplace(i, b);
            if (!inserted && pos->second != b) return false;
          }
        }
        return true;
      }
      case Kind::Poset: {
        std::uint32_t g = table_->top();
        for (const Cond& c : seq) {
          const auto* pc = std::get_if<PosetCond>(&c);
          if (!pc || pc->elem >= table_->size())
            throw std::invalid_argument("poset: foreign condition");
          g = table_->meet(g, pc->elem);
        }
        return !table_->is_false(g);
      }
    }
    return true;
  }

  Cond sample(Rng& rng) const {
    switch (kind_) {
      case Kind::Trivial:
        return UnitCond{};
      case Kind::Cohen: {
        CohenCond c;
        std::uint64_t n = rng.below(3);
        for (std::uint64_t i = 0; i < n; ++i)
          c.bits[static_cast<std::uint32_t>(rng.below(5))] = rng.chance(1, 2);
        return c;
      }
      case Kind::Poset:
        return PosetCond{static_cast<std::uint32_t>(rng.below(table_->size()))};
    }
    return UnitCond{};
  }

  CondSeq sample_seq(Rng& rng, std::size_t max_len) const {
    CondSeq s;
    std::uint64_t n = rng.below(max_len + 1);
    for (std::uint64_t i = 0; i < n; ++i) s.push_back(sample(rng));
    return s;
  }

  const PosetTable* table() const { return table_.get(); }

 private:
  explicit ConditionSystem(Kind k) : kind_(k) {}
  Kind kind_;
  std::shared_ptr<PosetTable> table_;
};

// ---------------------------------------------------------------------------
// Certificates. The transformer instruction is payload-preserving: a chain of
// frak-c applications over a certificate normalizes to the certificate.
// Validity of a certificate for a sequence u is compatibility of its payload
// plus set-coverage of u, which is exactly what survives the permutation,
// contraction and duplication transfers.

inline std::optional<CondSeq> cert_normalize(const Term& t) {
  return cert_chain_payload(t);
}

inline bool cert_valid(const Term& t, const CondSeq& u,
                       const ConditionSystem& cs) {
  std::optional<CondSeq> s = cert_normalize(t);
  if (!s) return false;
  if (!cs.compatible(*s)) return false;
  for (const Cond& c : u) {
    bool found = false;
    for (const Cond& d : *s)
      if (c == d) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Pair processes: terms, stacks and processes carrying condition sequences,
// combined componentwise.

struct PairTerm {
  Term term;
  CondSeq cond;
};

struct PairStack {
  Stack stack;
  CondSeq cond;
};

struct PairProcess {
  Process proc;
  CondSeq cond;
};

inline CondSeq cond_concat(const CondSeq& a, const CondSeq& b) {
  CondSeq out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline PairTerm pair_app(const PairTerm& f, const PairTerm& x) {
  return {Term::app(f.term, x.term), cond_concat(f.cond, x.cond)};
}

inline PairStack pair_push(const PairTerm& t, const PairStack& s) {
  PairStack out{s.stack, cond_concat(t.cond, s.cond)};
  out.stack.push_front(t.term);
  return out;
}

inline PairProcess pair_process(const PairTerm& t, const PairStack& s) {
  return {Process{t.term, s.stack}, cond_concat(t.cond, s.cond)};
}

// ---------------------------------------------------------------------------
// Star combinators.

struct StarCombinators {
  Term bstar;  // = B
  Term istar;  // = I
  Term cstar;
  Term kstar_comb;  // the lifted K
  Term wstar;
  Term ccstar;
  Term kstar_skeleton;  // applied to a continuation term by kstar()

  // k*_pi: the runtime shape produced by ccstar, namely the continuation
  // skeleton applied to k_pi.
  Term kstar(const Stack& pi) const {
    return Term::app(kstar_skeleton, k_term(pi));
  }
};

inline const StarCombinators& star_combinators() {
  static const StarCombinators sc = [] {
    StarCombinators s;
    s.bstar = instr_term(Instr::B);
    s.istar = instr_term(Instr::I);
    s.cstar = compile_lambda("\\x.\\y.\\z. chi (\\t. chi' (frak-c t) x z y)");
    s.kstar_comb = compile_lambda("\\x.\\y. chi (\\t. chi' (frak-c t) x)");
    // The copy combinator cannot eliminate its duplicated binder without
    // wrapping one copy, so its lift transfers the certificate first and then
    // delegates the literal duplication to W itself.
    s.wstar = compile_lambda("chi (\\t. chi' (frak-c t) W)");
    s.kstar_skeleton =
        compile_lambda("\\k.\\x. chi (\\t. k (chi' (frak-c t) x))");
    s.ccstar = compile_lambda(
        "\\x. chi (\\t. cc (\\k."
        " chi' (frak-c t) x"
        " (\\x2. chi (\\t2. k (chi' (frak-c t2) x2)))))");
    return s;
  }();
  return sc;
}

// Substitutes the star combinators for C, K, W and cc throughout a proof-like
// term (B and I are their own lifts); pairs the result with the empty
// sequence.
inline PairTerm lift_proof_like(const Term& theta) {
  if (!is_proof_like(theta))
    throw std::invalid_argument("lift_proof_like: term is not proof-like");
  const StarCombinators& sc = star_combinators();
  // iterative rebuild over the application tree
  struct Frame {
    const TermNode* node;
    Term lifted_fun;
    int stage;
  };
  std::vector<Frame> work{{theta.raw(), {}, 0}};
  std::vector<Term> out;
  while (!work.empty()) {
    Frame f = work.back();
    work.pop_back();
    const TermNode* n = f.node;
    if (n->kind == TermNode::Kind::App) {
      if (f.stage == 0) {
        work.push_back({n, {}, 1});
        work.push_back({n->fun.raw(), {}, 0});
        continue;
      }
      if (f.stage == 1) {
        Frame g{n, out.back(), 2};
        out.pop_back();
        work.push_back(g);
        work.push_back({n->arg.raw(), {}, 0});
        continue;
      }
      Term arg = out.back();
      out.pop_back();
      out.push_back(Term::app(std::move(f.lifted_fun), std::move(arg)));
      continue;
    }
    if (n->kind == TermNode::Kind::Instr) {
      switch (n->instr) {
        case Instr::C: out.push_back(sc.cstar); continue;
        case Instr::K: out.push_back(sc.kstar_comb); continue;
        case Instr::W: out.push_back(sc.wstar); continue;
        case Instr::Cc: out.push_back(sc.ccstar); continue;
        default: out.push_back(instr_term(n->instr)); continue;
      }
    }
    // certs cannot occur in proof-like terms; instructions covered above
    out.push_back(Term::cert(n->cert));
  }
  return {out.back(), CondSeq{}};
}

// ---------------------------------------------------------------------------
// The pair-algebra pole. (xi * pi, u) is in the pole when every certificate
// of u sends the base process with that certificate at the end of the stack
// into the base pole; an incompatible u makes that vacuously true. The check
// runs the canonical certificate, with frak-c chains collapsed whenever the
// read instruction delivers one.

inline PoleResult pole1(const PairProcess& pp, std::uint64_t fuel,
                        const ConditionSystem& cs, const OracleConfig& cfg = {}) {
  if (!cs.compatible(pp.cond)) {
    PoleResult r;
    r.verdict = PoleResult::Verdict::Yes;
    return r;
  }
  Process p = pp.proc;
  p.stack.push_back(Term::cert(pp.cond));
  OracleConfig c2 = cfg;
  c2.collapse_cert_on_read = true;
  return in_pole(std::move(p), fuel, c2);
}

// ---------------------------------------------------------------------------
// Star-reduction laws: each lifted combinator, run on a stack with a
// certificate at the end, reaches the exact transferred state.

struct StarLawResult {
  std::string law;
  std::uint64_t trials = 0;
  std::uint64_t passed = 0;

  bool ok() const { return passed == trials; }
};

namespace detail {

inline Term star_pool_term(Rng& rng) {
  switch (rng.below(6)) {
    case 0: return instr_term(Instr::P);
    case 1: return instr_term(Instr::I);
    case 2: return instr_term(Instr::K);
    case 3: return Term::h(rng.below(3));
    case 4: return numeral(rng.below(3));
    default: return Term::app(instr_term(Instr::K), instr_term(Instr::P));
  }
}

inline Stack star_pool_stack(Rng& rng, std::size_t max_depth) {
  Stack s;
  std::uint64_t n = rng.below(max_depth + 1);
  for (std::uint64_t i = 0; i < n; ++i) s.push_back(star_pool_term(rng));
  return s;
}

// a certificate or a short frak-c chain over one
inline Term star_pool_cert(Rng& rng, const ConditionSystem& cs) {
  Term t = Term::cert(cs.sample_seq(rng, 2));
  for (std::uint64_t i = rng.below(2); i > 0; --i)
    t = Term::app(instr_term(Instr::FrakC), t);
  return t;
}

}  // namespace detail

inline StarLawResult check_star_law(const std::string& law,
                                    std::uint64_t trials, std::uint64_t seed,
                                    const ConditionSystem& cs =
                                        ConditionSystem::cohen()) {
  const StarCombinators& sc = star_combinators();
  Rng rng(seed);
  StarLawResult res;
  res.law = law;
  res.trials = trials;
  Term frak = instr_term(Instr::FrakC);
  for (std::uint64_t i = 0; i < trials; ++i) {
    Term xi = detail::star_pool_term(rng);
    Term eta = detail::star_pool_term(rng);
    Term zeta = detail::star_pool_term(rng);
    Stack pi = detail::star_pool_stack(rng, 4);
    Term tau = detail::star_pool_cert(rng, cs);
    Term wrapped = Term::app(frak, tau);

    Process start, target;
    if (law == "Cstar") {
      Stack s = pi;
      s.push_back(tau);
      s.push_front(zeta);
      s.push_front(eta);
      s.push_front(xi);
      start = {sc.cstar, s};
      Stack t = pi;
      t.push_back(wrapped);
      t.push_front(eta);
      t.push_front(zeta);
      target = {xi, t};
    } else if (law == "Kstar") {
      Stack s = pi;
      s.push_back(tau);
      s.push_front(eta);
      s.push_front(xi);
      start = {sc.kstar_comb, s};
      Stack t = pi;
      t.push_back(wrapped);
      target = {xi, t};
    } else if (law == "Wstar") {
      Stack s = pi;
      s.push_back(tau);
      s.push_front(eta);
      s.push_front(xi);
      start = {sc.wstar, s};
      Stack t = pi;
      t.push_back(wrapped);
      t.push_front(eta);
      t.push_front(eta);
      target = {xi, t};
    } else if (law == "kstar") {
      Stack varpi = detail::star_pool_stack(rng, 3);
      varpi.push_back(tau);
      varpi.push_front(xi);
      start = {sc.kstar(pi), varpi};
      Stack t = pi;
      t.push_back(wrapped);
      target = {xi, t};
    } else if (law == "ccstar") {
      Stack s = pi;
      s.push_back(tau);
      s.push_front(xi);
      start = {sc.ccstar, s};
      Stack t = pi;
      t.push_back(wrapped);
      t.push_front(sc.kstar(pi));
      target = {xi, t};
    } else {
      throw std::invalid_argument("unknown star law: " + law);
    }
    if (run_passes_through(start, target, 400 + 12 * pi.size())) ++res.passed;
  }
  return res;
}

inline std::vector<std::string> star_law_names() {
  return {"Cstar", "Kstar", "Wstar", "kstar", "ccstar"};
}

// ---------------------------------------------------------------------------
// Closure laws of the pair algebra. For each law, premise instances are
// sampled from small pools; whenever the premise certifies within the fuel
// budget, the conclusion must certify within a proportional budget.

struct ClosureLawResult {
  std::string law;
  std::uint64_t samples = 0;
  std::uint64_t premise_certified = 0;
  std::uint64_t vacuous = 0;  // premise holds because its sequence clashes
  std::uint64_t violations = 0;
};

struct ClosureLawReport {
  std::string system;
  std::uint64_t seed = 0;
  std::uint64_t trials = 0;
  std::vector<ClosureLawResult> laws;

  bool ok() const {
    for (const auto& l : laws)
      if (l.violations) return false;
    return true;
  }
};

inline ClosureLawReport check_closure_laws(const ConditionSystem& cs,
                                           std::uint64_t trials,
                                           std::uint64_t fuel,
                                           std::uint64_t seed) {
  const StarCombinators& sc = star_combinators();
  ClosureLawReport report;
  report.system = cs.name();
  report.seed = seed;
  report.trials = trials;

  struct Law {
    std::string name;
    // builds (premise, conclusion) from one sample
    std::function<std::pair<PairProcess, PairProcess>(Rng&)> make;
  };

  auto term = [](Rng& rng) { return detail::star_pool_term(rng); };
  auto stack = [](Rng& rng) { return detail::star_pool_stack(rng, 3); };
  auto seq = [&cs](Rng& rng) { return cs.sample_seq(rng, 2); };

  std::vector<Law> laws;
  laws.push_back({"application", [&](Rng& rng) {
    Term xi = term(rng), eta = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng);
    Stack ps = pi;
    ps.push_front(eta);
    PairProcess prem{{xi, ps}, cond_concat(u, cond_concat(v, w))};
    PairProcess conc{{Term::app(xi, eta), pi},
                     cond_concat(u, cond_concat(v, w))};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"B", [&](Rng& rng) {
    Term xi = term(rng), eta = term(rng), zeta = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng), z = seq(rng);
    CondSeq all = cond_concat(u, cond_concat(v, cond_concat(w, z)));
    Stack ps = pi;
    ps.push_front(Term::app(eta, zeta));
    PairProcess prem{{xi, ps}, all};
    Stack cs2 = pi;
    cs2.push_front(zeta);
    cs2.push_front(eta);
    cs2.push_front(xi);
    PairProcess conc{{instr_term(Instr::B), cs2}, all};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"Cstar", [&](Rng& rng) {
    Term xi = term(rng), eta = term(rng), zeta = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng), z = seq(rng);
    Stack ps = pi;
    ps.push_front(eta);
    ps.push_front(zeta);
    PairProcess prem{{xi, ps},
                     cond_concat(u, cond_concat(w, cond_concat(v, z)))};
    Stack cs2 = pi;
    cs2.push_front(zeta);
    cs2.push_front(eta);
    cs2.push_front(xi);
    PairProcess conc{{sc.cstar, cs2},
                     cond_concat(u, cond_concat(v, cond_concat(w, z)))};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"I", [&](Rng& rng) {
    Term xi = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng);
    PairProcess prem{{xi, pi}, cond_concat(u, v)};
    Stack cs2 = pi;
    cs2.push_front(xi);
    PairProcess conc{{instr_term(Instr::I), cs2}, cond_concat(u, v)};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"Kstar", [&](Rng& rng) {
    Term xi = term(rng), eta = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng);
    PairProcess prem{{xi, pi}, cond_concat(u, w)};
    Stack cs2 = pi;
    cs2.push_front(eta);
    cs2.push_front(xi);
    PairProcess conc{{sc.kstar_comb, cs2},
                     cond_concat(u, cond_concat(v, w))};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"Wstar", [&](Rng& rng) {
    Term xi = term(rng), eta = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng);
    Stack ps = pi;
    ps.push_front(eta);
    ps.push_front(eta);
    PairProcess prem{{xi, ps},
                     cond_concat(u, cond_concat(v, cond_concat(v, w)))};
    Stack cs2 = pi;
    cs2.push_front(eta);
    cs2.push_front(xi);
    PairProcess conc{{sc.wstar, cs2}, cond_concat(u, cond_concat(v, w))};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"kstar", [&](Rng& rng) {
    Term xi = term(rng);
    Stack pi = stack(rng);
    Stack varpi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng), w = seq(rng);
    PairProcess prem{{xi, pi}, cond_concat(v, u)};
    Stack cs2 = varpi;
    cs2.push_front(xi);
    PairProcess conc{{sc.kstar(pi), cs2},
                     cond_concat(u, cond_concat(v, w))};
    return std::make_pair(prem, conc);
  }});
  laws.push_back({"ccstar", [&](Rng& rng) {
    Term xi = term(rng);
    Stack pi = stack(rng);
    CondSeq u = seq(rng), v = seq(rng);
    Stack ps = pi;
    ps.push_front(sc.kstar(pi));
    PairProcess prem{{xi, ps}, cond_concat(u, cond_concat(v, v))};
    Stack cs2 = pi;
    cs2.push_front(xi);
    PairProcess conc{{sc.ccstar, cs2}, cond_concat(u, v)};
    return std::make_pair(prem, conc);
  }});

  for (const Law& law : laws) {
    Rng rng(seed ^ std::hash<std::string>{}(law.name));
    ClosureLawResult r;
    r.law = law.name;
    r.samples = trials;
    for (std::uint64_t i = 0; i < trials; ++i) {
      auto [prem, conc] = law.make(rng);
      if (!cs.compatible(prem.cond)) ++r.vacuous;
      PoleResult pr = pole1(prem, fuel, cs);
      if (!pr.yes()) continue;
      ++r.premise_certified;
      PoleResult cr = pole1(conc, 2 * fuel + 400, cs);
      if (!cr.yes()) ++r.violations;
    }
    report.laws.push_back(std::move(r));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Propositional structures and the transformer generators.

struct PropNode;
using PropPtr = std::shared_ptr<const PropNode>;

struct PropNode {
  int atom = -1;  // 0 = membership atom, 1 = inclusion atom; -1 = implication
  PropPtr lhs, rhs;
};

inline PropPtr prop_atom(int kind) {
  auto n = std::make_shared<PropNode>();
  n->atom = kind;
  return n;
}

inline PropPtr prop_imp(PropPtr a, PropPtr b) {
  auto n = std::make_shared<PropNode>();
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

// prop := primary ("->" prop)? ; primary := "Oin" | "Osub" | "(" prop ")"
// The arrow is right-associative.
namespace detail {

inline PropPtr parse_prop_expr(std::string_view text, std::size_t& pos);

inline void skip_ws(std::string_view text, std::size_t& pos) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
    ++pos;
}

inline PropPtr parse_prop_primary(std::string_view text, std::size_t& pos) {
  skip_ws(text, pos);
  if (pos >= text.size()) throw ParseError("expected a proposition", pos);
  if (text[pos] == '(') {
    ++pos;
    PropPtr inner = parse_prop_expr(text, pos);
    skip_ws(text, pos);
    if (pos >= text.size() || text[pos] != ')')
      throw ParseError("expected ')'", pos);
    ++pos;
    return inner;
  }
  if (text.compare(pos, 4, "Osub") == 0) {
    pos += 4;
    return prop_atom(1);
  }
  if (text.compare(pos, 3, "Oin") == 0) {
    pos += 3;
    return prop_atom(0);
  }
  throw ParseError("expected 'Oin', 'Osub' or '('", pos);
}

inline PropPtr parse_prop_expr(std::string_view text, std::size_t& pos) {
  PropPtr lhs = parse_prop_primary(text, pos);
  skip_ws(text, pos);
  if (pos + 1 < text.size() && text[pos] == '-' && text[pos + 1] == '>') {
    pos += 2;
    return prop_imp(std::move(lhs), parse_prop_expr(text, pos));
  }
  return lhs;
}

}  // namespace detail

inline PropPtr parse_prop(std::string_view text) {
  std::size_t pos = 0;
  PropPtr p = detail::parse_prop_expr(text, pos);
  detail::skip_ws(text, pos);
  if (pos != text.size()) throw ParseError("unexpected trailing input", pos);
  return p;
}

// Base terms standing for the atomic-transfer realizers; opaque constants by
// default, replaceable by any pair of terms.
struct ChiBase {
  Term q, qp;
};

inline ChiBase default_chi_base(int atom) {
  if (atom == 0) return {Term::oracle("q_in"), Term::oracle("q_in'")};
  return {Term::oracle("q_sub"), Term::oracle("q_sub'")};
}

struct ChiPair {
  Term chi;   // forcing-to-pair direction
  Term chip;  // pair-to-forcing direction
};

// Leaves: (\x. chi (q x), \x. q' (chi' x)); implication nodes compose the two
// directions of the subformulas with swapped primes.
inline ChiPair chi_transformers(const PropPtr& f, const ChiBase& base_in,
                                const ChiBase& base_sub) {
  if (f->atom >= 0) {
    const ChiBase& b = f->atom == 0 ? base_in : base_sub;
    Term chi = abstract_eliminate(
        llam("x", lapp(lconst(instr_term(Instr::Chi)),
                       lapp(lconst(b.q), lvar("x")))));
    Term chip = abstract_eliminate(
        llam("x", lapp(lconst(b.qp),
                       lapp(lconst(instr_term(Instr::ChiP)), lvar("x")))));
    return {chi, chip};
  }
  ChiPair lhs = chi_transformers(f->lhs, base_in, base_sub);
  ChiPair rhs = chi_transformers(f->rhs, base_in, base_sub);
  Term chi = abstract_eliminate(llam(
      "x", llam("y", lapp(lconst(rhs.chi),
                          lapp(lvar("x"), lapp(lconst(lhs.chip), lvar("y")))))));
  Term chip = abstract_eliminate(llam(
      "x", llam("y", lapp(lconst(rhs.chip),
                          lapp(lvar("x"), lapp(lconst(lhs.chi), lvar("y")))))));
  return {chi, chip};
}

inline ChiPair chi_transformers(const PropPtr& f) {
  return chi_transformers(f, default_chi_base(0), default_chi_base(1));
}

}  // namespace crvm
