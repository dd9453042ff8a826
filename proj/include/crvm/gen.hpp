// Deterministic random generation of terms, stacks and condition data.
// Used by the property-test suites and by the closure-law sampler, so results
// are reproducible from a seed across platforms.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crvm/lambda.hpp"
#include "crvm/term.hpp"

namespace crvm {

// splitmix64; fixed algorithm so seeds mean the same thing everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

  bool chance(std::uint64_t num, std::uint64_t den) {
    return below(den) < num;
  }

 private:
  std::uint64_t state_;
};

namespace gen {

// Any instruction, excluding none.
inline Instr random_instr(Rng& rng) {
  return static_cast<Instr>(rng.below(kInstrCount));
}

// Proof-like instruction constants (no a, no p).
inline Instr random_proof_like_instr(Rng& rng) {
  static const Instr pool[] = {Instr::B,     Instr::C,    Instr::I,
                               Instr::K,     Instr::W,    Instr::Cc,
                               Instr::Gamma, Instr::Kappa, Instr::E,
                               Instr::Chi,   Instr::ChiP, Instr::FrakC};
  return pool[rng.below(sizeof(pool) / sizeof(pool[0]))];
}

// Random term tree of bounded depth over instructions, h-constants and a
// couple of oracle names.
inline Term random_term(Rng& rng, int depth) {
  if (depth > 0 && rng.chance(2, 3)) {
    Term f = random_term(rng, depth - 1);
    Term x = random_term(rng, depth - 1);
    return Term::app(std::move(f), std::move(x));
  }
  switch (rng.below(8)) {
    case 0: return Term::h(rng.below(4));
    case 1: return Term::oracle(rng.chance(1, 2) ? "delta" : "sigma");
    default: return instr_term(random_instr(rng));
  }
}

inline Term random_proof_like_term(Rng& rng, int depth) {
  if (depth > 0 && rng.chance(2, 3)) {
    Term f = random_proof_like_term(rng, depth - 1);
    Term x = random_proof_like_term(rng, depth - 1);
    return Term::app(std::move(f), std::move(x));
  }
  return instr_term(random_proof_like_instr(rng));
}

inline Stack random_stack(Rng& rng, std::size_t max_depth, int term_depth = 3) {
  Stack s;
  std::size_t n = rng.below(max_depth + 1);
  for (std::size_t i = 0; i < n; ++i) s.push_back(random_term(rng, term_depth));
  return s;
}

// Random lambda term with free variables drawn from `scope` (closed when the
// scope is empty). Fresh-constant introduction is excluded: its choice of
// index is retention-sensitive and differs between the two machines; it has
// its own dedicated tests.
inline LamPtr random_lambda(Rng& rng, int budget,
                            std::vector<std::string>& scope) {
  auto leaf = [&]() -> LamPtr {
    if (!scope.empty() && rng.chance(1, 2))
      return lvar(scope[rng.below(scope.size())]);
    switch (rng.below(13)) {
      case 0: return lconst(instr_term(Instr::P));
      case 1: return lconst(Term::oracle("delta"));
      case 2: return lconst(numeral(rng.below(4)));
      case 3: return lconst(instr_term(Instr::A));
      case 4: return lconst(instr_term(Instr::Cc));
      case 5: return lconst(instr_term(Instr::Gamma));
      default:
        static const Instr basic[] = {Instr::B, Instr::C, Instr::I, Instr::K,
                                      Instr::W};
        return lconst(instr_term(basic[rng.below(5)]));
    }
  };
  if (budget <= 1) return leaf();
  switch (rng.below(5)) {
    case 0:
      return leaf();
    case 1: case 2: {  // abstraction
      std::string name = "v" + std::to_string(scope.size());
      scope.push_back(name);
      LamPtr body = random_lambda(rng, budget - 1, scope);
      scope.pop_back();
      return llam(name, body);
    }
    default: {  // application
      int lhs = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(budget - 1)));
      LamPtr f = random_lambda(rng, lhs, scope);
      LamPtr x = random_lambda(rng, budget - lhs, scope);
      return lapp(std::move(f), std::move(x));
    }
  }
}

inline LamPtr random_closed_lambda(Rng& rng, int budget) {
  std::vector<std::string> scope;
  return random_lambda(rng, budget, scope);
}

// Term items for differential runs; same alphabet as random_lambda leaves,
// again without fresh-constant introduction. Indexed constants are also left
// out: elimination may thread a binder-routed copy of an item through a
// wrapper, and the literal h-test of e would tell the wrapped copy apart from
// the reference machine's environment lookup. Those flows have dedicated
// direct tests.
inline Term random_diff_term(Rng& rng, int depth) {
  if (depth > 0 && rng.chance(1, 2)) {
    Term f = random_diff_term(rng, depth - 1);
    Term x = random_diff_term(rng, depth - 1);
    return Term::app(std::move(f), std::move(x));
  }
  switch (rng.below(13)) {
    case 0: return instr_term(Instr::P);
    case 1: return Term::oracle("delta");
    case 2: return numeral(rng.below(4));
    case 3: return instr_term(Instr::A);
    case 4: return instr_term(Instr::E);
    case 5: return instr_term(Instr::Chi);
    case 6: return instr_term(Instr::ChiP);
    case 7: return instr_term(Instr::Cc);
    case 8: return instr_term(Instr::Gamma);
    default: {
      static const Instr basic[] = {Instr::B, Instr::C, Instr::I, Instr::K,
                                    Instr::W};
      return instr_term(basic[rng.below(5)]);
    }
  }
}

// Stacks for differential runs: payload-rich items over the shared alphabet.
inline Stack random_instruction_stack(Rng& rng, std::size_t max_depth) {
  Stack s;
  std::size_t n = rng.below(max_depth + 1);
  for (std::size_t i = 0; i < n; ++i) {
    switch (rng.below(6)) {
      case 0: s.push_back(instr_term(Instr::P)); break;
      case 1: s.push_back(Term::oracle("delta")); break;
      case 2: s.push_back(numeral(rng.below(4))); break;
      default: s.push_back(random_diff_term(rng, 2)); break;
    }
  }
  return s;
}

}  // namespace gen
}  // namespace crvm
