#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "crvm/gen.hpp"
#include "crvm/machine.hpp"

using namespace crvm;

namespace {

Term ap(Term f, Term x) { return Term::app(std::move(f), std::move(x)); }
const Term& it(Instr i) { return instr_term(i); }

// A term with no normal form: (W W) W steps to itself forever.
Term omega() { return ap(ap(it(Instr::W), it(Instr::W)), it(Instr::W)); }

bool is_next_to(const StepResult& r, const Process& expect, int rule) {
  const auto* nx = std::get_if<Next>(&r);
  return nx && nx->rule == rule && nx->proc == expect;
}

bool is_stuck(const StepResult& r, StuckReason why) {
  const auto* st = std::get_if<Stuck>(&r);
  return st && st->reason == why;
}

// Independent enumeration of the fifteen rule guards, used to check that the
// step clauses are mutually exclusive.
int applicable_rule(const Process& p) {
  const Term& h = p.head;
  std::size_t n = p.stack.size();
  if (h.is_app()) return 7;
  if (!h.is_instr()) return 0;
  switch (h.instr_kind()) {
    case Instr::P: return 1;
    case Instr::A: return n >= 1 ? 2 : 0;
    case Instr::Gamma: return n >= 3 ? 3 : 0;
    case Instr::E:
      if (n < 4 || !p.stack.item(0).is_h() || !p.stack.item(1).is_h()) return 0;
      return p.stack.item(0).h_index() == p.stack.item(1).h_index() ? 4 : 5;
    case Instr::Kappa: return n >= 1 ? 6 : 0;
    case Instr::I: return n >= 1 ? 8 : 0;
    case Instr::K: return n >= 2 ? 9 : 0;
    case Instr::W: return n >= 2 ? 10 : 0;
    case Instr::C: return n >= 3 ? 11 : 0;
    case Instr::B: return n >= 3 ? 12 : 0;
    case Instr::Cc: return n >= 1 ? 13 : 0;
    case Instr::Chi: return n >= 2 ? 14 : 0;
    case Instr::ChiP: return n >= 2 ? 15 : 0;
    case Instr::FrakC: return 0;
  }
  return 0;
}

}  // namespace

TEST_CASE("rule 1: stop") {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    Process p{it(Instr::P), gen::random_stack(rng, 5)};
    StepResult r = step(p, OracleConfig::none());
    auto* ac = std::get_if<Accept>(&r);
    REQUIRE(ac);
    CHECK(ac->kind == AcceptKind::Stop);
  }
}

TEST_CASE("rule 2: abort jumps to the empty stack") {
  Process p{it(Instr::A), Stack{it(Instr::I), it(Instr::K), it(Instr::W)}};
  CHECK(is_next_to(step(p, {}), Process{it(Instr::I), Stack{}}, 2));
}

TEST_CASE("rule 3: fork branches over the shared tail") {
  Term xi = it(Instr::I), eta = it(Instr::K), zeta = it(Instr::W);
  Stack tail{it(Instr::B), it(Instr::C)};
  Stack full = tail;
  full.push_front(zeta);
  full.push_front(eta);
  full.push_front(xi);
  StepResult r = step(Process{it(Instr::Gamma), full}, {});
  auto* br = std::get_if<Branch3>(&r);
  REQUIRE(br);
  CHECK(br->left == Process{xi, tail});
  CHECK(br->mid == Process{eta, tail});
  CHECK(br->right == Process{zeta, tail});
}

TEST_CASE("rules 4/5: elimination of constants") {
  Stack tail{it(Instr::B)};
  // equal indices: the fourth item continues
  Stack s4 = tail;
  s4.push_front(it(Instr::K));  // xi (4th)
  s4.push_front(it(Instr::I));  // eta (3rd)
  s4.push_front(Term::h(2));
  s4.push_front(Term::h(2));
  CHECK(is_next_to(step(Process{it(Instr::E), s4}, {}),
                   Process{it(Instr::K), tail}, 4));
  // distinct indices: the third item continues
  Stack s5 = tail;
  s5.push_front(it(Instr::K));  // eta (4th)
  s5.push_front(it(Instr::I));  // xi (3rd)
  s5.push_front(Term::h(3));
  s5.push_front(Term::h(2));
  CHECK(is_next_to(step(Process{it(Instr::E), s5}, {}),
                   Process{it(Instr::I), tail}, 5));
  // first two items must be h-constants
  Stack bad{it(Instr::K), Term::h(1), it(Instr::I), it(Instr::I)};
  CHECK(is_stuck(step(Process{it(Instr::E), bad}, {}), StuckReason::NoRule));
}

TEST_CASE("rule 6: introduction of a fresh constant") {
  // h0 and h2 occur; the least unused index is 1
  Term xi = ap(it(Instr::K), Term::h(0));
  Process p{it(Instr::Kappa), Stack{xi, Term::h(2)}};
  Stack expect{Term::h(1), Term::h(2)};
  CHECK(is_next_to(step(p, {}), Process{xi, expect}, 6));
}

TEST_CASE("rule 7: push") {
  Term f = it(Instr::K), x = it(Instr::I);
  Process p{ap(f, x), Stack{it(Instr::W)}};
  CHECK(is_next_to(step(p, {}), Process{f, Stack{x, it(Instr::W)}}, 7));
}

TEST_CASE("rules 8-12: no operation, delete, copy, switch, apply") {
  Term xi = it(Instr::P), eta = Term::h(0), zeta = Term::h(1);
  Stack tail{it(Instr::B)};

  Stack sI = tail;
  sI.push_front(xi);
  CHECK(is_next_to(step(Process{it(Instr::I), sI}, {}), Process{xi, tail}, 8));

  // spec example: K * I.W.pi0 -> I * pi0
  CHECK(is_next_to(
      step(Process{it(Instr::K), Stack{it(Instr::I), it(Instr::W)}}, {}),
      Process{it(Instr::I), Stack{}}, 9));

  Stack sW = tail;
  sW.push_front(eta);
  sW.push_front(xi);
  Stack sWout = tail;
  sWout.push_front(eta);
  sWout.push_front(eta);
  CHECK(is_next_to(step(Process{it(Instr::W), sW}, {}), Process{xi, sWout}, 10));

  Stack sC = tail;
  sC.push_front(zeta);
  sC.push_front(eta);
  sC.push_front(xi);
  Stack sCout = tail;
  sCout.push_front(eta);
  sCout.push_front(zeta);
  CHECK(is_next_to(step(Process{it(Instr::C), sC}, {}), Process{xi, sCout}, 11));

  Stack sB = sC;
  Stack sBout = tail;
  sBout.push_front(ap(eta, zeta));
  CHECK(is_next_to(step(Process{it(Instr::B), sB}, {}), Process{xi, sBout}, 12));
}

TEST_CASE("rule 13: save the stack") {
  // spec example: cc * I.K.pi0 -> I * k_{K.pi0}.K.pi0
  Stack pi{it(Instr::K)};
  Process p{it(Instr::Cc), Stack{it(Instr::I), it(Instr::K)}};
  Stack expect = pi;
  expect.push_front(k_term(pi));
  CHECK(is_next_to(step(p, {}), Process{it(Instr::I), expect}, 13));
}

TEST_CASE("rules 14/15: end-of-stack register") {
  Term tau = Term::h(9);
  Term xi = it(Instr::I);

  // chi' * tau.xi.pi0 -> xi * tau.pi0   (pi0^tau = tau.pi0)
  CHECK(is_next_to(step(Process{it(Instr::ChiP), Stack{tau, xi}}, {}),
                   Process{xi, Stack{tau}}, 15));

  // chi reads back what chi' wrote
  Stack pi{it(Instr::K), it(Instr::W)};
  Stack pi_tau = pi;
  pi_tau.push_back(tau);
  Stack read = pi;
  read.push_front(tau);
  Stack chi_in = pi_tau;
  chi_in.push_front(xi);
  CHECK(is_next_to(step(Process{it(Instr::Chi), chi_in}, {}),
                   Process{xi, read}, 14));

  // chi' on a longer stack appends at the very end
  Stack chip_in = pi;
  chip_in.push_front(xi);
  chip_in.push_front(tau);
  CHECK(is_next_to(step(Process{it(Instr::ChiP), chip_in}, {}),
                   Process{xi, pi_tau}, 15));

  // no end element exists
  CHECK(is_stuck(step(Process{it(Instr::Chi), Stack{xi}}, {}),
                 StuckReason::EmptyBack));
  CHECK(is_stuck(step(Process{it(Instr::Chi), Stack{}}, {}),
                 StuckReason::Arity));
}

TEST_CASE("stuck reasons") {
  CHECK(is_stuck(step(Process{Term::h(0), Stack{it(Instr::I)}}, {}),
                 StuckReason::HeadConstant));
  CHECK(is_stuck(step(Process{Term::cert(CondSeq{}), Stack{}}, {}),
                 StuckReason::HeadConstant));
  CHECK(is_stuck(step(Process{it(Instr::I), Stack{}}, {}), StuckReason::Arity));
  CHECK(is_stuck(step(Process{it(Instr::FrakC), Stack{it(Instr::I)}}, {}),
                 StuckReason::NoRule));
  // oracle with no configuration behaves as an inert constant
  CHECK(is_stuck(step(Process{Term::oracle("delta"), Stack{numeral(1)}}, {}),
                 StuckReason::HeadConstant));
}

TEST_CASE("clause disjointness on random processes") {
  Rng rng(0xd15);
  for (int i = 0; i < 3000; ++i) {
    Process p{gen::random_term(rng, 3), gen::random_stack(rng, 5)};
    int expect = applicable_rule(p);
    StepResult r = step(p, OracleConfig::none());
    if (auto* nx = std::get_if<Next>(&r)) {
      CHECK(nx->rule == expect);
    } else if (std::holds_alternative<Branch3>(r)) {
      CHECK(expect == 3);
    } else if (std::holds_alternative<Accept>(r)) {
      CHECK(expect == 1);
    } else {
      CHECK(expect == 0);
    }
  }
}

TEST_CASE("push/apply duality") {
  Rng rng(0xb0b);
  for (int i = 0; i < 200; ++i) {
    Term f = gen::random_term(rng, 2);
    Term g = gen::random_term(rng, 2);
    Term x = gen::random_term(rng, 2);
    Stack pi = gen::random_stack(rng, 4);

    Stack s1 = pi;
    s1.push_front(x);
    CHECK(is_next_to(step(Process{ap(f, x), pi}, {}), Process{f, s1}, 7));

    Stack s2 = pi;
    s2.push_front(x);
    s2.push_front(g);
    s2.push_front(f);
    Stack s3 = pi;
    s3.push_front(ap(g, x));
    CHECK(is_next_to(step(Process{it(Instr::B), s2}, {}), Process{f, s3}, 12));
  }
}

TEST_CASE("kappa always picks a fresh index") {
  Rng rng(0xfee);
  for (int i = 0; i < 300; ++i) {
    Stack s = gen::random_stack(rng, 5);
    s.push_front(gen::random_term(rng, 3));
    Process p{it(Instr::Kappa), s};
    StepResult r = step(p, {});
    auto* nx = std::get_if<Next>(&r);
    REQUIRE(nx);
    REQUIRE(nx->rule == 6);
    std::uint64_t idx = nx->proc.stack.front().h_index();
    CHECK_FALSE(occurs_h(idx, p));
  }
}

TEST_CASE("run_linear: stop accepts in one step") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    RunOutcome out =
        run_linear(Process{it(Instr::P), gen::random_stack(rng, 4)}, 100);
    CHECK(out.kind == RunOutcome::Kind::Accept);
    CHECK(out.accept.kind == AcceptKind::Stop);
    CHECK(out.steps == 1);
  }
}

TEST_CASE("run_linear reports forks") {
  Term t = ap(ap(ap(it(Instr::Gamma), it(Instr::P)), it(Instr::P)), it(Instr::P));
  RunOutcome out = run_linear(Process{t, Stack{}}, 100);
  CHECK(out.kind == RunOutcome::Kind::Fork);
  CHECK(out.final.head == it(Instr::Gamma));
}

TEST_CASE("decode_numeral") {
  DecodeResult d0 = decode_numeral(numeral(0), 50);
  REQUIRE(d0.ok());
  CHECK(d0.value == 0);
  CHECK(d0.steps <= 6);

  DecodeResult d7 = decode_numeral(numeral(7), 50 * 7 + 50);
  REQUIRE(d7.ok());
  CHECK(d7.value == 7);

  DecodeResult bad = decode_numeral(it(Instr::K), 100);
  CHECK(bad.status == DecodeResult::Status::NotNumeral);

  DecodeResult div = decode_numeral(omega(), 100);
  CHECK(div.status == DecodeResult::Status::Fuel);

  // behavioral, not syntactic: I n:3 decodes as 3
  DecodeResult eq = decode_numeral(ap(it(Instr::I), numeral(3)), 400);
  REQUIRE(eq.ok());
  CHECK(eq.value == 3);
}

TEST_CASE("continuation terms restore the captured stack") {
  Rng rng(0xcafe);
  const Term pool[] = {it(Instr::P), it(Instr::I), it(Instr::K), Term::h(7)};
  for (int i = 0; i < 200; ++i) {
    Stack pi = gen::random_stack(rng, 8);
    Term xi = pool[rng.below(4)];
    Stack start = gen::random_stack(rng, 4);
    start.push_front(xi);
    CHECK(run_passes_through(Process{k_term(pi), start}, Process{xi, pi},
                             10 * pi.size() + 20));
  }
}

TEST_CASE("cc captures a continuation that restores its stack") {
  Stack pi{it(Instr::K), it(Instr::W)};
  Stack start = pi;
  start.push_front(it(Instr::I));
  StepResult r = step(Process{it(Instr::Cc), start}, {});
  auto* nx = std::get_if<Next>(&r);
  REQUIRE(nx);
  REQUIRE(nx->rule == 13);
  Term k = nx->proc.stack.front();
  // invoke k from an unrelated stack; it must pass through p * pi
  Stack other{Term::h(1), Term::h(2)};
  other.push_front(it(Instr::P));
  CHECK(run_passes_through(Process{k, other}, Process{it(Instr::P), pi}, 100));
}

TEST_CASE("trace text format") {
  std::vector<std::string> lines;
  RunOutcome out =
      run_trace(Process{parse_term("(K) I W"), Stack{}}, 100, {}, lines);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "#1 K I \xe2\x8b\x86 W \xc2\xb7 \xcf\x80"
                    "0  [rule 7]");
  CHECK(lines[1] == "#2 K \xe2\x8b\x86 I \xc2\xb7 W \xc2\xb7 \xcf\x80"
                    "0  [rule 7]");
  CHECK(lines[2] == "#3 I \xe2\x8b\x86 \xcf\x80"
                    "0  [rule 9]");
  CHECK(out.kind == RunOutcome::Kind::Stuck);
  CHECK(out.stuck == StuckReason::Arity);
}

TEST_CASE("exec_tree: single accept leaf") {
  ExecTree t = exec_tree(Process{it(Instr::P), Stack{}}, 10);
  REQUIRE(t.nodes.size() == 1);
  CHECK(t.nodes[0].leaf == ExecNode::Leaf::Accept);
  CHECK(t.nodes[0].accept.kind == AcceptKind::Stop);
}

TEST_CASE("exec_tree: fork produces three children") {
  Stack s{it(Instr::P), it(Instr::P), it(Instr::P), it(Instr::K)};
  ExecTree t = exec_tree(Process{it(Instr::Gamma), s}, 50);
  REQUIRE(t.nodes[0].children.size() == 3);
  Stack tail{it(Instr::K)};
  for (std::uint32_t c : t.nodes[0].children) {
    CHECK(t.nodes[c].proc == Process{it(Instr::P), tail});
  }
}

TEST_CASE("exec_tree: paper fork example, payload placement") {
  // gamma applied to the three sub-forks, instantiated at 3 and 5
  Term t = parse_term(
      "gamma"
      " (gamma (delta n:3) (delta n:3) (delta n:5))"
      " (gamma (delta n:5) (delta n:3) (delta n:5))"
      " (gamma (delta n:3) (delta n:5) (delta n:5))");
  ExecTree tree = exec_tree(Process{t, Stack{}}, 5000, OracleConfig::collector());

  std::uint32_t fork = 0;
  while (tree.nodes[fork].children.size() == 1) fork = tree.nodes[fork].children[0];
  REQUIRE(tree.nodes[fork].children.size() == 3);

  auto payloads = [&](std::uint32_t start) {
    std::vector<std::uint64_t> got;
    std::vector<std::uint32_t> work{start};
    while (!work.empty()) {
      std::uint32_t i = work.back();
      work.pop_back();
      const ExecNode& n = tree.nodes[i];
      if (n.leaf == ExecNode::Leaf::Accept && n.accept.kind == AcceptKind::Oracle)
        got.push_back(n.accept.payload);
      for (std::uint32_t c : n.children) work.push_back(c);
    }
    std::sort(got.begin(), got.end());
    return got;
  };
  using V = std::vector<std::uint64_t>;
  CHECK(payloads(tree.nodes[fork].children[0]) == V{3, 3, 5});
  CHECK(payloads(tree.nodes[fork].children[1]) == V{3, 5, 5});
  CHECK(payloads(tree.nodes[fork].children[2]) == V{3, 5, 5});
}

TEST_CASE("in_pole: accepts, stuck, and fork majority") {
  CHECK(in_pole(Process{it(Instr::P), Stack{}}, 10).verdict ==
        PoleResult::Verdict::Yes);
  CHECK(in_pole(Process{it(Instr::I), Stack{}}, 10).verdict ==
        PoleResult::Verdict::NoEvidence);

  // two accepting children and one diverging child: dovetailing still
  // certifies membership
  Term t = ap(ap(ap(it(Instr::Gamma), ap(Term::oracle("delta"), numeral(5))),
                 ap(Term::oracle("delta"), numeral(5))),
              omega());
  PoleResult r = in_pole(Process{t, Stack{}}, 20000, OracleConfig::checker(5));
  CHECK(r.verdict == PoleResult::Verdict::Yes);

  // checker rejects the wrong value
  Term bad = ap(Term::oracle("delta"), numeral(4));
  CHECK(in_pole(Process{bad, Stack{}}, 1000, OracleConfig::checker(5)).verdict ==
        PoleResult::Verdict::NoEvidence);
}

TEST_CASE("in_pole: fork needs two certified children") {
  Term one_good =
      ap(ap(ap(it(Instr::Gamma), it(Instr::P)), it(Instr::I)), it(Instr::K));
  // children: p (in), I * pi0 (stuck), K * pi0 (stuck) -> two out
  PoleResult r = in_pole(Process{one_good, Stack{}}, 1000);
  CHECK(r.verdict == PoleResult::Verdict::NoEvidence);

  Term two_good =
      ap(ap(ap(it(Instr::Gamma), it(Instr::P)), it(Instr::P)), it(Instr::K));
  CHECK(in_pole(Process{two_good, Stack{}}, 1000).verdict ==
        PoleResult::Verdict::Yes);
}

TEST_CASE("in_pole: certification is monotone in fuel") {
  Rng rng(0x5eed);
  for (int i = 0; i < 30; ++i) {
    Term good1 = it(Instr::P);
    for (std::uint64_t d = rng.below(4); d > 0; --d) good1 = ap(it(Instr::I), good1);
    Term good2 = it(Instr::P);
    for (std::uint64_t d = rng.below(4); d > 0; --d) good2 = ap(it(Instr::I), good2);
    Term t = ap(ap(ap(it(Instr::Gamma), good1), good2), omega());
    std::uint64_t lo = 1;
    while (lo < 1000 &&
           in_pole(Process{t, Stack{}}, lo).verdict != PoleResult::Verdict::Yes)
      ++lo;
    REQUIRE(lo < 1000);
    for (std::uint64_t extra : {1ull, 7ull, 50ull}) {
      CHECK(in_pole(Process{t, Stack{}}, lo + extra).verdict ==
            PoleResult::Verdict::Yes);
    }
  }
}

TEST_CASE("write-then-read restores the written end item") {
  Rng rng(0x14f);
  for (int i = 0; i < 100; ++i) {
    Term tau = gen::random_term(rng, 3);
    Term xi = gen::random_term(rng, 3);
    Stack pi = gen::random_stack(rng, 5);
    // chi' * tau.(chi xi).pi  ->  (chi xi) * pi^tau  ->*  xi * tau.pi
    Stack start = pi;
    start.push_front(ap(it(Instr::Chi), xi));
    start.push_front(tau);
    Stack target = pi;
    target.push_front(tau);
    CHECK(run_passes_through(Process{it(Instr::ChiP), start},
                             Process{xi, target}, 5));
  }
}

TEST_CASE("oracle acceptance never inspects h-constants") {
  // decoding is behavioral, so renaming an h-constant that rides along in a
  // dead position cannot change acceptance
  for (std::uint64_t idx : {0ull, 5ull, 17ull}) {
    Term t = ap(ap(it(Instr::K), numeral(3)), Term::h(idx));
    DecodeResult d = decode_numeral(t, 500);
    REQUIRE(d.ok());
    CHECK(d.value == 3);
    StepResult r = step(Process{Term::oracle("delta"), Stack{t}},
                        OracleConfig::collector());
    auto* ac = std::get_if<Accept>(&r);
    REQUIRE(ac);
    CHECK(ac->payload == 3);
  }
}

TEST_CASE("proof-like terms never accept from the empty stack") {
  Rng rng(0xab1e);
  for (int i = 0; i < 10; ++i) {
    Term theta = gen::random_proof_like_term(rng, 5);
    ExecTree t = exec_tree(Process{theta, Stack{}}, 2000, OracleConfig::none());
    for (const ExecNode& n : t.nodes) CHECK(n.leaf != ExecNode::Leaf::Accept);
  }
}
