// Lambda terms over the instruction alphabet, abstraction elimination into
// {B,C,I,K,W}, and the standard prelude terms.
#pragma once

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "crvm/term.hpp"

namespace crvm {

struct LamNode;
using LamPtr = std::shared_ptr<const LamNode>;

struct LamNode {
  enum class Kind : std::uint8_t { Var, Lam, App, Const };
  Kind kind;
  std::string name;  // Var name or Lam binder
  LamPtr sub;        // Lam body or App fun
  LamPtr arg;        // App arg
  Term cst;          // Const payload
  std::set<std::string> fv;  // free variables, memoized at construction
};

inline LamPtr lvar(std::string name) {
  auto n = std::make_shared<LamNode>();
  n->kind = LamNode::Kind::Var;
  n->fv.insert(name);
  n->name = std::move(name);
  return n;
}

inline LamPtr llam(std::string binder, LamPtr body) {
  auto n = std::make_shared<LamNode>();
  n->kind = LamNode::Kind::Lam;
  n->fv = body->fv;
  n->fv.erase(binder);
  n->name = std::move(binder);
  n->sub = std::move(body);
  return n;
}

inline LamPtr lapp(LamPtr f, LamPtr x) {
  auto n = std::make_shared<LamNode>();
  n->kind = LamNode::Kind::App;
  n->fv = f->fv;
  n->fv.insert(x->fv.begin(), x->fv.end());
  n->sub = std::move(f);
  n->arg = std::move(x);
  return n;
}

inline LamPtr lconst(Term t) {
  auto n = std::make_shared<LamNode>();
  n->kind = LamNode::Kind::Const;
  n->cst = std::move(t);
  return n;
}

inline const std::set<std::string>& free_vars(const LamPtr& t) { return t->fv; }

inline bool lam_equal(const LamPtr& a, const LamPtr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case LamNode::Kind::Var: return a->name == b->name;
    case LamNode::Kind::Lam:
      return a->name == b->name && lam_equal(a->sub, b->sub);
    case LamNode::Kind::App:
      return lam_equal(a->sub, b->sub) && lam_equal(a->arg, b->arg);
    case LamNode::Kind::Const: return a->cst == b->cst;
  }
  return false;
}

// Substitution of a closed term for a variable; shadowing binders cut it off.
inline LamPtr subst(const LamPtr& t, const std::string& x, const LamPtr& u) {
  switch (t->kind) {
    case LamNode::Kind::Var: return t->name == x ? u : t;
    case LamNode::Kind::Const: return t;
    case LamNode::Kind::Lam:
      if (t->name == x || !t->fv.count(x)) return t;
      return llam(t->name, subst(t->sub, x, u));
    case LamNode::Kind::App:
      if (!t->fv.count(x)) return t;
      return lapp(subst(t->sub, x, u), subst(t->arg, x, u));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Parser.
//
//   lterm := "\" ident "." lterm | lterm latom | latom
//   latom := ident | term-atom | "(" lterm ")"
//
// Term atoms are those of the machine syntax (instructions, hN, n:N, delta);
// every other identifier is a lambda variable.

namespace detail {

inline bool reserved_ident(const std::string& name) {
  return instr_by_name(name).has_value() || h_const_index(name).has_value() ||
         name == "delta";
}

inline LamPtr parse_lambda_term(Lexer& lex);

inline std::optional<LamPtr> parse_lambda_atom(Lexer& lex) {
  const Token& t = lex.peek();
  switch (t.kind) {
    case Token::Kind::LParen: {
      lex.next();
      LamPtr inner = parse_lambda_term(lex);
      if (lex.peek().kind != Token::Kind::RParen)
        throw ParseError("expected ')'", lex.peek().pos);
      lex.next();
      return inner;
    }
    case Token::Kind::Numeral:
      return lconst(numeral(lex.next().value));
    case Token::Kind::Ident: {
      Token id = lex.next();
      if (id.text == "delta") return lconst(Term::oracle("delta"));
      if (auto in = instr_by_name(id.text)) return lconst(instr_term(*in));
      if (auto idx = h_const_index(id.text)) return lconst(Term::h(*idx));
      return lvar(id.text);
    }
    default:
      return std::nullopt;
  }
}

inline LamPtr parse_lambda_term(Lexer& lex) {
  if (lex.peek().kind == Token::Kind::Lambda) {
    lex.next();
    Token id = lex.next();
    if (id.kind != Token::Kind::Ident)
      throw ParseError("expected a binder name after '\\'", id.pos);
    if (reserved_ident(id.text))
      throw ParseError("cannot bind reserved name '" + id.text + "'", id.pos);
    if (lex.peek().kind != Token::Kind::Dot)
      throw ParseError("expected '.' after binder", lex.peek().pos);
    lex.next();
    return llam(id.text, parse_lambda_term(lex));
  }
  std::optional<LamPtr> acc = parse_lambda_atom(lex);
  if (!acc) throw ParseError("expected a term", lex.peek().pos);
  while (true) {
    if (lex.peek().kind == Token::Kind::Lambda) {
      // allow  f \x. t  to apply f to the whole abstraction
      return lapp(std::move(*acc), parse_lambda_term(lex));
    }
    std::optional<LamPtr> nxt = parse_lambda_atom(lex);
    if (!nxt) break;
    acc = lapp(std::move(*acc), std::move(*nxt));
  }
  return *acc;
}

}  // namespace detail

inline LamPtr parse_lambda(std::string_view text) {
  detail::Lexer lex(text);
  LamPtr t = detail::parse_lambda_term(lex);
  if (lex.peek().kind != detail::Token::Kind::End)
    throw ParseError("unexpected trailing input", lex.peek().pos);
  return t;
}

inline std::string print_lambda(const LamPtr& t) {
  switch (t->kind) {
    case LamNode::Kind::Var: return t->name;
    case LamNode::Kind::Const: {
      std::string inner = print_term(t->cst);
      return t->cst.is_app() ? "(" + inner + ")" : inner;
    }
    case LamNode::Kind::Lam:
      return "\\" + t->name + ". " + print_lambda(t->sub);
    case LamNode::Kind::App: {
      std::string f = print_lambda(t->sub);
      if (t->sub->kind == LamNode::Kind::Lam) f = "(" + f + ")";
      std::string x = print_lambda(t->arg);
      if (t->arg->kind == LamNode::Kind::App ||
          t->arg->kind == LamNode::Kind::Lam)
        x = "(" + x + ")";
      return f + " " + x;
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Abstraction elimination. The (K,S) route does not preserve weak head
// behavior on this machine; the table below routes arguments with B/C and
// duplicates with a {B,C,W}-composite S~ satisfying
//   S~ * f.g.a.pi  >>  (f a) * (g a).pi
// which a dedicated unit test pins down.

struct ElimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// S~ = (B (B W)) ((B B) C)
inline const Term& stilde_term() {
  static const Term s = Term::app(
      Term::app(instr_term(Instr::B),
                Term::app(instr_term(Instr::B), instr_term(Instr::W))),
      Term::app(Term::app(instr_term(Instr::B), instr_term(Instr::B)),
                instr_term(Instr::C)));
  return s;
}

namespace detail {

// Eta-contraction of \x.(M)x to M is sound only when M on the empty stack
// sticks for lack of arguments, exactly like the abstraction does: the abort
// instruction can land either one on the empty stack, where an M that runs
// (p accepts, I unwinds, ...) would be observably different. M qualifies when
// its spine head is an instruction still waiting for arguments. The
// certificate transformer never fires a rule, so it always qualifies; it
// needs eta so that certificate chains keep their canonical shape.
inline bool eta_safe(const LamPtr& m) {
  int args = 0;
  const LamNode* cur = m.get();
  while (cur->kind == LamNode::Kind::App) {
    ++args;
    cur = cur->sub.get();
  }
  if (cur->kind != LamNode::Kind::Const) return false;
  const TermNode* t = cur->cst.raw();
  while (t && t->kind == TermNode::Kind::App) {
    ++args;
    t = t->fun.raw();
  }
  if (!t || t->kind != TermNode::Kind::Instr) return false;
  int arity;
  switch (t->instr) {
    case Instr::A: case Instr::Kappa: case Instr::I: case Instr::Cc:
    case Instr::Chi:
      arity = 1;
      break;
    case Instr::K: case Instr::W: case Instr::ChiP:
      arity = 2;
      break;
    case Instr::C: case Instr::B: case Instr::Gamma:
      arity = 3;
      break;
    case Instr::E:
      arity = 4;
      break;
    case Instr::FrakC:
      return true;
    default:  // p accepts immediately
      return false;
  }
  return args < arity;
}

// Bodies under elimination are Lam-free lambda trees.
inline LamPtr elim_var(const std::string& x, const LamPtr& b, bool eta) {
  if (b->kind == LamNode::Kind::Var && b->name == x)
    return lconst(instr_term(Instr::I));
  if (!b->fv.count(x))
    return lapp(lconst(instr_term(Instr::K)), b);
  // x occurs and b is not x itself, so b must be an application
  const LamPtr& f = b->sub;
  const LamPtr& g = b->arg;
  bool in_f = f->fv.count(x) > 0;
  bool in_g = g->fv.count(x) > 0;
  if (!in_f && g->kind == LamNode::Kind::Var && g->name == x && eta &&
      eta_safe(f))
    return f;
  if (in_f && !in_g)
    return lapp(lapp(lconst(instr_term(Instr::C)), elim_var(x, f, eta)), g);
  if (!in_f && in_g)
    return lapp(lapp(lconst(instr_term(Instr::B)), f), elim_var(x, g, eta));
  return lapp(lapp(lconst(stilde_term()), elim_var(x, f, eta)),
              elim_var(x, g, eta));
}

// Innermost-first elimination of every abstraction.
inline LamPtr elim_all(const LamPtr& t, bool eta) {
  switch (t->kind) {
    case LamNode::Kind::Var:
    case LamNode::Kind::Const:
      return t;
    case LamNode::Kind::App:
      return lapp(elim_all(t->sub, eta), elim_all(t->arg, eta));
    case LamNode::Kind::Lam:
      return elim_var(t->name, elim_all(t->sub, eta), eta);
  }
  return t;
}

inline Term to_term(const LamPtr& t) {
  switch (t->kind) {
    case LamNode::Kind::Const: return t->cst;
    case LamNode::Kind::App: return Term::app(to_term(t->sub), to_term(t->arg));
    default:
      throw ElimError("unbound variable '" + t->name + "'");
  }
}

}  // namespace detail

inline Term abstract_eliminate(const LamPtr& t, bool eta = true) {
  return detail::to_term(detail::elim_all(t, eta));
}

inline Term compile_lambda(std::string_view text, bool eta = true) {
  return abstract_eliminate(parse_lambda(text), eta);
}

// ---------------------------------------------------------------------------
// Prelude.

struct Prelude {
  Term zero;   // K I
  Term succ;   // (B W)(B B)
  Term y;      // Turing fixed point: A A with A = \x.\f. f (x x f)
  Term ind;    // \x.\y.\z.\n. x (n y z)
};

inline const Prelude& prelude() {
  static const Prelude p = [] {
    Prelude r;
    r.zero = zero_term();
    r.succ = succ_term();
    Term a = compile_lambda("\\x.\\f. f (x x f)");
    r.y = Term::app(a, a);
    r.ind = compile_lambda("\\x.\\y.\\z.\\n. x (n y z)");
    return r;
  }();
  return p;
}

// \x.\y. cc (\k. (theta) (k x) (k y)); applied to two terms it runs both
// branches of theta against the current continuation.
inline Term theta_prime(const Term& theta) {
  LamPtr body = lapp(
      lapp(lconst(theta), lapp(lvar("k"), lvar("x"))),
      lapp(lvar("k"), lvar("y")));
  LamPtr t = llam("x", llam("y", lapp(lconst(instr_term(Instr::Cc)),
                                      llam("k", body))));
  return abstract_eliminate(t);
}

}  // namespace crvm
