// Core syntax of the realizability machine: combinator terms, stacks,
// processes, numerals and continuation terms.
#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace crvm {

// ---------------------------------------------------------------------------
// Forcing-condition payloads. Only the values live here; the compatibility
// semantics belong to the condition systems in forcing.hpp. They are needed
// at this level because certificate terms carry a condition sequence.

struct UnitCond {
  friend bool operator==(const UnitCond&, const UnitCond&) { return true; }
};

// A finite partial map index -> bit.
struct CohenCond {
  std::map<std::uint32_t, bool> bits;
  friend bool operator==(const CohenCond&, const CohenCond&) = default;
};

// An element of a finite inf-semilattice loaded from a file.
struct PosetCond {
  std::uint32_t elem = 0;
  friend bool operator==(const PosetCond&, const PosetCond&) = default;
};

using Cond = std::variant<UnitCond, CohenCond, PosetCond>;
using CondSeq = std::vector<Cond>;

inline std::string cond_to_string(const Cond& c) {
  if (std::holds_alternative<UnitCond>(c)) return "1";
  if (const auto* p = std::get_if<PosetCond>(&c)) return "#" + std::to_string(p->elem);
  const auto& m = std::get<CohenCond>(c).bits;
  std::string s = "{";
  bool first = true;
  for (const auto& [i, b] : m) {
    if (!first) s += ",";
    first = false;
    s += std::to_string(i) + ":" + (b ? "1" : "0");
  }
  return s + "}";
}

inline std::string cond_seq_to_string(const CondSeq& u) {
  std::string s;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (i) s += ";";
    s += cond_to_string(u[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Instruction constants.

enum class Instr : std::uint8_t {
  B, C, I, K, W, Cc, A, P, Gamma, Kappa, E, Chi, ChiP, FrakC
};

inline constexpr int kInstrCount = 14;

inline std::string_view instr_name(Instr i) {
  switch (i) {
    case Instr::B: return "B";
    case Instr::C: return "C";
    case Instr::I: return "I";
    case Instr::K: return "K";
    case Instr::W: return "W";
    case Instr::Cc: return "cc";
    case Instr::A: return "a";
    case Instr::P: return "p";
    case Instr::Gamma: return "gamma";
    case Instr::Kappa: return "kappa";
    case Instr::E: return "e";
    case Instr::Chi: return "chi";
    case Instr::ChiP: return "chi'";
    case Instr::FrakC: return "frak-c";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Terms. Immutable trees with shared subterms. Reference counting is
// intrusive with an iterative release loop: application spines produced by
// long machine runs can be deep enough to overflow the stack under the
// default recursive destruction.

struct TermNode;

class Term {
 public:
  Term() = default;
  Term(const Term& o) : p_(o.p_) { retain(); }
  Term(Term&& o) noexcept : p_(o.p_) { o.p_ = nullptr; }
  Term& operator=(const Term& o) {
    if (p_ != o.p_) {
      release();
      p_ = o.p_;
      retain();
    }
    return *this;
  }
  Term& operator=(Term&& o) noexcept {
    if (this != &o) {
      release();
      p_ = o.p_;
      o.p_ = nullptr;
    }
    return *this;
  }
  ~Term() { release(); }

  static Term instr(Instr i);
  static Term h(std::uint64_t index);
  static Term oracle(std::string name);
  static Term cert(CondSeq payload);
  static Term app(Term fun, Term arg);

  bool null() const { return p_ == nullptr; }
  explicit operator bool() const { return p_ != nullptr; }

  bool is_app() const;
  bool is_instr() const;
  bool is_instr(Instr i) const;
  bool is_h() const;
  bool is_oracle() const;
  bool is_cert() const;

  Instr instr_kind() const;
  std::uint64_t h_index() const;
  const std::string& oracle_name() const;
  const CondSeq& cert_payload() const;
  const Term& fun() const;
  const Term& arg() const;

  const TermNode* raw() const { return p_; }

  friend bool operator==(const Term& a, const Term& b) { return term_eq(a, b); }

 private:
  explicit Term(TermNode* p) : p_(p) { retain(); }
  static bool term_eq(const Term& a, const Term& b);
  void retain() const;
  void release() noexcept;
  TermNode* p_ = nullptr;
};

struct TermNode {
  enum class Kind : std::uint8_t { Instr, HConst, Oracle, Cert, App };
  Kind kind;
  Instr instr{};
  std::uint64_t h_index = 0;
  std::string oracle;
  CondSeq cert;
  Term fun, arg;
  mutable std::atomic<std::uint32_t> rc{0};
};

inline void Term::retain() const {
  if (p_) p_->rc.fetch_add(1, std::memory_order_relaxed);
}

inline void Term::release() noexcept {
  TermNode* n = p_;
  p_ = nullptr;
  if (!n || n->rc.fetch_sub(1, std::memory_order_acq_rel) != 1) return;
  std::vector<TermNode*> dead;
  dead.push_back(n);
  while (!dead.empty()) {
    TermNode* d = dead.back();
    dead.pop_back();
    for (Term* child : {&d->fun, &d->arg}) {
      TermNode* c = child->p_;
      child->p_ = nullptr;
      if (c && c->rc.fetch_sub(1, std::memory_order_acq_rel) == 1) dead.push_back(c);
    }
    delete d;
  }
}

inline Term Term::instr(Instr i) {
  auto* n = new TermNode{};
  n->kind = TermNode::Kind::Instr;
  n->instr = i;
  return Term(n);
}

inline Term Term::h(std::uint64_t index) {
  auto* n = new TermNode{};
  n->kind = TermNode::Kind::HConst;
  n->h_index = index;
  return Term(n);
}

inline Term Term::oracle(std::string name) {
  auto* n = new TermNode{};
  n->kind = TermNode::Kind::Oracle;
  n->oracle = std::move(name);
  return Term(n);
}

inline Term Term::cert(CondSeq payload) {
  auto* n = new TermNode{};
  n->kind = TermNode::Kind::Cert;
  n->cert = std::move(payload);
  return Term(n);
}

inline Term Term::app(Term fun, Term arg) {
  auto* n = new TermNode{};
  n->kind = TermNode::Kind::App;
  n->fun = std::move(fun);
  n->arg = std::move(arg);
  return Term(n);
}

inline bool Term::is_app() const { return p_ && p_->kind == TermNode::Kind::App; }
inline bool Term::is_instr() const { return p_ && p_->kind == TermNode::Kind::Instr; }
inline bool Term::is_instr(Instr i) const { return is_instr() && p_->instr == i; }
inline bool Term::is_h() const { return p_ && p_->kind == TermNode::Kind::HConst; }
inline bool Term::is_oracle() const { return p_ && p_->kind == TermNode::Kind::Oracle; }
inline bool Term::is_cert() const { return p_ && p_->kind == TermNode::Kind::Cert; }

inline Instr Term::instr_kind() const { return p_->instr; }
inline std::uint64_t Term::h_index() const { return p_->h_index; }
inline const std::string& Term::oracle_name() const { return p_->oracle; }
inline const CondSeq& Term::cert_payload() const { return p_->cert; }
inline const Term& Term::fun() const { return p_->fun; }
inline const Term& Term::arg() const { return p_->arg; }

inline bool Term::term_eq(const Term& a, const Term& b) {
  std::vector<std::pair<const TermNode*, const TermNode*>> work;
  work.emplace_back(a.p_, b.p_);
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    if (x == y) continue;
    if (!x || !y || x->kind != y->kind) return false;
    switch (x->kind) {
      case TermNode::Kind::Instr:
        if (x->instr != y->instr) return false;
        break;
      case TermNode::Kind::HConst:
        if (x->h_index != y->h_index) return false;
        break;
      case TermNode::Kind::Oracle:
        if (x->oracle != y->oracle) return false;
        break;
      case TermNode::Kind::Cert:
        if (!(x->cert == y->cert)) return false;
        break;
      case TermNode::Kind::App:
        work.emplace_back(x->fun.raw(), y->fun.raw());
        work.emplace_back(x->arg.raw(), y->arg.raw());
        break;
    }
  }
  return true;
}

inline bool operator!=(const Term& a, const Term& b) { return !(a == b); }

// Shared instruction singletons; machine steps allocate no node for them.
inline const Term& instr_term(Instr i) {
  static const Term table[kInstrCount] = {
      Term::instr(Instr::B),     Term::instr(Instr::C),
      Term::instr(Instr::I),     Term::instr(Instr::K),
      Term::instr(Instr::W),     Term::instr(Instr::Cc),
      Term::instr(Instr::A),     Term::instr(Instr::P),
      Term::instr(Instr::Gamma), Term::instr(Instr::Kappa),
      Term::instr(Instr::E),     Term::instr(Instr::Chi),
      Term::instr(Instr::ChiP),  Term::instr(Instr::FrakC)};
  return table[static_cast<int>(i)];
}

// ---------------------------------------------------------------------------
// Stacks and processes. The empty deque is the empty stack; the front is the
// top; the back is the position adjacent to the stack end, which is the only
// other position any rule touches.

class Stack {
 public:
  Stack() = default;
  Stack(std::initializer_list<Term> items) : items_(items) {}

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

  const Term& front() const { return items_.front(); }
  const Term& back() const { return items_.back(); }
  const Term& item(std::size_t i) const { return items_[i]; }

  void push_front(Term t) { items_.push_front(std::move(t)); }
  void push_back(Term t) { items_.push_back(std::move(t)); }
  Term pop_front() {
    Term t = std::move(items_.front());
    items_.pop_front();
    return t;
  }
  Term pop_back() {
    Term t = std::move(items_.back());
    items_.pop_back();
    return t;
  }

  friend bool operator==(const Stack& a, const Stack& b) {
    if (a.items_.size() != b.items_.size()) return false;
    for (std::size_t i = 0; i < a.items_.size(); ++i)
      if (!(a.items_[i] == b.items_[i])) return false;
    return true;
  }
  friend bool operator!=(const Stack& a, const Stack& b) { return !(a == b); }

 private:
  std::deque<Term> items_;
};

struct Process {
  Term head;
  Stack stack;

  friend bool operator==(const Process& a, const Process& b) {
    return a.head == b.head && a.stack == b.stack;
  }
  friend bool operator!=(const Process& a, const Process& b) { return !(a == b); }
};

// ---------------------------------------------------------------------------
// Predicates.

namespace detail {

template <class Pred>
bool any_subterm(const Term& t, Pred&& pred) {
  std::vector<const TermNode*> work{t.raw()};
  while (!work.empty()) {
    const TermNode* n = work.back();
    work.pop_back();
    if (!n) continue;
    if (pred(*n)) return true;
    if (n->kind == TermNode::Kind::App) {
      work.push_back(n->fun.raw());
      work.push_back(n->arg.raw());
    }
  }
  return false;
}

}  // namespace detail

// Proof-like terms contain no a, no p, no indexed constant and no oracle
// constant; the elimination and pairing instructions are allowed.
inline bool is_proof_like(const Term& t) {
  return !detail::any_subterm(t, [](const TermNode& n) {
    if (n.kind == TermNode::Kind::HConst || n.kind == TermNode::Kind::Oracle)
      return true;
    return n.kind == TermNode::Kind::Instr &&
           (n.instr == Instr::A || n.instr == Instr::P);
  });
}

inline bool occurs_h(std::uint64_t index, const Term& t) {
  return detail::any_subterm(t, [index](const TermNode& n) {
    return n.kind == TermNode::Kind::HConst && n.h_index == index;
  });
}

inline bool occurs_h(std::uint64_t index, const Process& p) {
  if (occurs_h(index, p.head)) return true;
  for (std::size_t i = 0; i < p.stack.size(); ++i)
    if (occurs_h(index, p.stack.item(i))) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Numerals and continuation terms.

inline const Term& zero_term() {
  static const Term z = Term::app(instr_term(Instr::K), instr_term(Instr::I));
  return z;
}

// s = (B W)(B B); the successor iterates its first argument once more.
inline const Term& succ_term() {
  static const Term s =
      Term::app(Term::app(instr_term(Instr::B), instr_term(Instr::W)),
                Term::app(instr_term(Instr::B), instr_term(Instr::B)));
  return s;
}

inline Term numeral(std::uint64_t n) {
  Term t = zero_term();
  for (std::uint64_t i = 0; i < n; ++i) t = Term::app(succ_term(), t);
  return t;
}

// k_{pi0} = a and k_{t.pi} = (C)((B)k_pi) t; applying the result to xi on any
// stack runs back to xi * pi. The recurrence consumes the stack front-first,
// so the builder folds from the bottom of the stack up.
inline Term k_term(const Stack& pi) {
  Term k = instr_term(Instr::A);
  for (std::size_t i = pi.size(); i > 0; --i) {
    k = Term::app(
        Term::app(instr_term(Instr::C), Term::app(instr_term(Instr::B), k)),
        pi.item(i - 1));
  }
  return k;
}

// Unwraps frak-c applications down to a certificate payload, if the term is
// such a chain.
inline std::optional<CondSeq> cert_chain_payload(const Term& t) {
  const Term* cur = &t;
  while (cur->is_app() && cur->fun().is_instr(Instr::FrakC)) cur = &cur->arg();
  if (cur->is_cert()) return cur->cert_payload();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Concrete syntax.
//
//   term := atom | term atom | "(" term ")" atom?
//   atoms: B C I K W cc a p gamma kappa e chi chi' frak-c, hN, n:N,
//          any other identifier (an oracle constant, e.g. delta).
//
// Application is left-associative; whitespace separates atoms.

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)),
        position(pos) {}
  std::size_t position;
};

namespace detail {

struct Token {
  enum class Kind { LParen, RParen, Ident, Numeral, Lambda, Dot, End };
  Kind kind;
  std::string text;
  std::uint64_t value = 0;
  std::size_t pos = 0;
};

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' ||
         c == '-';
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    tok_.pos = pos_;
    if (pos_ >= text_.size()) {
      tok_.kind = Token::Kind::End;
      return;
    }
    char c = text_[pos_];
    if (c == '(') {
      tok_.kind = Token::Kind::LParen;
      ++pos_;
      return;
    }
    if (c == ')') {
      tok_.kind = Token::Kind::RParen;
      ++pos_;
      return;
    }
    if (c == '\\') {
      tok_.kind = Token::Kind::Lambda;
      ++pos_;
      return;
    }
    if (c == '.') {
      tok_.kind = Token::Kind::Dot;
      ++pos_;
      return;
    }
    if (ident_start(c)) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
      std::string word(text_.substr(start, pos_ - start));
      // numeral sugar n:N
      if (word == "n" && pos_ < text_.size() && text_[pos_] == ':') {
        ++pos_;
        if (pos_ >= text_.size() ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_])))
          throw ParseError("expected digits after 'n:'", pos_);
        std::uint64_t v = 0;
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          v = v * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
          ++pos_;
        }
        tok_.kind = Token::Kind::Numeral;
        tok_.value = v;
        return;
      }
      tok_.kind = Token::Kind::Ident;
      tok_.text = std::move(word);
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_;
};

inline std::optional<Instr> instr_by_name(std::string_view name) {
  for (int i = 0; i < kInstrCount; ++i) {
    Instr in = static_cast<Instr>(i);
    if (instr_name(in) == name) return in;
  }
  return std::nullopt;
}

// hN with N decimal.
inline std::optional<std::uint64_t> h_const_index(std::string_view name) {
  if (name.size() < 2 || name[0] != 'h') return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(name[i] - '0');
  }
  return v;
}

inline Term parse_term_atom(const Token& t) {
  if (t.kind == Token::Kind::Numeral) return numeral(t.value);
  if (auto in = instr_by_name(t.text)) return instr_term(*in);
  if (auto idx = h_const_index(t.text)) return Term::h(*idx);
  return Term::oracle(t.text);
}

inline Term parse_term_seq(Lexer& lex, bool toplevel);

inline std::optional<Term> parse_term_one(Lexer& lex) {
  const Token& t = lex.peek();
  switch (t.kind) {
    case Token::Kind::LParen: {
      lex.next();
      Term inner = parse_term_seq(lex, false);
      if (lex.peek().kind != Token::Kind::RParen)
        throw ParseError("expected ')'", lex.peek().pos);
      lex.next();
      return inner;
    }
    case Token::Kind::Ident:
    case Token::Kind::Numeral:
      return parse_term_atom(lex.next());
    default:
      return std::nullopt;
  }
}

inline Term parse_term_seq(Lexer& lex, bool toplevel) {
  std::optional<Term> acc = parse_term_one(lex);
  if (!acc) throw ParseError("expected a term", lex.peek().pos);
  while (true) {
    std::optional<Term> nxt = parse_term_one(lex);
    if (!nxt) break;
    acc = Term::app(std::move(*acc), std::move(*nxt));
  }
  if (toplevel && lex.peek().kind != Token::Kind::End)
    throw ParseError("unexpected trailing input", lex.peek().pos);
  return *acc;
}

}  // namespace detail

inline Term parse_term(std::string_view text) {
  detail::Lexer lex(text);
  return detail::parse_term_seq(lex, true);
}

inline std::string print_term(const Term& t);

namespace detail {

inline void print_term_into(const Term& t, std::string& out) {
  // Explicit work stack; application spines can be deep.
  struct Item {
    const TermNode* node;
    const char* lit;
  };
  std::vector<Item> work{{t.raw(), nullptr}};
  while (!work.empty()) {
    Item it = work.back();
    work.pop_back();
    if (it.lit) {
      out += it.lit;
      continue;
    }
    const TermNode* n = it.node;
    if (!n) {
      out += "<null>";
      continue;
    }
    switch (n->kind) {
      case TermNode::Kind::App: {
        const TermNode* a = n->arg.raw();
        bool paren = a && a->kind == TermNode::Kind::App;
        if (paren) work.push_back({nullptr, ")"});
        work.push_back({a, nullptr});
        if (paren) work.push_back({nullptr, "("});
        work.push_back({nullptr, " "});
        work.push_back({n->fun.raw(), nullptr});
        break;
      }
      case TermNode::Kind::Instr:
        out += instr_name(n->instr);
        break;
      case TermNode::Kind::HConst:
        out += "h" + std::to_string(n->h_index);
        break;
      case TermNode::Kind::Oracle:
        out += n->oracle;
        break;
      case TermNode::Kind::Cert:
        out += "cert{" + cond_seq_to_string(n->cert) + "}";
        break;
    }
  }
}

}  // namespace detail

inline std::string print_term(const Term& t) {
  std::string out;
  detail::print_term_into(t, out);
  return out;
}

inline std::string print_stack(const Stack& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += print_term(s.item(i));
    out += " \xc2\xb7 ";
  }
  out += "\xcf\x80""0";
  return out;
}

inline std::string print_process(const Process& p) {
  return print_term(p.head) + " \xe2\x8b\x86 " + print_stack(p.stack);
}

}  // namespace crvm
