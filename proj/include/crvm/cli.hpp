// Command-line surface: compile, run, trace, tree, extract, forcing checks
// and the demo corpus. Implemented against ostreams so the whole surface is
// testable in-process; outputs are byte-identical for identical inputs.
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crvm/extract.hpp"
#include "crvm/forcing.hpp"
#include "crvm/gen.hpp"
#include "crvm/lambda.hpp"
#include "crvm/machine.hpp"
#include "crvm/refmachine.hpp"

namespace crvm::cli {

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitStuckAtZero = 3;
constexpr int kExitAmbiguous = 4;
constexpr int kExitFail = 5;

namespace detail {

// `@path` loads the input from a file, anything else is the input itself.
inline std::string load_input(const std::string& arg) {
  if (arg.empty() || arg[0] != '@') return arg;
  std::ifstream in(arg.substr(1));
  if (!in) throw std::runtime_error("cannot open file: " + arg.substr(1));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline OracleConfig parse_oracle(const std::string& s) {
  if (s == "none") return OracleConfig::none();
  if (s == "collect") return OracleConfig::collector();
  if (s.rfind("check:", 0) == 0)
    return OracleConfig::checker(std::stoull(s.substr(6)));
  throw CLI::ValidationError("--oracle", "expected none|check:N|collect");
}

// Comma-separated machine terms, front first.
inline Stack parse_stack_flag(const std::string& s) {
  Stack out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string piece = s.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    bool blank = piece.find_first_not_of(" \t\n") == std::string::npos;
    if (!blank) out.push_back(parse_term(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string accept_text(const Accept& a) {
  if (a.kind == AcceptKind::Stop) return "accept(stop)";
  return "accept(oracle, value " + std::to_string(a.payload) + ")";
}

inline std::string steps_text(std::uint64_t n) {
  return std::to_string(n) + (n == 1 ? " step" : " steps");
}

inline nlohmann::json outcome_json(RunOutcome::Kind kind, const Accept& acc,
                                   StuckReason stuck, std::uint64_t steps) {
  nlohmann::json j;
  j["steps"] = steps;
  switch (kind) {
    case RunOutcome::Kind::Accept:
      j["outcome"] = "accept";
      j["kind"] = acc.kind == AcceptKind::Stop ? "stop" : "oracle";
      if (acc.kind == AcceptKind::Oracle) j["value"] = acc.payload;
      break;
    case RunOutcome::Kind::Stuck:
      j["outcome"] = "stuck";
      j["reason"] = std::string(stuck_reason_name(stuck));
      break;
    case RunOutcome::Kind::Fuel:
      j["outcome"] = "fuel";
      break;
    case RunOutcome::Kind::Fork:
      j["outcome"] = "fork";
      break;
  }
  return j;
}

inline std::string outcome_text(RunOutcome::Kind kind, const Accept& acc,
                                StuckReason stuck, std::uint64_t steps) {
  switch (kind) {
    case RunOutcome::Kind::Accept:
      return accept_text(acc) + " in " + steps_text(steps);
    case RunOutcome::Kind::Stuck:
      return "stuck(" + std::string(stuck_reason_name(stuck)) + ") after " +
             steps_text(steps);
    case RunOutcome::Kind::Fuel:
      return "fuel exhausted after " + steps_text(steps);
    case RunOutcome::Kind::Fork:
      return "fork encountered after " + steps_text(steps) +
             " (use the tree command)";
  }
  return "?";
}

inline std::string leaf_text(const ExecNode& n) {
  switch (n.leaf) {
    case ExecNode::Leaf::Accept:
      return n.accept.kind == AcceptKind::Stop
                 ? "accept:stop"
                 : "accept:oracle:" + std::to_string(n.accept.payload);
    case ExecNode::Leaf::Stuck:
      return "stuck:" + std::string(stuck_reason_name(n.stuck));
    case ExecNode::Leaf::Fuel: return "fuel";
    case ExecNode::Leaf::None: return n.children.empty() ? "open" : "";
  }
  return "";
}

// Flat node listing; children reference node ids, so arbitrarily deep trees
// serialize without nesting.
inline nlohmann::json tree_json(const ExecTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const ExecNode& n = tree.nodes[i];
    nlohmann::json jn;
    jn["id"] = i;
    jn["proc"] = print_process(n.proc);
    if (n.rule) jn["rule"] = n.rule;
    std::string leaf = leaf_text(n);
    if (!leaf.empty()) jn["leaf"] = leaf;
    jn["children"] = n.children;
    nodes.push_back(std::move(jn));
  }
  nlohmann::json j;
  j["format"] = 1;
  j["root"] = 0;
  j["steps"] = tree.steps;
  j["nodes"] = std::move(nodes);
  return j;
}

inline void tree_text(const ExecTree& tree, std::ostream& out) {
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const ExecNode& n = tree.nodes[i];
    out << "#" << i << " " << print_process(n.proc);
    if (n.rule) out << "  [rule " << n.rule << "]";
    std::string leaf = leaf_text(n);
    if (!leaf.empty()) out << "  <" << leaf << ">";
    if (!n.children.empty()) {
      out << "  ->";
      for (std::uint32_t c : n.children) out << " #" << c;
    }
    out << "\n";
  }
  out << "steps: " << tree.steps << "\n";
}

inline nlohmann::json obs_json(const ObsTree& t) {
  nlohmann::json j;
  switch (t.kind) {
    case ObsTree::Kind::Accept:
      j["outcome"] = "accept";
      j["kind"] = t.accept == AcceptKind::Stop ? "stop" : "oracle";
      if (t.accept == AcceptKind::Oracle) j["value"] = t.payload;
      break;
    case ObsTree::Kind::Stuck:
      j["outcome"] = "stuck";
      j["reason"] = std::string(stuck_reason_name(t.stuck));
      break;
    case ObsTree::Kind::Fuel:
      j["outcome"] = "fuel";
      break;
    case ObsTree::Kind::Fork: {
      j["outcome"] = "fork";
      nlohmann::json kids = nlohmann::json::array();
      for (const ObsTree& c : t.children) kids.push_back(obs_json(c));
      j["children"] = std::move(kids);
      break;
    }
  }
  return j;
}

inline void obs_text(const ObsTree& t, std::ostream& out, int depth) {
  for (int i = 0; i < depth; ++i) out << "  ";
  switch (t.kind) {
    case ObsTree::Kind::Accept:
      out << (t.accept == AcceptKind::Stop
                  ? std::string("accept:stop")
                  : "accept:oracle:" + std::to_string(t.payload));
      break;
    case ObsTree::Kind::Stuck:
      out << "stuck:" << stuck_reason_name(t.stuck);
      break;
    case ObsTree::Kind::Fuel:
      out << "fuel";
      break;
    case ObsTree::Kind::Fork:
      out << "fork";
      break;
  }
  out << "\n";
  for (const ObsTree& c : t.children) obs_text(c, out, depth + 1);
}

inline nlohmann::json extract_json(const ExtractReport& rep) {
  nlohmann::json j;
  j["format"] = 1;
  j["steps"] = rep.steps;
  switch (rep.kind) {
    case ExtractReport::Kind::Value:
      j["result"] = "value";
      j["value"] = rep.value;
      break;
    case ExtractReport::Kind::Ambiguous:
      j["result"] = "ambiguous";
      j["candidates"] = rep.candidates;
      break;
    case ExtractReport::Kind::Fail:
      j["result"] = "fail";
      j["reason"] = rep.reason == ExtractReport::FailReason::Fuel ? "fuel"
                    : rep.reason == ExtractReport::FailReason::Stuck
                        ? "stuck"
                        : "undecodable-leaf";
      break;
  }
  nlohmann::json branches = nlohmann::json::array();
  for (const BranchSummary& b : rep.branches) {
    nlohmann::json jb;
    jb["status"] = b.status;
    if (b.value) jb["value"] = *b.value;
    jb["payloads"] = b.payloads;
    jb["nodes"] = b.nodes;
    branches.push_back(std::move(jb));
  }
  j["branches"] = std::move(branches);
  return j;
}

inline std::string extract_headline(const ExtractReport& rep) {
  switch (rep.kind) {
    case ExtractReport::Kind::Value:
      return "value " + std::to_string(rep.value);
    case ExtractReport::Kind::Ambiguous: {
      std::string s = "ambiguous {";
      bool first = true;
      for (std::uint64_t v : rep.candidates) {
        if (!first) s += ", ";
        first = false;
        s += std::to_string(v);
      }
      return s + "}";
    }
    case ExtractReport::Kind::Fail:
      switch (rep.reason) {
        case ExtractReport::FailReason::Fuel: return "fail(fuel)";
        case ExtractReport::FailReason::Stuck: return "fail(stuck)";
        case ExtractReport::FailReason::UndecodableLeaf:
          return "fail(undecodable-leaf)";
      }
  }
  return "?";
}

struct Demo {
  const char* name;
  const char* command;  // pipeline it demonstrates
  const char* source;
  const char* expect;
};

inline const std::vector<Demo>& demos() {
  static const std::vector<Demo> d = {
      {"paper-gamma", "extract",
       "\\d. gamma"
       " (gamma (d n:3) (d n:3) (d n:5))"
       " (gamma (d n:5) (d n:3) (d n:5))"
       " (gamma (d n:3) (d n:5) (d n:5))",
       "value 5"},
      {"theta-double", "extract",
       "(\\x.\\y. cc (\\k. gamma (k x) (k y))) (\\x. x n:0) (\\x. x n:1)",
       "ambiguous {0, 1}"},
      {"numeral-iter", "extract",
       "\\d. d (n:2 (\\m.\\f.\\x. m f (f x)) n:3)", "value 5"},
      {"cont-restore", "run", "cc (\\k. k p) K I", "accept(stop)"},
  };
  return d;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"classical realizability virtual machine"};
  app.require_subcommand(1);

  std::string input, oracle_flag = "none", machine = "combinator";
  std::string system_name = "cohen", format = "text", stack_flag, law_flag;
  std::uint64_t fuel = 100000, seed = 0, trials = 500, law_fuel = 2000;
  bool no_eta = false;

  auto* c_compile = app.add_subcommand("compile", "translate a lambda term");
  c_compile->add_option("input", input)->required();
  c_compile->add_flag("--no-eta", no_eta);

  auto add_run_opts = [&](CLI::App* c) {
    c->add_option("input", input)->required();
    c->add_option("--fuel", fuel);
    c->add_option("--oracle", oracle_flag);
    c->add_option("--machine", machine)
        ->check(CLI::IsMember({"combinator", "reference"}));
    c->add_option("--stack", stack_flag);
    c->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
  };
  auto* c_run = app.add_subcommand("run", "run a term to its outcome");
  add_run_opts(c_run);
  auto* c_trace = app.add_subcommand("trace", "print every machine step");
  add_run_opts(c_trace);
  auto* c_tree = app.add_subcommand("tree", "expand the execution tree");
  add_run_opts(c_tree);

  auto* c_extract = app.add_subcommand("extract", "majority witness extraction");
  c_extract->add_option("input", input)->required();
  c_extract->add_option("--fuel", fuel);
  c_extract->add_option("--format", format)
      ->check(CLI::IsMember({"text", "json"}));

  auto* c_forcing = app.add_subcommand("forcing", "extension-algebra checks");
  c_forcing->require_subcommand(1);
  auto* c_laws = c_forcing->add_subcommand("laws", "closure laws of the pole");
  c_laws->add_option("--system", system_name);
  c_laws->add_option("--trials", trials);
  c_laws->add_option("--seed", seed);
  c_laws->add_option("--fuel", law_fuel);
  c_laws->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
  auto* c_star = c_forcing->add_subcommand("star", "star reduction laws");
  c_star->add_option("--law", law_flag);
  c_star->add_option("--trials", trials);
  c_star->add_option("--seed", seed);
  c_star->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  auto* c_demo = app.add_subcommand("demo", "run a shipped demo program");
  std::string demo_name = "list";
  c_demo->add_option("name", demo_name);
  c_demo->add_option("--fuel", fuel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*c_compile) {
      Term t = compile_lambda(detail::load_input(input), !no_eta);
      out << print_term(t) << "\n";
      return kExitOk;
    }

    if (*c_run || *c_trace || *c_tree) {
      OracleConfig cfg = detail::parse_oracle(oracle_flag);
      Stack stack = detail::parse_stack_flag(stack_flag);
      std::string text = detail::load_input(input);

      if (machine == "reference") {
        LamPtr t = parse_lambda(text);
        RefState st = ref_state_of(t, stack);
        if (*c_tree) {
          ObsTree obs = observe_ref(std::move(st), fuel, cfg);
          if (format == "json") {
            nlohmann::json j = detail::obs_json(obs);
            j["format"] = 1;
            out << j.dump(2) << "\n";
          } else {
            detail::obs_text(obs, out, 0);
          }
          return kExitOk;
        }
        std::vector<std::string> lines;
        std::uint64_t n = 0;
        RefRunOutcome ro = ref_run_linear_cb(
            std::move(st), fuel, cfg, [&](const RefState& q, int rule) {
              if (*c_trace) {
                ++n;
                lines.push_back("#" + std::to_string(n) + " " +
                                print_ref_state(q) + "  [rule " +
                                std::to_string(rule) + "]");
              }
            });
        for (const std::string& l : lines) out << l << "\n";
        if (format == "json") {
          nlohmann::json j =
              detail::outcome_json(ro.kind, ro.accept, ro.stuck, ro.steps);
          j["format"] = 1;
          out << j.dump(2) << "\n";
        } else {
          out << detail::outcome_text(ro.kind, ro.accept, ro.stuck, ro.steps)
              << "\n";
        }
        return ro.kind == RunOutcome::Kind::Stuck && ro.steps == 0
                   ? kExitStuckAtZero
                   : kExitOk;
      }

      Term t = parse_term(text);
      Process p{t, stack};
      if (*c_tree) {
        ExecTree tree = exec_tree(std::move(p), fuel, cfg);
        if (format == "json")
          out << detail::tree_json(tree).dump(2) << "\n";
        else
          detail::tree_text(tree, out);
        return kExitOk;
      }
      std::vector<std::string> lines;
      RunOutcome ro;
      if (*c_trace) {
        ro = run_trace(std::move(p), fuel, cfg, lines);
        for (const std::string& l : lines) out << l << "\n";
      } else {
        ro = run_linear(std::move(p), fuel, cfg);
      }
      if (format == "json") {
        nlohmann::json j =
            detail::outcome_json(ro.kind, ro.accept, ro.stuck, ro.steps);
        j["format"] = 1;
        j["final"] = print_process(ro.final);
        out << j.dump(2) << "\n";
      } else {
        out << detail::outcome_text(ro.kind, ro.accept, ro.stuck, ro.steps)
            << "\n";
      }
      return ro.kind == RunOutcome::Kind::Stuck && ro.steps == 0
                 ? kExitStuckAtZero
                 : kExitOk;
    }

    if (*c_extract) {
      Term t = compile_lambda(detail::load_input(input));
      ExtractReport rep = extract_witness(t, fuel);
      if (format == "json") {
        out << detail::extract_json(rep).dump(2) << "\n";
      } else {
        out << detail::extract_headline(rep) << "\n";
        out << "steps: " << rep.steps << "\n";
        for (std::size_t i = 0; i < rep.branches.size(); ++i) {
          const BranchSummary& b = rep.branches[i];
          out << "branch " << i << ": " << b.status;
          if (b.value) out << " " << *b.value;
          out << ", payloads [";
          for (std::size_t k = 0; k < b.payloads.size(); ++k) {
            if (k) out << ", ";
            out << b.payloads[k];
          }
          out << "]\n";
        }
      }
      if (rep.kind == ExtractReport::Kind::Value) return kExitOk;
      return rep.kind == ExtractReport::Kind::Ambiguous ? kExitAmbiguous
                                                        : kExitFail;
    }

    if (*c_laws) {
      ConditionSystem cs = ConditionSystem::by_name(system_name);
      ClosureLawReport rep = check_closure_laws(cs, trials, law_fuel, seed);
      if (format == "json") {
        nlohmann::json j;
        j["format"] = 1;
        j["system"] = rep.system;
        j["seed"] = rep.seed;
        j["trials"] = rep.trials;
        nlohmann::json laws = nlohmann::json::array();
        for (const ClosureLawResult& l : rep.laws) {
          laws.push_back({{"law", l.law},
                          {"samples", l.samples},
                          {"premise_certified", l.premise_certified},
                          {"vacuous", l.vacuous},
                          {"violations", l.violations}});
        }
        j["laws"] = std::move(laws);
        j["ok"] = rep.ok();
        out << j.dump(2) << "\n";
      } else {
        out << "system: " << rep.system << "  seed: " << rep.seed
            << "  trials: " << rep.trials << "\n";
        for (const ClosureLawResult& l : rep.laws) {
          out << "law " << l.law << ": premise-certified "
              << l.premise_certified << ", vacuous " << l.vacuous
              << ", violations " << l.violations << "\n";
        }
        out << (rep.ok() ? "result: ok" : "result: VIOLATIONS") << "\n";
      }
      return rep.ok() ? kExitOk : kExitViolations;
    }

    if (*c_star) {
      std::vector<std::string> laws =
          law_flag.empty() ? star_law_names() : std::vector<std::string>{law_flag};
      bool all_ok = true;
      nlohmann::json jlaws = nlohmann::json::array();
      for (const std::string& law : laws) {
        StarLawResult r = check_star_law(law, trials, seed);
        all_ok = all_ok && r.ok();
        if (format == "json") {
          jlaws.push_back(
              {{"law", r.law}, {"trials", r.trials}, {"passed", r.passed}});
        } else {
          out << "law " << r.law << ": " << r.passed << "/" << r.trials
              << " reductions match\n";
        }
      }
      if (format == "json") {
        nlohmann::json j;
        j["format"] = 1;
        j["seed"] = seed;
        j["laws"] = std::move(jlaws);
        j["ok"] = all_ok;
        out << j.dump(2) << "\n";
      } else {
        out << (all_ok ? "result: ok" : "result: VIOLATIONS") << "\n";
      }
      return all_ok ? kExitOk : kExitViolations;
    }

    if (*c_demo) {
      const auto& ds = detail::demos();
      if (demo_name == "list") {
        for (const auto& d : ds)
          out << d.name << "  (" << d.command << ")  expect: " << d.expect
              << "\n";
        return kExitOk;
      }
      for (const auto& d : ds) {
        if (demo_name != d.name) continue;
        out << "demo " << d.name << "\n";
        out << "source: " << d.source << "\n";
        if (std::string(d.command) == "extract") {
          Term t = compile_lambda(d.source);
          ExtractReport rep = extract_witness(t, fuel);
          std::string got = detail::extract_headline(rep);
          out << "result: " << got << "\n";
          return got == d.expect ? kExitOk : kExitFail;
        }
        Term t = compile_lambda(d.source);
        RunOutcome ro = run_linear(Process{t, Stack{}}, fuel, {});
        std::string got =
            ro.kind == RunOutcome::Kind::Accept ? detail::accept_text(ro.accept)
                                                : "no-accept";
        out << "result: " << got << "\n";
        return got == d.expect ? kExitOk : kExitFail;
      }
      err << "error: unknown demo '" << demo_name << "' (try: demo list)\n";
      return kExitUsage;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ElimError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace crvm::cli
