#pragma once

#include "pipmc/engine.hpp"
#include "pipmc/error.hpp"
#include "pipmc/gpl.hpp"
#include "pipmc/model.hpp"
#include "pipmc/montecarlo.hpp"
#include "pipmc/oracle.hpp"
#include "pipmc/pctl.hpp"
#include "pipmc/reach.hpp"
#include "pipmc/rmc.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pipmc::cli {

struct RunConfig
{
  double epsilon = 1e-10;
  std::size_t max_iters = 1000000;
  std::size_t merge_cap = 100000;
  std::string method = "newton";
  bool dump_grammar = false;
  std::string dump_feds; // DOT output path, empty for none
  bool dump_eqns = false;
  bool json = false;
  bool oracle = false;
  std::size_t oracle_bound = 60;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;

  EngineConfig engine() const
  {
    if (!(epsilon > 0))
      throw Error("--epsilon must be positive");
    if (max_iters == 0 || merge_cap == 0)
      throw Error("--max-iters and --merge-cap must be positive");
    EngineConfig c;
    c.solve.epsilon = epsilon;
    c.solve.max_iters = max_iters;
    c.solve.method = method == "kleene" ? SolveMethod::Kleene : SolveMethod::Newton;
    c.fed.merge_cap = merge_cap;
    return c;
  }
};

struct VarRow
{
  std::string var;
  std::string goal;
  double value = 0;
  std::string kind;
  std::size_t iterations = 0;
  double residual = 0;
};

struct Report
{
  std::string command;
  std::string query;
  std::string state;
  std::optional<double> probability;
  std::optional<bool> verdict;
  std::size_t iterations = 0;
  double residual = 0;
  std::size_t productions = 0;
  std::size_t fed_nodes = 0;
  std::size_t merges = 0;
  std::vector<VarRow> vars;
  std::optional<double> oracle_enumeration;
  bool oracle_enumeration_truncated = false;
  std::optional<McEstimate> oracle_simulation;
  std::vector<std::string> warnings;
  double wall_seconds = 0;
  std::string dumps; // text printed ahead of the report
};

inline std::string format_number(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Argument that is either a literal or the path of a file holding it.
inline std::string literal_or_file(const std::string& arg)
{
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec))
    return read_file(arg);
  return arg;
}

namespace detail {

inline void fill(Report& r, const RunResult& run)
{
  r.probability = run.probability;
  r.iterations = run.solution.iterations;
  r.residual = run.solution.residual;
  r.productions = run.productions;
  r.fed_nodes = run.fed_nodes;
  r.merges = run.merges;
  r.warnings = run.solution.warnings;
  r.vars.clear();
  for (std::uint32_t i = 0; i < run.system.vars.size(); ++i) {
    const auto& v = run.system.vars[i];
    r.vars.push_back({v.name, v.label, run.solution.values[i], v.kind == Fixpoint::Greatest ? "gfp" : "lfp",
                      run.solution.var_iterations[i], run.solution.var_residual[i]});
  }
}

inline void dumps(Report& r, const RunConfig& cfg, Pipeline& pl, const RunResult& run)
{
  if (cfg.dump_grammar)
    r.dumps += pl.grammar().dump();
  if (!cfg.dump_feds.empty()) {
    std::ofstream out(cfg.dump_feds);
    if (!out)
      throw Error("cannot write '" + cfg.dump_feds + "'");
    out << pl.store().to_dot();
  }
  if (cfg.dump_eqns)
    r.dumps += run.system.dump();
}

inline void enumeration_oracle(Report& r, const RunConfig& cfg, Pipeline& pl, Symbol start)
{
  auto m = oracle_mass(pl.grammar(), start, cfg.oracle_bound);
  r.oracle_enumeration = m.probability;
  r.oracle_enumeration_truncated = m.truncated;
}

inline McConfig mc_config(const RunConfig& cfg) { return {cfg.paths, 100000, cfg.seed}; }

} // namespace detail

/// Probability of reaching `to` (or any of `also`) from `from`.
inline Report cmd_reach(const Dtmc& m, Symbol from, Symbol to, const std::vector<Symbol>& also, const RunConfig& cfg)
{
  Report r;
  r.command = "reach";
  r.state = from.str();
  ReachProvider provider(m);
  Pipeline pl(provider, cfg.engine());
  std::vector<Symbol> targets{to};
  targets.insert(targets.end(), also.begin(), also.end());
  std::vector<Symbol> goals;
  for (Symbol t : targets)
    goals.push_back(provider.goal(from, t));
  Symbol start = add_disjunction(pl.grammar(), goals);
  r.query = start.str();
  RunResult run = pl.run(start);
  detail::fill(r, run);
  detail::dumps(r, cfg, pl, run);
  if (cfg.oracle) {
    detail::enumeration_oracle(r, cfg, pl, start);
    r.oracle_simulation = simulate_reach(m, from, targets, detail::mc_config(cfg));
  }
  return r;
}

/// PCTL state formula (verdict, plus probability when pr-rooted) or path
/// formula (probability) at state s.
inline Report cmd_pctl(const Dtmc& m, const std::string& formula, Symbol s, const RunConfig& cfg)
{
  Report r;
  r.command = "pctl";
  r.state = s.str();
  Term t = parse_term(formula);
  r.query = t.str();
  PctlChecker checker(m, cfg.engine());
  std::optional<Term> pf;
  if (PctlChecker::is_path_formula(t)) {
    checker.validate_path(t);
    pf = t;
  } else {
    checker.validate_state(t);
    r.verdict = checker.holds(t, s);
    if (t.is("pr", 3))
      pf = t.args[0];
  }
  if (!pf) {
    if (cfg.dump_grammar || cfg.dump_eqns || !cfg.dump_feds.empty() || cfg.oracle)
      r.warnings.push_back("dumps and oracles need a pr-rooted or path formula");
    return r;
  }
  const RunResult& run = checker.result(*pf, s);
  detail::fill(r, run);
  detail::dumps(r, cfg, checker.pipeline(*pf), run);
  if (cfg.oracle) {
    detail::enumeration_oracle(r, cfg, checker.pipeline(*pf), checker.goal(*pf, s));
    if (pf->is("until", 2)) {
      Term a = pf->args[0], b = pf->args[1];
      r.oracle_simulation = simulate_until(
          m, s, [&](Symbol x) { return checker.holds(a, x); }, [&](Symbol x) { return checker.holds(b, x); },
          detail::mc_config(cfg));
    }
  }
  return r;
}

/// GPL query at state s: a fuzzy formula (probability) or a state formula
/// (verdict, plus probability when pr-rooted).
inline Report cmd_gpl(const Rplts& m, const std::string& defs_text, const std::string& query, Symbol s,
                      const RunConfig& cfg)
{
  Report r;
  r.command = "gpl";
  r.state = s.str();
  GplChecker checker(m, parse_gpl_defs(defs_text), cfg.engine());
  Term q = parse_term(query);
  std::optional<Term> pf;
  // and/or/tt/ff read as fuzzy unless every leaf is a state-only connective
  std::function<bool(const Term&)> state_only = [&](const Term& t) {
    if (t.is("pr", 3) || t.is("neg", 1) || t.is("prop", 1))
      return true;
    return (t.is("and", 2) || t.is("or", 2)) && state_only(t.args[0]) && state_only(t.args[1]);
  };
  if (state_only(q)) {
    Term sf = checker.normalize_state(q);
    r.query = sf.str();
    r.verdict = checker.holds(sf, s);
    if (sf.is("pr", 3))
      pf = sf.args[0];
  } else {
    pf = checker.normalize_fuzzy(q);
    r.query = pf->str();
  }
  if (!pf) {
    if (cfg.dump_grammar || cfg.dump_eqns || !cfg.dump_feds.empty() || cfg.oracle)
      r.warnings.push_back("dumps and oracles need a pr-rooted or fuzzy formula");
    return r;
  }
  const RunResult& run = checker.result(*pf, s);
  detail::fill(r, run);
  detail::dumps(r, cfg, checker.pipeline(*pf), run);
  if (cfg.oracle)
    detail::enumeration_oracle(r, cfg, checker.pipeline(*pf), checker.goal(*pf, s));
  return r;
}

/// Probability that the RMC started at `where` terminates through exit `exit`
/// (1-based) of the component it starts in.
inline Report cmd_rmc(const Rmc& rmc, const std::string& where, std::size_t exit, const RunConfig& cfg)
{
  Report r;
  r.command = "rmc";
  Symbol s = rmc_start_state(rmc, where);
  r.state = s.str();
  if (exit < 1 || exit > rmc.max_exits())
    throw Error("exit index " + std::to_string(exit) + " outside 1.." + std::to_string(rmc.max_exits()));
  Rplts system = rmc_to_rplts(rmc);
  GplChecker checker(system, parse_gpl_defs(rmc_exit_formulae(rmc.max_exits())), cfg.engine());
  Term pf = parse_term("form(X" + std::to_string(exit) + ")");
  r.query = pf.str();
  const RunResult& run = checker.result(pf, s);
  detail::fill(r, run);
  detail::dumps(r, cfg, checker.pipeline(pf), run);
  if (cfg.oracle) {
    detail::enumeration_oracle(r, cfg, checker.pipeline(pf), checker.goal(pf, s));
    if (const auto* c = rmc.find(Symbol(where))) {
      auto est = simulate_rmc(rmc, c->name, detail::mc_config(cfg));
      if (exit <= est.size())
        r.oracle_simulation = est[exit - 1];
    }
  }
  return r;
}

/// Solves a raw equation file; the first variable is the reported value.
inline Report cmd_solve(const std::string& text, const RunConfig& cfg)
{
  Report r;
  r.command = "solve";
  PolySystem sys = parse_eqn(text);
  if (sys.vars.empty())
    throw Error("no equations");
  r.query = sys.vars.front().name;
  RunResult run;
  run.solution = solve(sys, cfg.engine().solve);
  run.probability = run.solution.values.front();
  run.system = std::move(sys);
  detail::fill(r, run);
  if (cfg.dump_eqns)
    r.dumps += run.system.dump();
  return r;
}

inline nlohmann::json to_json(const Report& r)
{
  nlohmann::json j;
  j["command"] = r.command;
  j["query"] = r.query;
  j["state"] = r.state;
  j["probability"] = r.probability ? nlohmann::json(*r.probability) : nlohmann::json(nullptr);
  j["verdict"] = r.verdict ? nlohmann::json(*r.verdict) : nlohmann::json(nullptr);
  j["iterations"] = r.iterations;
  j["residual"] = r.residual;
  j["counts"] = {{"productions", r.productions}, {"fed_nodes", r.fed_nodes}, {"merges", r.merges}, {"vars", r.vars.size()}};
  auto vars = nlohmann::json::array();
  for (const auto& v : r.vars)
    vars.push_back({{"var", v.var}, {"goal", v.goal}, {"value", v.value}, {"kind", v.kind},
                    {"iterations", v.iterations}, {"residual", v.residual}});
  j["vars"] = vars;
  if (r.oracle_enumeration || r.oracle_simulation) {
    nlohmann::json o;
    if (r.oracle_enumeration)
      o["enumeration"] = {{"probability", *r.oracle_enumeration}, {"truncated", r.oracle_enumeration_truncated}};
    if (r.oracle_simulation) {
      const auto& e = *r.oracle_simulation;
      o["simulation"] = {{"mean", e.mean}, {"std_error", e.std_error}, {"hits", e.hits}, {"paths", e.paths},
                         {"truncated", e.truncated}};
    }
    j["oracle"] = o;
  }
  if (!r.dumps.empty())
    j["dumps"] = r.dumps;
  j["warnings"] = r.warnings;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline std::string to_text(const Report& r)
{
  std::string out = r.dumps;
  out += "query: " + r.query + (r.state.empty() ? "" : " at " + r.state) + "\n";
  if (r.verdict)
    out += std::string("verdict: ") + (*r.verdict ? "true" : "false") + "\n";
  if (r.probability)
    out += "probability: " + format_number(*r.probability) + "\n";
  if (r.command == "solve")
    for (const auto& v : r.vars)
      out += v.var + " = " + format_number(v.value) + (v.kind == "gfp" ? " (gfp)" : "") + "\n";
  if (r.probability) {
    out += "iterations: " + std::to_string(r.iterations) + "  residual: " + format_number(r.residual) + "\n";
    out += "productions: " + std::to_string(r.productions) + "  fed nodes: " + std::to_string(r.fed_nodes) +
           "  merges: " + std::to_string(r.merges) + "  vars: " + std::to_string(r.vars.size()) + "\n";
  }
  if (r.oracle_enumeration)
    out += "oracle enumeration: " + format_number(*r.oracle_enumeration) +
           (r.oracle_enumeration_truncated ? " (truncated)" : "") + "\n";
  if (r.oracle_simulation)
    out += "oracle simulation: " + format_number(r.oracle_simulation->mean) + " +- " +
           format_number(r.oracle_simulation->std_error) + " (" + std::to_string(r.oracle_simulation->paths) +
           " paths)\n";
  for (const auto& w : r.warnings)
    out += "warning: " + w + "\n";
  out += "time: " + format_number(r.wall_seconds) + " s\n";
  return out;
}

/// Entry point of the pipmc binary; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Probabilistic model checking by explanation factoring"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--epsilon", cfg.epsilon, "Solver convergence threshold")->capture_default_str();
  app.add_option("--max-iters", cfg.max_iters, "Solver iteration limit")->capture_default_str();
  app.add_option("--merge-cap", cfg.merge_cap, "Most merge goals per query")->capture_default_str();
  app.add_option("--method", cfg.method, "Least fixed-point solver")
      ->check(CLI::IsMember({"newton", "kleene"}))
      ->capture_default_str();
  app.add_flag("--dump-grammar", cfg.dump_grammar, "Print the explanation grammar");
  app.add_option("--dump-feds", cfg.dump_feds, "Write the FEDs as DOT to this path");
  app.add_flag("--dump-eqns", cfg.dump_eqns, "Print the polynomial equations");
  app.add_flag("--json", cfg.json, "Print the report as JSON");
  app.add_flag("--oracle", cfg.oracle, "Cross-check by enumeration and simulation");
  app.add_option("--oracle-bound", cfg.oracle_bound, "Derivation steps for enumeration")->capture_default_str();
  app.add_option("--paths", cfg.paths, "Simulated paths")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Simulation seed")->capture_default_str();

  std::string model, a, b, c;
  std::vector<std::string> also;
  std::size_t exit = 1;

  auto* reach = app.add_subcommand("reach", "Reachability probability in a DTMC");
  reach->add_option("model", model, "DTMC file")->required();
  reach->add_option("from", a, "Start state")->required();
  reach->add_option("to", b, "Target state")->required();
  reach->add_option("--also", also, "Further target states (union)");

  auto* pctl = app.add_subcommand("pctl", "PCTL formula at a DTMC state");
  pctl->add_option("model", model, "DTMC file")->required();
  pctl->add_option("formula", a, "Formula or file holding it")->required();
  pctl->add_option("state", b, "State")->required();

  auto* gpl = app.add_subcommand("gpl", "GPL formula at an RPLTS state");
  gpl->add_option("model", model, "RPLTS file")->required();
  gpl->add_option("defs", a, "Definitions file")->required();
  gpl->add_option("state", b, "State")->required();
  gpl->add_option("query", c, "Formula or file holding it")->required();

  auto* rmc = app.add_subcommand("rmc", "RMC termination probability");
  rmc->add_option("model", model, "RMC file")->required();
  rmc->add_option("entry", a, "Component (its entry) or <component>.<node>")->required();
  rmc->add_option("exit", exit, "Exit index, from 1")->required();

  auto* solve_cmd = app.add_subcommand("solve", "Solve raw polynomial equations");
  solve_cmd->add_option("eqn", model, "Equation file or literal equations")->required();

  for (auto* sub : {reach, pctl, gpl, rmc, solve_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    auto t0 = std::chrono::steady_clock::now();
    Report r;
    if (*reach) {
      std::vector<Symbol> more;
      for (const auto& t : also)
        more.emplace_back(t);
      r = cmd_reach(parse_dtmc(read_file(model)), Symbol(a), Symbol(b), more, cfg);
    } else if (*pctl) {
      r = cmd_pctl(parse_dtmc(read_file(model)), literal_or_file(a), Symbol(b), cfg);
    } else if (*gpl) {
      r = cmd_gpl(parse_rplts(read_file(model)), read_file(a), literal_or_file(c), Symbol(b), cfg);
    } else if (*rmc) {
      r = cmd_rmc(parse_rmc(read_file(model)), a, exit, cfg);
    } else {
      r = cmd_solve(literal_or_file(model), cfg);
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.json)
      out << to_json(r).dump(2) << "\n";
    else
      out << to_text(r);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace pipmc::cli
