#include "pipmc/cli.hpp"
#include "pipmc/generators.hpp"

#include <chrono>
#include <iostream>

// CSV timing of bundled and generated queries; no thresholds are checked.

using namespace pipmc;

namespace {

void row(const std::string& name, const std::string& size, const std::function<RunResult()>& query)
{
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = query();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << name << "," << size << "," << cli::format_number(r.probability) << "," << r.productions << ","
            << r.fed_nodes << "," << r.merges << "," << r.system.vars.size() << "," << r.solution.iterations << ","
            << cli::format_number(secs) << "\n";
}

} // namespace

int main(int argc, char** argv)
{
  std::string models = argc > 1 ? argv[1] : PIPMC_MODELS;
  std::cout << "benchmark,size,probability,productions,fed_nodes,merges,vars,iterations,seconds\n";

  Dtmc fig1 = parse_dtmc(cli::read_file(models + "/fig1.dtmc"));
  row("fig1_reach", "5", [&] {
    ReachProvider p(fig1);
    Pipeline pl(p, {});
    return pl.run(p.goal(Symbol("s0"), Symbol("s3")));
  });

  Dtmc ky = parse_dtmc(cli::read_file(models + "/knuth_yao.dtmc"));
  for (int face = 1; face <= 6; ++face)
    row("knuth_yao_die" + std::to_string(face), std::to_string(ky.states.size()), [&] {
      PctlChecker c(ky);
      return c.result(parse_term("until(tt,prop(die" + std::to_string(face) + "))"), Symbol("s0"));
    });

  for (std::size_t n = 2; n <= 4; ++n)
    for (std::size_t k = 2; k <= 4; ++k) {
      Dtmc m = leader_election(n, k);
      row("leader_N" + std::to_string(n) + "K" + std::to_string(k), std::to_string(m.states.size()), [&] {
        PctlChecker c(m);
        return c.result(parse_term("until(tt,prop(elected))"), Symbol("round"));
      });
    }

  for (std::size_t n : {10, 20, 40, 80}) {
    Dtmc m = random_dtmc(n, 7);
    row("random_reach", std::to_string(n), [&] {
      ReachProvider p(m);
      Pipeline pl(p, {});
      return pl.run(p.goal(Symbol("s0"), m.states.back()));
    });
  }

  Rmc fig5 = parse_rmc(cli::read_file(models + "/fig5.rmc"));
  Rplts fig5_system = rmc_to_rplts(fig5);
  for (int exit = 1; exit <= 2; ++exit)
    row("fig5_X" + std::to_string(exit), std::to_string(fig5.components.size()), [&] {
      GplChecker c(fig5_system, parse_gpl_defs(rmc_exit_formulae(2)));
      return c.result(parse_term("form(X" + std::to_string(exit) + ")"), Symbol("A.en"));
    });
  return 0;
}
