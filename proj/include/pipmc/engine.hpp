#pragma once

#include "pipmc/eqsolve.hpp"
#include "pipmc/fed.hpp"
#include "pipmc/grammar.hpp"

#include <memory>

namespace pipmc {

struct EngineConfig
{
  SolveOptions solve;
  FedConfig fed;
};

struct RunResult
{
  double probability = 0;
  PolySystem system;
  Solution solution;
  std::size_t productions = 0;
  std::size_t fed_nodes = 0;
  std::size_t merges = 0;
};

/// Grammar, FED store and solver for one start goal.
class Pipeline
{
public:
  Pipeline(GoalProvider& provider, const EngineConfig& config)
      : grammar_(std::make_unique<ExplGrammar>(provider)),
        store_(std::make_unique<FedStore>(*grammar_, config.fed)), config_(config)
  {
  }

  ExplGrammar& grammar() { return *grammar_; }
  FedStore& store() { return *store_; }

  RunResult run(Symbol start)
  {
    RunResult r;
    r.system = assemble(*store_, start);
    r.solution = solve(r.system, config_.solve);
    r.probability = r.solution.values.at(0);
    r.productions = grammar_->production_count();
    r.fed_nodes = store_->size();
    r.merges = store_->merges().size();
    return r;
  }

private:
  std::unique_ptr<ExplGrammar> grammar_;
  std::unique_ptr<FedStore> store_;
  EngineConfig config_;
};

} // namespace pipmc
