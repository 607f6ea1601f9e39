#pragma once

#include "pipmc/engine.hpp"
#include "pipmc/reach.hpp"
#include "pipmc/term.hpp"

#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace pipmc {

/// PCTL over a DTMC:
///
///   SF ::= tt | ff | prop(A) | neg(SF) | and(SF,SF) | pr(PF, gt|geq, B)
///   PF ::= until(SF,SF) | next(SF)
///
/// State formulas are two-valued; every pr(PF,..) is solved as its own query
/// starting at the base instance, memoized per (state, PF).
class PctlChecker
{
public:
  explicit PctlChecker(const Dtmc& model, EngineConfig config = {}) : model_(model), config_(config)
  {
    for (const auto& [s, props] : model_.labels)
      alphabet_.insert(props.begin(), props.end());
  }

  // the checker keeps a reference to the model
  explicit PctlChecker(Dtmc&&, EngineConfig = {}) = delete;

  static bool is_path_formula(const Term& t) { return t.is("until", 2) || t.is("next", 1); }

  /// Throws ParseError/ModelError unless `t` is a well-formed state formula.
  void validate_state(const Term& t) const
  {
    if (t.is("tt", 0) || t.is("ff", 0))
      return;
    if (t.is("prop", 1)) {
      if (!t.args[0].args.empty() || t.args[0].number)
        t.fail("proposition must be an identifier");
      if (!alphabet_.contains(Symbol(t.args[0].functor)))
        throw ModelError("unknown proposition '" + t.args[0].functor + "'");
      return;
    }
    if (t.is("neg", 1))
      return validate_state(t.args[0]);
    if (t.is("and", 2)) {
      validate_state(t.args[0]);
      return validate_state(t.args[1]);
    }
    if (t.is("pr", 3)) {
      validate_path(t.args[0]);
      const Term& op = t.args[1];
      if (!(op.is("gt", 0) || op.is("geq", 0)))
        op.fail("comparison must be gt or geq");
      if (!t.args[2].number || t.args[2].value < 0 || t.args[2].value > 1)
        t.args[2].fail("bound must be a number in [0,1]");
      return;
    }
    t.fail("not a PCTL state formula");
  }

  void validate_path(const Term& t) const
  {
    if (t.is("until", 2)) {
      validate_state(t.args[0]);
      return validate_state(t.args[1]);
    }
    if (t.is("next", 1))
      return validate_state(t.args[0]);
    t.fail("not a PCTL path formula");
  }

  bool holds(const Term& sf, Symbol s)
  {
    check_state(s);
    if (sf.is("tt", 0))
      return true;
    if (sf.is("ff", 0))
      return false;
    if (sf.is("prop", 1))
      return model_.holds(s, Symbol(sf.args[0].functor));
    if (sf.is("neg", 1))
      return !holds(sf.args[0], s);
    if (sf.is("and", 2))
      return holds(sf.args[0], s) && holds(sf.args[1], s);
    if (sf.is("pr", 3)) {
      double p = probability(sf.args[0], s);
      double b = sf.args[2].value;
      return sf.args[1].functor == "gt" ? p > b : p >= b;
    }
    validate_state(sf);
    return false;
  }

  double probability(const Term& pf, Symbol s) { return result(pf, s).probability; }

  /// Full run of the query for pf at s (solved on first use).
  const RunResult& result(const Term& pf, Symbol s)
  {
    check_state(s);
    std::string key = pf.str() + "@" + s.str();
    if (auto it = results_.find(key); it != results_.end())
      return it->second;
    Entry& e = entry(pf);
    RunResult r = e.pipeline->run(e.provider->goal(s));
    return results_.emplace(key, std::move(r)).first->second;
  }

  /// Pipeline shared by every query of `pf`.
  Pipeline& pipeline(const Term& pf) { return *entry(pf).pipeline; }

  Symbol goal(const Term& pf, Symbol s) { return entry(pf).provider->goal(s); }

private:
  class PathProvider : public GoalProvider
  {
  public:
    PathProvider(PctlChecker& checker, Term pf) : checker_(checker), pf_(std::move(pf)), spelling_(pf_.str())
    {
      for (Symbol s : checker_.model_.states)
        if (checker_.model_.successors(s))
          processes_.emplace(transition_process(s), s);
    }

    Symbol goal(Symbol s)
    {
      Symbol g("pmodels(" + s.str() + "," + spelling_ + ")");
      states_.try_emplace(g, s);
      return g;
    }

    std::vector<Production> expand(Symbol g) override
    {
      auto it = states_.find(g);
      if (it == states_.end())
        throw ModelError("not a goal of " + spelling_ + ": " + g.str());
      Symbol s = it->second;
      std::vector<Production> out;
      const Distribution* d = checker_.model_.successors(s);
      Symbol proc = transition_process(s);
      if (pf_.is("until", 2)) {
        if (checker_.holds(pf_.args[1], s)) {
          out.push_back({g, {}});
        } else if (checker_.holds(pf_.args[0], s) && d) {
          Instance next = Instance::base().extend(Symbol("next"));
          for (const auto& o : d->outcomes())
            if (o.prob > 0)
              out.push_back({g, {MswAtom{proc, Instance::base(), o.value}, ExplAtom{goal(o.value), next}}});
        }
      } else if (d) {
        for (const auto& o : d->outcomes())
          if (o.prob > 0 && checker_.holds(pf_.args[0], o.value))
            out.push_back({g, {MswAtom{proc, Instance::base(), o.value}}});
      }
      return out;
    }

    const Distribution& distribution(Symbol process) const override
    {
      auto it = processes_.find(process);
      if (it == processes_.end())
        throw ModelError("unknown process " + process.str());
      return *checker_.model_.successors(it->second);
    }

    std::optional<Fixpoint> fixpoint(Symbol) const override { return Fixpoint::Least; }

  private:
    PctlChecker& checker_;
    Term pf_;
    std::string spelling_;
    std::unordered_map<Symbol, Symbol> states_;
    std::unordered_map<Symbol, Symbol> processes_;
  };

  struct Entry
  {
    std::unique_ptr<PathProvider> provider;
    std::unique_ptr<Pipeline> pipeline;
  };

  Entry& entry(const Term& pf)
  {
    std::string key = pf.str();
    if (auto it = entries_.find(key); it != entries_.end())
      return it->second;
    validate_path(pf);
    Entry e;
    e.provider = std::make_unique<PathProvider>(*this, pf);
    e.pipeline = std::make_unique<Pipeline>(*e.provider, config_);
    return entries_.emplace(key, std::move(e)).first->second;
  }

  void check_state(Symbol s) const
  {
    if (!model_.has_state(s))
      throw ModelError("unknown state '" + s.str() + "'");
  }

  const Dtmc& model_;
  EngineConfig config_;
  std::unordered_set<Symbol> alphabet_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, RunResult> results_;
};

} // namespace pipmc
