#pragma once

#include "pipmc/grammar.hpp"

#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace pipmc {

/// Switch process of a DTMC state: t(s).
inline Symbol transition_process(Symbol state) { return Symbol("t(" + state.str() + ")"); }

/// Reachability goals reach(s,t) over a DTMC.
///
/// Outcomes whose successor cannot reach the target are dropped, since the
/// corresponding goal has no productions.
class ReachProvider : public GoalProvider
{
public:
  explicit ReachProvider(const Dtmc& model) : model_(model)
  {
    for (Symbol s : model_.states)
      if (model_.successors(s))
        processes_.emplace(transition_process(s), s);
  }

  Symbol goal(Symbol from, Symbol to)
  {
    for (Symbol s : {from, to})
      if (!model_.has_state(s))
        throw ModelError("unknown state '" + s.str() + "'");
    Symbol g("reach(" + from.str() + "," + to.str() + ")");
    goals_.try_emplace(g, from, to);
    return g;
  }

  std::vector<Production> expand(Symbol g) override
  {
    auto it = goals_.find(g);
    if (it == goals_.end())
      throw ModelError("not a reachability goal: " + g.str());
    auto [s, t] = it->second;
    std::vector<Production> out;
    if (s == t)
      out.push_back({g, {}});
    const auto& live = reaching(t);
    if (const auto* d = model_.successors(s)) {
      Symbol proc = transition_process(s);
      Instance next = Instance::base().extend(Symbol("next"));
      for (const auto& o : d->outcomes()) {
        if (o.prob == 0 || !live.contains(o.value))
          continue;
        out.push_back({g, {MswAtom{proc, Instance::base(), o.value}, ExplAtom{goal(o.value, t), next}}});
      }
    }
    return out;
  }

  const Distribution& distribution(Symbol process) const override
  {
    auto it = processes_.find(process);
    if (it == processes_.end())
      throw ModelError("unknown process " + process.str());
    return *model_.successors(it->second);
  }

  std::optional<Fixpoint> fixpoint(Symbol) const override { return Fixpoint::Least; }

private:
  /// States with a positive-probability path to t.
  const std::unordered_set<Symbol>& reaching(Symbol t)
  {
    if (auto it = reaching_.find(t); it != reaching_.end())
      return it->second;
    std::unordered_map<Symbol, std::vector<Symbol>> pred;
    for (Symbol s : model_.states)
      if (const auto* d = model_.successors(s))
        for (const auto& o : d->outcomes())
          if (o.prob > 0)
            pred[o.value].push_back(s);
    std::unordered_set<Symbol> seen{t};
    std::deque<Symbol> work{t};
    while (!work.empty()) {
      Symbol u = work.front();
      work.pop_front();
      for (Symbol p : pred[u])
        if (seen.insert(p).second)
          work.push_back(p);
    }
    return reaching_.emplace(t, std::move(seen)).first->second;
  }

  const Dtmc& model_;
  std::unordered_map<Symbol, Symbol> processes_;
  std::unordered_map<Symbol, std::pair<Symbol, Symbol>> goals_;
  std::unordered_map<Symbol, std::unordered_set<Symbol>> reaching_;
};

/// Synthetic start goal whose explanations are the union of the alternatives'.
inline Symbol add_disjunction(ExplGrammar& grammar, const std::vector<Symbol>& alternatives)
{
  if (alternatives.size() == 1)
    return alternatives.front();
  std::string name = "or(";
  for (std::size_t i = 0; i < alternatives.size(); ++i)
    name += (i ? "," : "") + alternatives[i].str();
  Symbol g(name + ")");
  if (grammar.expanded(g))
    return g;
  std::vector<Production> prods;
  for (Symbol a : alternatives)
    prods.push_back({g, {ExplAtom{a, Instance::base()}}});
  grammar.add(g, std::move(prods));
  return g;
}

} // namespace pipmc
