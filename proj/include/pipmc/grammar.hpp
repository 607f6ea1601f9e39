#pragma once

#include "pipmc/error.hpp"
#include "pipmc/instance.hpp"
#include "pipmc/model.hpp"
#include "pipmc/symbol.hpp"

#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace pipmc {

enum class Fixpoint { Least, Greatest };

inline const char* to_string(Fixpoint k) { return k == Fixpoint::Least ? "lfp" : "gfp"; }

/// Terminal msw(process, at, outcome). `at` is an offset from the head's base;
/// `anchored == false` marks an instance that does not extend the head base.
struct MswAtom
{
  Symbol process;
  Instance at;
  Symbol outcome;
  bool anchored = true;
};

/// Nonterminal expl(goal, at).
struct ExplAtom
{
  Symbol goal;
  Instance at;
  bool anchored = true;
};

using BodySymbol = std::variant<MswAtom, ExplAtom>;

struct Production
{
  Symbol head;
  std::vector<BodySymbol> body;
};

/// Goal-expansion contract implemented by the front-ends. Goals are ground
/// terms with the instance argument abstracted away.
class GoalProvider
{
public:
  virtual ~GoalProvider() = default;

  /// All productions whose head is `goal`, with body instances relative to the head base.
  virtual std::vector<Production> expand(Symbol goal) = 0;

  virtual const Distribution& distribution(Symbol process) const = 0;

  /// Fixpoint kind for the goal's equation, when the front-end fixes one.
  virtual std::optional<Fixpoint> fixpoint(Symbol) const { return std::nullopt; }
};

/// Explanation generator: productions grouped by head goal, expanded on
/// demand and memoized. Cyclic goal references are fine.
class ExplGrammar
{
public:
  explicit ExplGrammar(GoalProvider& provider) : provider_(&provider) {}

  GoalProvider& provider() const { return *provider_; }

  const std::vector<Production>& expand(Symbol goal)
  {
    if (auto it = groups_.find(goal); it != groups_.end())
      return it->second;
    std::vector<Production> prods;
    try {
      prods = provider_->expand(goal);
    } catch (const Error& e) {
      throw ExpansionError("cannot expand " + goal.str() + ": " + e.what());
    }
    order_.push_back(goal);
    production_count_ += prods.size();
    return groups_.emplace(goal, std::move(prods)).first->second;
  }

  /// Expands every goal reachable from `start`.
  void close(Symbol start)
  {
    std::deque<Symbol> work{start};
    while (!work.empty()) {
      Symbol g = work.front();
      work.pop_front();
      if (groups_.contains(g))
        continue;
      for (const auto& p : expand(g))
        for (const auto& sym : p.body)
          if (const auto* e = std::get_if<ExplAtom>(&sym); e && !groups_.contains(e->goal))
            work.push_back(e->goal);
    }
  }

  bool expanded(Symbol goal) const { return groups_.contains(goal); }

  const std::vector<Production>& productions(Symbol goal) const { return groups_.at(goal); }

  /// Expanded goals in discovery order.
  const std::vector<Symbol>& goals() const { return order_; }

  std::size_t production_count() const { return production_count_; }

  /// Adds a hand-built production group; used for synthetic start goals and tests.
  void add(Symbol goal, std::vector<Production> prods)
  {
    if (groups_.contains(goal))
      throw ExpansionError("goal " + goal.str() + " already has productions");
    order_.push_back(goal);
    production_count_ += prods.size();
    groups_.emplace(goal, std::move(prods));
  }

  /// One production per line in DCG notation, instances as token paths.
  std::string dump() const
  {
    std::string out;
    for (Symbol g : order_)
      for (const auto& p : groups_.at(g))
        out += to_dcg(p) + "\n";
    return out;
  }

  static std::string instance_text(Instance h, bool anchored)
  {
    if (anchored)
      return h.to_string();
    if (h.is_base())
      return "_K";
    std::string s = h.to_string();
    s.pop_back();
    return s + "|_K]";
  }

  static std::string to_dcg(const Production& p)
  {
    std::string s = "expl(" + p.head.str() + ",[]) --> ";
    if (p.body.empty())
      return s + "[].";
    for (std::size_t i = 0; i < p.body.size(); ++i) {
      if (i)
        s += ", ";
      if (const auto* m = std::get_if<MswAtom>(&p.body[i]))
        s += "[msw(" + m->process.str() + "," + instance_text(m->at, m->anchored) + "," + m->outcome.str() + ")]";
      else {
        const auto& e = std::get<ExplAtom>(p.body[i]);
        s += "expl(" + e.goal.str() + "," + instance_text(e.at, e.anchored) + ")";
      }
    }
    return s + ".";
  }

private:
  GoalProvider* provider_;
  std::unordered_map<Symbol, std::vector<Production>> groups_;
  std::vector<Symbol> order_;
  std::size_t production_count_ = 0;
};

struct TemporalReport
{
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks temporal well-formedness of every expanded production: body
/// instances extend the head base and all non-instance arguments are ground.
inline TemporalReport validate_temporal(const ExplGrammar& grammar)
{
  TemporalReport report;
  for (Symbol g : grammar.goals())
    for (const auto& p : grammar.productions(g)) {
      auto flag = [&](const std::string& why) { report.violations.push_back(ExplGrammar::to_dcg(p) + "  -- " + why); };
      if (!is_ground(p.head.str()))
        flag("head goal is not ground");
      for (const auto& sym : p.body) {
        if (const auto* m = std::get_if<MswAtom>(&sym)) {
          if (!m->anchored)
            flag("msw instance does not extend the head instance");
          if (!is_ground(m->process.str()) || !is_ground(m->outcome.str()))
            flag("msw atom " + m->process.str() + "/" + m->outcome.str() + " is not ground");
        } else {
          const auto& e = std::get<ExplAtom>(sym);
          if (!e.anchored)
            flag("expl instance does not extend the head instance");
          if (!is_ground(e.goal.str()))
            flag("goal " + e.goal.str() + " is not ground");
        }
      }
    }
  return report;
}

} // namespace pipmc
