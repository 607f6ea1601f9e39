#pragma once

#include "pipmc/grammar.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace pipmc {

/// Ground msw atom with an instance relative to the enumeration start.
struct GroundMsw
{
  Symbol process;
  Instance at;
  Symbol outcome;

  friend bool operator==(const GroundMsw&, const GroundMsw&) = default;
  friend bool operator<(const GroundMsw& a, const GroundMsw& b)
  {
    return std::make_tuple(a.process.id(), a.at.id(), a.outcome.id()) <
           std::make_tuple(b.process.id(), b.at.id(), b.outcome.id());
  }
};

using Explanation = std::vector<GroundMsw>; // sorted, duplicate-free

struct Enumeration
{
  std::vector<std::pair<Explanation, double>> explanations;
  double string_sum = 0;   // sum of per-explanation probabilities
  double probability = 0;  // probability of the union of all explanations
  bool truncated = false;  // some derivation was cut by the step bound or the cap
};

namespace detail {

class Enumerator
{
public:
  Enumerator(ExplGrammar& g, std::size_t max_steps, std::size_t cap) : grammar_(g), max_steps_(max_steps), cap_(cap) {}

  void run(Symbol goal, Instance at)
  {
    grammar_.close(goal);
    compute_min_steps();
    pending_.push_back({goal, at});
    pending_min_ = min_steps(goal);
    step(0);
  }

  std::set<Explanation> found;
  bool truncated = false;

private:
  struct Pending
  {
    Symbol goal;
    Instance at;
  };

  void step(std::size_t used)
  {
    if (found.size() >= cap_) {
      truncated = true;
      return;
    }
    if (pending_.empty()) {
      Explanation e;
      for (const auto& [key, outcome] : assignment_)
        e.push_back({Symbol(key.first), key.second, outcome});
      std::sort(e.begin(), e.end());
      found.insert(std::move(e));
      return;
    }
    if (pending_min_ >= unproductive)
      return; // some pending goal has no finite derivation
    if (used + pending_min_ > max_steps_) {
      truncated = true;
      return;
    }
    Pending head = pending_.back();
    pending_.pop_back();
    std::size_t head_min = min_steps(head.goal);
    pending_min_ -= head_min;
    for (const auto& p : grammar_.expand(head.goal))
      apply(p, head.at, used);
    pending_min_ += head_min;
    pending_.push_back(head);
  }

  static constexpr std::size_t unproductive = std::size_t(1) << 40;

  std::size_t min_steps(Symbol g) const
  {
    auto it = min_steps_.find(g);
    return it == min_steps_.end() ? unproductive : it->second;
  }

  // fewest production applications that fully derive each goal
  void compute_min_steps()
  {
    bool changed = true;
    while (changed) {
      changed = false;
      for (Symbol g : grammar_.goals()) {
        std::size_t best = min_steps(g);
        for (const auto& p : grammar_.productions(g)) {
          std::size_t n = 1;
          for (const auto& sym : p.body)
            if (const auto* e = std::get_if<ExplAtom>(&sym))
              n = std::min(unproductive, n + min_steps(e->goal));
          best = std::min(best, n);
        }
        if (best < min_steps(g)) {
          min_steps_[g] = best;
          changed = true;
        }
      }
    }
  }

  void apply(const Production& p, Instance base, std::size_t used)
  {
    std::vector<std::pair<std::string, Instance>> added;
    bool consistent = true;
    for (const auto& sym : p.body) {
      const auto* m = std::get_if<MswAtom>(&sym);
      if (!m)
        continue;
      Instance h = append(base, m->at);
      auto key = std::make_pair(m->process.str(), h);
      auto it = assignment_.find(key);
      if (it == assignment_.end()) {
        assignment_.emplace(key, m->outcome);
        added.push_back(key);
      } else if (!(it->second == m->outcome)) {
        consistent = false; // mutually exclusive pair: not an explanation
        break;
      }
    }
    if (consistent) {
      std::size_t mark = pending_.size();
      std::size_t saved_min = pending_min_;
      // leftmost derivation: push in reverse so the first nonterminal is on top
      for (auto it = p.body.rbegin(); it != p.body.rend(); ++it)
        if (const auto* e = std::get_if<ExplAtom>(&*it)) {
          pending_.push_back({e->goal, append(base, e->at)});
          pending_min_ = std::min(unproductive, pending_min_ + min_steps(e->goal));
        }
      step(used + 1);
      pending_.resize(mark);
      pending_min_ = saved_min;
    }
    for (const auto& key : added)
      assignment_.erase(key);
  }

  struct KeyLess
  {
    bool operator()(const std::pair<std::string, Instance>& a, const std::pair<std::string, Instance>& b) const
    {
      if (a.first != b.first)
        return a.first < b.first;
      return a.second.id() < b.second.id();
    }
  };

  ExplGrammar& grammar_;
  std::size_t max_steps_;
  std::size_t cap_;
  std::vector<Pending> pending_;
  std::size_t pending_min_ = 0; // sum of min_steps over pending_
  std::unordered_map<Symbol, std::size_t> min_steps_;
  std::map<std::pair<std::string, Instance>, Symbol, KeyLess> assignment_;
};

/// Probability of a union of conjunctions of msw atoms by Shannon expansion
/// on one (process, instance) variable at a time.
class UnionSolver
{
public:
  explicit UnionSolver(const GoalProvider& provider) : provider_(provider) {}

  void add(const Explanation& s)
  {
    std::vector<Atom> atoms;
    for (const auto& a : s) {
      auto [pit, new_process] = process_of_.emplace(a.process.id(), static_cast<std::uint32_t>(probs_.size()));
      if (new_process) {
        std::vector<std::pair<Symbol, double>> outs;
        for (const auto& o : provider_.distribution(a.process).outcomes())
          outs.emplace_back(o.value, o.prob);
        probs_.push_back(std::move(outs));
      }
      const auto& outs = probs_[pit->second];
      auto k = std::find_if(outs.begin(), outs.end(), [&](const auto& o) { return o.first == a.outcome; });
      if (k == outs.end())
        throw ModelError("outcome " + a.outcome.str() + " is not in the distribution of " + a.process.str());
      if (k->second == 1.0)
        continue; // certain atoms constrain nothing
      auto key = std::make_pair(a.process.id(), a.at.id());
      auto [vit, new_var] = var_of_.emplace(key, static_cast<std::uint32_t>(var_process_.size()));
      if (new_var)
        var_process_.push_back(pit->second);
      atoms.push_back({vit->second, static_cast<std::uint32_t>(k - outs.begin())});
    }
    certain_ |= atoms.empty();
    sets_.push_back(std::move(atoms));
  }

  double run()
  {
    if (certain_)
      return 1.0;
    assigned_.assign(var_process_.size(), unassigned);
    mentions_.assign(var_process_.size(), 0);
    std::vector<std::uint32_t> alive(sets_.size());
    for (std::uint32_t i = 0; i < alive.size(); ++i)
      alive[i] = i;
    return expand(alive);
  }

private:
  struct Atom
  {
    std::uint32_t var;
    std::uint32_t outcome;
  };
  static constexpr std::uint32_t unassigned = ~std::uint32_t(0);

  double prob(std::uint32_t var, std::uint32_t outcome) const { return probs_[var_process_[var]][outcome].second; }

  double expand(const std::vector<std::uint32_t>& alive)
  {
    if (alive.empty())
      return 0.0;
    if (alive.size() == 1) {
      double p = 1;
      for (const auto& a : sets_[alive[0]])
        if (assigned_[a.var] == unassigned)
          p *= prob(a.var, a.outcome);
      return p;
    }
    // split on the variable most alive sets mention
    std::uint32_t v = unassigned;
    std::vector<std::uint32_t> touched;
    for (std::uint32_t i : alive)
      for (const auto& a : sets_[i])
        if (assigned_[a.var] == unassigned) {
          if (mentions_[a.var]++ == 0)
            touched.push_back(a.var);
          if (v == unassigned || mentions_[a.var] > mentions_[v] || (mentions_[a.var] == mentions_[v] && a.var < v))
            v = a.var;
        }
    for (std::uint32_t x : touched)
      mentions_[x] = 0;
    if (v == unassigned)
      return 1.0; // every alive set already holds
    double total = 0;
    std::vector<std::uint32_t> next;
    const auto& outs = probs_[var_process_[v]];
    for (std::uint32_t o = 0; o < outs.size(); ++o) {
      if (outs[o].second == 0)
        continue;
      assigned_[v] = o;
      next.clear();
      bool holds = false;
      for (std::uint32_t i : alive) {
        bool ok = true, done = true;
        for (const auto& a : sets_[i]) {
          std::uint32_t x = assigned_[a.var];
          if (x == unassigned)
            done = false;
          else if (x != a.outcome) {
            ok = false;
            break;
          }
        }
        if (ok && done) {
          holds = true;
          break;
        }
        if (ok)
          next.push_back(i);
      }
      total += outs[o].second * (holds ? 1.0 : expand(next));
    }
    assigned_[v] = unassigned;
    return total;
  }

  const GoalProvider& provider_;
  std::unordered_map<std::uint32_t, std::uint32_t> process_of_;
  std::vector<std::vector<std::pair<Symbol, double>>> probs_; // per process
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> var_of_;
  std::vector<std::uint32_t> var_process_;
  bool certain_ = false;
  std::vector<std::vector<Atom>> sets_;
  std::vector<std::uint32_t> assigned_;
  std::vector<std::uint32_t> mentions_;
};

inline double union_probability(const std::vector<Explanation>& sets, const GoalProvider& provider)
{
  UnionSolver u(provider);
  for (const auto& s : sets)
    u.add(s);
  return u.run();
}

} // namespace detail

namespace detail {

inline Enumeration enumerate(ExplGrammar& grammar, Symbol goal, Instance at, std::size_t max_steps, std::size_t cap,
                             bool keep)
{
  Enumerator en(grammar, max_steps, cap);
  en.run(goal, at);
  Enumeration out;
  out.truncated = en.truncated;
  const auto& provider = grammar.provider();
  UnionSolver u(provider);
  if (keep)
    out.explanations.reserve(en.found.size());
  while (!en.found.empty()) {
    Explanation e = std::move(en.found.extract(en.found.begin()).value());
    double p = 1;
    for (const auto& a : e)
      p *= provider.distribution(a.process).prob(a.outcome);
    out.string_sum += p;
    u.add(e);
    if (keep)
      out.explanations.emplace_back(std::move(e), p);
  }
  out.probability = u.run();
  return out;
}

} // namespace detail

/// Materializes every explanation derivable from expl(goal, at) using at most
/// `max_steps` production applications (leftmost derivation), dropping
/// inconsistent strings and duplicate sets.
inline Enumeration enumerate_explanations(ExplGrammar& grammar, Symbol goal, Instance at, std::size_t max_steps,
                                          std::size_t cap = 200000)
{
  return detail::enumerate(grammar, goal, at, max_steps, cap, true);
}

struct OracleMass
{
  double probability = 0;
  bool used_enumeration = false;
  bool truncated = false;
};

/// Probability mass of all explanations derivable within `max_steps` steps.
///
/// Grammars in which every production is a block of msw atoms at the head
/// instance followed by at most one later nonterminal, with pairwise exclusive
/// msw blocks, are summed by a step-indexed recurrence; any other grammar is
/// enumerated explicitly. Both agree on the grammars where both apply.
inline OracleMass oracle_mass(ExplGrammar& grammar, Symbol goal, std::size_t max_steps, std::size_t cap = 5000000)
{
  grammar.close(goal);
  const auto& provider = grammar.provider();

  auto block_of = [](const Production& p) {
    std::vector<std::pair<Symbol, Symbol>> block;
    for (const auto& sym : p.body)
      if (const auto* m = std::get_if<MswAtom>(&sym))
        block.emplace_back(m->process, m->outcome);
    return block;
  };
  auto exclusive = [](const std::vector<std::pair<Symbol, Symbol>>& a, const std::vector<std::pair<Symbol, Symbol>>& b) {
    for (const auto& [pa, va] : a)
      for (const auto& [pb, vb] : b)
        if (pa == pb && !(va == vb))
          return true;
    return false;
  };

  bool linear = true;
  for (Symbol g : grammar.goals()) {
    const auto& prods = grammar.productions(g);
    bool has_empty = false;
    for (const auto& p : prods) {
      has_empty |= p.body.empty();
      std::size_t nonterminals = 0;
      for (const auto& sym : p.body) {
        if (const auto* m = std::get_if<MswAtom>(&sym)) {
          linear &= m->anchored && m->at.is_base() && nonterminals == 0;
        } else {
          const auto& e = std::get<ExplAtom>(sym);
          linear &= e.anchored && !e.at.is_base();
          ++nonterminals;
        }
      }
      linear &= nonterminals <= 1;
    }
    if (!has_empty)
      for (std::size_t i = 0; i < prods.size(); ++i)
        for (std::size_t j = i + 1; j < prods.size(); ++j)
          linear &= exclusive(block_of(prods[i]), block_of(prods[j]));
  }

  if (!linear) {
    auto en = detail::enumerate(grammar, goal, Instance::base(), max_steps, cap, false);
    return {en.probability, true, en.truncated};
  }

  // mass[k][goal]: probability covered by derivations of at most k steps
  std::unordered_map<Symbol, double> prev, cur;
  for (Symbol g : grammar.goals())
    prev[g] = 0.0;
  for (std::size_t k = 1; k <= max_steps; ++k) {
    for (Symbol g : grammar.goals()) {
      const auto& prods = grammar.productions(g);
      double m = 0;
      bool certain = std::any_of(prods.begin(), prods.end(), [](const Production& p) { return p.body.empty(); });
      if (certain) {
        m = 1.0;
      } else {
        for (const auto& p : prods) {
          double term = 1;
          for (const auto& sym : p.body) {
            if (const auto* a = std::get_if<MswAtom>(&sym))
              term *= provider.distribution(a->process).prob(a->outcome);
            else
              term *= prev[std::get<ExplAtom>(sym).goal];
          }
          m += term;
        }
      }
      cur[g] = m;
    }
    std::swap(prev, cur);
  }
  return {prev[goal], false, false};
}

} // namespace pipmc
