#pragma once

#include "pipmc/error.hpp"
#include "pipmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <unordered_map>
#include <vector>

namespace pipmc {

struct McEstimate
{
  double mean = 0;
  double std_error = 0;
  std::size_t hits = 0;
  std::size_t paths = 0;
  /// Paths cut off by the step bound before deciding.
  std::size_t truncated = 0;
};

struct McConfig
{
  std::size_t paths = 100000;
  std::size_t max_steps = 10000;
  std::uint64_t seed = 1;
};

namespace detail {

inline Symbol sample(const Distribution& d, std::mt19937_64& rng)
{
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  for (const auto& o : d.outcomes()) {
    acc += o.prob;
    if (u < acc)
      return o.value;
  }
  return d.outcomes().back().value;
}

inline McEstimate finish(std::size_t hits, std::size_t paths, std::size_t truncated)
{
  McEstimate e;
  e.hits = hits;
  e.paths = paths;
  e.truncated = truncated;
  e.mean = paths ? double(hits) / double(paths) : 0;
  e.std_error = paths ? std::sqrt(e.mean * (1 - e.mean) / double(paths)) : 0;
  return e;
}

} // namespace detail

/// Fraction of simulated paths from `from` that reach a `goal` state while
/// staying in `stay` states before it.
inline McEstimate simulate_until(const Dtmc& m, Symbol from, const std::function<bool(Symbol)>& stay,
                                 const std::function<bool(Symbol)>& goal, const McConfig& cfg = {})
{
  std::mt19937_64 rng(cfg.seed);
  std::size_t hits = 0, truncated = 0;
  for (std::size_t p = 0; p < cfg.paths; ++p) {
    Symbol s = from;
    bool decided = false;
    for (std::size_t step = 0; step <= cfg.max_steps; ++step) {
      if (goal(s)) {
        ++hits;
        decided = true;
        break;
      }
      const Distribution* d = m.successors(s);
      if (!stay(s) || !d) {
        decided = true;
        break;
      }
      s = detail::sample(*d, rng);
    }
    if (!decided)
      ++truncated;
  }
  return detail::finish(hits, cfg.paths, truncated);
}

/// Fraction of simulated paths from `from` that visit any of `targets`.
inline McEstimate simulate_reach(const Dtmc& m, Symbol from, const std::vector<Symbol>& targets,
                                 const McConfig& cfg = {})
{
  auto in = [&](Symbol s) { return std::find(targets.begin(), targets.end(), s) != targets.end(); };
  return simulate_until(m, from, [](Symbol) { return true; }, in, cfg);
}

/// Runs of an RMC from the entry of `component` with an explicit call stack;
/// element i of the result estimates termination at exit i+1 of the component.
inline std::vector<McEstimate> simulate_rmc(const Rmc& rmc, Symbol component, const McConfig& cfg = {})
{
  const auto* start = rmc.find(component);
  if (!start)
    throw ModelError("unknown component '" + component.str() + "'");
  std::unordered_map<Symbol, std::unordered_map<Symbol, const Distribution*>> trans;
  for (const auto& c : rmc.components)
    for (const auto& [src, d] : c.transitions)
      trans[c.name][src] = &d;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> hits(start->exits.size(), 0);
  std::size_t truncated = 0;
  struct Frame
  {
    const Rmc::Component* comp;
    Symbol box;
  };
  for (std::size_t p = 0; p < cfg.paths; ++p) {
    std::vector<Frame> stack;
    const Rmc::Component* comp = start;
    Symbol node = start->entry;
    bool decided = false;
    for (std::size_t step = 0; step <= cfg.max_steps && !decided; ++step) {
      auto ex = std::find(comp->exits.begin(), comp->exits.end(), node);
      if (ex != comp->exits.end()) {
        auto i = static_cast<std::size_t>(ex - comp->exits.begin());
        if (stack.empty()) {
          ++hits[i];
          decided = true;
          break;
        }
        Frame f = stack.back();
        stack.pop_back();
        comp = f.comp;
        node = return_port(f.box, i + 1);
        continue;
      }
      const std::string& name = node.str();
      if (name.size() > 5 && name.ends_with(".call")) {
        Symbol box(name.substr(0, name.size() - 5));
        stack.push_back({comp, box});
        comp = rmc.find(comp->box(box)->callee);
        node = comp->entry;
        continue;
      }
      auto it = trans[comp->name].find(node);
      if (it == trans[comp->name].end()) {
        decided = true; // stuck: no exit is reached
        break;
      }
      node = detail::sample(*it->second, rng);
    }
    if (!decided)
      ++truncated;
  }
  std::vector<McEstimate> out;
  for (std::size_t h : hits)
    out.push_back(detail::finish(h, cfg.paths, truncated));
  return out;
}

} // namespace pipmc
