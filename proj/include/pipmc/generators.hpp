#pragma once

#include "pipmc/error.hpp"
#include "pipmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pipmc {

/// Synchronous leader election: every round each of n processes draws a value
/// uniformly from 1..k; the round elects a leader iff the maximum is drawn by
/// exactly one process, and is repeated otherwise.
///
/// States: "round", one "c_<v1>..<vn>" per joint draw, and "elected" (label
/// elected, absorbing).
inline Dtmc leader_election(std::size_t n, std::size_t k)
{
  if (n < 1 || k < 1)
    throw ModelError("leader election needs n >= 1 and k >= 1");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    total *= k;
    if (total > 1000000)
      throw ModelError("leader election with " + std::to_string(k) + "^" + std::to_string(n) + " draws is too large");
  }
  Dtmc m;
  Symbol round("round"), elected("elected");
  m.states.push_back(round);
  std::vector<Outcome> draws;
  std::vector<std::size_t> v(n, 1);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::string name = "c_";
    for (std::size_t x : v)
      name += std::to_string(x);
    Symbol s(name);
    m.states.push_back(s);
    draws.push_back({s, 1.0 / double(total)});
    std::size_t top = *std::max_element(v.begin(), v.end());
    bool unique = std::count(v.begin(), v.end(), top) == 1;
    m.switches.emplace(s, Distribution({{unique ? elected : round, 1.0}}));
    for (std::size_t i = n; i-- > 0;) {
      if (++v[i] <= k)
        break;
      v[i] = 1;
    }
  }
  m.switches.emplace(round, Distribution(std::move(draws)));
  m.states.push_back(elected);
  m.labels[elected].push_back(elected);
  return m;
}

/// Random DTMC over states s0..s(n-1): each state is absorbing with
/// probability 1/5 and otherwise moves to 1..3 distinct successors with
/// probabilities in multiples of 1/20. State s(n-1) carries label "goal".
inline Dtmc random_dtmc(std::size_t n, std::uint64_t seed)
{
  if (n < 1)
    throw ModelError("a DTMC needs at least one state");
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  Dtmc m;
  for (std::size_t i = 0; i < n; ++i)
    m.states.emplace_back("s" + std::to_string(i));
  m.labels[m.states.back()].emplace_back("goal");
  for (std::size_t i = 0; i < n; ++i) {
    if (pick(0, 4) == 0)
      continue;
    std::size_t k = std::min(n, pick(1, 3));
    std::vector<std::size_t> targets;
    while (targets.size() < k) {
      std::size_t t = pick(0, n - 1);
      if (std::find(targets.begin(), targets.end(), t) == targets.end())
        targets.push_back(t);
    }
    std::vector<std::size_t> parts(k, 1);
    for (std::size_t left = 20 - k; left > 0; --left)
      ++parts[pick(0, k - 1)];
    std::vector<Outcome> outs;
    for (std::size_t j = 0; j < k; ++j)
      outs.push_back({m.states[targets[j]], double(parts[j]) / 20.0});
    m.switches.emplace(m.states[i], Distribution(std::move(outs)));
  }
  return m;
}

} // namespace pipmc
