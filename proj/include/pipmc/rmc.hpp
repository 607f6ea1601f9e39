#pragma once

#include "pipmc/gpl.hpp"
#include "pipmc/model.hpp"

#include <string>

namespace pipmc {

/// RPLTS state of a node or port of component `comp`: "<comp>.<node>".
inline Symbol rmc_state(Symbol comp, Symbol node) { return Symbol(comp.str() + "." + node.str()); }

/// Reactive system whose runs mirror the RMC's:
///
///   p    copies of the probabilistic transitions
///   c    call port -> callee entry, probability 1
///   r<i> call port -> i-th return port of the same box, probability 1
///   e<i> self-loop on the i-th exit
inline Rplts rmc_to_rplts(const Rmc& rmc)
{
  Rplts out;
  auto add = [&](Symbol s, Symbol a, std::vector<Outcome> outs) {
    out.switches.emplace(std::make_pair(s.id(), a.id()), Distribution(std::move(outs)));
    out.actions[s].push_back(a);
  };
  const Symbol p("p"), c("c");
  for (const auto& comp : rmc.components) {
    for (Symbol n : comp.nodes)
      out.states.push_back(rmc_state(comp.name, n));
    for (const auto& b : comp.boxes) {
      out.states.push_back(rmc_state(comp.name, call_port(b.name)));
      for (std::size_t i = 1; i <= rmc.find(b.callee)->exits.size(); ++i)
        out.states.push_back(rmc_state(comp.name, return_port(b.name, i)));
    }
  }
  for (const auto& comp : rmc.components) {
    for (const auto& [src, dist] : comp.transitions) {
      std::vector<Outcome> outs;
      for (const auto& o : dist.outcomes())
        outs.push_back({rmc_state(comp.name, o.value), o.prob});
      add(rmc_state(comp.name, src), p, std::move(outs));
    }
    for (const auto& b : comp.boxes) {
      const auto* callee = rmc.find(b.callee);
      Symbol port = rmc_state(comp.name, call_port(b.name));
      add(port, c, {{rmc_state(callee->name, callee->entry), 1.0}});
      for (std::size_t i = 1; i <= callee->exits.size(); ++i)
        add(port, Symbol("r" + std::to_string(i)), {{rmc_state(comp.name, return_port(b.name, i)), 1.0}});
    }
    for (std::size_t i = 1; i <= comp.exits.size(); ++i) {
      Symbol x = rmc_state(comp.name, comp.exits[i - 1]);
      add(x, Symbol("e" + std::to_string(i)), {{x, 1.0}});
    }
  }
  return out;
}

/// Definitions X1..Xn, "eventually leave through exit i":
///
///   Xi = lfp(ei-exit or p-step to Xi or, for each j, call reaching Xj then return rj to Xi)
inline std::string rmc_exit_formulae(std::size_t n)
{
  if (n == 0)
    throw ModelError("an RMC needs at least one exit");
  std::string out;
  for (std::size_t i = 1; i <= n; ++i) {
    std::string xi = "X" + std::to_string(i);
    std::string calls;
    for (std::size_t j = n; j >= 1; --j) {
      std::string term = "and(diam(c, X" + std::to_string(j) + "), diam(r" + std::to_string(j) + ", " + xi + "))";
      calls = calls.empty() ? term : "or(" + term + ", " + calls + ")";
    }
    out += "def(" + xi + ", lfp(or(diam(e" + std::to_string(i) + ", tt), or(diam(p, " + xi + "), " + calls + ")))).\n";
  }
  return out;
}

/// Resolves an RMC start given as a component name (its entry) or "<comp>.<node>".
inline Symbol rmc_start_state(const Rmc& rmc, const std::string& where)
{
  if (const auto* c = rmc.find(Symbol(where)))
    return rmc_state(c->name, c->entry);
  for (const auto& c : rmc.components)
    for (Symbol n : c.nodes)
      if (rmc_state(c.name, n).str() == where)
        return rmc_state(c.name, n);
  throw ModelError("unknown component or node '" + where + "'");
}

} // namespace pipmc
