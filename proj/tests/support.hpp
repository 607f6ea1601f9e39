#pragma once

#include "pipmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace testing_support {

inline std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string model_path(const std::string& name) { return std::string(PIPMC_MODELS) + "/" + name; }
inline std::string golden_path(const std::string& name) { return std::string(PIPMC_GOLDEN) + "/" + name; }

/// Termination probabilities of an RMC from its own least fixed-point system:
///
///   exit i of c, target j:  [i == j]
///   call port b.call:       sum_k x(callee, entry, k) * x(c, b.ret_k, j)
///   other node:             sum_t p_t * x(c, t, j)
///
/// solved by plain Kleene iteration from 0. Keyed by (component, node, j).
class NativeRmc
{
public:
  explicit NativeRmc(const pipmc::Rmc& rmc, std::size_t max_iters = 1000000, double tol = 1e-14) : rmc_(rmc)
  {
    n_ = rmc.max_exits();
    for (const auto& c : rmc.components) {
      std::vector<pipmc::Symbol> nodes = c.nodes;
      for (const auto& b : c.boxes) {
        nodes.push_back(pipmc::call_port(b.name));
        for (std::size_t k = 1; k <= rmc.find(b.callee)->exits.size(); ++k)
          nodes.push_back(pipmc::return_port(b.name, k));
      }
      for (auto n : nodes)
        for (std::size_t j = 0; j < n_; ++j)
          x_[key(c.name, n, j)] = 0.0;
    }
    for (iterations_ = 0; iterations_ < max_iters; ++iterations_) {
      std::map<Key, double> y;
      double change = 0;
      for (const auto& [k, old] : x_) {
        double v = evaluate(k);
        change = std::max(change, std::abs(v - old));
        y[k] = v;
      }
      x_ = std::move(y);
      if (change < tol)
        break;
    }
  }

  /// Probability of terminating through exit j (1-based) from `node` of `comp`.
  double value(const std::string& comp, const std::string& node, std::size_t j) const
  {
    auto it = x_.find(key(pipmc::Symbol(comp), pipmc::Symbol(node), j - 1));
    return it == x_.end() ? 0.0 : it->second;
  }

  double entry_value(const std::string& comp, std::size_t j) const
  {
    return value(comp, rmc_.find(pipmc::Symbol(comp))->entry.str(), j);
  }

  std::size_t iterations() const { return iterations_; }

private:
  using Key = std::tuple<std::uint32_t, std::uint32_t, std::size_t>;

  static Key key(pipmc::Symbol c, pipmc::Symbol n, std::size_t j) { return {c.id(), n.id(), j}; }

  double get(pipmc::Symbol c, pipmc::Symbol n, std::size_t j) const
  {
    auto it = x_.find(key(c, n, j));
    return it == x_.end() ? 0.0 : it->second;
  }

  double evaluate(const Key& k) const
  {
    auto c_sym = pipmc::Symbol::from_id(std::get<0>(k));
    auto n_sym = pipmc::Symbol::from_id(std::get<1>(k));
    std::size_t j = std::get<2>(k);
    const auto* c = rmc_.find(c_sym);
    auto ex = std::find(c->exits.begin(), c->exits.end(), n_sym);
    if (ex != c->exits.end())
      return std::size_t(ex - c->exits.begin()) == j ? 1.0 : 0.0;
    const std::string& name = n_sym.str();
    if (name.size() > 5 && name.ends_with(".call")) {
      pipmc::Symbol box(name.substr(0, name.size() - 5));
      const auto* callee = rmc_.find(c->box(box)->callee);
      double v = 0;
      for (std::size_t m = 0; m < callee->exits.size(); ++m)
        v += get(callee->name, callee->entry, m) * get(c_sym, pipmc::return_port(box, m + 1), j);
      return v;
    }
    for (const auto& [src, d] : c->transitions)
      if (src == n_sym) {
        double v = 0;
        for (const auto& o : d.outcomes())
          v += o.prob * get(c_sym, o.value, j);
        return v;
      }
    return 0.0;
  }

  const pipmc::Rmc& rmc_;
  std::size_t n_ = 0;
  std::size_t iterations_ = 0;
  std::map<Key, double> x_;
};

/// Small RMCs shared by several tests.
inline const char* rmc_self_call = R"(component A {
  entry en;
  exit ex1, ex2;
  box b calls A;
  trans en: ex1 0.5, b.call 0.3, ex2 0.2;
  trans b.ret1: ex2 1;
  trans b.ret2: ex1 1;
}
)";

inline const char* rmc_loop_back = R"(component A {
  entry en;
  exit ex1, ex2;
  node v;
  box b1 calls A;
  trans en: ex1 0.5, b1.call 0.3, ex2 0.2;
  trans b1.ret1: ex1 1;
  trans b1.ret2: v 1;
  trans v: ex2 0.7, en 0.3;
}
)";

inline const char* rmc_two_components = R"(component A {
  entry en;
  exit ex1, ex2;
  node u;
  box b2 calls B;
  trans en: u 0.5, ex1 0.3, ex2 0.2;
  trans u: ex1 0.6, b2.call 0.4;
  trans b2.ret1: ex2 1;
  trans b2.ret2: ex1 1;
}
component B {
  entry bn;
  exit bx1, bx2;
  trans bn: bx1 0.4, bx2 0.6;
}
)";

/// One exit; with probability q the component calls itself twice in a row,
/// so termination is the least root of x = (1 - q) + q x^2, i.e. min(1, (1 - q) / q).
inline std::string rmc_double_call(double q)
{
  std::ostringstream out;
  out << "component A {\n  entry en;\n  exit ex;\n  box b1 calls A;\n  box b2 calls A;\n"
      << "  trans en: ex " << 1 - q << ", b1.call " << q << ";\n"
      << "  trans b1.ret1: b2.call 1;\n  trans b2.ret1: ex 1;\n}\n";
  return out.str();
}

} // namespace testing_support
