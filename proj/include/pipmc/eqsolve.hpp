#pragma once

#include "pipmc/error.hpp"
#include "pipmc/fed.hpp"
#include "pipmc/poly.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pipmc {

/// Strongly connected components of the variable dependency graph, each
/// listed after every component it depends on.
inline std::vector<std::vector<std::uint32_t>> dependency_sccs(const PolySystem& sys)
{
  const auto n = static_cast<std::uint32_t>(sys.vars.size());
  std::vector<std::vector<std::uint32_t>> deps(n);
  for (std::uint32_t v = 0; v < n; ++v)
    deps[v] = sys.pool.vars_of(sys.vars[v].rhs);

  // iterative Tarjan
  constexpr std::uint32_t unvisited = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> index(n, unvisited), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack;
  std::vector<std::vector<std::uint32_t>> out;
  std::uint32_t counter = 0;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != unvisited)
      continue;
    std::vector<std::pair<std::uint32_t, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < deps[v].size()) {
        std::uint32_t w = deps[v][i++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<std::uint32_t> comp;
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
      std::uint32_t finished = v;
      call.pop_back();
      if (!call.empty())
        low[call.back().first] = std::min(low[call.back().first], low[finished]);
    }
  }
  return out;
}

namespace detail {

class Assembler
{
public:
  explicit Assembler(FedStore& store) : store_(store) {}

  PolySystem run(Symbol start)
  {
    store_.complete(start);
    var_for(GoalRef::plain(start));
    while (!work_.empty()) {
      std::uint32_t v = work_.front();
      work_.pop_front();
      GoalRef g = refs_[v];
      auto fed = g.merge ? store_.merge_fed(g.index) : store_.goal_fed(Symbol::from_id(g.index));
      if (!fed)
        throw FactoringError("no FED was built for " + store_.goal_name(g));
      PolyId rhs = poly_of(*fed);
      sys_.vars[v].rhs = rhs;
    }
    assign_kinds();
    return std::move(sys_);
  }

private:
  std::uint32_t var_for(GoalRef g)
  {
    std::uint64_t key = (std::uint64_t(g.merge) << 32) | g.index;
    if (auto it = index_.find(key); it != index_.end())
      return it->second;
    auto v = static_cast<std::uint32_t>(sys_.vars.size());
    sys_.vars.push_back({"x" + std::to_string(v), store_.goal_name(g), Fixpoint::Least, poly_zero});
    refs_.push_back(g);
    index_.emplace(key, v);
    work_.push_back(v);
    return v;
  }

  PolyId poly_of(FedId f)
  {
    if (f == fed_false)
      return poly_zero;
    if (f == fed_true)
      return poly_one;
    if (auto it = memo_.find(f); it != memo_.end())
      return it->second;
    const FedNode n = store_.node(f);
    PolyId p;
    if (n.kind == FedNode::Kind::Msw) {
      const auto& dist = store_.grammar().provider().distribution(n.process);
      std::vector<std::pair<double, PolyId>> terms;
      for (std::size_t i = 0; i < n.kids.size(); ++i)
        terms.emplace_back(dist.outcomes()[i].prob, poly_of(n.kids[i]));
      p = sys_.pool.linear(std::move(terms), false);
    } else if (n.kind == FedNode::Kind::Joint) {
      p = joint_poly(n);
    } else {
      std::uint32_t v = var_for(n.goal);
      PolyId one = poly_of(n.kids[1]);
      PolyId zero = poly_of(n.kids[0]);
      p = sys_.pool.ite(v, one, zero);
    }
    memo_.emplace(f, p);
    return p;
  }

  /// Sum over outcomes of P(exactly those events hold) * child. Exact-outcome
  /// probabilities come from the conjunctions by inclusion-exclusion.
  PolyId joint_poly(const FedNode& n)
  {
    std::uint32_t j = n.goal.index;
    const std::uint32_t width = 1u << store_.joints()[j].size();
    std::vector<PolyId> conj(width, poly_one);
    for (std::uint32_t mask = 1; mask < width; ++mask)
      conj[mask] = poly_of(store_.joint_conjunction(j, mask));
    std::vector<std::pair<double, PolyId>> terms;
    for (std::uint32_t mask = 0; mask < width; ++mask) {
      PolyId kid = poly_of(n.kids[mask]);
      if (kid == poly_zero)
        continue;
      std::vector<std::pair<double, PolyId>> exact;
      for (std::uint32_t sup = mask; sup < width; sup = (sup + 1) | mask)
        exact.emplace_back(std::popcount(sup ^ mask) % 2 ? -1.0 : 1.0, conj[sup]);
      terms.emplace_back(1.0, sys_.pool.mul(sys_.pool.linear(std::move(exact)), kid));
    }
    return sys_.pool.linear(std::move(terms));
  }

  static constexpr unsigned least_bit = 1, greatest_bit = 2;

  static unsigned bit(Fixpoint k) { return k == Fixpoint::Least ? least_bit : greatest_bit; }

  /// Kinds of the plain goals a merge's operands mention, through nested merges.
  unsigned merge_kinds(std::uint32_t index)
  {
    if (auto it = merge_kinds_.find(index); it != merge_kinds_.end())
      return it->second;
    merge_kinds_[index] = 0; // cycle guard
    const MergeGoal m = store_.merges()[index];
    unsigned bits = 0;
    for (FedId root : {m.left, m.right})
      for (FedId id : store_.reachable(root)) {
        const FedNode& n = store_.node(id);
        if (n.kind == FedNode::Kind::Joint) {
          for (FedId e : store_.joints()[n.goal.index])
            bits |= goal_kinds(store_.node(e).goal);
        } else if (n.kind == FedNode::Kind::Expl) {
          bits |= goal_kinds(n.goal);
        }
      }
    merge_kinds_[index] = bits;
    return bits;
  }

  unsigned goal_kinds(GoalRef g)
  {
    if (g.merge)
      return merge_kinds(g.index);
    auto k = store_.grammar().provider().fixpoint(Symbol::from_id(g.index));
    return k ? bit(*k) : 0;
  }

  /// A component takes the kind of its plain goals; a component made only of
  /// merges takes the kind of the goals the merges combine.
  void assign_kinds()
  {
    const auto& provider = store_.grammar().provider();
    for (const auto& comp : dependency_sccs(sys_)) {
      std::optional<Fixpoint> kind;
      std::uint32_t witness = 0;
      for (std::uint32_t v : comp) {
        if (refs_[v].merge)
          continue;
        auto k = provider.fixpoint(Symbol::from_id(refs_[v].index));
        if (!k)
          continue;
        if (kind && *kind != *k)
          throw AlternationError("alternation detected: " + sys_.vars[witness].label + " (" + to_string(*kind) +
                                 ") and " + sys_.vars[v].label + " (" + to_string(*k) + ") depend on each other");
        kind = k;
        witness = v;
      }
      if (!kind) {
        unsigned bits = 0;
        for (std::uint32_t v : comp)
          if (refs_[v].merge)
            bits |= merge_kinds(refs_[v].index);
        if (bits == (least_bit | greatest_bit) && cyclic(comp))
          throw AlternationError("alternation detected: " + sys_.vars[comp.front()].label +
                                 " recursively combines lfp and gfp goals");
        if (bits == greatest_bit)
          kind = Fixpoint::Greatest;
      }
      for (std::uint32_t v : comp)
        sys_.vars[v].kind = kind.value_or(Fixpoint::Least);
    }
  }

  bool cyclic(const std::vector<std::uint32_t>& comp) const
  {
    if (comp.size() > 1)
      return true;
    auto deps = sys_.pool.vars_of(sys_.vars[comp.front()].rhs);
    return std::binary_search(deps.begin(), deps.end(), comp.front());
  }

  FedStore& store_;
  PolySystem sys_;
  std::vector<GoalRef> refs_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
  std::deque<std::uint32_t> work_;
  std::unordered_map<FedId, PolyId> memo_;
  std::unordered_map<std::uint32_t, unsigned> merge_kinds_;
};

} // namespace detail

/// Equation system of every goal and merge reachable from `start`; x0 is the
/// start goal. Completes the store first.
inline PolySystem assemble(FedStore& store, Symbol start) { return detail::Assembler(store).run(start); }

enum class SolveMethod { Newton, Kleene };

struct SolveOptions
{
  double epsilon = 1e-10;
  std::size_t max_iters = 1000000;
  SolveMethod method = SolveMethod::Newton;
};

struct Solution
{
  std::vector<double> values;
  /// Iterations and final residual of the component each variable was solved in.
  std::vector<std::size_t> var_iterations;
  std::vector<double> var_residual;
  std::size_t iterations = 0; // summed over components
  double residual = 0;        // max over variables
  std::size_t components = 0;
  /// Largest number of polynomial nodes evaluated in one iteration.
  std::size_t evaluations_per_iteration = 0;
  std::vector<std::string> warnings;
};

namespace detail {

class ComponentSolver
{
public:
  ComponentSolver(const PolySystem& sys, const SolveOptions& opt, Solution& sol, std::vector<double>& val)
      : sys_(sys), pool_(sys.pool), opt_(opt), sol_(sol), val_(val), row_(pool_.size(), -1),
        slot_(sys.vars.size(), -1)
  {
  }

  void solve(const std::vector<std::uint32_t>& comp)
  {
    comp_ = comp;
    for (std::size_t i = 0; i < comp.size(); ++i)
      slot_[comp[i]] = static_cast<int>(i);
    Fixpoint kind = sys_.vars[comp.front()].kind;
    for (auto v : comp)
      if (sys_.vars[v].kind != kind)
        throw AlternationError("alternation detected: " + sys_.vars[comp.front()].name + " and " + sys_.vars[v].name +
                               " are mutually dependent with different fixpoints");

    std::vector<PolyId> roots;
    for (auto v : comp)
      roots.push_back(sys_.vars[v].rhs);
    auto all = pool_.reachable(roots);
    live_.clear();
    for (PolyId id : all)
      if (depends_on_component(id)) {
        row_[id] = static_cast<int>(live_.size());
        live_.push_back(id);
      }
    for (auto v : comp)
      sol_.values[v] = kind == Fixpoint::Least ? 0.0 : 1.0;
    for (PolyId id : all)
      val_[id] = pool_.eval_node(id, val_, sol_.values);
    sol_.evaluations_per_iteration = std::max(sol_.evaluations_per_iteration, live_.size());

    bool newton = kind == Fixpoint::Least && opt_.method == SolveMethod::Newton;
    std::size_t it = 0;
    double residual = 0;
    double step = std::numeric_limits<double>::infinity();
    bool warned = false;
    for (;;) {
      std::vector<double> px = image();
      residual = 0;
      for (std::size_t i = 0; i < comp.size(); ++i)
        residual = std::max(residual, std::abs(px[i] - sol_.values[comp[i]]));
      if (residual == 0 || (residual <= opt_.epsilon && step <= opt_.epsilon))
        break;
      if (it == opt_.max_iters) {
        throw ConvergenceError("no convergence within " + std::to_string(opt_.max_iters) + " iterations (residual " +
                                   format_double(residual) + " at " + sys_.vars[comp.front()].label + ")",
                               sol_.values);
      }
      ++it;

      std::vector<double> next = px;
      if (newton) {
        if (auto nx = newton_step(px))
          for (std::size_t i = 0; i < comp.size(); ++i)
            next[i] = std::max((*nx)[i], px[i]);
      }
      step = 0;
      for (std::size_t i = 0; i < comp.size(); ++i) {
        double x = sol_.values[comp[i]];
        double y = std::clamp(next[i], 0.0, 1.0);
        bool backwards = kind == Fixpoint::Least ? y < x - 1e-12 : y > x + 1e-12;
        if (backwards && !warned) {
          sol_.warnings.push_back("non-monotone step at " + sys_.vars[comp[i]].label + " (" + format_double(x) +
                                  " -> " + format_double(y) + ")");
          warned = true;
        }
        step = std::max(step, std::abs(y - x));
        sol_.values[comp[i]] = y;
      }
    }

    sol_.iterations += it;
    sol_.residual = std::max(sol_.residual, residual);
    ++sol_.components;
    for (auto v : comp) {
      sol_.var_iterations[v] = it;
      sol_.var_residual[v] = residual;
      slot_[v] = -1;
    }
    for (PolyId id : live_)
      row_[id] = -1;
  }

private:
  bool depends_on_component(PolyId id)
  {
    const PolyNode& n = pool_.node(id);
    if (n.kind == PolyNode::Kind::Ite && slot_[n.var] >= 0)
      return true;
    for (auto [c, p] : n.terms)
      if (row_[p] >= 0)
        return true;
    for (PolyId p : n.args)
      if (row_[p] >= 0)
        return true;
    return false;
  }

  /// P(x) restricted to the component, re-evaluating only the live nodes.
  std::vector<double> image()
  {
    for (PolyId id : live_)
      val_[id] = pool_.eval_node(id, val_, sol_.values);
    std::vector<double> px(comp_.size());
    for (std::size_t i = 0; i < comp_.size(); ++i)
      px[i] = val_[sys_.vars[comp_[i]].rhs];
    return px;
  }

  /// x + (I - J)^-1 (P(x) - x), or nullopt when the system is singular or the
  /// step is unusable. Expects val_ to hold P at the current x.
  std::optional<std::vector<double>> newton_step(const std::vector<double>& px)
  {
    const std::size_t k = comp_.size();
    std::vector<double> d(live_.size() * k, 0.0);
    auto grad = [&](PolyId p) -> const double* { return row_[p] >= 0 ? &d[std::size_t(row_[p]) * k] : nullptr; };
    for (std::size_t r = 0; r < live_.size(); ++r) {
      const PolyNode& n = pool_.node(live_[r]);
      double* out = &d[r * k];
      switch (n.kind) {
      case PolyNode::Kind::Const:
        break;
      case PolyNode::Kind::Linear:
        for (auto [c, p] : n.terms)
          if (const double* g = grad(p))
            for (std::size_t j = 0; j < k; ++j)
              out[j] += c * g[j];
        break;
      case PolyNode::Kind::Mul: {
        PolyId a = n.args[0], b = n.args[1];
        if (const double* g = grad(a))
          for (std::size_t j = 0; j < k; ++j)
            out[j] += g[j] * val_[b];
        if (const double* g = grad(b))
          for (std::size_t j = 0; j < k; ++j)
            out[j] += val_[a] * g[j];
        break;
      }
      case PolyNode::Kind::Ite: {
        double v = sol_.values[n.var];
        PolyId t = n.args[0], e = n.args[1];
        if (slot_[n.var] >= 0)
          out[slot_[n.var]] += val_[t] - val_[e];
        if (const double* g = grad(t))
          for (std::size_t j = 0; j < k; ++j)
            out[j] += v * g[j];
        if (const double* g = grad(e))
          for (std::size_t j = 0; j < k; ++j)
            out[j] += (1 - v) * g[j];
        break;
      }
      }
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(Eigen::Index(k), Eigen::Index(k));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      PolyId root = sys_.vars[comp_[i]].rhs;
      if (const double* g = grad(root))
        for (std::size_t j = 0; j < k; ++j)
          a(Eigen::Index(i), Eigen::Index(j)) -= g[j];
      rhs(Eigen::Index(i)) = px[i] - sol_.values[comp_[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
      return std::nullopt;
    Eigen::VectorXd delta = lu.solve(rhs);
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) {
      double dx = delta(Eigen::Index(i));
      if (!std::isfinite(dx) || dx < -1e-12)
        return std::nullopt;
      out[i] = sol_.values[comp_[i]] + dx;
    }
    return out;
  }

  const PolySystem& sys_;
  const PolyPool& pool_;
  const SolveOptions& opt_;
  Solution& sol_;
  std::vector<double>& val_;
  std::vector<int> row_;
  std::vector<int> slot_;
  std::vector<std::uint32_t> comp_;
  std::vector<PolyId> live_;
};

} // namespace detail

/// Solves the system component by component in dependency order. Least
/// components start at 0 and use Newton steps (falling back to a plain
/// iteration step when the linearization is singular or would move
/// downwards); greatest components iterate downwards from 1.
inline Solution solve(const PolySystem& sys, const SolveOptions& opt = {})
{
  if (!(opt.epsilon > 0))
    throw Error("epsilon must be positive");
  Solution sol;
  const std::size_t n = sys.vars.size();
  sol.values.assign(n, 0.0);
  sol.var_iterations.assign(n, 0);
  sol.var_residual.assign(n, 0.0);
  std::vector<double> val(sys.pool.size(), 0.0);
  for (PolyId id = 0; id < sys.pool.size(); ++id)
    if (sys.pool.is_const(id))
      val[id] = sys.pool.node(id).value;
  detail::ComponentSolver solver(sys, opt, sol, val);
  for (const auto& comp : dependency_sccs(sys))
    solver.solve(comp);
  return sol;
}

} // namespace pipmc
