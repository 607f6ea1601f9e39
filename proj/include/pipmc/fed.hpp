#pragma once

#include "pipmc/error.hpp"
#include "pipmc/grammar.hpp"
#include "pipmc/instance.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pipmc {

using FedId = std::uint32_t;
inline constexpr FedId fed_false = 0;
inline constexpr FedId fed_true = 1;

enum class FedOp { And, Or };

inline const char* to_string(FedOp op) { return op == FedOp::And ? "and" : "or"; }

/// What an expl node stands for: a grammar goal or a registered merge.
struct GoalRef
{
  bool merge = false;
  std::uint32_t index = 0; // Symbol id, or index into FedStore::merges()

  static GoalRef plain(Symbol g) { return {false, g.id()}; }
  static GoalRef merged(std::uint32_t i) { return {true, i}; }

  friend bool operator==(GoalRef, GoalRef) = default;
};

struct FedNode
{
  enum class Kind : std::uint8_t { False, True, Msw, Expl, Joint };

  Kind kind = Kind::False;
  Symbol process; // Msw
  GoalRef goal;   // Expl; Joint: index into FedStore::joints()
  Instance at;
  /// Msw: one child per outcome, in distribution order. Expl: {zero, one}.
  /// Joint: one child per subset of its events that hold, bit i = event i.
  std::vector<FedId> kids;

  bool is_leaf() const { return kind == Kind::False || kind == Kind::True; }

  friend bool operator==(const FedNode&, const FedNode&) = default;
};

/// Pending binary operation between two order-incomparable FEDs.
///
/// Operands are stored translated so that their instances are relative to the
/// longest common prefix of everything they mention; `offset` is the path from
/// that prefix to the instance the merge node sits at.
struct MergeGoal
{
  FedOp op;
  FedId left;
  FedId right;
  Instance offset;
};

/// Events tested together by joint nodes: leaf forms expl(g,h)?[ff,tt] with
/// instances relative to the joint node's instance, sorted by id.
using JointEvents = std::vector<FedId>;

enum class NodeOrder { Less, Equal, Greater, Incomparable };

struct FedConfig
{
  std::size_t merge_cap = 100000;
  std::size_t depth_cap = 100000;
  /// Most events a joint node may test; larger combinations stay merges.
  std::size_t joint_cap = 6;
};

struct FedStats
{
  std::size_t apply_calls = 0;
  /// Grafts where the grafted subtrees could not be interleaved in node order.
  std::size_t unordered_grafts = 0;
};

/// Factored explanation diagrams over one explanation generator.
///
/// Nodes are hash-consed, so structurally equal FEDs share an id. FEDs of
/// goals are built relative to the goal's base instance; expl nodes at strict
/// extensions of the base are left deferred as leaf forms expl(g,h)?[ff,tt].
class FedStore
{
public:
  explicit FedStore(ExplGrammar& grammar, FedConfig config = {}) : grammar_(grammar), config_(config)
  {
    nodes_.push_back(FedNode{FedNode::Kind::False, {}, {}, {}, {}});
    nodes_.push_back(FedNode{FedNode::Kind::True, {}, {}, {}, {}});
  }

  FedStore(const FedStore&) = delete;
  FedStore& operator=(const FedStore&) = delete;

  const FedNode& node(FedId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  const FedStats& stats() const { return stats_; }
  ExplGrammar& grammar() const { return grammar_; }
  const std::vector<MergeGoal>& merges() const { return merges_; }
  const std::vector<JointEvents>& joints() const { return joints_; }

  FedId msw(Symbol process, Instance at, std::vector<FedId> kids)
  {
    return intern_or_reduce(FedNode{FedNode::Kind::Msw, process, {}, at, std::move(kids)});
  }

  FedId expl(GoalRef goal, Instance at, FedId zero, FedId one)
  {
    if (zero == one)
      return zero;
    return intern(FedNode{FedNode::Kind::Expl, {}, goal, at, {zero, one}});
  }

  /// Leaf form expl(g, h)?[0:ff, 1:tt].
  FedId deferred(GoalRef goal, Instance at) { return expl(goal, at, fed_false, fed_true); }

  /// msw(r,h)?[...] with tt on the outcome branch and ff elsewhere.
  FedId msw_atom(Symbol process, Instance at, Symbol outcome)
  {
    const auto& dist = grammar_.provider().distribution(process);
    auto idx = dist.index_of(outcome);
    if (!idx)
      throw FactoringError("outcome " + outcome.str() + " is not a value of " + process.str());
    std::vector<FedId> kids(dist.size(), fed_false);
    kids[*idx] = fed_true;
    return msw(process, at, std::move(kids));
  }

  /// Node order on decision nodes.
  NodeOrder order(FedId a, FedId b) const
  {
    const FedNode& x = nodes_[a];
    const FedNode& y = nodes_[b];
    using K = FedNode::Kind;
    auto time = time_order(x.at, y.at);
    // Nodes on divergent branches of time are independent. Comparing them by
    // path first keeps every node related in time to x on the same side of y.
    if (time == TimeOrder::Incomparable)
      return path_order(x.at, y.at) < 0 ? NodeOrder::Less : NodeOrder::Greater;
    if (x.kind == K::Msw && y.kind == K::Msw) {
      if (time == TimeOrder::Earlier)
        return NodeOrder::Less;
      if (time == TimeOrder::Later)
        return NodeOrder::Greater;
      if (auto c = term_order(x.process, y.process); c != 0)
        return c < 0 ? NodeOrder::Less : NodeOrder::Greater;
      return NodeOrder::Equal;
    }
    // an expl node may use random processes at its own instance or later
    if (x.kind == K::Msw)
      return time == TimeOrder::Earlier ? NodeOrder::Less : NodeOrder::Incomparable;
    if (y.kind == K::Msw)
      return time == TimeOrder::Later ? NodeOrder::Greater : NodeOrder::Incomparable;
    if (time == TimeOrder::Equal && x.kind == y.kind && x.goal == y.goal)
      return NodeOrder::Equal;
    return NodeOrder::Incomparable;
  }

  FedId apply(FedOp op, FedId f, FedId g)
  {
    if (op == FedOp::And) {
      if (f == fed_false || g == fed_false)
        return fed_false;
      if (f == fed_true)
        return g;
      if (g == fed_true)
        return f;
    } else {
      if (f == fed_true || g == fed_true)
        return fed_true;
      if (f == fed_false)
        return g;
      if (g == fed_false)
        return f;
    }
    if (f == g)
      return f;
    if (f > g)
      std::swap(f, g);
    auto key = std::make_tuple(static_cast<int>(op), f, g);
    if (auto it = apply_memo_.find(key); it != apply_memo_.end())
      return it->second;

    ++stats_.apply_calls;
    DepthGuard guard(*this);
    FedId result;
    switch (order(f, g)) {
    case NodeOrder::Less:
      result = rebuild(f, [&](FedId k) { return apply(op, k, g); });
      break;
    case NodeOrder::Greater:
      result = rebuild(g, [&](FedId k) { return apply(op, f, k); });
      break;
    case NodeOrder::Equal: {
      const auto fk = nodes_[f].kids;
      const auto gk = nodes_[g].kids;
      std::vector<FedId> kids(fk.size());
      for (std::size_t i = 0; i < fk.size(); ++i)
        kids[i] = apply(op, fk[i], gk[i]);
      result = with_kids(f, std::move(kids));
      break;
    }
    default:
      result = joinable(f, g) ? joint_apply(op, f, g) : make_merge(op, f, g);
      break;
    }
    apply_memo_.emplace(key, result);
    return result;
  }

  /// FED of `goal` at its own base instance (memoized). A goal reached again
  /// at the same instance while under construction is left deferred.
  FedId build(Symbol goal)
  {
    if (auto it = goal_feds_.find(goal); it != goal_feds_.end())
      return it->second;
    if (in_progress_.contains(goal))
      return deferred(GoalRef::plain(goal), Instance::base());
    DepthGuard guard(*this);
    in_progress_.insert(goal);
    FedId disj = fed_false;
    for (const auto& p : grammar_.expand(goal)) {
      FedId conj = fed_true;
      for (const auto& sym : p.body) {
        conj = apply(FedOp::And, conj, atom_fed(sym, p));
        if (conj == fed_false)
          break;
      }
      disj = apply(FedOp::Or, disj, conj);
    }
    in_progress_.erase(goal);
    goal_feds_.emplace(goal, disj);
    built_.push_back(goal);
    return disj;
  }

  /// Deferred leaf when `at` extends the base, the full FED otherwise.
  FedId build_at(Symbol goal, Instance at)
  {
    return at.is_base() ? build(goal) : deferred(GoalRef::plain(goal), at);
  }

  /// Builds the FED of every goal and merge reachable from `start`.
  void complete(Symbol start)
  {
    std::vector<FedId> roots{build(start)};
    std::unordered_set<FedId> seen;
    while (!roots.empty()) {
      std::vector<FedId> stack{roots.back()};
      roots.pop_back();
      while (!stack.empty()) {
        FedId id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second)
          continue;
        const FedNode& n = nodes_[id];
        if (n.kind == FedNode::Kind::Expl) {
          if (!n.goal.merge && !goal_feds_.contains(symbol_of(n.goal)))
            roots.push_back(build(symbol_of(n.goal)));
          else if (n.goal.merge && !merge_feds_.contains(n.goal.index))
            roots.push_back(expand_merge(n.goal.index));
        } else if (n.kind == FedNode::Kind::Joint) {
          std::uint32_t j = n.goal.index;
          for (std::uint32_t mask = 1; mask < (1u << joints_[j].size()); ++mask)
            roots.push_back(joint_conjunction(j, mask));
        }
        for (FedId k : nodes_[id].kids)
          stack.push_back(k);
      }
    }
  }

  /// Expands a registered merge: fully builds one operand's goal at its
  /// instance, grafts the operand's 0/1 children onto the ff/tt leaves, and
  /// applies the operation with the other operand.
  FedId expand_merge(std::uint32_t index)
  {
    if (auto it = merge_feds_.find(index); it != merge_feds_.end())
      return it->second;
    if (merges_in_progress_.contains(index))
      throw FactoringError("factoring did not converge: merge " + std::to_string(index) + " depends on itself");
    merges_in_progress_.insert(index);
    DepthGuard guard(*this);
    const MergeGoal m = merges_[index];

    auto rank = [&](FedId f) -> std::optional<std::tuple<int, std::size_t>> {
      const FedNode& n = nodes_[f];
      if (n.kind != FedNode::Kind::Expl)
        return std::nullopt;
      return std::make_tuple(n.goal.merge ? 1 : 0, n.at.depth());
    };
    auto rl = rank(m.left), rr = rank(m.right);
    if (!rl && !rr)
      throw FactoringError("merge " + std::to_string(index) + " has no expl operand");
    bool expand_left = rl && (!rr || *rl <= *rr);

    FedId side = expand_left ? m.left : m.right;
    FedId other = expand_left ? m.right : m.left;
    const FedNode root = nodes_[side];
    FedId full = graft(materialize(root), root.kids[0], root.kids[1]);
    FedId result = expand_left ? apply(m.op, full, other) : apply(m.op, other, full);

    merges_in_progress_.erase(index);
    merge_feds_.emplace(index, result);
    return result;
  }

  /// Re-roots every instance in `f` under `prefix`.
  FedId shift(FedId f, Instance prefix)
  {
    if (prefix.is_base() || nodes_[f].is_leaf())
      return f;
    auto key = std::make_pair(f, prefix.id());
    if (auto it = shift_memo_.find(key); it != shift_memo_.end())
      return it->second;
    FedNode n = nodes_[f];
    n.at = append(prefix, n.at);
    for (auto& k : n.kids)
      k = shift(k, prefix);
    FedId r = intern_or_reduce(std::move(n));
    shift_memo_.emplace(key, r);
    return r;
  }

  /// Inverse of shift; every instance in `f` must extend `prefix`.
  FedId unshift(FedId f, Instance prefix)
  {
    if (prefix.is_base() || nodes_[f].is_leaf())
      return f;
    auto key = std::make_pair(f, prefix.id());
    if (auto it = unshift_memo_.find(key); it != unshift_memo_.end())
      return it->second;
    FedNode n = nodes_[f];
    n.at = strip(n.at, prefix);
    for (auto& k : n.kids)
      k = unshift(k, prefix);
    FedId r = intern_or_reduce(std::move(n));
    unshift_memo_.emplace(key, r);
    return r;
  }

  /// f[ff -> on_false, tt -> on_true], keeping node order along paths where
  /// the grafted subtrees interleave with f.
  FedId graft(FedId f, FedId on_false, FedId on_true)
  {
    if (on_false == fed_false && on_true == fed_true)
      return f;
    if (f == fed_true)
      return on_true;
    if (f == fed_false)
      return on_false;
    auto key = std::make_tuple(f, on_false, on_true);
    if (auto it = graft_memo_.find(key); it != graft_memo_.end())
      return it->second;
    DepthGuard guard(*this);

    // candidate tops: root of f and the roots of non-leaf grafts
    std::vector<FedId> tops{f};
    for (FedId g : {on_false, on_true})
      if (!nodes_[g].is_leaf())
        tops.push_back(g);
    std::optional<FedId> top;
    for (FedId c : tops) {
      bool minimal = true;
      for (FedId o : tops)
        if (o != c) {
          auto r = order(c, o);
          minimal &= (r == NodeOrder::Less || r == NodeOrder::Equal);
        }
      if (minimal) {
        top = c;
        break;
      }
    }

    FedId result;
    if (!top) {
      ++stats_.unordered_grafts;
      result = rebuild(f, [&](FedId k) { return graft(k, on_false, on_true); });
    } else {
      auto cofactor = [&](FedId g, std::size_t i) {
        if (nodes_[g].is_leaf() || order(*top, g) != NodeOrder::Equal)
          return g;
        return nodes_[g].kids[i];
      };
      std::size_t arity = nodes_[*top].kids.size();
      std::vector<FedId> kids(arity);
      for (std::size_t i = 0; i < arity; ++i)
        kids[i] = graft(cofactor(f, i), cofactor(on_false, i), cofactor(on_true, i));
      result = with_kids(*top, std::move(kids));
    }
    graft_memo_.emplace(key, result);
    return result;
  }

  /// Conjunction of the events of joint `j` selected by `mask`, relative to
  /// the joint node's instance (memoized).
  FedId joint_conjunction(std::uint32_t j, std::uint32_t mask)
  {
    auto key = std::make_pair(j, mask);
    if (auto it = conjunction_memo_.find(key); it != conjunction_memo_.end())
      return it->second;
    const JointEvents events = joints_[j];
    FedId out = fed_true;
    for (std::size_t i = 0; i < events.size(); ++i)
      if (mask >> i & 1u)
        out = apply(FedOp::And, out, events[i]);
    conjunction_memo_.emplace(key, out);
    return out;
  }

  std::optional<FedId> goal_fed(Symbol goal) const
  {
    auto it = goal_feds_.find(goal);
    return it == goal_feds_.end() ? std::nullopt : std::optional<FedId>(it->second);
  }

  std::optional<FedId> merge_fed(std::uint32_t index) const
  {
    auto it = merge_feds_.find(index);
    return it == merge_feds_.end() ? std::nullopt : std::optional<FedId>(it->second);
  }

  /// Goals with a completed FED, in completion order.
  const std::vector<Symbol>& built_goals() const { return built_; }

  std::string goal_name(GoalRef g) const
  {
    if (!g.merge)
      return symbol_of(g).str();
    const auto& m = merges_[g.index];
    return "merge" + std::to_string(g.index) + "(" + to_string(m.op) + ",f" + std::to_string(m.left) + ",f" +
           std::to_string(m.right) + ")";
  }

  std::string joint_name(std::uint32_t j) const
  {
    std::string out = "joint" + std::to_string(j) + "(";
    for (std::size_t i = 0; i < joints_[j].size(); ++i) {
      const FedNode& e = nodes_[joints_[j][i]];
      out += (i ? ";" : "") + goal_name(e.goal) + "@" + e.at.to_string();
    }
    return out + ")";
  }

  /// Nodes reachable from `root` (leaves included).
  std::vector<FedId> reachable(FedId root) const
  {
    std::vector<FedId> out, stack{root};
    std::unordered_set<FedId> seen;
    while (!stack.empty()) {
      FedId id = stack.back();
      stack.pop_back();
      if (!seen.insert(id).second)
        continue;
      out.push_back(id);
      for (FedId k : nodes_[id].kids)
        stack.push_back(k);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Labels: msw nodes "r@h" (ellipse), expl nodes "g@h" (box), leaves doubled boxes.
  std::string to_dot() const
  {
    std::string out = "digraph feds {\n";
    std::size_t cluster = 0;
    auto emit = [&](const std::string& title, FedId root) {
      std::string p = "c" + std::to_string(cluster) + "_";
      out += "  subgraph cluster_" + std::to_string(cluster++) + " {\n";
      out += "    label=\"" + escape(title) + "\";\n";
      for (FedId id : reachable(root)) {
        const FedNode& n = nodes_[id];
        std::string name = p + "n" + std::to_string(id);
        switch (n.kind) {
        case FedNode::Kind::False:
          out += "    " + name + " [label=\"ff\", shape=box, peripheries=2];\n";
          break;
        case FedNode::Kind::True:
          out += "    " + name + " [label=\"tt\", shape=box, peripheries=2];\n";
          break;
        case FedNode::Kind::Msw: {
          out += "    " + name + " [label=\"" + escape(n.process.str() + "@" + n.at.to_string()) + "\", shape=ellipse];\n";
          const auto& dist = grammar_.provider().distribution(n.process);
          for (std::size_t i = 0; i < n.kids.size(); ++i)
            out += "    " + name + " -> " + p + "n" + std::to_string(n.kids[i]) + " [label=\"" +
                   escape(dist.outcomes()[i].value.str()) + "\"];\n";
          break;
        }
        case FedNode::Kind::Expl:
        case FedNode::Kind::Joint: {
          bool joint = n.kind == FedNode::Kind::Joint;
          std::string label = joint ? joint_name(n.goal.index) : goal_name(n.goal);
          out += "    " + name + " [label=\"" + escape(label + "@" + n.at.to_string()) + "\", shape=box];\n";
          std::size_t width = joint ? joints_[n.goal.index].size() : 1;
          for (std::size_t i = 0; i < n.kids.size(); ++i) {
            std::string bits;
            for (std::size_t b = 0; b < width; ++b)
              bits += (i >> b & 1u) ? '1' : '0';
            out += "    " + name + " -> " + p + "n" + std::to_string(n.kids[i]) + " [label=\"" + bits + "\"];\n";
          }
          break;
        }
        }
      }
      out += "  }\n";
    };
    for (Symbol g : built_)
      emit("expl(" + g.str() + ",H)", goal_feds_.at(g));
    for (std::uint32_t i = 0; i < merges_.size(); ++i)
      if (auto f = merge_fed(i))
        emit(goal_name(GoalRef::merged(i)), *f);
    out += "}\n";
    return out;
  }

private:
  struct NodeHash
  {
    std::size_t operator()(const FedNode& n) const noexcept
    {
      std::size_t h = static_cast<std::size_t>(n.kind);
      auto mix = [&](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
      mix(n.process.id());
      mix(n.goal.index * 2 + (n.goal.merge ? 1 : 0));
      mix(n.at.id());
      for (FedId k : n.kids)
        mix(k);
      return h;
    }
  };

  struct TupleHash
  {
    template <class... T>
    std::size_t operator()(const std::tuple<T...>& t) const noexcept
    {
      std::size_t h = 0;
      std::apply([&](const auto&... v) { ((h ^= std::hash<std::uint64_t>{}(v) + 0x9e3779b9 + (h << 6) + (h >> 2)), ...); }, t);
      return h;
    }
    template <class A, class B>
    std::size_t operator()(const std::pair<A, B>& p) const noexcept
    {
      return (*this)(std::make_tuple(p.first, p.second));
    }
  };

  /// Bounds the recursion depth of build/apply/graft.
  struct DepthGuard
  {
    explicit DepthGuard(FedStore& s) : store(s)
    {
      if (++store.depth_ > store.config_.depth_cap)
        throw FactoringError("factoring did not converge: recursion depth exceeds " +
                             std::to_string(store.config_.depth_cap));
    }
    ~DepthGuard() { --store.depth_; }
    DepthGuard(const DepthGuard&) = delete;
    DepthGuard& operator=(const DepthGuard&) = delete;
    FedStore& store;
  };

  static Symbol symbol_of(GoalRef g) { return Symbol::from_id(g.index); }

  static std::string escape(const std::string& s)
  {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\')
        out += '\\';
      out += c;
    }
    return out;
  }

  FedId intern(FedNode n)
  {
    if (auto it = unique_.find(n); it != unique_.end())
      return it->second;
    auto id = static_cast<FedId>(nodes_.size());
    nodes_.push_back(n);
    unique_.emplace(std::move(n), id);
    return id;
  }

  // A switch's outcomes are exhaustive, so msw?[c,..,c] is c for a constant c.
  // Single-outcome switches and switches over non-constant kids stay, keeping
  // one term per transition.
  FedId intern_or_reduce(FedNode n)
  {
    bool msw = n.kind == FedNode::Kind::Msw;
    bool constant = n.kids.size() > 1 && (n.kids[0] == fed_false || n.kids[0] == fed_true);
    if (!n.kids.empty() && (!msw || constant) &&
        std::all_of(n.kids.begin(), n.kids.end(), [&](FedId k) { return k == n.kids[0]; }))
      return n.kids[0];
    return intern(std::move(n));
  }

  FedId with_kids(FedId like, std::vector<FedId> kids)
  {
    FedNode n = nodes_[like];
    n.kids = std::move(kids);
    return intern_or_reduce(std::move(n));
  }

  template <class F>
  FedId rebuild(FedId f, F&& on_kid)
  {
    const auto kids = nodes_[f].kids;
    std::vector<FedId> out(kids.size());
    for (std::size_t i = 0; i < kids.size(); ++i)
      out[i] = on_kid(kids[i]);
    return with_kids(f, std::move(out));
  }

  FedId atom_fed(const BodySymbol& sym, const Production& p)
  {
    if (const auto* m = std::get_if<MswAtom>(&sym)) {
      if (!m->anchored)
        throw FactoringError("temporally ill-formed production: " + ExplGrammar::to_dcg(p));
      return msw_atom(m->process, m->at, m->outcome);
    }
    const auto& e = std::get<ExplAtom>(sym);
    if (!e.anchored)
      throw FactoringError("temporally ill-formed production: " + ExplGrammar::to_dcg(p));
    return build_at(e.goal, e.at);
  }

  /// Longest common prefix of every instance mentioned in f.
  std::optional<Instance> instance_prefix(FedId f)
  {
    if (nodes_[f].is_leaf())
      return std::nullopt;
    if (auto it = prefix_memo_.find(f); it != prefix_memo_.end())
      return it->second;
    Instance h = nodes_[f].at;
    for (FedId k : std::vector<FedId>(nodes_[f].kids))
      if (auto kh = instance_prefix(k))
        h = common_prefix(h, *kh);
    prefix_memo_.emplace(f, h);
    return h;
  }

  using Clause = std::vector<FedId>;
  using Dnf = std::vector<Clause>;

  static Dnf minimize(Dnf d)
  {
    for (auto& c : d) {
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    std::sort(d.begin(), d.end(), [](const Clause& a, const Clause& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    d.erase(std::unique(d.begin(), d.end()), d.end());
    Dnf out;
    for (const auto& c : d) {
      bool absorbed = std::any_of(out.begin(), out.end(), [&](const Clause& k) {
        return std::includes(c.begin(), c.end(), k.begin(), k.end());
      });
      if (!absorbed)
        out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  static Dnf combine(FedOp op, const Dnf& a, const Dnf& b)
  {
    Dnf out;
    if (op == FedOp::Or) {
      out = a;
      out.insert(out.end(), b.begin(), b.end());
    } else {
      for (const auto& x : a)
        for (const auto& y : b) {
          Clause c = x;
          c.insert(c.end(), y.begin(), y.end());
          out.push_back(std::move(c));
        }
    }
    return minimize(std::move(out));
  }

  /// Monotone DNF of a leaf form over the goal events it combines; a merge of
  /// anything other than two leaf forms counts as a single event.
  Dnf dnf_of(FedId f)
  {
    if (auto it = dnf_memo_.find(f); it != dnf_memo_.end())
      return it->second;
    const FedNode n = nodes_[f];
    Dnf out{{f}};
    if (n.goal.merge) {
      const MergeGoal m = merges_[n.goal.index];
      if (is_leaf_form(nodes_[m.left]) && is_leaf_form(nodes_[m.right])) {
        Instance origin = n.at.truncate(n.at.depth() - m.offset.depth());
        out = combine(m.op, dnf_of(shift(m.left, origin)), dnf_of(shift(m.right, origin)));
      }
    }
    dnf_memo_.emplace(f, out);
    return out;
  }

  /// Leaf form of a minimal DNF: a right-nested chain of or-merges over
  /// right-nested and-merges.
  FedId from_dnf(const Dnf& d, std::size_t first = 0)
  {
    auto conj = [&](const Clause& c) {
      FedId acc = c.back();
      for (std::size_t i = c.size() - 1; i-- > 0;)
        acc = register_merge(FedOp::And, c[i], acc);
      return acc;
    };
    if (first + 1 == d.size())
      return conj(d[first]);
    return register_merge(FedOp::Or, conj(d[first]), from_dnf(d, first + 1));
  }

  /// Merges of two leaf forms are kept in a canonical form, so equivalent
  /// combinations of the same events share one merge goal.
  FedId make_merge(FedOp op, FedId f, FedId g)
  {
    if (is_leaf_form(nodes_[f]) && is_leaf_form(nodes_[g]))
      return from_dnf(combine(op, dnf_of(f), dnf_of(g)));
    return register_merge(op, f, g);
  }

  FedId register_merge(FedOp op, FedId f, FedId g)
  {
    Instance at = common_prefix(nodes_[f].at, nodes_[g].at);
    Instance origin = common_prefix(at, common_prefix(*instance_prefix(f), *instance_prefix(g)));
    FedId a = unshift(f, origin), b = unshift(g, origin);
    if (a > b)
      std::swap(a, b);
    Instance offset = strip(at, origin);
    auto key = std::make_tuple(static_cast<int>(op), a, b, offset.id());
    std::uint32_t index;
    if (auto it = merge_index_.find(key); it != merge_index_.end()) {
      index = it->second;
    } else {
      if (merges_.size() >= config_.merge_cap)
        throw FactoringError("factoring did not converge: more than " + std::to_string(config_.merge_cap) +
                             " merge goals");
      index = static_cast<std::uint32_t>(merges_.size());
      merges_.push_back({op, a, b, offset});
      merge_index_.emplace(key, index);
    }
    return deferred(GoalRef::merged(index), at);
  }

  bool is_leaf_form(const FedNode& n) const
  {
    return n.kind == FedNode::Kind::Expl && n.kids[0] == fed_false && n.kids[1] == fed_true;
  }

  /// True when every decision node below f lies on a branch of time divergent from h.
  bool divergent_from(FedId f, Instance h)
  {
    if (nodes_[f].is_leaf())
      return true;
    auto key = std::make_pair(f, h.id());
    if (auto it = divergent_memo_.find(key); it != divergent_memo_.end())
      return it->second;
    bool ok = time_order(nodes_[f].at, h) == TimeOrder::Incomparable;
    for (FedId k : std::vector<FedId>(nodes_[f].kids))
      ok = ok && divergent_from(k, h);
    divergent_memo_.emplace(key, ok);
    return ok;
  }

  /// Incomparable roots that test correlated events, each followed only by
  /// subdiagrams independent of those events. Such pairs are combined by
  /// branching on the joint outcome of the events instead of a merge, which
  /// would carry the subdiagrams along.
  bool joinable(FedId f, FedId g)
  {
    const FedNode& x = nodes_[f];
    const FedNode& y = nodes_[g];
    for (const FedNode* n : {&x, &y})
      if (n->kind != FedNode::Kind::Expl && n->kind != FedNode::Kind::Joint)
        return false;
    if (is_leaf_form(x) && is_leaf_form(y))
      return false;
    Instance h = common_prefix(x.at, y.at);
    for (FedId r : {f, g})
      for (FedId k : std::vector<FedId>(nodes_[r].kids))
        if (!divergent_from(k, h))
          return false;
    return true;
  }

  /// Events of an expl or joint root, at absolute instances.
  std::vector<FedId> events_of(FedId r)
  {
    const FedNode n = nodes_[r];
    if (n.kind == FedNode::Kind::Expl)
      return {deferred(n.goal, n.at)};
    std::vector<FedId> out;
    for (FedId e : joints_[n.goal.index])
      out.push_back(shift(e, n.at));
    return out;
  }

  /// Child of root r, whose events are `mine`, when `mask` selects which of
  /// `all` hold.
  FedId kid_for(FedId r, const std::vector<FedId>& mine, const std::vector<FedId>& all, std::uint32_t mask) const
  {
    std::uint32_t sub = 0;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      auto pos = static_cast<std::size_t>(std::find(all.begin(), all.end(), mine[i]) - all.begin());
      if (mask >> pos & 1u)
        sub |= 1u << i;
    }
    return nodes_[r].kids[sub];
  }

  /// f op g as a disjunction over the joint outcomes of both roots' events.
  FedId joint_apply(FedOp op, FedId f, FedId g)
  {
    auto ef = events_of(f), eg = events_of(g);
    std::vector<FedId> all = ef;
    for (FedId e : eg)
      if (std::find(all.begin(), all.end(), e) == all.end())
        all.push_back(e);
    if (all.size() > config_.joint_cap)
      return make_merge(op, f, g);
    Instance at = common_prefix(nodes_[f].at, nodes_[g].at);
    std::vector<std::pair<FedId, FedId>> rel; // (relative, absolute)
    for (FedId e : all)
      rel.emplace_back(unshift(e, at), e);
    std::sort(rel.begin(), rel.end());
    JointEvents events;
    all.clear();
    for (const auto& [r, a] : rel) {
      events.push_back(r);
      all.push_back(a);
    }
    std::uint32_t j;
    if (auto it = joint_index_.find(events); it != joint_index_.end()) {
      j = it->second;
    } else {
      j = static_cast<std::uint32_t>(joints_.size());
      joints_.push_back(events);
      joint_index_.emplace(events, j);
    }
    const std::uint32_t width = 1u << events.size();
    FedId result = fed_false;
    for (std::uint32_t mask = 0; mask < width; ++mask) {
      FedId c = apply(op, kid_for(f, ef, all, mask), kid_for(g, eg, all, mask));
      if (c == fed_false)
        continue;
      std::vector<FedId> kids(width, fed_false);
      kids[mask] = fed_true;
      FedId indicator = intern_or_reduce(FedNode{FedNode::Kind::Joint, {}, {false, j}, at, std::move(kids)});
      result = apply(FedOp::Or, result, apply(FedOp::And, indicator, c));
    }
    return result;
  }

  /// Full FED of an expl node's goal, translated to the node's instance.
  FedId materialize(const FedNode& n)
  {
    if (!n.goal.merge)
      return shift(build(symbol_of(n.goal)), n.at);
    const MergeGoal& m = merges_[n.goal.index];
    Instance origin = n.at.truncate(n.at.depth() - m.offset.depth());
    return shift(expand_merge(n.goal.index), origin);
  }

  ExplGrammar& grammar_;
  FedConfig config_;
  FedStats stats_;
  std::size_t depth_ = 0;

  std::vector<FedNode> nodes_;
  std::unordered_map<FedNode, FedId, NodeHash> unique_;
  std::unordered_map<std::tuple<int, FedId, FedId>, FedId, TupleHash> apply_memo_;
  std::unordered_map<std::tuple<FedId, FedId, FedId>, FedId, TupleHash> graft_memo_;
  std::unordered_map<std::pair<FedId, std::uint32_t>, FedId, TupleHash> shift_memo_;
  std::unordered_map<std::pair<FedId, std::uint32_t>, FedId, TupleHash> unshift_memo_;
  std::unordered_map<FedId, Instance> prefix_memo_;
  std::unordered_map<FedId, Dnf> dnf_memo_;
  std::unordered_map<std::pair<FedId, std::uint32_t>, bool, TupleHash> divergent_memo_;
  std::unordered_map<std::pair<std::uint32_t, std::uint32_t>, FedId, TupleHash> conjunction_memo_;

  std::unordered_map<Symbol, FedId> goal_feds_;
  std::unordered_set<Symbol> in_progress_;
  std::vector<Symbol> built_;

  std::vector<MergeGoal> merges_;
  std::unordered_map<std::tuple<int, FedId, FedId, std::uint32_t>, std::uint32_t, TupleHash> merge_index_;
  std::unordered_map<std::uint32_t, FedId> merge_feds_;
  std::unordered_set<std::uint32_t> merges_in_progress_;

  struct EventsHash
  {
    std::size_t operator()(const JointEvents& v) const noexcept
    {
      std::size_t h = v.size();
      for (FedId e : v)
        h ^= std::hash<FedId>{}(e) + 0x9e3779b9 + (h << 6) + (h >> 2);
      return h;
    }
  };
  std::vector<JointEvents> joints_;
  std::unordered_map<JointEvents, std::uint32_t, EventsHash> joint_index_;
};

/// Path-order check: along every edge between decision nodes the parent is
/// strictly less than the child. Returns the first violation, or nullopt.
inline std::optional<std::string> check_path_order(const FedStore& store, FedId root)
{
  for (FedId id : store.reachable(root)) {
    const FedNode& n = store.node(id);
    for (FedId k : n.kids) {
      if (store.node(k).is_leaf())
        continue;
      if (store.order(id, k) != NodeOrder::Less)
        return "edge f" + std::to_string(id) + " -> f" + std::to_string(k) + " is not increasing in node order";
    }
  }
  return std::nullopt;
}

} // namespace pipmc
