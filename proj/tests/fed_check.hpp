#pragma once

#include "pipmc/fed.hpp"

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace testing_support {

using pipmc::FedId;
using pipmc::FedNode;
using pipmc::FedStore;
using pipmc::Instance;
using pipmc::Symbol;

// Documented node order, recomputed from instance tokens and spellings:
// divergent instances compare by path (lexicographic on token spellings);
// msw nodes at related instances by time, then process spelling; an msw
// precedes an expl/joint node only at a strictly earlier instance.
enum class Ord { Less, Equal, Greater, None };

inline std::vector<std::string> spell(Instance h)
{
  std::vector<std::string> out;
  for (Symbol t : h.tokens())
    out.push_back(t.str());
  return out;
}

inline Ord expected_order(const FedStore& st, FedId a, FedId b)
{
  const FedNode& x = st.node(a);
  const FedNode& y = st.node(b);
  auto tx = spell(x.at), ty = spell(y.at);
  std::size_t common = 0;
  while (common < tx.size() && common < ty.size() && tx[common] == ty[common])
    ++common;
  bool x_prefix = common == tx.size(), y_prefix = common == ty.size();
  if (!x_prefix && !y_prefix)
    return tx[common] < ty[common] ? Ord::Less : Ord::Greater;
  bool x_earlier = x_prefix && !y_prefix, y_earlier = y_prefix && !x_prefix;
  bool msw_x = x.kind == FedNode::Kind::Msw, msw_y = y.kind == FedNode::Kind::Msw;
  if (msw_x && msw_y) {
    if (x_earlier)
      return Ord::Less;
    if (y_earlier)
      return Ord::Greater;
    if (x.process.str() != y.process.str())
      return x.process.str() < y.process.str() ? Ord::Less : Ord::Greater;
    return Ord::Equal;
  }
  if (msw_x)
    return x_earlier ? Ord::Less : Ord::None;
  if (msw_y)
    return y_earlier ? Ord::Greater : Ord::None;
  if (!x_earlier && !y_earlier && x.kind == y.kind && x.goal == y.goal)
    return Ord::Equal;
  return Ord::None;
}

// Every root of a store: goal FEDs, merge FEDs and joint conjunctions.
inline std::vector<FedId> all_roots(FedStore& st)
{
  std::vector<FedId> roots;
  for (Symbol g : st.built_goals())
    roots.push_back(*st.goal_fed(g));
  for (std::uint32_t i = 0; i < st.merges().size(); ++i)
    if (auto f = st.merge_fed(i))
      roots.push_back(*f);
  return roots;
}

// First violation on any root-to-leaf path, or empty.
inline std::string path_violation(const FedStore& st, FedId root)
{
  using Key = std::pair<std::uint32_t, std::vector<std::string>>;
  std::map<FedId, std::set<Key>> below; // msw keys strictly below a node
  std::function<const std::set<Key>&(FedId)> keys = [&](FedId f) -> const std::set<Key>& {
    if (auto it = below.find(f); it != below.end())
      return it->second;
    std::set<Key> out;
    for (FedId k : st.node(f).kids) {
      const FedNode& kn = st.node(k);
      if (kn.is_leaf())
        continue;
      if (kn.kind == FedNode::Kind::Msw)
        out.insert({kn.process.id(), spell(kn.at)});
      const auto& sub = keys(k);
      out.insert(sub.begin(), sub.end());
    }
    return below[f] = std::move(out);
  };
  std::string err;
  for (FedId f : st.reachable(root)) {
    const FedNode& n = st.node(f);
    if (n.is_leaf())
      continue;
    if (n.kind == FedNode::Kind::Msw && keys(f).contains({n.process.id(), spell(n.at)}))
      return "msw " + n.process.str() + "@" + n.at.to_string() + " repeats on a path";
    for (FedId k : n.kids)
      if (!st.node(k).is_leaf() && expected_order(st, f, k) != Ord::Less)
        return "edge f" + std::to_string(f) + " -> f" + std::to_string(k) + " does not increase";
  }
  return err;
}

} // namespace testing_support
