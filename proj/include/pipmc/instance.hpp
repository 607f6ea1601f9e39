#pragma once

#include "pipmc/symbol.hpp"

#include <cassert>
#include <compare>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace pipmc {

/// A time position in the process tree: a finite path of branch tokens
/// relative to an implicit base. The empty path is the base itself.
///
/// Paths are hash-consed in a process-wide trie, so equality is id equality.
class Instance
{
public:
  Instance() = default;

  static Instance base() { return Instance{}; }

  static Instance of(const std::vector<Symbol>& tokens)
  {
    Instance h;
    for (Symbol t : tokens)
      h = h.extend(t);
    return h;
  }

  Instance extend(Symbol token) const
  {
    auto& t = table();
    std::uint64_t key = (std::uint64_t(id_) << 32) | token.id();
    if (auto it = t.children.find(key); it != t.children.end())
      return Instance(it->second);
    t.nodes.push_back({id_, token, t.nodes[id_].depth + 1});
    auto id = static_cast<std::uint32_t>(t.nodes.size() - 1);
    t.children.emplace(key, id);
    return Instance(id);
  }

  bool is_base() const { return id_ == 0; }
  std::uint32_t id() const { return id_; }
  std::size_t depth() const { return table().nodes[id_].depth; }
  Instance parent() const { return Instance(table().nodes[id_].parent); }
  Symbol last() const { return table().nodes[id_].token; }

  std::vector<Symbol> tokens() const
  {
    std::vector<Symbol> out(depth());
    Instance h = *this;
    for (std::size_t i = out.size(); i-- > 0; h = h.parent())
      out[i] = h.last();
    return out;
  }

  /// Ancestor at the given depth (depth() >= d).
  Instance truncate(std::size_t d) const
  {
    Instance h = *this;
    while (h.depth() > d)
      h = h.parent();
    return h;
  }

  std::string to_string() const
  {
    std::string s = "[";
    auto toks = tokens();
    for (std::size_t i = 0; i < toks.size(); ++i)
      s += (i ? "," : "") + toks[i].str();
    return s + "]";
  }

  friend bool operator==(Instance a, Instance b) { return a.id_ == b.id_; }

private:
  explicit Instance(std::uint32_t id) : id_(id) {}

  struct Node
  {
    std::uint32_t parent;
    Symbol token;
    std::size_t depth;
  };

  struct Table
  {
    std::vector<Node> nodes{Node{0, Symbol{}, 0}};
    std::unordered_map<std::uint64_t, std::uint32_t> children;
  };

  static Table& table()
  {
    static Table t;
    return t;
  }

  std::uint32_t id_ = 0;
};

enum class TimeOrder { Earlier, Equal, Later, Incomparable };

/// Earlier iff a is a strict prefix of b; Incomparable when the paths diverge.
inline TimeOrder time_order(Instance a, Instance b)
{
  if (a == b)
    return TimeOrder::Equal;
  if (a.depth() < b.depth())
    return b.truncate(a.depth()) == a ? TimeOrder::Earlier : TimeOrder::Incomparable;
  if (b.depth() < a.depth())
    return a.truncate(b.depth()) == b ? TimeOrder::Later : TimeOrder::Incomparable;
  return TimeOrder::Incomparable;
}

inline bool earlier(Instance a, Instance b) { return time_order(a, b) == TimeOrder::Earlier; }

inline Instance common_prefix(Instance a, Instance b)
{
  if (a.depth() > b.depth())
    a = a.truncate(b.depth());
  else
    b = b.truncate(a.depth());
  while (!(a == b)) {
    a = a.parent();
    b = b.parent();
  }
  return a;
}

inline bool has_prefix(Instance h, Instance prefix) { return h.depth() >= prefix.depth() && h.truncate(prefix.depth()) == prefix; }

/// prefix . rel
inline Instance append(Instance prefix, Instance rel)
{
  if (rel.is_base())
    return prefix;
  return append(prefix, rel.parent()).extend(rel.last());
}

/// The path of h below prefix. Requires has_prefix(h, prefix).
inline Instance strip(Instance h, Instance prefix)
{
  assert(has_prefix(h, prefix));
  if (h == prefix)
    return Instance::base();
  return strip(h.parent(), prefix).extend(h.last());
}

/// Fixed total order on token paths: lexicographic on token spellings,
/// a proper prefix sorting first.
inline std::strong_ordering path_order(Instance a, Instance b)
{
  if (a == b)
    return std::strong_ordering::equal;
  auto ta = a.tokens(), tb = b.tokens();
  for (std::size_t i = 0; i < ta.size() && i < tb.size(); ++i)
    if (auto c = term_order(ta[i], tb[i]); c != 0)
      return c;
  return ta.size() <=> tb.size();
}

} // namespace pipmc

template <>
struct std::hash<pipmc::Instance>
{
  std::size_t operator()(pipmc::Instance h) const noexcept { return h.id(); }
};
