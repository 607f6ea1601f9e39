#pragma once

#include <cctype>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace pipmc {

/// Interned identifier. Two symbols are equal iff their spellings are equal.
///
/// The intern table is process-wide and grows monotonically; symbols stay
/// valid for the lifetime of the program. Interning is not synchronized, so
/// parsing and construction must happen on one thread.
class Symbol
{
public:
  Symbol() = default;
  explicit Symbol(std::string_view spelling) : id_(intern(spelling)) {}

  /// Symbol with an id previously returned by id().
  static Symbol from_id(std::uint32_t id)
  {
    Symbol s;
    s.id_ = id;
    return s;
  }

  std::uint32_t id() const { return id_; }
  const std::string& str() const { return table().spellings[id_]; }
  bool empty() const { return id_ == 0; }

  friend bool operator==(Symbol a, Symbol b) { return a.id_ == b.id_; }

  /// Term order: lexicographic on spelling.
  friend std::strong_ordering term_order(Symbol a, Symbol b)
  {
    if (a.id_ == b.id_)
      return std::strong_ordering::equal;
    return a.str().compare(b.str()) < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  }

private:
  struct Table
  {
    std::deque<std::string> spellings{std::string{}};
    std::unordered_map<std::string_view, std::uint32_t> index{{std::string_view{}, 0}};
  };

  static Table& table()
  {
    static Table t;
    return t;
  }

  static std::uint32_t intern(std::string_view s)
  {
    auto& t = table();
    if (auto it = t.index.find(s); it != t.index.end())
      return it->second;
    t.spellings.emplace_back(s);
    auto id = static_cast<std::uint32_t>(t.spellings.size() - 1);
    t.index.emplace(t.spellings.back(), id);
    return id;
  }

  std::uint32_t id_ = 0;
};

/// Identifiers starting with '_' denote logic variables; everything else is ground.
inline bool is_ground(std::string_view spelling)
{
  bool at_token_start = true;
  for (char c : spelling) {
    if (at_token_start && c == '_')
      return false;
    at_token_start = !(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.');
  }
  return true;
}

} // namespace pipmc

template <>
struct std::hash<pipmc::Symbol>
{
  std::size_t operator()(pipmc::Symbol s) const noexcept { return s.id(); }
};
