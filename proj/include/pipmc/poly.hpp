#pragma once

#include "pipmc/error.hpp"
#include "pipmc/grammar.hpp"
#include "pipmc/lexer.hpp"
#include "pipmc/model.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pipmc {

using PolyId = std::uint32_t;
inline constexpr PolyId poly_zero = 0;
inline constexpr PolyId poly_one = 1;

/// Node of a polynomial expression DAG.
///
///   Const   value
///   Linear  sum of coef * child
///   Mul     child0 * child1
///   Ite     x_var * child0 + (1 - x_var) * child1; a bare variable is Ite(v, 1, 0)
struct PolyNode
{
  enum class Kind : std::uint8_t { Const, Linear, Mul, Ite };

  Kind kind = Kind::Const;
  double value = 0;
  std::uint32_t var = 0;
  std::vector<std::pair<double, PolyId>> terms; // Linear
  std::vector<PolyId> args;                     // Mul: factors; Ite: {then, else}

  bool is_var() const { return kind == Kind::Ite && args[0] == poly_one && args[1] == poly_zero; }

  friend bool operator==(const PolyNode&, const PolyNode&) = default;
};

/// Hash-consed polynomial DAG. Children always have smaller ids than their
/// parents, so evaluating in id order is a topological evaluation.
class PolyPool
{
public:
  PolyPool()
  {
    nodes_.push_back({PolyNode::Kind::Const, 0.0, 0, {}, {}});
    nodes_.push_back({PolyNode::Kind::Const, 1.0, 0, {}, {}});
    unique_.emplace(nodes_[0], 0);
    unique_.emplace(nodes_[1], 1);
  }

  const PolyNode& node(PolyId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  bool is_const(PolyId id) const { return nodes_[id].kind == PolyNode::Kind::Const; }

  PolyId constant(double v) { return intern({PolyNode::Kind::Const, v, 0, {}, {}}); }

  PolyId var(std::uint32_t v) { return ite(v, poly_one, poly_zero); }

  PolyId ite(std::uint32_t v, PolyId then, PolyId otherwise)
  {
    if (then == otherwise)
      return then;
    return intern({PolyNode::Kind::Ite, 0, v, {}, {then, otherwise}});
  }

  /// Sum of coef * child. Constant children are folded; with `collapse` a
  /// lone unit term is returned as the child itself.
  PolyId linear(std::vector<std::pair<double, PolyId>> terms, bool collapse = true)
  {
    std::vector<std::pair<double, PolyId>> kept;
    double constant_part = 0;
    bool has_constant = false;
    for (auto [c, p] : terms) {
      if (c == 0 || p == poly_zero)
        continue;
      if (is_const(p)) {
        constant_part += c * nodes_[p].value;
        has_constant = true;
      } else {
        kept.emplace_back(c, p);
      }
    }
    if (kept.empty())
      return constant(constant_part);
    if (has_constant)
      kept.emplace_back(1.0, constant(constant_part));
    if (collapse && kept.size() == 1 && kept[0].first == 1.0)
      return kept[0].second;
    return intern({PolyNode::Kind::Linear, 0, 0, std::move(kept), {}});
  }

  PolyId mul(PolyId a, PolyId b)
  {
    if (a == poly_zero || b == poly_zero)
      return poly_zero;
    if (a == poly_one)
      return b;
    if (b == poly_one)
      return a;
    if (is_const(a) && is_const(b))
      return constant(nodes_[a].value * nodes_[b].value);
    if (is_const(b))
      std::swap(a, b);
    if (is_const(a))
      return linear({{nodes_[a].value, b}});
    return intern({PolyNode::Kind::Mul, 0, 0, {}, {a, b}});
  }

  PolyId add(PolyId a, PolyId b) { return linear({{1.0, a}, {1.0, b}}); }
  PolyId sub(PolyId a, PolyId b) { return linear({{1.0, a}, {-1.0, b}}); }

  /// Evaluates node `id` given already-evaluated children.
  double eval_node(PolyId id, const std::vector<double>& val, const std::vector<double>& x) const
  {
    const PolyNode& n = nodes_[id];
    switch (n.kind) {
    case PolyNode::Kind::Const:
      return n.value;
    case PolyNode::Kind::Linear: {
      double s = 0;
      for (auto [c, p] : n.terms)
        s += c * val[p];
      return s;
    }
    case PolyNode::Kind::Mul:
      return val[n.args[0]] * val[n.args[1]];
    case PolyNode::Kind::Ite: {
      double v = x[n.var];
      return v * val[n.args[0]] + (1 - v) * val[n.args[1]];
    }
    }
    return 0;
  }

  /// Variables mentioned anywhere below `root`.
  std::vector<std::uint32_t> vars_of(PolyId root) const
  {
    std::vector<std::uint32_t> out;
    for (PolyId id : reachable(root))
      if (nodes_[id].kind == PolyNode::Kind::Ite)
        out.push_back(nodes_[id].var);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Non-constant nodes below the roots, ascending (topological) order.
  std::vector<PolyId> reachable(PolyId root) const { return reachable(std::vector<PolyId>{root}); }

  std::vector<PolyId> reachable(const std::vector<PolyId>& roots) const
  {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<PolyId> stack(roots), out;
    while (!stack.empty()) {
      PolyId id = stack.back();
      stack.pop_back();
      if (seen[id] || is_const(id))
        continue;
      seen[id] = 1;
      out.push_back(id);
      const PolyNode& n = nodes_[id];
      for (auto [c, p] : n.terms)
        stack.push_back(p);
      for (PolyId p : n.args)
        stack.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// True when no variable is multiplied by an expression containing a variable.
  bool is_linear(PolyId root) const
  {
    for (PolyId id : reachable(root)) {
      const PolyNode& n = nodes_[id];
      if (n.kind == PolyNode::Kind::Mul && !vars_of(n.args[0]).empty() && !vars_of(n.args[1]).empty())
        return false;
      if (n.kind == PolyNode::Kind::Ite && !(vars_of(n.args[0]).empty() && vars_of(n.args[1]).empty()))
        return false;
    }
    return true;
  }

  /// Infix rendering; `name(v)` spells variables.
  template <class Name>
  std::string to_string(PolyId id, Name&& name) const
  {
    const PolyNode& n = nodes_[id];
    switch (n.kind) {
    case PolyNode::Kind::Const:
      return format_double(n.value);
    case PolyNode::Kind::Linear: {
      std::string s;
      for (std::size_t i = 0; i < n.terms.size(); ++i) {
        auto [c, p] = n.terms[i];
        double mag = c;
        if (i) {
          s += c < 0 ? " - " : " + ";
          mag = c < 0 ? -c : c;
        } else if (c < 0) {
          s += "-";
          mag = -c;
        }
        if (is_const(p))
          s += format_double(mag * nodes_[p].value);
        else if (mag == 1 && n.terms.size() > 1)
          s += factor(p, name);
        else
          s += format_double(mag) + " * " + factor(p, name);
      }
      return s;
    }
    case PolyNode::Kind::Mul:
      return factor(n.args[0], name) + " * " + factor(n.args[1], name);
    case PolyNode::Kind::Ite: {
      std::string v = name(n.var);
      if (n.is_var())
        return v;
      std::string s = n.args[0] == poly_one ? v : v + " * " + factor(n.args[0], name);
      if (n.args[1] != poly_zero)
        s += " + (1 - " + v + ")" + (n.args[1] == poly_one ? "" : " * " + factor(n.args[1], name));
      return s;
    }
    }
    return {};
  }

private:
  struct NodeHash
  {
    std::size_t operator()(const PolyNode& n) const noexcept
    {
      std::size_t h = std::hash<double>{}(n.value) ^ (static_cast<std::size_t>(n.kind) << 1) ^ (std::size_t(n.var) << 7);
      auto mix = [&](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
      for (auto [c, p] : n.terms) {
        mix(std::hash<double>{}(c));
        mix(p);
      }
      for (PolyId p : n.args)
        mix(p);
      return h;
    }
  };

  template <class Name>
  std::string factor(PolyId id, Name& name) const
  {
    const PolyNode& n = nodes_[id];
    bool atomic = n.kind == PolyNode::Kind::Const || n.is_var() || n.kind == PolyNode::Kind::Mul;
    std::string s = to_string(id, name);
    return atomic ? s : "(" + s + ")";
  }

  PolyId intern(PolyNode n)
  {
    if (auto it = unique_.find(n); it != unique_.end())
      return it->second;
    auto id = static_cast<PolyId>(nodes_.size());
    nodes_.push_back(n);
    unique_.emplace(std::move(n), id);
    return id;
  }

  std::vector<PolyNode> nodes_;
  std::unordered_map<PolyNode, PolyId, NodeHash> unique_;
};

/// One equation per variable: x_i = rhs_i, solved for its least or greatest solution.
struct PolySystem
{
  struct Var
  {
    std::string name;  // x0, x1, ...
    std::string label; // goal or merge the variable stands for
    Fixpoint kind = Fixpoint::Least;
    PolyId rhs = poly_zero;
  };

  PolyPool pool;
  std::vector<Var> vars;

  std::optional<std::uint32_t> find(std::string_view name) const
  {
    for (std::uint32_t i = 0; i < vars.size(); ++i)
      if (vars[i].name == name)
        return i;
    return std::nullopt;
  }

  std::string rhs_text(std::uint32_t v) const
  {
    return pool.to_string(vars[v].rhs, [&](std::uint32_t k) { return vars[k].name; });
  }

  /// Equations followed by a legend mapping variables to what they stand for.
  std::string dump() const
  {
    std::string out;
    for (std::uint32_t i = 0; i < vars.size(); ++i)
      out += std::string(vars[i].kind == Fixpoint::Greatest ? "gfp " : "") + vars[i].name + " = " + rhs_text(i) + "\n";
    if (!vars.empty())
      out += "\n";
    for (const auto& v : vars)
      out += "% " + v.name + ": " + v.label + "\n";
    return out;
  }
};

namespace detail {

class EqnParser
{
public:
  EqnParser(std::string_view text, PolySystem& sys) : lex_(text), sys_(sys) {}

  void run()
  {
    while (!lex_.at_end()) {
      Fixpoint kind = Fixpoint::Least;
      Token name = lex_.peek();
      std::string id = lex_.expect_ident();
      if ((id == "lfp" || id == "gfp") && lex_.peek().kind == Token::Kind::Ident) {
        kind = id == "gfp" ? Fixpoint::Greatest : Fixpoint::Least;
        name = lex_.peek();
        id = lex_.expect_ident();
      }
      std::uint32_t v = var(id);
      if (defined_[v])
        throw ParseError("duplicate equation for '" + id + "'", name.line, name.column);
      defined_[v] = true;
      lex_.expect("=");
      sys_.vars[v].kind = kind;
      sys_.vars[v].rhs = expr();
      lex_.accept(";");
    }
    for (std::uint32_t v = 0; v < sys_.vars.size(); ++v)
      if (!defined_[v])
        throw ParseError("variable '" + sys_.vars[v].name + "' has no equation", first_use_[v].line,
                         first_use_[v].column);
  }

private:
  std::uint32_t var(const std::string& id)
  {
    if (auto v = sys_.find(id))
      return *v;
    sys_.vars.push_back({id, id, Fixpoint::Least, poly_zero});
    defined_.push_back(false);
    first_use_.push_back(lex_.peek());
    return static_cast<std::uint32_t>(sys_.vars.size() - 1);
  }

  PolyId expr()
  {
    PolyId acc = term();
    for (;;) {
      if (lex_.accept("+"))
        acc = sys_.pool.add(acc, term());
      else if (lex_.accept("-"))
        acc = sys_.pool.sub(acc, term());
      else
        return acc;
    }
  }

  PolyId term()
  {
    PolyId acc = atom();
    while (lex_.accept("*"))
      acc = sys_.pool.mul(acc, atom());
    return acc;
  }

  PolyId atom()
  {
    const Token& t = lex_.peek();
    if (lex_.accept("(")) {
      PolyId p = expr();
      lex_.expect(")");
      return p;
    }
    if (lex_.accept("-"))
      return sys_.pool.linear({{-1.0, atom()}});
    if (t.kind == Token::Kind::Number)
      return sys_.pool.constant(lex_.expect_number());
    if (t.kind == Token::Kind::Ident) {
      std::string id = t.text;
      std::uint32_t v = var(id);
      lex_.next();
      return sys_.pool.var(v);
    }
    lex_.fail("expected a number, variable or '(' but found " + Lexer::describe(t));
  }

  Lexer lex_;
  PolySystem& sys_;
  std::vector<bool> defined_;
  std::vector<Token> first_use_;
};

} // namespace detail

/// Parses a raw equation file: "[lfp|gfp] <var> = <expr>" per equation, with
/// an optional ';' terminator, +, -, *, parentheses, decimal constants and
/// variable names. Variables may be used before their equation. The output of
/// PolySystem::dump() parses back.
inline PolySystem parse_eqn(std::string_view text)
{
  PolySystem sys;
  detail::EqnParser(text, sys).run();
  return sys;
}

} // namespace pipmc
