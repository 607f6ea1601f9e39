#pragma once

#include "pipmc/error.hpp"
#include "pipmc/lexer.hpp"
#include "pipmc/symbol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pipmc {

/// Shortest decimal spelling that parses back to the same double.
inline std::string format_double(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Rounded spelling for messages.
inline std::string format_rounded(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Outcome
{
  Symbol value;
  double prob = 0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Finite distribution over symbols; outcome order is significant and is the
/// edge order of the corresponding FED nodes.
class Distribution
{
public:
  static constexpr double sum_tolerance = 1e-9;

  Distribution() = default;

  /// Throws ModelError unless probabilities are nonnegative, sum to 1 within
  /// 1e-9, and values are pairwise distinct.
  explicit Distribution(std::vector<Outcome> outcomes) : outcomes_(std::move(outcomes))
  {
    if (outcomes_.empty())
      throw ModelError("distribution has no outcomes");
    double sum = 0;
    std::set<std::uint32_t> seen;
    for (const auto& o : outcomes_) {
      if (!(o.prob >= 0) || o.prob > 1)
        throw ModelError("probability " + format_rounded(o.prob) + " of '" + o.value.str() + "' outside [0,1]");
      if (!seen.insert(o.value.id()).second)
        throw ModelError("duplicate outcome '" + o.value.str() + "'");
      sum += o.prob;
    }
    if (std::abs(sum - 1.0) > sum_tolerance)
      throw ModelError("distribution sums to " + format_rounded(sum));
  }

  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  std::size_t size() const { return outcomes_.size(); }

  std::optional<std::size_t> index_of(Symbol v) const
  {
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
      if (outcomes_[i].value == v)
        return i;
    return std::nullopt;
  }

  double prob(Symbol v) const
  {
    auto i = index_of(v);
    return i ? outcomes_[*i].prob : 0.0;
  }

  friend bool operator==(const Distribution&, const Distribution&) = default;

private:
  std::vector<Outcome> outcomes_;
};

/// Discrete-time Markov chain. States without a switch are absorbing.
struct Dtmc
{
  std::vector<Symbol> states;
  std::unordered_map<Symbol, Distribution> switches;
  std::unordered_map<Symbol, std::vector<Symbol>> labels;

  bool has_state(Symbol s) const { return std::find(states.begin(), states.end(), s) != states.end(); }

  const Distribution* successors(Symbol s) const
  {
    auto it = switches.find(s);
    return it == switches.end() ? nullptr : &it->second;
  }

  bool holds(Symbol s, Symbol prop) const
  {
    auto it = labels.find(s);
    return it != labels.end() && std::find(it->second.begin(), it->second.end(), prop) != it->second.end();
  }

  friend bool operator==(const Dtmc&, const Dtmc&) = default;
};

/// Reactive probabilistic labeled transition system: one distribution per
/// (state, action).
struct Rplts
{
  std::vector<Symbol> states;
  std::unordered_map<Symbol, std::vector<Symbol>> actions;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Distribution> switches;
  std::unordered_map<Symbol, std::vector<Symbol>> labels;

  bool has_state(Symbol s) const { return std::find(states.begin(), states.end(), s) != states.end(); }

  const Distribution* find(Symbol s, Symbol a) const
  {
    auto it = switches.find({s.id(), a.id()});
    return it == switches.end() ? nullptr : &it->second;
  }

  bool holds(Symbol s, Symbol prop) const
  {
    auto it = labels.find(s);
    return it != labels.end() && std::find(it->second.begin(), it->second.end(), prop) != it->second.end();
  }

  std::size_t transition_count() const { return switches.size(); }

  friend bool operator==(const Rplts&, const Rplts&) = default;
};

/// Recursive Markov chain.
struct Rmc
{
  struct Box
  {
    Symbol name;
    Symbol callee;

    friend bool operator==(const Box&, const Box&) = default;
  };

  struct Component
  {
    Symbol name;
    Symbol entry;
    std::vector<Symbol> exits;
    /// Every node of the component in declaration order (entry and exits included).
    std::vector<Symbol> nodes;
    std::vector<Box> boxes;
    /// Keyed by source node or return port ("b.ret2"); targets are nodes or call ports ("b.call").
    std::vector<std::pair<Symbol, Distribution>> transitions;

    const Box* box(Symbol name) const
    {
      for (const auto& b : boxes)
        if (b.name == name)
          return &b;
      return nullptr;
    }

    friend bool operator==(const Component&, const Component&) = default;
  };

  std::vector<Component> components;

  const Component* find(Symbol name) const
  {
    for (const auto& c : components)
      if (c.name == name)
        return &c;
    return nullptr;
  }

  std::size_t max_exits() const
  {
    std::size_t n = 0;
    for (const auto& c : components)
      n = std::max(n, c.exits.size());
    return n;
  }

  friend bool operator==(const Rmc&, const Rmc&) = default;
};

/// Name of a box call port.
inline Symbol call_port(Symbol box) { return Symbol(box.str() + ".call"); }
/// Name of the i-th (1-based) box return port.
inline Symbol return_port(Symbol box, std::size_t i) { return Symbol(box.str() + ".ret" + std::to_string(i)); }

namespace detail {

struct SymbolRef
{
  Symbol sym;
  std::size_t line;
  std::size_t column;
};

inline SymbolRef read_ref(Lexer& lex)
{
  auto line = lex.peek().line, col = lex.peek().column;
  return {Symbol(lex.expect_ident()), line, col};
}

/// "<id> <prob>, <id> <prob>, ... ;" -- positions kept for later reference checks.
inline std::vector<std::pair<SymbolRef, double>> read_outcomes(Lexer& lex)
{
  std::vector<std::pair<SymbolRef, double>> out;
  do {
    auto ref = read_ref(lex);
    double p = lex.expect_number();
    out.emplace_back(ref, p);
  } while (lex.accept(","));
  lex.expect(";");
  return out;
}

inline Distribution make_distribution(const std::vector<std::pair<SymbolRef, double>>& raw, std::size_t line,
                                      std::size_t column)
{
  std::vector<Outcome> outs;
  outs.reserve(raw.size());
  for (const auto& [ref, p] : raw)
    outs.push_back({ref.sym, p});
  try {
    return Distribution(std::move(outs));
  } catch (const ModelError& e) {
    throw ParseError(e.what(), line, column);
  }
}

struct StateBlock
{
  std::vector<Symbol> states;
  std::unordered_map<Symbol, std::vector<Symbol>> labels;
};

/// "state <id> [label p1,p2,...];"
inline void read_state(Lexer& lex, StateBlock& block)
{
  auto ref = read_ref(lex);
  if (std::find(block.states.begin(), block.states.end(), ref.sym) != block.states.end())
    throw ParseError("duplicate state '" + ref.sym.str() + "'", ref.line, ref.column);
  block.states.push_back(ref.sym);
  if (lex.accept("label")) {
    auto& labels = block.labels[ref.sym];
    do {
      labels.emplace_back(lex.expect_ident());
    } while (lex.accept(","));
  }
  lex.expect(";");
}

inline void check_declared(const std::vector<Symbol>& states, const SymbolRef& ref)
{
  if (std::find(states.begin(), states.end(), ref.sym) == states.end())
    throw ParseError("unknown state '" + ref.sym.str() + "'", ref.line, ref.column);
}

inline void write_states(std::string& out, const std::vector<Symbol>& states,
                         const std::unordered_map<Symbol, std::vector<Symbol>>& labels)
{
  for (Symbol s : states) {
    out += "state " + s.str();
    auto it = labels.find(s);
    if (it != labels.end() && !it->second.empty()) {
      out += " label ";
      for (std::size_t i = 0; i < it->second.size(); ++i)
        out += (i ? "," : "") + it->second[i].str();
    }
    out += ";\n";
  }
}

inline void write_outcomes(std::string& out, const Distribution& d)
{
  for (std::size_t i = 0; i < d.size(); ++i)
    out += (i ? ", " : " ") + d.outcomes()[i].value.str() + " " + format_double(d.outcomes()[i].prob);
  out += ";\n";
}

} // namespace detail

/// Parses the line-oriented DTMC format:
///
///     state <id> [label <p1>,<p2>,...];
///     trans <id>: <id> <prob>, <id> <prob>, ... ;
inline Dtmc parse_dtmc(std::string_view text)
{
  Lexer lex(text);
  detail::StateBlock block;
  struct Pending
  {
    detail::SymbolRef source;
    std::vector<std::pair<detail::SymbolRef, double>> outcomes;
  };
  std::vector<Pending> pending;

  while (!lex.at_end()) {
    if (lex.accept("state")) {
      detail::read_state(lex, block);
    } else if (lex.accept("trans")) {
      auto src = detail::read_ref(lex);
      lex.expect(":");
      pending.push_back({src, detail::read_outcomes(lex)});
    } else {
      lex.fail("expected 'state' or 'trans' but found " + Lexer::describe(lex.peek()));
    }
  }

  Dtmc m;
  m.states = std::move(block.states);
  m.labels = std::move(block.labels);
  for (const auto& p : pending) {
    detail::check_declared(m.states, p.source);
    for (const auto& [ref, prob] : p.outcomes)
      detail::check_declared(m.states, ref);
    if (m.switches.contains(p.source.sym))
      throw ParseError("duplicate transition block for '" + p.source.sym.str() + "'", p.source.line,
                       p.source.column);
    m.switches.emplace(p.source.sym, detail::make_distribution(p.outcomes, p.source.line, p.source.column));
  }
  return m;
}

inline std::string to_text(const Dtmc& m)
{
  std::string out;
  detail::write_states(out, m.states, m.labels);
  for (Symbol s : m.states)
    if (const auto* d = m.successors(s)) {
      out += "trans " + s.str() + ":";
      detail::write_outcomes(out, *d);
    }
  return out;
}

/// Like parse_dtmc, with an action token: "trans <id> <act>: ... ;".
inline Rplts parse_rplts(std::string_view text)
{
  Lexer lex(text);
  detail::StateBlock block;
  struct Pending
  {
    detail::SymbolRef source;
    Symbol action;
    std::vector<std::pair<detail::SymbolRef, double>> outcomes;
  };
  std::vector<Pending> pending;

  while (!lex.at_end()) {
    if (lex.accept("state")) {
      detail::read_state(lex, block);
    } else if (lex.accept("trans")) {
      auto src = detail::read_ref(lex);
      Symbol act(lex.expect_ident());
      lex.expect(":");
      pending.push_back({src, act, detail::read_outcomes(lex)});
    } else {
      lex.fail("expected 'state' or 'trans' but found " + Lexer::describe(lex.peek()));
    }
  }

  Rplts m;
  m.states = std::move(block.states);
  m.labels = std::move(block.labels);
  for (const auto& p : pending) {
    detail::check_declared(m.states, p.source);
    for (const auto& [ref, prob] : p.outcomes)
      detail::check_declared(m.states, ref);
    auto key = std::make_pair(p.source.sym.id(), p.action.id());
    if (m.switches.contains(key))
      throw ParseError("duplicate action '" + p.action.str() + "' at state '" + p.source.sym.str() + "'",
                       p.source.line, p.source.column);
    m.switches.emplace(key, detail::make_distribution(p.outcomes, p.source.line, p.source.column));
    m.actions[p.source.sym].push_back(p.action);
  }
  return m;
}

inline std::string to_text(const Rplts& m)
{
  std::string out;
  detail::write_states(out, m.states, m.labels);
  for (Symbol s : m.states) {
    auto it = m.actions.find(s);
    if (it == m.actions.end())
      continue;
    for (Symbol a : it->second) {
      out += "trans " + s.str() + " " + a.str() + ":";
      detail::write_outcomes(out, *m.find(s, a));
    }
  }
  return out;
}

/// Parses the RMC format:
///
///     component <id> {
///       entry <n>; exit <n1>,<n2>; node <n>, ...;
///       box <b> calls <comp>;
///       trans <n>: <target> <prob>, ... ;
///     }
///
/// Box ports are written <b>.call and <b>.ret<i>. Transition sources are
/// nodes or return ports; targets are nodes or call ports.
inline Rmc parse_rmc(std::string_view text)
{
  Lexer lex(text);
  Rmc rmc;
  struct PendingTrans
  {
    std::size_t component;
    detail::SymbolRef source;
    std::vector<std::pair<detail::SymbolRef, double>> outcomes;
  };
  struct PendingBox
  {
    std::size_t component;
    detail::SymbolRef name;
    detail::SymbolRef callee;
  };
  std::vector<PendingTrans> trans;
  std::vector<PendingBox> boxes;

  auto add_node = [](Rmc::Component& c, Symbol n) {
    if (std::find(c.nodes.begin(), c.nodes.end(), n) == c.nodes.end())
      c.nodes.push_back(n);
  };

  while (!lex.at_end()) {
    lex.expect("component");
    auto name = detail::read_ref(lex);
    if (rmc.find(name.sym))
      throw ParseError("duplicate component '" + name.sym.str() + "'", name.line, name.column);
    Rmc::Component comp;
    comp.name = name.sym;
    std::size_t index = rmc.components.size();
    lex.expect("{");
    bool saw_entry = false;
    while (!lex.accept("}")) {
      if (lex.accept("entry")) {
        comp.entry = Symbol(lex.expect_ident());
        add_node(comp, comp.entry);
        saw_entry = true;
        lex.expect(";");
      } else if (lex.accept("exit")) {
        do {
          auto ref = detail::read_ref(lex);
          if (std::find(comp.exits.begin(), comp.exits.end(), ref.sym) != comp.exits.end())
            throw ParseError("duplicate exit '" + ref.sym.str() + "'", ref.line, ref.column);
          comp.exits.push_back(ref.sym);
          add_node(comp, ref.sym);
        } while (lex.accept(","));
        lex.expect(";");
      } else if (lex.accept("node")) {
        do {
          add_node(comp, Symbol(lex.expect_ident()));
        } while (lex.accept(","));
        lex.expect(";");
      } else if (lex.accept("box")) {
        auto b = detail::read_ref(lex);
        lex.expect("calls");
        auto callee = detail::read_ref(lex);
        lex.expect(";");
        if (comp.box(b.sym))
          throw ParseError("duplicate box '" + b.sym.str() + "'", b.line, b.column);
        comp.boxes.push_back({b.sym, callee.sym});
        boxes.push_back({index, b, callee});
      } else if (lex.accept("trans")) {
        auto src = detail::read_ref(lex);
        lex.expect(":");
        trans.push_back({index, src, detail::read_outcomes(lex)});
      } else {
        lex.fail("unexpected " + Lexer::describe(lex.peek()) + " in component body");
      }
    }
    if (!saw_entry)
      throw ParseError("component '" + comp.name.str() + "' has no entry", name.line, name.column);
    // canonical node order: entry, exits, then the rest as declared
    std::vector<Symbol> ordered{comp.entry};
    for (Symbol x : comp.exits)
      if (x != comp.entry)
        ordered.push_back(x);
    for (Symbol n : comp.nodes)
      if (std::find(ordered.begin(), ordered.end(), n) == ordered.end())
        ordered.push_back(n);
    comp.nodes = std::move(ordered);
    rmc.components.push_back(std::move(comp));
  }

  for (const auto& b : boxes)
    if (!rmc.find(b.callee.sym))
      throw ParseError("box '" + b.name.sym.str() + "' calls unknown component '" + b.callee.sym.str() + "'",
                       b.callee.line, b.callee.column);

  // A port reference is "<box>.call" or "<box>.ret<i>"; anything else must be a node.
  enum class PortKind { Node, Call, Return };
  auto classify = [&](const Rmc::Component& c, const detail::SymbolRef& ref) -> PortKind {
    if (std::find(c.nodes.begin(), c.nodes.end(), ref.sym) != c.nodes.end())
      return PortKind::Node;
    const std::string& s = ref.sym.str();
    auto dot = s.rfind('.');
    if (dot == std::string::npos)
      throw ParseError("unknown node '" + s + "' in component '" + c.name.str() + "'", ref.line, ref.column);
    const auto* box = c.box(Symbol(s.substr(0, dot)));
    std::string port = s.substr(dot + 1);
    if (!box)
      throw ParseError("dangling port '" + s + "': no such box", ref.line, ref.column);
    if (port == "call")
      return PortKind::Call;
    if (port.size() > 3 && port.compare(0, 3, "ret") == 0 &&
        std::all_of(port.begin() + 3, port.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      std::size_t i = std::stoul(port.substr(3));
      std::size_t arity = rmc.find(box->callee)->exits.size();
      if (i == 0 || i > arity)
        throw ParseError("arity mismatch: port '" + s + "' but component '" + box->callee.str() + "' has " +
                             std::to_string(arity) + " exit(s)",
                         ref.line, ref.column);
      return PortKind::Return;
    }
    throw ParseError("dangling port '" + s + "'", ref.line, ref.column);
  };

  for (const auto& t : trans) {
    auto& comp = rmc.components[t.component];
    auto kind = classify(comp, t.source);
    if (kind == PortKind::Call)
      throw ParseError("call port '" + t.source.sym.str() + "' cannot have outgoing transitions", t.source.line,
                       t.source.column);
    if (std::find(comp.exits.begin(), comp.exits.end(), t.source.sym) != comp.exits.end())
      throw ParseError("exit '" + t.source.sym.str() + "' cannot have outgoing transitions", t.source.line,
                       t.source.column);
    for (const auto& [ref, p] : t.outcomes)
      if (classify(comp, ref) == PortKind::Return)
        throw ParseError("return port '" + ref.sym.str() + "' cannot be a transition target", ref.line, ref.column);
    for (const auto& existing : comp.transitions)
      if (existing.first == t.source.sym)
        throw ParseError("duplicate transition block for '" + t.source.sym.str() + "'", t.source.line,
                         t.source.column);
    comp.transitions.emplace_back(t.source.sym, detail::make_distribution(t.outcomes, t.source.line, t.source.column));
  }
  return rmc;
}

inline std::string to_text(const Rmc& rmc)
{
  std::string out;
  for (const auto& c : rmc.components) {
    out += "component " + c.name.str() + " {\n  entry " + c.entry.str() + ";\n";
    if (!c.exits.empty()) {
      out += "  exit";
      for (std::size_t i = 0; i < c.exits.size(); ++i)
        out += (i ? ", " : " ") + c.exits[i].str();
      out += ";\n";
    }
    bool first = true;
    for (Symbol n : c.nodes) {
      if (n == c.entry || std::find(c.exits.begin(), c.exits.end(), n) != c.exits.end())
        continue;
      out += first ? "  node " : ", ";
      out += n.str();
      first = false;
    }
    if (!first)
      out += ";\n";
    for (const auto& b : c.boxes)
      out += "  box " + b.name.str() + " calls " + b.callee.str() + ";\n";
    for (const auto& [src, d] : c.transitions) {
      out += "  trans " + src.str() + ":";
      detail::write_outcomes(out, d);
    }
    out += "}\n";
  }
  return out;
}

} // namespace pipmc
