#pragma once

#include "pipmc/engine.hpp"
#include "pipmc/term.hpp"

#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace pipmc {

struct GplDef
{
  std::string name;
  Fixpoint kind = Fixpoint::Least;
  Term body;
};

/// Fixed-point definitions def(X, lfp(PF)) / def(X, gfp(PF)).
struct GplDefs
{
  std::vector<GplDef> defs;

  const GplDef* find(std::string_view name) const
  {
    for (const auto& d : defs)
      if (d.name == name)
        return &d;
    return nullptr;
  }

  std::string to_text() const
  {
    std::string out;
    for (const auto& d : defs)
      out += "def(" + d.name + "," + to_string(d.kind) + "(" + d.body.str() + ")).\n";
    return out;
  }
};

namespace detail {

inline bool is_identifier(const Term& t) { return !t.number && t.args.empty(); }

/// Rewrites bare definition names in fuzzy-formula positions to form(X) and
/// checks the shape of the formula.
inline Term normalize_fuzzy(const Term& t, const GplDefs& defs);

inline Term normalize_state(const Term& t, const GplDefs& defs)
{
  if (t.is("tt", 0) || t.is("ff", 0))
    return t;
  if (t.is("prop", 1)) {
    if (!is_identifier(t.args[0]))
      t.fail("proposition must be an identifier");
    return t;
  }
  Term out = t;
  if (t.is("neg", 1)) {
    out.args[0] = normalize_state(t.args[0], defs);
    return out;
  }
  if (t.is("and", 2) || t.is("or", 2)) {
    out.args[0] = normalize_state(t.args[0], defs);
    out.args[1] = normalize_state(t.args[1], defs);
    return out;
  }
  if (t.is("pr", 3)) {
    out.args[0] = normalize_fuzzy(t.args[0], defs);
    const Term& op = t.args[1];
    if (!(op.is("gt", 0) || op.is("lt", 0) || op.is("geq", 0) || op.is("leq", 0)))
      op.fail("comparison must be gt, lt, geq or leq");
    if (!t.args[2].number || t.args[2].value < 0 || t.args[2].value > 1)
      t.args[2].fail("bound must be a number in [0,1]");
    return out;
  }
  t.fail("not a GPL state formula");
}

inline Term normalize_fuzzy(const Term& t, const GplDefs& defs)
{
  if (t.is("tt", 0) || t.is("ff", 0))
    return t;
  if (is_identifier(t)) {
    if (!defs.find(t.functor))
      throw ModelError("undefined formula '" + t.functor + "'");
    Term f;
    f.functor = "form";
    f.line = t.line;
    f.column = t.column;
    f.args.push_back(t);
    return f;
  }
  Term out = t;
  if (t.is("form", 1)) {
    if (!is_identifier(t.args[0]))
      t.fail("form expects a definition name");
    if (!defs.find(t.args[0].functor))
      throw ModelError("undefined formula '" + t.args[0].functor + "'");
    return out;
  }
  if (t.is("sf", 1)) {
    out.args[0] = normalize_state(t.args[0], defs);
    return out;
  }
  if (t.is("and", 2) || t.is("or", 2)) {
    out.args[0] = normalize_fuzzy(t.args[0], defs);
    out.args[1] = normalize_fuzzy(t.args[1], defs);
    return out;
  }
  if (t.is("diam", 2) || t.is("box", 2)) {
    if (!is_identifier(t.args[0]))
      t.fail("action must be an identifier");
    out.args[1] = normalize_fuzzy(t.args[1], defs);
    return out;
  }
  t.fail("not a GPL fuzzy formula");
}

inline void collect_forms(const Term& t, std::vector<std::string>& out)
{
  if (t.is("form", 1))
    out.push_back(t.args[0].functor);
  else if (!t.is("pr", 3)) // a nested pr is a separate query
    for (const auto& a : t.args)
      collect_forms(a, out);
}

} // namespace detail

/// Parses one def(X, lfp(PF)) or def(X, gfp(PF)) per entry, normalizes bare
/// definition names to form(X), and rejects definitions that mix lfp and gfp
/// within one recursive group.
inline GplDefs parse_gpl_defs(std::string_view text)
{
  GplDefs defs;
  auto terms = parse_terms(text);
  for (const auto& t : terms) {
    if (!t.is("def", 2) || !detail::is_identifier(t.args[0]))
      t.fail("expected def(Name, lfp(F)) or def(Name, gfp(F))");
    const Term& fix = t.args[1];
    if (!(fix.is("lfp", 1) || fix.is("gfp", 1)))
      fix.fail("expected lfp(F) or gfp(F)");
    std::string name = t.args[0].functor;
    if (name == "tt" || name == "ff")
      t.fail("'" + name + "' cannot be redefined");
    if (defs.find(name))
      throw ParseError("duplicate definition of '" + name + "'", t.line, t.column);
    defs.defs.push_back({name, fix.functor == "gfp" ? Fixpoint::Greatest : Fixpoint::Least, fix.args[0]});
  }
  for (auto& d : defs.defs)
    d.body = detail::normalize_fuzzy(d.body, defs);

  // alternation check on the definition dependency graph
  const std::size_t n = defs.defs.size();
  std::vector<std::vector<std::size_t>> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> uses;
    detail::collect_forms(defs.defs[i].body, uses);
    for (const auto& u : uses)
      for (std::size_t j = 0; j < n; ++j)
        if (defs.defs[j].name == u)
          edges[i].push_back(j);
  }
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> stack{i};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : edges[v])
        if (!reach[i][w]) {
          reach[i][w] = 1;
          stack.push_back(w);
        }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i] && defs.defs[i].kind != defs.defs[j].kind)
        throw AlternationError("alternation detected: " + defs.defs[i].name + " (" + to_string(defs.defs[i].kind) +
                               ") and " + defs.defs[j].name + " (" + to_string(defs.defs[j].kind) +
                               ") are mutually recursive");
  return defs;
}

/// Switch process of action a at state s: sw(s,a).
inline Symbol action_process(Symbol s, Symbol a) { return Symbol("sw(" + s.str() + "," + a.str() + ")"); }

/// GPL over an RPLTS. Fuzzy formulas compile to goals pmodels(s,F); a diam
/// step extends the instance by the (target, switch) pair, so sibling
/// branches diverge while conjuncts share an instance.
class GplChecker
{
public:
  GplChecker(const Rplts& model, GplDefs defs, EngineConfig config = {})
      : model_(model), defs_(std::move(defs)), config_(config), provider_(*this)
  {
    for (const auto& [s, props] : model_.labels)
      alphabet_.insert(props.begin(), props.end());
  }

  // the checker keeps a reference to the model
  GplChecker(Rplts&&, GplDefs, EngineConfig = {}) = delete;

  const GplDefs& defs() const { return defs_; }

  Term normalize_fuzzy(const Term& t) const { return detail::normalize_fuzzy(t, defs_); }
  Term normalize_state(const Term& t) const { return detail::normalize_state(t, defs_); }

  /// Two-valued state formula; `sf` must be normalized.
  bool holds(const Term& sf, Symbol s)
  {
    check_state(s);
    if (sf.is("tt", 0))
      return true;
    if (sf.is("ff", 0))
      return false;
    if (sf.is("prop", 1)) {
      Symbol p(sf.args[0].functor);
      if (!alphabet_.contains(p))
        throw ModelError("unknown proposition '" + p.str() + "'");
      return model_.holds(s, p);
    }
    if (sf.is("neg", 1))
      return !holds(sf.args[0], s);
    if (sf.is("and", 2))
      return holds(sf.args[0], s) && holds(sf.args[1], s);
    if (sf.is("or", 2))
      return holds(sf.args[0], s) || holds(sf.args[1], s);
    if (sf.is("pr", 3)) {
      double p = probability(sf.args[0], s);
      double b = sf.args[2].value;
      const std::string& op = sf.args[1].functor;
      return op == "gt" ? p > b : op == "lt" ? p < b : op == "geq" ? p >= b : p <= b;
    }
    sf.fail("not a GPL state formula");
  }

  /// Probability that s satisfies the normalized fuzzy formula pf.
  double probability(const Term& pf, Symbol s) { return result(pf, s).probability; }

  const RunResult& result(const Term& pf, Symbol s)
  {
    check_state(s);
    std::string key = pf.str() + "@" + s.str();
    if (auto it = results_.find(key); it != results_.end())
      return it->second;
    RunResult r = pipeline(pf).run(goal(pf, s));
    return results_.emplace(key, std::move(r)).first->second;
  }

  /// Pipeline for queries rooted at pf (one per root formula).
  Pipeline& pipeline(const Term& pf)
  {
    std::string key = pf.str();
    auto it = pipelines_.find(key);
    if (it == pipelines_.end())
      it = pipelines_.emplace(key, std::make_unique<Pipeline>(provider_, config_)).first;
    return *it->second;
  }

  Symbol goal(const Term& pf, Symbol s)
  {
    std::string ctx = pf.is("form", 1) ? pf.args[0].functor : std::string();
    return provider_.goal(s, pf, ctx);
  }

private:
  class Provider : public GoalProvider
  {
  public:
    explicit Provider(GplChecker& checker) : checker_(checker) {}

    Symbol goal(Symbol s, const Term& f, std::string ctx)
    {
      if (f.is("form", 1))
        ctx = f.args[0].functor;
      std::string spelling = "pmodels(" + s.str() + "," + f.str();
      bool own = f.is("form", 1);
      if (!ctx.empty() && !own)
        spelling += "," + ctx;
      Symbol g(spelling + ")");
      goals_.try_emplace(g, Key{s, f, own ? std::string() : ctx, own ? ctx : std::string()});
      return g;
    }

    std::vector<Production> expand(Symbol g) override
    {
      auto it = goals_.find(g);
      if (it == goals_.end())
        throw ModelError("not a GPL goal: " + g.str());
      const Key k = it->second;
      std::vector<Production> out;
      const std::string& ctx = k.own.empty() ? k.ctx : k.own;
      for (auto& body : alternatives(k.state, k.own.empty() ? k.formula : checker_.defs_.find(k.own)->body, ctx))
        out.push_back({g, std::move(body)});
      return out;
    }

    const Distribution& distribution(Symbol process) const override
    {
      auto it = processes_.find(process);
      if (it == processes_.end())
        throw ModelError("unknown process " + process.str());
      return *it->second;
    }

    std::optional<Fixpoint> fixpoint(Symbol g) const override
    {
      auto it = goals_.find(g);
      if (it == goals_.end())
        return std::nullopt;
      const std::string& ctx = it->second.own.empty() ? it->second.ctx : it->second.own;
      if (ctx.empty())
        return std::nullopt;
      return checker_.defs_.find(ctx)->kind;
    }

  private:
    struct Key
    {
      Symbol state;
      Term formula;
      std::string ctx; // enclosing definition
      std::string own; // set when formula is form(own): the goal stands for the definition itself
    };

    using Body = std::vector<BodySymbol>;

    std::vector<Body> alternatives(Symbol s, const Term& f, const std::string& ctx)
    {
      if (f.is("tt", 0))
        return {Body{}};
      if (f.is("ff", 0))
        return {};
      if (f.is("sf", 1))
        return checker_.holds(f.args[0], s) ? std::vector<Body>{Body{}} : std::vector<Body>{};
      if (f.is("or", 2)) {
        auto a = alternatives(s, f.args[0], ctx);
        auto b = alternatives(s, f.args[1], ctx);
        a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
        return a;
      }
      if (f.is("and", 2)) {
        auto a = alternatives(s, f.args[0], ctx);
        auto b = alternatives(s, f.args[1], ctx);
        std::vector<Body> out;
        for (const auto& x : a)
          for (const auto& y : b) {
            Body z = x;
            z.insert(z.end(), y.begin(), y.end());
            out.push_back(std::move(z));
          }
        return out;
      }
      if (f.is("form", 1))
        return {Body{ExplAtom{goal(s, f, f.args[0].functor), Instance::base()}}};
      if (f.is("diam", 2) || f.is("box", 2)) {
        Symbol a(f.args[0].functor);
        const Distribution* d = checker_.model_.find(s, a);
        if (!d)
          return f.is("box", 2) ? std::vector<Body>{Body{}} : std::vector<Body>{};
        Symbol proc = action_process(s, a);
        processes_.try_emplace(proc, d);
        std::vector<Body> out;
        for (const auto& o : d->outcomes()) {
          if (o.prob == 0)
            continue;
          Instance h = Instance::base().extend(Symbol("(" + o.value.str() + "," + proc.str() + ")"));
          out.push_back(Body{MswAtom{proc, Instance::base(), o.value}, ExplAtom{goal(o.value, f.args[1], ctx), h}});
        }
        return out;
      }
      f.fail("not a GPL fuzzy formula");
    }

    GplChecker& checker_;
    std::unordered_map<Symbol, Key> goals_;
    std::unordered_map<Symbol, const Distribution*> processes_;
  };

  void check_state(Symbol s) const
  {
    if (!model_.has_state(s))
      throw ModelError("unknown state '" + s.str() + "'");
  }

  const Rplts& model_;
  GplDefs defs_;
  EngineConfig config_;
  Provider provider_;
  std::unordered_set<Symbol> alphabet_;
  std::map<std::string, std::unique_ptr<Pipeline>> pipelines_;
  std::map<std::string, RunResult> results_;
};

} // namespace pipmc
