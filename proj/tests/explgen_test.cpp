#include "pipmc/gpl.hpp"
#include "pipmc/grammar.hpp"
#include "pipmc/pctl.hpp"
#include "pipmc/reach.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pipmc;
using testing_support::model_path;
using testing_support::slurp;

namespace {

std::set<std::string> lines(const std::string& text)
{
  std::set<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty())
      out.insert(l);
  return out;
}

} // namespace

TEST(ReachGrammar, Fig1HasTheSevenProductions)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  ReachProvider p(m);
  ExplGrammar g(p);
  Symbol start = p.goal(Symbol("s0"), Symbol("s3"));
  g.close(start);
  EXPECT_EQ(g.production_count(), 7u);
  std::set<std::string> expected{
      "expl(reach(s0,s3),[]) --> [msw(t(s0),[],s0)], expl(reach(s0,s3),[next]).",
      "expl(reach(s0,s3),[]) --> [msw(t(s0),[],s1)], expl(reach(s1,s3),[next]).",
      "expl(reach(s1,s3),[]) --> [msw(t(s1),[],s1)], expl(reach(s1,s3),[next]).",
      "expl(reach(s1,s3),[]) --> [msw(t(s1),[],s3)], expl(reach(s3,s3),[next]).",
      "expl(reach(s1,s3),[]) --> [msw(t(s1),[],s4)], expl(reach(s4,s3),[next]).",
      "expl(reach(s4,s3),[]) --> [msw(t(s4),[],s3)], expl(reach(s3,s3),[next]).",
      "expl(reach(s3,s3),[]) --> [].",
  };
  EXPECT_EQ(lines(g.dump()), expected);
}

TEST(ReachGrammar, DropsOutcomesThatCannotReachTheTarget)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  ReachProvider p(m);
  ExplGrammar g(p);
  Symbol start = p.goal(Symbol("s0"), Symbol("s3"));
  g.close(start);
  for (Symbol goal : g.goals())
    EXPECT_NE(goal, Symbol("reach(s2,s3)"));
}

TEST(ReachGrammar, AbsorbingTargetIsOneEmptyProduction)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  ReachProvider p(m);
  ExplGrammar g(p);
  const auto& prods = g.expand(p.goal(Symbol("s3"), Symbol("s3")));
  ASSERT_EQ(prods.size(), 1u);
  EXPECT_TRUE(prods[0].body.empty());
}

TEST(ReachGrammar, UnknownStateIsAnError)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  ReachProvider p(m);
  EXPECT_THROW(p.goal(Symbol("s0"), Symbol("nowhere")), ModelError);
}

TEST(ReachGrammar, DisjunctionGoalHasOneProductionPerAlternative)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  ReachProvider p(m);
  ExplGrammar g(p);
  Symbol a = p.goal(Symbol("s0"), Symbol("s3"));
  Symbol b = p.goal(Symbol("s0"), Symbol("s4"));
  Symbol u = add_disjunction(g, {a, b});
  ASSERT_EQ(g.productions(u).size(), 2u);
  EXPECT_EQ(add_disjunction(g, {a}), a);
}

TEST(PctlGrammar, NextReadsOffTheDistribution)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  PctlChecker c(m);
  Term pf = parse_term("next(prop(b))");
  Symbol goal = c.goal(pf, Symbol("s0"));
  auto& g = c.pipeline(pf).grammar();
  g.close(goal);
  EXPECT_EQ(lines(g.dump()), std::set<std::string>{"expl(pmodels(s0,next(prop(b))),[]) --> [msw(t(s0),[],s1)]."});
}

TEST(PctlGrammar, UntilStopsWhereTheLeftSideFails)
{
  Dtmc m = parse_dtmc(slurp(model_path("fig1.dtmc")));
  PctlChecker c(m);
  Term pf = parse_term("until(neg(prop(b)),prop(at_s3))");
  Symbol goal = c.goal(pf, Symbol("s0"));
  auto& g = c.pipeline(pf).grammar();
  g.close(goal);
  EXPECT_EQ(g.productions(goal).size(), 3u);
  EXPECT_TRUE(g.productions(c.goal(pf, Symbol("s1"))).empty());
  EXPECT_TRUE(g.productions(c.goal(pf, Symbol("s2"))).empty());
  EXPECT_EQ(g.expand(c.goal(pf, Symbol("s3"))).size(), 1u);
}

TEST(GplGrammar, DiamStepsExtendTheInstanceByTargetAndSwitch)
{
  Rplts m = parse_rplts(slurp(model_path("gpl_demo.rplts")));
  GplChecker c(m, parse_gpl_defs(slurp(model_path("gpl_demo.gpl"))));
  Term pf = c.normalize_fuzzy(parse_term("One"));
  Symbol goal = c.goal(pf, Symbol("s0"));
  auto& g = c.pipeline(pf).grammar();
  g.close(goal);
  auto all = lines(g.dump());
  EXPECT_TRUE(all.contains("expl(pmodels(s0,form(One)),[]) --> [msw(sw(s0,a),[],t1)], "
                           "expl(pmodels(t1,sf(prop(p)),One),[(t1,sw(s0,a))])."))
      << g.dump();
}

TEST(GplGrammar, ConjunctsShareTheBaseInstance)
{
  Rplts m = parse_rplts(slurp(model_path("gpl_demo.rplts")));
  GplChecker c(m, parse_gpl_defs(slurp(model_path("gpl_demo.gpl"))));
  Term pf = c.normalize_fuzzy(parse_term("Both"));
  Symbol goal = c.goal(pf, Symbol("s0"));
  auto& g = c.pipeline(pf).grammar();
  g.close(goal);
  // the two diam(a,..) conjuncts test the same switch at the same instance
  for (const auto& p : g.productions(goal)) {
    std::vector<const MswAtom*> msws;
    for (const auto& sym : p.body)
      if (const auto* a = std::get_if<MswAtom>(&sym))
        msws.push_back(a);
    ASSERT_EQ(msws.size(), 2u);
    EXPECT_EQ(msws[0]->process, msws[1]->process);
    EXPECT_EQ(msws[0]->at, msws[1]->at);
  }
}

TEST(GplDefs, RejectsUndefinedAndAlternatingDefinitions)
{
  EXPECT_THROW(parse_gpl_defs("def(X, lfp(diam(a, Y)))."), Error);
  EXPECT_THROW(parse_gpl_defs("def(X, lfp(diam(a, Y))). def(Y, gfp(diam(a, X)))."), Error);
  EXPECT_NO_THROW(parse_gpl_defs("def(X, lfp(diam(a, X))). def(Y, gfp(and(X, diam(a, Y))))."));
}
