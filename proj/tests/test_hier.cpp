#include "gctl/flat_checker.hpp"
#include "gctl/hier_checker.hpp"
#include "gctl/random.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

using namespace gctl;

namespace {

bool flat_verdict(const Shsm& m, const Formula& f) { return holds_flat(flatten(m), f); }

// Top machine T closes a cycle through a box over B whose entry-to-exit path
// branches: in -> x, in -> z, x -> z.
Shsm branching_cycle()
{
    Shsm m;
    Machine b;
    b.name = "B";
    b.add_vertex("in", {"p"});
    b.add_vertex("x", {"p"});
    b.add_vertex("z", {"p"});
    b.outs = {2};
    b.edges = {{0, std::nullopt, 1}, {0, std::nullopt, 2}, {1, std::nullopt, 2}};
    Machine t;
    t.name = "T";
    t.add_vertex("start", {"p"});
    t.add_vertex("box", {}, 0);
    t.edges = {{0, std::nullopt, 1}, {1, 2, 1}};
    m.machines = {b, t};
    return m;
}

// Bottom machine that is a pure two-cycle; no exits are ever left.
Shsm sink_cycle()
{
    Shsm m;
    Machine b;
    b.name = "B";
    b.add_vertex("u", {"p"});
    b.add_vertex("v", {"p"});
    b.outs = {1};
    b.edges = {{0, std::nullopt, 1}, {1, std::nullopt, 0}};
    Machine t;
    t.name = "T";
    t.add_vertex("start", {"p"});
    t.add_vertex("box", {}, 0);
    t.add_vertex("end", {});
    t.edges = {{0, std::nullopt, 1}, {1, 1, 2}, {2, std::nullopt, 2}};
    m.machines = {b, t};
    return m;
}

Shsm flat_lasso()
{
    Shsm m;
    Machine t;
    t.name = "T";
    t.add_vertex("s0", {"p"});
    t.add_vertex("s1", {"p"});
    t.add_vertex("s2", {"p"});
    t.edges = {{0, std::nullopt, 1}, {0, std::nullopt, 2}, {1, std::nullopt, 1}, {2, std::nullopt, 2}};
    m.machines = {t};
    return m;
}

}  // namespace

TEST(Hier, ScopedLevelsReachability)
{
    EXPECT_TRUE(holds_hier(fixtures::scoped_levels(), parse_formula("E [true U p1]")));
    EXPECT_TRUE(holds_hier(fixtures::scoped_levels(), parse_formula("E F p3")));
    EXPECT_FALSE(holds_hier(fixtures::scoped_levels(), parse_formula("E X p1")));
}

TEST(Hier, RetryPropertyFails)
{
    const Formula f = parse_formula("A G ((t1 & fail) -> A F abort)");
    EXPECT_FALSE(holds_hier(fixtures::retry(), f));
    EXPECT_FALSE(flat_verdict(fixtures::retry(), f));
}

TEST(Hier, TrueHolds)
{
    EXPECT_TRUE(holds_hier(fixtures::scoped_levels(), Formula::top()));
    EXPECT_TRUE(holds_hier(fixtures::retry(), Formula::top()));
}

TEST(Hier, FlatLassoMatchesFlatEngine)
{
    EXPECT_TRUE(holds_hier(flat_lasso(), parse_formula("E>1 G p")));
    EXPECT_FALSE(holds_hier(flat_lasso(), parse_formula("E>2 G p")));
}

TEST(Hier, BranchingCycleThroughBoxSaturates)
{
    const auto m = branching_cycle();
    ASSERT_NO_THROW(validate_shsm(m));
    EXPECT_TRUE(holds_hier(m, parse_formula("E>5 G p")));
    EXPECT_TRUE(flat_verdict(m, parse_formula("E>5 G p")));
    EXPECT_TRUE(holds_hier(m, parse_formula("E>2000000000 G p")));
}

TEST(Hier, NscFindsTheBranchingCycle)
{
    const auto m = branching_cycle();
    const Formula f = normalize(parse_formula("E>5 G p"));
    HierOptions opt;
    opt.keep_all_slots = true;
    const auto r = check_hier(m, f, opt);
    const auto& w = r.model;
    const auto nsc = hier::compute_nsc(w, r.slots.at("E G p"), hier::PathMode::Globally, r.slots.at("p"));
    const auto& top = nsc[w.top()];
    EXPECT_TRUE(top.nsc[0]);
    EXPECT_TRUE(top.nsc[1]);
}

TEST(Hier, PureSinkCycleHasNoNsc)
{
    const auto m = sink_cycle();
    ASSERT_NO_THROW(validate_shsm(m));
    HierOptions opt;
    opt.keep_all_slots = true;
    const auto r = check_hier(m, normalize(parse_formula("E>1 G p")), opt);
    EXPECT_FALSE(r.holds);
    const auto nsc = hier::compute_nsc(r.model, r.slots.at("E G p"), hier::PathMode::Globally, r.slots.at("p"));
    for (const auto& info : nsc) {
        for (char c : info.nsc) {
            EXPECT_FALSE(c);
        }
    }
}

TEST(Hier, EmptySatisfyingSetGivesNoNsc)
{
    const auto m = branching_cycle();
    HierOptions opt;
    opt.keep_all_slots = true;
    const auto r = check_hier(m, normalize(parse_formula("E>1 G q")), opt);
    EXPECT_FALSE(r.holds);
    const auto nsc = hier::compute_nsc(r.model, r.slots.at("E G q"), hier::PathMode::Globally, r.slots.at("q"));
    for (const auto& info : nsc) {
        for (char c : info.nsc) {
            EXPECT_FALSE(c);
        }
    }
}

TEST(Hier, NextContextRewiring)
{
    // Box b over B with exits z1, z2; two z1-successors satisfy p, the
    // z2-successor does not: b must see g = (2, 0) for E>1 X p.
    Shsm m;
    Machine b;
    b.name = "B";
    b.add_vertex("in");
    b.add_vertex("z1");
    b.add_vertex("z2");
    b.outs = {1, 2};
    b.edges = {{0, std::nullopt, 1}, {0, std::nullopt, 2}};
    Machine t;
    t.name = "T";
    t.add_vertex("bx", {}, 0);
    t.add_vertex("a", {"p"});
    t.add_vertex("c", {"p"});
    t.add_vertex("d");
    t.init = 1;
    t.edges = {{1, std::nullopt, 0}, {0, 1, 1}, {0, 1, 2}, {0, 2, 3}, {2, std::nullopt, 2}, {3, std::nullopt, 3}};
    m.machines = {b, t};
    ASSERT_NO_THROW(validate_shsm(m));
    HierOptions opt;
    opt.keep_all_slots = true;
    const Formula f = normalize(parse_formula("E>1 X p"));
    const auto r = check_hier(m, f, opt);
    const auto& w = r.model;
    const auto& top = w.copies[w.top()];
    const auto& child = w.copies[static_cast<std::size_t>(top.expand[0])];
    EXPECT_EQ(child.values[r.slots.at(render(f))][1], 1u);  // z1: two p successors outside
    EXPECT_EQ(child.values[r.slots.at(render(f))][2], 0u);
    const auto fv = flat_values(w, r.slots.at(render(f)));
    const auto table = check_flat(flatten(m), f);
    for (StateId s = 0; s < fv.size(); ++s) {
        EXPECT_EQ(fv[s] != 0, table.holds(f, s));
    }
}

TEST(Hier, NoGradedOperatorsKeepsOneCopyPerMachine)
{
    const auto r = check_hier(fixtures::scoped_levels(), normalize(parse_formula("p1 & !p2")));
    for (std::size_t c : r.model.copies_per_skeleton()) {
        EXPECT_LE(c, 1u);
    }
}

TEST(Hier, RejectsUnnormalizedInput)
{
    EXPECT_THROW(check_hier(fixtures::scoped_levels(), parse_formula("A X p1")), std::invalid_argument);
}

TEST(Hier, CopyLimitIsEnforced)
{
    HierOptions opt;
    opt.max_copies = 1;
    EXPECT_THROW(check_hier(fixtures::scoped_levels(), normalize(parse_formula("E F p3")), opt), CapacityError);
}

namespace {

struct Case {
    Shsm model;
    Formula formula;
};

Case random_case(Rng& rng)
{
    RandomShsmParams prm;
    return {random_shsm(rng, prm), random_formula(rng, 3, 3, prm.props)};
}

}  // namespace

TEST(HierProperty, AgreesWithFlatEngine)
{
    Rng rng(31337);
    for (int i = 0; i < 400; ++i) {
        const auto c = random_case(rng);
        const Formula nf = normalize(c.formula);
        const bool flat = holds_flat(flatten(c.model), nf);
        const auto r = check_hier(c.model, nf);
        ASSERT_EQ(r.holds, flat) << render(c.formula) << "\n" << write_model(c.model);
    }
}

TEST(HierProperty, EveryVertexVerdictIsContextUniform)
{
    Rng rng(555);
    HierOptions opt;
    opt.keep_all_slots = true;
    for (int i = 0; i < 200; ++i) {
        const auto c = random_case(rng);
        const Formula nf = normalize(c.formula);
        const auto k = flatten(c.model);
        const auto table = check_flat(k, nf);
        const auto r = check_hier(c.model, nf, opt);
        for (const Formula& g : table.subformulas()) {
            const auto fv = flat_values(r.model, r.slots.at(render(g)));
            ASSERT_EQ(fv.size(), k.num_states());
            for (StateId s = 0; s < k.num_states(); ++s) {
                ASSERT_EQ(fv[s] != 0, table.holds(g, s)) << render(g) << " at " << k.names[s] << "\n"
                                                         << write_model(c.model);
            }
        }
    }
}

TEST(HierProperty, NscIsOnlyAnAcceleration)
{
    Rng rng(808);
    HierOptions plain;
    plain.use_nsc = false;
    for (int i = 0; i < 200; ++i) {
        const auto c = random_case(rng);
        const Formula nf = normalize(c.formula);
        EXPECT_EQ(check_hier(c.model, nf).holds, check_hier(c.model, nf, plain).holds) << render(nf);
    }
}

TEST(HierProperty, NscVerticesCarryTheCap)
{
    Rng rng(4242);
    HierOptions opt;
    opt.keep_all_slots = true;
    opt.use_nsc = false;
    for (int i = 0; i < 200; ++i) {
        auto c = random_case(rng);
        const Grade k = static_cast<Grade>(detail::pick(rng, 1, 3));
        const Formula f = normalize(Formula::eg(k, Formula::atom("p")));
        const auto r = check_hier(c.model, f, opt);
        const auto nsc = hier::compute_nsc(r.model, r.slots.at("E G p"), hier::PathMode::Globally, r.slots.at("p"));
        for (std::size_t ci = 0; ci < r.model.copies.size(); ++ci) {
            const auto& copy = r.model.copies[ci];
            for (std::size_t v = 0; v < nsc[ci].nsc.size(); ++v) {
                if (!nsc[ci].nsc[v]) {
                    continue;
                }
                const auto& sk = r.model.skeletons[copy.skeleton];
                const std::size_t verdict = r.slots.at(render(f));
                if (sk.is_box(v)) {
                    EXPECT_TRUE(r.model.value_at_entry(static_cast<std::size_t>(copy.expand[v]), verdict));
                } else {
                    EXPECT_TRUE(copy.values[verdict][v]) << write_model(c.model);
                }
            }
        }
    }
}

TEST(HierProperty, GradeZeroMatchesClassicalOnFlattening)
{
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        auto c = random_case(rng);
        const Formula f = normalize(random_formula(rng, 3, 0, {"p", "q"}));
        EXPECT_EQ(check_hier(c.model, f).holds, holds_flat(flatten(c.model), f));
    }
}

TEST(HierProperty, CopyGrowthWithinBound)
{
    Rng rng(2718);
    for (int i = 0; i < 300; ++i) {
        const auto c = random_case(rng);
        const auto r = check_hier(c.model, normalize(c.formula));
        for (const auto& g : r.growth) {
            EXPECT_TRUE(g.within_bound()) << g.formula << " ratio " << g.worst_ratio() << " bound " << g.bound;
        }
    }
}

// Huge grades must saturate through NSC instead of climbing one unit per round.
TEST(HierProperty, HugeGradesNeedFewCopies)
{
    Rng rng(99);
    HierOptions opt;
    opt.max_copies = 10000;
    for (int i = 0; i < 400; ++i) {
        RandomShsmParams prm;
        const Shsm m = random_shsm(rng, prm);
        const Formula nf = normalize(random_formula(rng, 3, 2000000000, prm.props));
        const bool flat = holds_flat(flatten(m), nf);
        const auto r = check_hier(m, nf, opt);
        ASSERT_EQ(r.holds, flat) << render(nf) << "\n" << write_model(m);
    }
}
