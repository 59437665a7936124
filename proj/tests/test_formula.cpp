#include "gctl/formula.hpp"
#include "gctl/random.hpp"

#include <gtest/gtest.h>

using namespace gctl;

namespace {

Formula p() { return Formula::atom("p"); }
Formula q() { return Formula::atom("q"); }

}  // namespace

TEST(Parse, GradedNext)
{
    EXPECT_EQ(parse_formula("E>1 X p"), Formula::ex(1, p()));
}

TEST(Parse, DefaultGradeIsZero)
{
    EXPECT_EQ(parse_formula("E G p"), Formula::eg(0, p()));
    EXPECT_EQ(parse_formula("A F p"), Formula::af(0, p()));
}

TEST(Parse, UniversalUntil)
{
    EXPECT_EQ(parse_formula("A<=2 [p U q]"), Formula::au(2, p(), q()));
}

TEST(Parse, PrecedenceAndAssociativity)
{
    EXPECT_EQ(parse_formula("!p & q | p -> q -> p"),
              Formula::implies(Formula::disj(Formula::conj(Formula::negate(p()), q()), p()), Formula::implies(q(), p())));
    EXPECT_EQ(parse_formula("A G ((t1 & fail) -> A F abort)"),
              Formula::ag(0, Formula::implies(Formula::conj(Formula::atom("t1"), Formula::atom("fail")),
                                              Formula::af(0, Formula::atom("abort")))));
    EXPECT_EQ(parse_formula("E X p & q"), Formula::conj(Formula::ex(0, p()), q()));
}

TEST(Parse, Errors)
{
    for (const char* bad : {"", "   ", "E>-1 X p", "E>1.5 X p", "E<=1 X p", "A>1 X p", "p &", "(p", "E p",
                            "E>99999999999 X p", "E [p q]", "p q", "E>x X p"}) {
        EXPECT_THROW(parse_formula(bad), FormulaError) << bad;
    }
}

TEST(Parse, ErrorCarriesPosition)
{
    try {
        parse_formula("p & & q");
        FAIL();
    } catch (const FormulaError& e) {
        EXPECT_EQ(e.position(), 4u);
    }
}

TEST(Parse, RoundTripOfRandomTrees)
{
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const Formula f = random_formula(rng, 3, 5, {"p", "q", "r"});
        EXPECT_EQ(parse_formula(render(f)), f) << render(f);
    }
}

TEST(Normalize, Examples)
{
    EXPECT_EQ(normalize(Formula::ax(2, p())), Formula::negate(Formula::ex(2, Formula::negate(p()))));
    EXPECT_EQ(normalize(Formula::ef(0, p())), Formula::eu(0, Formula::top(), p()));
    EXPECT_EQ(normalize(Formula::ag(1, p())), Formula::negate(Formula::eu(1, Formula::top(), Formula::negate(p()))));
    EXPECT_EQ(normalize(Formula::af(3, p())), Formula::negate(Formula::eg(3, Formula::negate(p()))));
    EXPECT_EQ(normalize(Formula::au(2, p(), q())), Formula::au(2, p(), q()));
}

TEST(Normalize, OutputIsMinimalAndIdempotent)
{
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Formula f = random_formula(rng, 3, 3, {"p", "q"});
        const Formula n = normalize(f);
        EXPECT_TRUE(is_normalized(n)) << render(f);
        EXPECT_EQ(normalize(n), n) << render(f);
    }
}

TEST(Subformulas, BottomUpExamples)
{
    EXPECT_EQ(subformulas_bottom_up(Formula::ex(1, p())), (std::vector<Formula>{p(), Formula::ex(1, p())}));
    const Formula np = Formula::negate(p());
    EXPECT_EQ(subformulas_bottom_up(Formula::conj(p(), np)), (std::vector<Formula>{p(), np, Formula::conj(p(), np)}));
    const Formula pq = Formula::conj(p(), q());
    const Formula u = Formula::eu(2, p(), pq);
    EXPECT_EQ(subformulas_bottom_up(u), (std::vector<Formula>{p(), q(), pq, u}));
}

TEST(Subformulas, ChildrenPrecedeParents)
{
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const Formula f = normalize(random_formula(rng, 3, 3, {"p", "q"}));
        const auto order = subformulas_bottom_up(f);
        for (std::size_t j = 0; j < order.size(); ++j) {
            for (const auto& c : order[j].children()) {
                const auto it = std::find(order.begin(), order.end(), c);
                ASSERT_NE(it, order.end());
                EXPECT_LT(static_cast<std::size_t>(it - order.begin()), j);
            }
            for (std::size_t l = j + 1; l < order.size(); ++l) {
                EXPECT_FALSE(order[j] == order[l]);
            }
        }
        EXPECT_EQ(order.back(), f);
    }
}

TEST(Formula, SizeDepthAtoms)
{
    const Formula f = parse_formula("E>2 [p U (q & !p)]");
    EXPECT_EQ(size(f), 3u);
    EXPECT_EQ(atoms(f), (std::set<std::string>{"p", "q"}));
    EXPECT_EQ(max_grade(f), 2u);
}
