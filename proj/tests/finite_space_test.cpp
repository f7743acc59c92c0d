#include "generators.hpp"
#include "superhedge/finite_space.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace superhedge;
using superhedge::testing::Rng;

namespace
{

Filtration two_block_filtration()
{
    return Filtration(4, {Partition{{0, 1, 2, 3}}, Partition{{0, 1}, {2, 3}}});
}

// Brute force over atoms, written independently of the library routine.
double block_average(const std::vector<double>& m, const std::vector<double>& x, const Block& b)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i : b)
    {
        num += m[i] * x[i];
        den += m[i];
    }
    return num / den;
}

} // namespace

TEST(AtomSpace, RejectsDuplicateLabels)
{
    EXPECT_THROW(AtomSpace(std::vector<std::string>{"a", "b", "a"}), ValidationError);
    EXPECT_THROW(AtomSpace(std::size_t{0}), ValidationError);
    EXPECT_EQ(AtomSpace(3).size(), 3u);
}

TEST(Filtration, ValidatesStructure)
{
    EXPECT_THROW(Filtration(3, {Partition{{0, 1}, {2}}}), ValidationError);
    EXPECT_THROW(Filtration(3, {Partition{{0, 1, 2}}, Partition{{0, 1}}}), ValidationError);
    EXPECT_THROW(Filtration(3, {Partition{{0, 1, 2}}, Partition{{0, 1}, {1, 2}}}), ValidationError);
    EXPECT_THROW(Filtration(4, {Partition{{0, 1, 2, 3}}, Partition{{0, 1}, {2, 3}}, Partition{{0, 2}, {1, 3}}}),
                 ValidationError);
    const auto f = two_block_filtration();
    EXPECT_EQ(f.horizon(), 1u);
    EXPECT_FALSE(f.separates_atoms());
    EXPECT_EQ(f.block_of(1, 3), 1u);
    EXPECT_EQ(f.parent(1, 1), 0u);
}

TEST(Filtration, ProductIsLexicographic)
{
    const std::vector<std::size_t> sizes{2, 3};
    const auto f = Filtration::product(sizes);
    EXPECT_EQ(f.atom_count(), 6u);
    EXPECT_EQ(f.block_count(1), 2u);
    EXPECT_EQ(f.block_of(1, 2), 0u);
    EXPECT_EQ(f.block_of(1, 3), 1u);
    EXPECT_TRUE(f.separates_atoms());
    EXPECT_EQ(f.children(1, 1), (std::vector<std::size_t>{3, 4, 5}));
}

TEST(Measure, ValidatesWeights)
{
    EXPECT_THROW(Measure({0.5, 0.6}), ValidationError);
    EXPECT_THROW(Measure({1.5, -0.5}), ValidationError);
    EXPECT_TRUE(Measure({0.5, 0.5}).strictly_positive());
    EXPECT_FALSE(Measure({1.0, 0.0}).strictly_positive());
    EXPECT_FALSE(Measure({1.0 - 1e-16, 1e-16}).strictly_positive());
}

TEST(ConditionalExpectation, HandExample)
{
    const Measure m({0.1, 0.2, 0.3, 0.4});
    const RandomVariable x{1, 2, 3, 4};
    const auto ce = conditional_expectation(m, x, two_block_filtration(), 1);
    ASSERT_EQ(ce.size(), 2u);
    EXPECT_NEAR(ce[0], 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(ce[1], 25.0 / 7.0, 1e-15);
    EXPECT_NEAR(conditional_expectation(m, x, two_block_filtration(), 0)[0], 3.0, 1e-15);
}

TEST(ConditionalExpectation, ConstantsAreInvariant)
{
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto f = superhedge::testing::random_filtration(rng, 12, 3);
        const auto m = superhedge::testing::random_measure(rng, 12);
        const RandomVariable c(12, 2.5);
        for (std::size_t n = 0; n <= f.horizon(); ++n)
            for (double v : conditional_expectation(m, c, f, n))
                EXPECT_NEAR(v, 2.5, 1e-14);
    }
}

TEST(ConditionalExpectation, ZeroMassBlockThrows)
{
    const Measure m({0.0, 0.0, 0.5, 0.5});
    const RandomVariable x{1, 2, 3, 4};
    EXPECT_THROW(conditional_expectation(m, x, two_block_filtration(), 1), ValidationError);
    const auto partial = conditional_expectation_on_support(m, x, two_block_filtration(), 1);
    EXPECT_FALSE(partial[0].has_value());
    EXPECT_NEAR(*partial[1], 3.5, 1e-15);
}

TEST(ConditionalExpectation, MatchesBruteForceOracle)
{
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial)
    {
        const std::size_t atoms = superhedge::testing::pick(rng, 1, 32);
        const auto f = superhedge::testing::random_filtration(rng, atoms, 3);
        const auto m = superhedge::testing::random_measure(rng, atoms);
        const auto x = superhedge::testing::random_rv(rng, atoms);
        const std::vector<double> mw(m.weights().begin(), m.weights().end());
        const std::vector<double> xv(x.begin(), x.end());
        for (std::size_t n = 0; n <= f.horizon(); ++n)
        {
            const auto ce = conditional_expectation(m, x, f, n);
            for (std::size_t b = 0; b < ce.size(); ++b)
                EXPECT_NEAR(ce[b], block_average(mw, xv, f.partition(n)[b]), 1e-12);
        }
    }
}

TEST(ConditionalExpectation, TowerProperty)
{
    Rng rng(13);
    for (int trial = 0; trial < 300; ++trial)
    {
        const std::size_t atoms = superhedge::testing::pick(rng, 2, 32);
        const auto f = superhedge::testing::random_filtration(rng, atoms, 4);
        const auto m = superhedge::testing::random_measure(rng, atoms);
        const auto x = superhedge::testing::random_rv(rng, atoms);
        for (std::size_t k = 0; k <= f.horizon(); ++k)
        {
            const auto inner = conditional_expectation(m, x, f, k);
            std::vector<double> lifted(atoms);
            for (std::size_t a = 0; a < atoms; ++a)
                lifted[a] = inner[f.block_of(k, a)];
            for (std::size_t n = 0; n <= k; ++n)
            {
                const auto lhs = conditional_expectation(m, RandomVariable(lifted), f, n);
                const auto rhs = conditional_expectation(m, x, f, n);
                for (std::size_t b = 0; b < lhs.size(); ++b)
                    EXPECT_NEAR(lhs[b], rhs[b], 1e-12);
            }
        }
    }
}

TEST(ChangeOfMeasure, IdentityDensity)
{
    const Measure p({0.1, 0.2, 0.3, 0.4});
    const RandomVariable x{1, -2, 3, 5};
    const auto a = change_of_measure_cond_exp(p, p, x, two_block_filtration(), 1);
    const auto b = conditional_expectation(p, x, two_block_filtration(), 1);
    EXPECT_NEAR(a[0], b[0], 1e-15);
    EXPECT_NEAR(a[1], b[1], 1e-15);
}

TEST(ChangeOfMeasure, AgreesWithDirectComputation)
{
    Rng rng(14);
    for (int trial = 0; trial < 500; ++trial)
    {
        const std::size_t atoms = superhedge::testing::pick(rng, 1, 16);
        const auto f = superhedge::testing::random_filtration(rng, atoms, 3);
        const auto p1 = superhedge::testing::random_measure(rng, atoms);
        const auto p2 = superhedge::testing::random_measure(rng, atoms);
        const auto x = superhedge::testing::random_rv(rng, atoms);
        for (std::size_t n = 0; n <= f.horizon(); ++n)
        {
            const auto via = change_of_measure_cond_exp(p1, p2, x, f, n);
            const auto direct = conditional_expectation(p1, x, f, n);
            for (std::size_t b = 0; b < via.size(); ++b)
                EXPECT_NEAR(via[b], direct[b], 1e-12);
        }
    }
}

TEST(ChangeOfMeasure, RejectsNonEquivalentMeasures)
{
    const Measure p1({0.5, 0.5, 0.0, 0.0});
    const Measure p2({0.25, 0.25, 0.25, 0.25});
    EXPECT_THROW(change_of_measure_cond_exp(p1, p2, RandomVariable{1, 2, 3, 4}, two_block_filtration(), 1),
                 ValidationError);
}

TEST(TvMetric, Examples)
{
    EXPECT_DOUBLE_EQ(tv_metric(Measure({0.5, 0.5}), Measure({0.25, 0.75})), 0.5);
    EXPECT_DOUBLE_EQ(tv_metric(Measure::point_mass(3, 0), Measure::point_mass(3, 2)), 2.0);
    EXPECT_DOUBLE_EQ(tv_metric(Measure::uniform(4), Measure::uniform(4)), 0.0);
    EXPECT_THROW(tv_metric(Measure::uniform(3), Measure::uniform(4)), ValidationError);
}

TEST(TvMetric, MetricAxioms)
{
    Rng rng(15);
    for (int trial = 0; trial < 500; ++trial)
    {
        const std::size_t n = superhedge::testing::pick(rng, 1, 20);
        const auto a = superhedge::testing::random_measure(rng, n);
        const auto b = superhedge::testing::random_measure(rng, n);
        const auto c = superhedge::testing::random_measure(rng, n);
        EXPECT_GE(tv_metric(a, b), 0.0);
        EXPECT_EQ(tv_metric(a, b), tv_metric(b, a));
        EXPECT_LE(tv_metric(a, c), tv_metric(a, b) + tv_metric(b, c) + 1e-14);
        EXPECT_EQ(tv_metric(a, a), 0.0);
    }
}

TEST(AdaptedProcess, ShapeChecks)
{
    const auto f = two_block_filtration();
    EXPECT_THROW(AdaptedProcess(f, {{1.0}}), ValidationError);
    EXPECT_THROW(AdaptedProcess(f, {{1.0}, {1.0, 2.0, 3.0}}), ValidationError);
    const AdaptedProcess p(f, {{1.0}, {0.5, 2.0}});
    const auto x = p.atomwise(f, 1);
    EXPECT_EQ(x[1], 0.5);
    EXPECT_EQ(x[2], 2.0);
    EXPECT_THROW(block_values(RandomVariable{1, 2, 3, 4}, f, 1), ValidationError);
    EXPECT_EQ(block_values(RandomVariable{1, 1, 3, 3}, f, 1), (std::vector<double>{1, 3}));
}
