#include "superhedge/gbm_market.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace superhedge;

namespace
{

GbmParams params(double r, double sigma, std::size_t n = 1)
{
    GbmParams p;
    p.r = r;
    p.sigma = sigma;
    p.n_steps = n;
    return p;
}

} // namespace

TEST(CenteringOffset, Examples)
{
    EXPECT_EQ(centering_offset(params(0.0, 0.3)), 0.0);
    EXPECT_NEAR(centering_offset(params(0.05, 0.2)), -0.25, 1e-15);

    auto drift = params(0.05, 0.2);
    drift.mu = 0.05 + 0.5 * 0.2 * 0.2;
    EXPECT_NEAR(centering_offset(drift), 0.0, 1e-15);
}

TEST(CenteringOffset, DriftAndDriftlessAgreeAtHalfVariance)
{
    auto plain = params(0.03, 0.4);
    plain.dt = 0.5;
    auto drift = plain;
    drift.mu = 0.5 * 0.4 * 0.4;
    for (double y : {-1.0, -0.2, 0.0, 0.7})
        EXPECT_NEAR(gross_return(plain, y), gross_return(drift, y), 1e-15);
}

TEST(GrossReturn, Examples)
{
    const auto p = params(0.05, 0.2);
    const double d = centering_offset(p);
    EXPECT_EQ(gross_return(p, -d), 1.0);
    EXPECT_EQ(rho(p, -d), 0.0);
    EXPECT_NEAR(gross_return(p, std::log(2.0) / p.sigma - d), 2.0, 1e-15);
    EXPECT_NEAR(gross_return(p, 0.0), 0.951229424500714, 1e-12);
    EXPECT_NEAR(gross_return(p, 0.0), std::exp(-0.05), 1e-15);
}

TEST(GrossReturn, SignStructureAndMonotonicity)
{
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 1000; ++trial)
    {
        auto p = params(u(rng) * 0.02, 0.05 + std::abs(u(rng)) * 0.1);
        const double d = centering_offset(p);
        const double y = u(rng);
        EXPECT_EQ(rho(p, y) <= 0.0, y <= -d);
        EXPECT_NEAR(rho(p, y), gross_return(p, y) - 1.0, 1e-14 * std::max(1.0, gross_return(p, y)));
        EXPECT_LT(gross_return(p, y), gross_return(p, y + 1e-3));
    }
}

TEST(GrossReturn, OverflowIsReported)
{
    const auto p = params(0.0, 1.0);
    EXPECT_THROW(gross_return(p, 701.0), NumericOverflow);
    EXPECT_THROW(gross_return(p, -701.0), NumericOverflow);
    EXPECT_THROW(rho(p, 800.0), NumericOverflow);
    EXPECT_NO_THROW(gross_return(p, 699.0));
}

TEST(TerminalPrice, MatchesClosedForm)
{
    std::mt19937_64 rng(52);
    std::normal_distribution<double> z(0.0, 1.0);
    auto p = params(0.04, 0.25, 3);
    p.s0 = 1.7;
    p.dt = 0.5;
    for (int trial = 0; trial < 500; ++trial)
    {
        const std::vector<double> ys{z(rng), z(rng), z(rng)};
        const double zeta = ys[0] + ys[1] + ys[2];
        const double closed = p.s0 * std::exp(p.sigma * zeta - 3.0 * p.r * p.dt);
        EXPECT_NEAR(terminal_price(p, ys), closed, 1e-12 * closed);
    }
    const double d = centering_offset(p);
    const std::vector<double> flat(3, -d);
    EXPECT_NEAR(terminal_price(p, flat), p.s0, 1e-15);
    EXPECT_THROW(terminal_price(p, std::vector<double>{0.0}), ValidationError);
}

TEST(Params, Validation)
{
    EXPECT_THROW(centering_offset(params(0.0, 0.0)), ValidationError);
    auto p = params(0.0, 0.2);
    p.s0 = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = params(0.0, 0.2);
    p.n_steps = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_FALSE(params(0.0, 0.2).sigma_warning());
    EXPECT_TRUE(params(0.0, 0.5).sigma_warning());
}

TEST(Payoff, Examples)
{
    EXPECT_EQ(evaluate_payoff(PayoffSpec::call(1.0), 1.0), 0.0);
    EXPECT_EQ(evaluate_payoff(PayoffSpec::call(1.0), 2.0), 1.0);
    EXPECT_NEAR(evaluate_payoff(PayoffSpec::put(1.3), 1e-300), 1.3, 1e-15);
    EXPECT_EQ(evaluate_payoff(PayoffSpec::digital(1.0), 1.0), 0.0);
    EXPECT_EQ(evaluate_payoff(PayoffSpec::digital(1.0), 1.0 + 1e-12), 1.0);
    EXPECT_EQ(evaluate_payoff(PayoffSpec::constant(0.4), 123.0), 0.4);

    const auto t = PayoffSpec::table({1.0, 2.0, 4.0}, {0.0, 1.0, 0.5});
    EXPECT_EQ(evaluate_payoff(t, 0.5), 0.0);
    EXPECT_EQ(evaluate_payoff(t, 1.5), 0.5);
    EXPECT_EQ(evaluate_payoff(t, 3.0), 0.75);
    EXPECT_EQ(evaluate_payoff(t, 10.0), 0.5);
}

TEST(Payoff, Validation)
{
    EXPECT_THROW(PayoffSpec::call(0.0).validate(), ValidationError);
    EXPECT_THROW(PayoffSpec::table({1.0, 1.0}, {0.0, 1.0}).validate(), ValidationError);
    EXPECT_THROW(PayoffSpec::table({1.0}, {0.0, 1.0}).validate(), ValidationError);
    EXPECT_NO_THROW(PayoffSpec::digital(2.0).validate());
}

TEST(Sampler, DeterministicBySeed)
{
    auto p = params(0.0, 0.2, 4);
    p.dt = 0.25;
    const auto a = sample_increments(p, 1000, 7);
    const auto b = sample_increments(p, 1000, 7);
    const auto c = sample_increments(p, 1000, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    double mean = 0.0;
    double var = 0.0;
    for (double y : a)
        mean += y;
    mean /= static_cast<double>(a.size());
    for (double y : a)
        var += (y - mean) * (y - mean);
    var /= static_cast<double>(a.size() - 1);
    EXPECT_NEAR(mean, 0.0, 0.03);
    EXPECT_NEAR(var, 0.25, 0.03);
}
