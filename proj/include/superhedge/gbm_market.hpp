#ifndef SUPERHEDGE_GBM_MARKET_HPP
#define SUPERHEDGE_GBM_MARKET_HPP

#include "superhedge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace superhedge
{

/// Largest |sigma (d + y)| accepted before exponentiation.
inline constexpr double kExponentCap = 700.0;

struct GbmParams
{
    double s0 = 1.0;
    double r = 0.0;
    double sigma = 0.2;
    /// Drift; empty selects the driftless discounted form.
    std::optional<double> mu;
    double dt = 1.0;
    std::size_t n_steps = 1;

    void validate() const
    {
        detail::require(std::isfinite(s0) && s0 > 0.0, "s0 must be positive");
        detail::require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
        detail::require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
        detail::require(std::isfinite(r), "r must be finite");
        detail::require(!mu || std::isfinite(*mu), "mu must be finite");
        detail::require(n_steps >= 1, "n_steps must be at least 1");
    }

    /// True when sigma >= 1/(2 dt), outside the integrability hypothesis.
    [[nodiscard]] bool sigma_warning() const noexcept { return sigma >= 1.0 / (2.0 * dt); }
};

/// d = -r dt / sigma, or (mu - sigma^2/2 - r) dt / sigma with a drift.
inline double centering_offset(const GbmParams& p)
{
    p.validate();
    if (p.mu)
        return (*p.mu - 0.5 * p.sigma * p.sigma - p.r) * p.dt / p.sigma;
    return -p.r * p.dt / p.sigma;
}

namespace detail
{
inline double checked_exp(double x)
{
    if (!(std::abs(x) <= kExponentCap))
        throw NumericOverflow("exponent " + std::to_string(x) + " outside [-700, 700]");
    return std::exp(x);
}
} // namespace detail

/// G(y) = exp(sigma (d + y)); G(-d) = 1 exactly.
inline double gross_return(const GbmParams& p, double y)
{
    return detail::checked_exp(p.sigma * (centering_offset(p) + y));
}

/// rho(y) = G(y) - 1, nonpositive exactly when y <= -d.
inline double rho(const GbmParams& p, double y)
{
    const double x = p.sigma * (centering_offset(p) + y);
    detail::checked_exp(x);
    return std::expm1(x);
}

/// S_N = s0 prod_s G(y_s).
inline double terminal_price(const GbmParams& p, std::span<const double> ys)
{
    detail::require(ys.size() == p.n_steps, "terminal price needs one increment per step");
    double s = p.s0;
    for (double y : ys)
        s *= gross_return(p, y);
    return s;
}

/// Gaussian increments y ~ N(0, dt) from a seeded generator, row-major by path.
inline std::vector<double> sample_increments(const GbmParams& p, std::size_t paths, std::uint64_t seed)
{
    p.validate();
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(p.dt));
    std::vector<double> out(paths * p.n_steps);
    for (double& y : out)
        y = normal(gen);
    return out;
}

enum class PayoffKind
{
    call,
    put,
    digital,
    table
};

struct PayoffSpec
{
    PayoffKind kind = PayoffKind::call;
    double strike = 1.0;
    std::vector<double> breakpoints;
    std::vector<double> values;

    static PayoffSpec call(double k) { return {PayoffKind::call, k, {}, {}}; }
    static PayoffSpec put(double k) { return {PayoffKind::put, k, {}, {}}; }
    static PayoffSpec digital(double k) { return {PayoffKind::digital, k, {}, {}}; }
    static PayoffSpec table(std::vector<double> x, std::vector<double> v)
    {
        return {PayoffKind::table, 0.0, std::move(x), std::move(v)};
    }
    /// f = c everywhere, as a one-point table.
    static PayoffSpec constant(double c) { return table({1.0}, {c}); }

    void validate() const
    {
        if (kind != PayoffKind::table)
        {
            detail::require(std::isfinite(strike) && strike > 0.0, "strike must be positive");
            return;
        }
        detail::require(!breakpoints.empty() && breakpoints.size() == values.size(),
                        "table payoff needs matching nonempty breakpoints and values");
        for (std::size_t i = 0; i < breakpoints.size(); ++i)
        {
            detail::require(std::isfinite(breakpoints[i]) && std::isfinite(values[i]), "table entries must be finite");
            if (i > 0)
                detail::require(breakpoints[i] > breakpoints[i - 1], "table breakpoints must be strictly increasing");
        }
    }

    [[nodiscard]] std::string name() const
    {
        switch (kind)
        {
        case PayoffKind::call: return "call";
        case PayoffKind::put: return "put";
        case PayoffKind::digital: return "digital";
        case PayoffKind::table: return "table";
        }
        return "unknown";
    }
};

/// Payoff of the terminal discounted price; tables interpolate linearly and
/// extrapolate flat.
inline double evaluate_payoff(const PayoffSpec& f, double s)
{
    switch (f.kind)
    {
    case PayoffKind::call: return std::max(s - f.strike, 0.0);
    case PayoffKind::put: return std::max(f.strike - s, 0.0);
    case PayoffKind::digital: return s > f.strike ? 1.0 : 0.0;
    case PayoffKind::table:
    {
        const auto& x = f.breakpoints;
        const auto& v = f.values;
        if (s <= x.front())
            return v.front();
        if (s >= x.back())
            return v.back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), s) - x.begin());
        const std::size_t lo = hi - 1;
        const double t = (s - x[lo]) / (x[hi] - x[lo]);
        return v[lo] + t * (v[hi] - v[lo]);
    }
    }
    return 0.0;
}

} // namespace superhedge

#endif // SUPERHEDGE_GBM_MARKET_HPP
