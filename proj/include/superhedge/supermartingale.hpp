#ifndef SUPERHEDGE_SUPERMARTINGALE_HPP
#define SUPERHEDGE_SUPERMARTINGALE_HPP

// Super-martingales relative to a measure set: validation, ess-sup value
// processes, hedge coefficients and the optional decomposition f = M - g.

#include "superhedge/errors.hpp"
#include "superhedge/finite_space.hpp"
#include "superhedge/measure_sets.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace superhedge
{

struct SupermartingaleReport
{
    bool holds = true;
    /// max over extremes, k < m and supported blocks of E^Q{f_m|F_k} - f_k.
    double worst_violation = -std::numeric_limits<double>::infinity();
    std::size_t extreme = 0;
    std::size_t from_time = 0;
    std::size_t to_time = 0;
    std::size_t block = 0;

    explicit operator bool() const noexcept { return holds; }
};

namespace detail
{
inline void check_process_shape(const AdaptedProcess& f, const Filtration& filt)
{
    require(f.horizon() == filt.horizon(), "process horizon does not match the filtration");
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
        require(f.at(n).size() == filt.block_count(n),
                "process value count at time " + std::to_string(n) + " does not match the block count");
}

inline void check_set_shape(const MeasureSet& set, const Filtration& filt)
{
    require(set.atom_count() == filt.atom_count(), "measure set and filtration have different atom counts");
}

/// Signed deviations E^Q{f_m|F_k} - f_k over every extreme, k < m and supported block.
template <typename Visit>
void for_each_deviation(const AdaptedProcess& f, const MeasureSet& set, const Filtration& filt, Visit&& visit)
{
    check_process_shape(f, filt);
    check_set_shape(set, filt);
    for (std::size_t e = 0; e < set.extreme_count(); ++e)
    {
        const Measure& q = set.extremes()[e];
        for (std::size_t m = 1; m <= filt.horizon(); ++m)
        {
            const RandomVariable x = f.atomwise(filt, m);
            for (std::size_t k = 0; k < m; ++k)
            {
                const auto ce = conditional_expectation_on_support(q, x, filt, k);
                for (std::size_t b = 0; b < ce.size(); ++b)
                    if (ce[b])
                        visit(*ce[b] - f.value(k, b), e, k, m, b);
            }
        }
    }
}
} // namespace detail

/// E^Q{f_m|F_k} <= f_k + tol for every extreme Q and k < m.
inline SupermartingaleReport is_supermartingale(const AdaptedProcess& f, const MeasureSet& set, const Filtration& filt,
                                                double tolerance = kDefaultTolerance)
{
    SupermartingaleReport rep;
    detail::for_each_deviation(f, set, filt, [&](double dev, std::size_t e, std::size_t k, std::size_t m, std::size_t b) {
        if (dev > rep.worst_violation)
        {
            rep.worst_violation = dev;
            rep.extreme = e;
            rep.from_time = k;
            rep.to_time = m;
            rep.block = b;
        }
    });
    rep.holds = rep.worst_violation <= tolerance;
    return rep;
}

struct MartingaleReport
{
    bool holds = true;
    /// |E^Q{f_m|F_k} - f_k| <= tol everywhere.
    bool direct = true;
    /// super-martingale and E^Q f_m = f_0 for every m and Q.
    bool via_expectation = true;
    double worst_deviation = 0.0;
    [[nodiscard]] bool routes_agree() const noexcept { return direct == via_expectation; }

    explicit operator bool() const noexcept { return holds; }
};

inline MartingaleReport is_martingale(const AdaptedProcess& f, const MeasureSet& set, const Filtration& filt,
                                      double tolerance = kDefaultTolerance)
{
    MartingaleReport rep;
    detail::for_each_deviation(f, set, filt, [&](double dev, std::size_t, std::size_t, std::size_t, std::size_t) {
        rep.worst_deviation = std::max(rep.worst_deviation, std::abs(dev));
    });
    rep.direct = rep.worst_deviation <= tolerance;

    bool super = is_supermartingale(f, set, filt, tolerance).holds;
    bool constant = true;
    for (const Measure& q : set.extremes())
        for (std::size_t m = 1; m <= filt.horizon(); ++m)
            if (std::abs(expectation(q, f.atomwise(filt, m)) - f.value(0, 0)) > tolerance)
                constant = false;
    rep.via_expectation = super && constant;
    rep.holds = rep.direct;
    return rep;
}

/// m_n = E^Q{target|F_n}, read from any extreme charging the block; throws
/// when two extremes disagree by more than the tolerance.
inline AdaptedProcess regular_martingale(const MeasureSet& set, const Filtration& filt, double tolerance = 1e-10)
{
    detail::check_set_shape(set, filt);
    auto m = AdaptedProcess::zeros(filt);
    const double tol = tolerance * std::max(1.0, set.target().sup_abs());
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
    {
        std::vector<std::optional<double>> value(filt.block_count(n));
        for (const Measure& q : set.extremes())
        {
            const auto ce = conditional_expectation_on_support(q, set.target(), filt, n);
            for (std::size_t b = 0; b < ce.size(); ++b)
            {
                if (!ce[b])
                    continue;
                if (!value[b])
                    value[b] = ce[b];
                else
                    detail::require(std::abs(*value[b] - *ce[b]) <= tol,
                                    "conditional expectation of the target depends on the measure at time " +
                                        std::to_string(n) + ", block " + std::to_string(b));
            }
        }
        for (std::size_t b = 0; b < value.size(); ++b)
        {
            detail::require(value[b].has_value(), "block not charged by any extreme point");
            m.value(n, b) = *value[b];
        }
    }
    return m;
}

/// Blockwise max over extremes of E^Q{xi|F_n}.
inline AdaptedProcess esssup_direct(const RandomVariable& xi, const MeasureSet& set, const Filtration& filt)
{
    detail::check_set_shape(set, filt);
    detail::require(xi.size() == filt.atom_count(), "dimension mismatch: random variable vs filtration");
    auto f = AdaptedProcess::zeros(filt);
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
    {
        std::vector<double> best(filt.block_count(n), -std::numeric_limits<double>::infinity());
        for (const Measure& q : set.extremes())
        {
            const auto ce = conditional_expectation_on_support(q, xi, filt, n);
            for (std::size_t b = 0; b < ce.size(); ++b)
                if (ce[b])
                    best[b] = std::max(best[b], *ce[b]);
        }
        for (std::size_t b = 0; b < best.size(); ++b)
            f.value(n, b) = best[b];
    }
    return f;
}

/// Ess-sup value process over the set closed under pasting: f_N is the
/// direct maximum at N and f_n(B) = max over extremes charging B of the
/// one-step conditional mean of f_{n+1}.
inline AdaptedProcess esssup_process(const RandomVariable& xi, const MeasureSet& set, const Filtration& filt)
{
    detail::check_set_shape(set, filt);
    detail::require(xi.size() == filt.atom_count(), "dimension mismatch: random variable vs filtration");
    for (double v : xi)
        detail::require(v >= 0.0, "ess-sup value process needs a nonnegative random variable");

    auto f = AdaptedProcess::zeros(filt);
    const std::size_t N = filt.horizon();
    {
        const auto top = esssup_direct(xi, set, filt);
        for (std::size_t b = 0; b < filt.block_count(N); ++b)
            f.value(N, b) = top.value(N, b);
    }
    for (std::size_t n = N; n-- > 0;)
    {
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
        {
            double best = -std::numeric_limits<double>::infinity();
            const auto& kids = filt.children(n, b);
            for (const Measure& q : set.extremes())
            {
                const double mass = q.mass(filt.partition(n)[b]);
                if (mass <= 0.0)
                    continue;
                double acc = 0.0;
                for (std::size_t c : kids)
                    acc += q.mass(filt.partition(n + 1)[c]) * f.value(n + 1, c);
                best = std::max(best, acc / mass);
            }
            detail::require(std::isfinite(best), "block not charged by any extreme point");
            f.value(n, b) = best;
        }
    }
    return f;
}

/// Largest alpha-feasible bound: returns alpha with ratio <= 1 + alpha dm at every
/// entry. The choice is inf over {dm < 0} of (1 - ratio) / (-dm); when dm has
/// no negative entry it is max(0, sup over {dm > 0} of (ratio - 1) / dm).
inline double hedge_alpha(std::span<const double> ratio, std::span<const double> dm, double tolerance = 1e-10)
{
    detail::require(ratio.size() == dm.size() && !ratio.empty(), "hedge_alpha needs matching nonempty inputs");
    constexpr double inf = std::numeric_limits<double>::infinity();
    double lower = -inf;
    double upper = inf;
    double zero_excess = -inf;
    double scale = 1.0;
    double dm_scale = 1.0;
    for (std::size_t i = 0; i < ratio.size(); ++i)
    {
        detail::require(std::isfinite(ratio[i]) && std::isfinite(dm[i]), "hedge_alpha inputs must be finite");
        scale = std::max(scale, std::abs(ratio[i]));
        dm_scale = std::max(dm_scale, std::abs(dm[i]));
    }
    // increments at roundoff level are treated as zero
    const double dm_floor = 64.0 * std::numeric_limits<double>::epsilon() * dm_scale;
    for (std::size_t i = 0; i < ratio.size(); ++i)
    {
        if (dm[i] > dm_floor)
            lower = std::max(lower, (ratio[i] - 1.0) / dm[i]);
        else if (dm[i] < -dm_floor)
            upper = std::min(upper, (1.0 - ratio[i]) / -dm[i]);
        else
            zero_excess = std::max(zero_excess, ratio[i] - 1.0);
    }

    double alpha = 0.0;
    if (std::isfinite(upper))
        alpha = lower > upper ? 0.5 * (lower + upper) : upper;
    else if (std::isfinite(lower))
        alpha = std::max(0.0, lower);

    double worst = inf;
    for (std::size_t i = 0; i < ratio.size(); ++i)
        worst = std::min(worst, 1.0 + alpha * dm[i] - ratio[i]);
    if (worst < -tolerance * scale || zero_excess > tolerance * scale)
        throw InfeasibleError("no hedge coefficient satisfies ratio <= 1 + alpha dm (shortfall " +
                              std::to_string(-std::min(worst, -zero_excess)) + ")");
    return alpha;
}

struct HedgeCertificate
{
    /// Constant added to f before forming ratios.
    double shift = 0.0;
    /// alpha[n-1][b]: coefficient of step n on block b of partition n-1.
    std::vector<std::vector<double>> alpha;
    /// ratio_bound[n-1]: xi_n^0 = 1 + alpha_n (m_n - m_{n-1}) per atom.
    std::vector<RandomVariable> ratio_bound;
    /// Minimum over atoms of xi_n^0 - (f_n + C)/(f_{n-1} + C), per step.
    std::vector<double> worst_slack;
    AdaptedProcess martingale;
};

inline double positivity_shift(const AdaptedProcess& f) { return 1.0 + std::max(0.0, -f.min()); }

/// Builds xi_n^0 = 1 + alpha_n (m_n - m_{n-1}) with alpha_n from hedge_alpha on
/// the shifted ratios (f_n + C)/(f_{n-1} + C), blockwise.
inline HedgeCertificate local_regularity_certificate(const AdaptedProcess& f, const MeasureSet& set,
                                                     const Filtration& filt, double tolerance = 1e-10)
{
    detail::check_process_shape(f, filt);
    double scale = 1.0;
    for (const auto& row : f.values())
        for (double v : row)
            scale = std::max(scale, std::abs(v));
    const auto rep = is_supermartingale(f, set, filt, tolerance * scale);
    if (!rep.holds)
        throw InfeasibleError("process is not a super-martingale: violation " + std::to_string(rep.worst_violation) +
                              " at extreme " + std::to_string(rep.extreme) + ", times " +
                              std::to_string(rep.from_time) + "->" + std::to_string(rep.to_time));

    HedgeCertificate cert;
    cert.shift = positivity_shift(f);
    cert.martingale = regular_martingale(set, filt);
    const auto& m = cert.martingale;
    const double C = cert.shift;
    for (std::size_t n = 1; n <= filt.horizon(); ++n)
    {
        std::vector<double> alpha(filt.block_count(n - 1));
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < alpha.size(); ++b)
        {
            const auto& kids = filt.children(n - 1, b);
            const double base = f.value(n - 1, b) + C;
            std::vector<double> ratio(kids.size());
            std::vector<double> dm(kids.size());
            for (std::size_t i = 0; i < kids.size(); ++i)
            {
                ratio[i] = (f.value(n, kids[i]) + C) / base;
                dm[i] = m.value(n, kids[i]) - m.value(n - 1, b);
            }
            alpha[b] = hedge_alpha(ratio, dm, tolerance);
            for (std::size_t i = 0; i < kids.size(); ++i)
                worst = std::min(worst, 1.0 + alpha[b] * dm[i] - ratio[i]);
        }
        std::vector<double> bound(filt.atom_count());
        for (std::size_t atom = 0; atom < bound.size(); ++atom)
        {
            const std::size_t prev = filt.block_of(n - 1, atom);
            const std::size_t cur = filt.block_of(n, atom);
            bound[atom] = 1.0 + alpha[prev] * (m.value(n, cur) - m.value(n - 1, prev));
        }
        cert.alpha.push_back(std::move(alpha));
        cert.ratio_bound.emplace_back(std::move(bound));
        cert.worst_slack.push_back(worst);
    }
    return cert;
}

struct Decomposition
{
    AdaptedProcess martingale_part;
    AdaptedProcess compensator;
    HedgeCertificate certificate;
    /// holding[n-1][b] = (f_{n-1} + C) alpha_n on block b of partition n-1: units of m held over step n.
    std::vector<std::vector<double>> holding;
};

/// M_m = f_0 + sum (f_{i-1} + C)(xi_i^0 - 1), g increments (f_{i-1} + C) xi_i^0 - (f_i + C).
inline Decomposition optional_decomposition(const AdaptedProcess& f, const MeasureSet& set, const Filtration& filt,
                                            double tolerance = 1e-10)
{
    Decomposition dec{AdaptedProcess::zeros(filt), AdaptedProcess::zeros(filt),
                      local_regularity_certificate(f, set, filt, tolerance), {}};
    const auto& cert = dec.certificate;
    const auto& m = cert.martingale;
    const double C = cert.shift;
    auto& M = dec.martingale_part;
    auto& g = dec.compensator;
    M.value(0, 0) = f.value(0, 0);
    for (std::size_t n = 1; n <= filt.horizon(); ++n)
    {
        std::vector<double> hold(filt.block_count(n - 1));
        for (std::size_t b = 0; b < hold.size(); ++b)
            hold[b] = (f.value(n - 1, b) + C) * cert.alpha[n - 1][b];
        for (std::size_t c = 0; c < filt.block_count(n); ++c)
        {
            const std::size_t b = filt.parent(n, c);
            const double dm = m.value(n, c) - m.value(n - 1, b);
            const double gain = hold[b] * dm;
            M.value(n, c) = M.value(n - 1, b) + gain;
            const double inc = (f.value(n - 1, b) + C) + gain - (f.value(n, c) + C);
            g.value(n, c) = g.value(n - 1, b) + std::max(0.0, inc);
        }
        dec.holding.push_back(std::move(hold));
    }
    return dec;
}

struct DecompositionReport
{
    double worst_identity = 0.0;
    double worst_g_decrease = 0.0;
    double g_initial = 0.0;
    MartingaleReport martingale;
    bool identity = true;
    bool g_starts_at_zero = true;
    bool g_nondecreasing = true;

    [[nodiscard]] bool ok() const noexcept { return identity && g_starts_at_zero && g_nondecreasing && martingale.holds; }
};

/// Checks f = M - g, g_0 = 0, g nondecreasing along refinement and M a
/// martingale of the set. Any decomposition with these properties passes.
inline DecompositionReport verify_decomposition(const AdaptedProcess& f, const AdaptedProcess& M,
                                                const AdaptedProcess& g, const MeasureSet& set, const Filtration& filt,
                                                double tolerance = 1e-10)
{
    detail::check_process_shape(f, filt);
    detail::check_process_shape(M, filt);
    detail::check_process_shape(g, filt);
    DecompositionReport rep;
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
        {
            rep.worst_identity = std::max(rep.worst_identity, std::abs(f.value(n, b) - (M.value(n, b) - g.value(n, b))));
            if (n > 0)
                rep.worst_g_decrease =
                    std::max(rep.worst_g_decrease, g.value(n - 1, filt.parent(n, b)) - g.value(n, b));
        }
    rep.g_initial = g.value(0, 0);
    rep.identity = rep.worst_identity <= tolerance;
    rep.g_starts_at_zero = std::abs(rep.g_initial) <= tolerance;
    rep.g_nondecreasing = rep.worst_g_decrease <= kDefaultTolerance;
    rep.martingale = is_martingale(M, set, filt, tolerance);
    return rep;
}

inline DecompositionReport verify_decomposition(const AdaptedProcess& f, const Decomposition& dec,
                                                const MeasureSet& set, const Filtration& filt,
                                                double tolerance = 1e-10)
{
    return verify_decomposition(f, dec.martingale_part, dec.compensator, set, filt, tolerance);
}

/// h_m = f_m E^Q{xi|F_m} for f nonincreasing along refinement and xi >= 0 with
/// measure-independent conditional expectations.
inline AdaptedProcess class_K_generate(const AdaptedProcess& f_dec, const RandomVariable& xi, const MeasureSet& set,
                                       const Filtration& filt, double tolerance = 1e-10)
{
    detail::check_process_shape(f_dec, filt);
    detail::check_set_shape(set, filt);
    for (double v : xi)
        detail::require(v >= 0.0, "class K generator needs a nonnegative random variable");
    for (std::size_t n = 1; n <= filt.horizon(); ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
            detail::require(f_dec.value(n, b) <= f_dec.value(n - 1, filt.parent(n, b)) + tolerance,
                            "generator process is not nonincreasing at time " + std::to_string(n));
    for (const Measure& q : set.extremes())
        detail::require(std::abs(expectation(q, xi) - 1.0) <= tolerance * std::max(1.0, xi.sup_abs()),
                        "random variable does not have unit expectation under every extreme");

    const MeasureSet probe(set.reference(), xi, set.extremes(), set.mixtures_allowed(), tolerance);
    const auto cond = regular_martingale(probe, filt, tolerance);
    auto h = AdaptedProcess::zeros(filt);
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
            h.value(n, b) = f_dec.value(n, b) * cond.value(n, b);
    return h;
}

/// Smallest alpha0 with payoff <= alpha0 m_N on every atom.
inline double minimal_domination_scale(const RandomVariable& payoff, const MeasureSet& set, const Filtration& filt)
{
    const auto m = regular_martingale(set, filt);
    const std::size_t N = filt.horizon();
    double scale = 0.0;
    for (std::size_t atom = 0; atom < payoff.size(); ++atom)
    {
        const double mn = m.value(N, filt.block_of(N, atom));
        if (mn > 0.0)
            scale = std::max(scale, payoff[atom] / mn);
        else if (payoff[atom] > 0.0)
            throw InfeasibleError("payoff is positive where the regular martingale vanishes");
    }
    return scale;
}

/// alpha0 m_n for n < N and the payoff at N, a super-martingale when the payoff
/// is dominated by alpha0 m_N.
inline AdaptedProcess superhedge_supermartingale(const RandomVariable& payoff, double alpha0, const MeasureSet& set,
                                                 const Filtration& filt, double tolerance = 1e-12)
{
    detail::require(payoff.size() == filt.atom_count(), "dimension mismatch: payoff vs filtration");
    const auto m = regular_martingale(set, filt);
    const std::size_t N = filt.horizon();
    const auto top = block_values(payoff, filt, N);
    auto f = AdaptedProcess::zeros(filt);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
            f.value(n, b) = alpha0 * m.value(n, b);
    for (std::size_t b = 0; b < top.size(); ++b)
    {
        detail::require(top[b] <= alpha0 * m.value(N, b) + tolerance * std::max(1.0, std::abs(top[b])),
                        "payoff is not dominated by alpha0 m_N on terminal block " + std::to_string(b));
        f.value(N, b) = top[b];
    }
    return f;
}

} // namespace superhedge

#endif // SUPERHEDGE_SUPERMARTINGALE_HPP
