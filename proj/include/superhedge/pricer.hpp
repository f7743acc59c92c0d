#ifndef SUPERHEDGE_PRICER_HPP
#define SUPERHEDGE_PRICER_HPP

// Super-hedge price of f(S_N) for discrete GBM as a supremum over product
// two-point martingale measures, with a backward-induction cross-check and
// the hedge of the maximizing scenario tree.

#include "superhedge/errors.hpp"
#include "superhedge/finite_space.hpp"
#include "superhedge/gbm_market.hpp"
#include "superhedge/measure_sets.hpp"
#include "superhedge/supermartingale.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace superhedge
{

/// Per-step scenario pair; a degenerate step stays at gross return 1.
struct StepPair
{
    double y_down = 0.0;
    double y_up = 0.0;
    bool degenerate = false;
};

struct PricingCandidate
{
    std::vector<double> y_down;
    std::vector<double> y_up;
    std::vector<bool> degenerate;

    [[nodiscard]] std::size_t steps() const noexcept { return y_down.size(); }
    [[nodiscard]] StepPair step(std::size_t s) const { return {y_down[s], y_up[s], degenerate[s]}; }

    static PricingCandidate from_steps(const std::vector<StepPair>& steps)
    {
        PricingCandidate c;
        for (const auto& s : steps)
        {
            c.y_down.push_back(s.y_down);
            c.y_up.push_back(s.y_up);
            c.degenerate.push_back(s.degenerate);
        }
        return c;
    }
};

struct GridSpec
{
    std::size_t points_per_side = 64;
    /// Half-width B of each side; empty selects 10 sqrt(dt).
    std::optional<double> bound;
    double delta = 1e-6;
    std::size_t refine_rounds = 3;
    double denom_floor = 1e-9;
    /// Largest N for which the 2^N-term objective is evaluated.
    std::size_t joint_enum_cap = 16;
    /// Joint candidate counts up to this are enumerated exhaustively.
    std::size_t exhaustive_limit = 2'000'000;
    std::size_t max_sweeps = 64;
    /// Explicit per-side grids replacing the uniform ranges.
    std::vector<double> y_down;
    std::vector<double> y_up;
    bool include_degenerate = true;
    /// Extra candidates always compared against the grid.
    std::vector<PricingCandidate> seeds;
    /// Worker threads; 0 selects the hardware concurrency.
    std::size_t threads = 1;

    [[nodiscard]] double effective_bound(const GbmParams& p) const { return bound.value_or(10.0 * std::sqrt(p.dt)); }
};

struct PricingResult
{
    double price = 0.0;
    PricingCandidate argmax;
    std::size_t evaluations = 0;
    GridSpec grid;
    bool exhaustive = false;
    std::optional<double> oracle_price;
};

/// One-step gross returns and weights.
struct StepLaw
{
    double l = 1.0;
    double u = 1.0;
    double w_down = 1.0;
    double w_up = 0.0;
};

/// w_down = (u - 1)/(u - l), w_up = (1 - l)/(u - l) for l = G(y1) <= 1 < u = G(y2).
inline std::pair<double, double> step_weights(const GbmParams& p, double y1, double y2, double denom_floor = 1e-9)
{
    const double d = centering_offset(p);
    detail::require(y1 + d <= 0.0, "down increment must satisfy y <= -d");
    detail::require(y2 + d > 0.0, "up increment must satisfy y > -d");
    const double l = gross_return(p, y1);
    const double u = gross_return(p, y2);
    detail::require(u - l >= denom_floor, "step separation below the denominator floor");
    return {(u - 1.0) / (u - l), (1.0 - l) / (u - l)};
}

inline StepLaw step_law(const GbmParams& p, const StepPair& s, double denom_floor = 1e-9)
{
    if (s.degenerate)
        return {};
    const auto [wd, wu] = step_weights(p, s.y_down, s.y_up, denom_floor);
    return {gross_return(p, s.y_down), gross_return(p, s.y_up), wd, wu};
}

namespace detail
{
inline void check_candidate(const GbmParams& p, const PricingCandidate& c)
{
    require(c.y_down.size() == p.n_steps && c.y_up.size() == p.n_steps && c.degenerate.size() == p.n_steps,
            "candidate needs one pair per step");
}

inline double objective_from_laws(double s0, const PayoffSpec& f, const std::vector<StepLaw>& laws)
{
    double total = 0.0;
    const std::size_t N = laws.size();
    auto walk = [&](auto&& self, std::size_t s, double price, double weight) -> void {
        if (s == N)
        {
            total += weight * evaluate_payoff(f, price);
            return;
        }
        const StepLaw& st = laws[s];
        if (st.w_down > 0.0)
            self(self, s + 1, price * st.l, weight * st.w_down);
        if (st.w_up > 0.0)
            self(self, s + 1, price * st.u, weight * st.w_up);
    };
    walk(walk, 0, s0, 1.0);
    return total;
}
} // namespace detail

/// Sum over the 2^N down/up combinations of f(S_N) times the product of step weights.
inline double objective(const GbmParams& p, const PayoffSpec& f, const PricingCandidate& c,
                        std::size_t joint_enum_cap = 16, double denom_floor = 1e-9)
{
    p.validate();
    f.validate();
    detail::check_candidate(p, c);
    detail::require(p.n_steps <= joint_enum_cap, "n_steps exceeds the joint enumeration cap");
    std::vector<StepLaw> laws(p.n_steps);
    for (std::size_t s = 0; s < p.n_steps; ++s)
        laws[s] = step_law(p, c.step(s), denom_floor);
    return detail::objective_from_laws(p.s0, f, laws);
}

/// The same sum written literally: index i_s in {1, 2} selects y^{i_s}, the
/// weight is |G(y^{i_s+1}) - 1| / |G(y^{i_s+1}) - G(y^{i_s})| with y^3 = y^1.
/// The order in which the two increments of a step are supplied does not matter.
inline double objective_formula(const GbmParams& p, const PayoffSpec& f, const std::vector<double>& y1,
                                const std::vector<double>& y2)
{
    p.validate();
    detail::require(y1.size() == p.n_steps && y2.size() == p.n_steps, "formula needs one pair per step");
    detail::require(p.n_steps <= 30, "formula enumeration limited to 30 steps");
    const std::size_t N = p.n_steps;
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << N); ++mask)
    {
        double s = p.s0;
        double w = 1.0;
        for (std::size_t k = 0; k < N; ++k)
        {
            const bool second = (mask >> k) & 1u;
            const double here = second ? y2[k] : y1[k];
            const double next = second ? y1[k] : y2[k];
            const double g_here = gross_return(p, here);
            const double g_next = gross_return(p, next);
            s *= g_here;
            w *= std::abs(g_next - 1.0) / std::abs(g_next - g_here);
        }
        total += w * evaluate_payoff(f, s);
    }
    return total;
}

namespace detail
{
inline std::vector<double> linspace(double a, double b, std::size_t n)
{
    if (n == 1)
        return {a};
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    v.back() = b;
    return v;
}

struct SideRanges
{
    double down_lo, down_hi, up_lo, up_hi;
};

inline SideRanges default_ranges(const GbmParams& p, const GridSpec& g)
{
    const double d = centering_offset(p);
    const double B = g.effective_bound(p);
    require(g.delta > 0.0 && B > g.delta, "grid bound must exceed delta");
    return {-d - B, -d - g.delta, -d + g.delta, -d + B};
}

inline std::vector<StepPair> pairs_from_sides(const GbmParams& p, const std::vector<double>& downs,
                                              const std::vector<double>& ups, const GridSpec& g)
{
    const double d = centering_offset(p);
    std::vector<double> dn = downs;
    std::vector<double> up = ups;
    std::sort(dn.begin(), dn.end());
    std::sort(up.begin(), up.end());
    dn.erase(std::unique(dn.begin(), dn.end()), dn.end());
    up.erase(std::unique(up.begin(), up.end()), up.end());
    std::vector<StepPair> out;
    for (double y1 : dn)
    {
        require(y1 + d <= 0.0, "down grid value above -d");
        for (double y2 : up)
        {
            require(y2 + d > 0.0, "up grid value not above -d");
            if (gross_return(p, y2) - gross_return(p, y1) >= g.denom_floor)
                out.push_back({y1, y2, false});
        }
    }
    if (g.include_degenerate)
        out.push_back({-d, -d, true});
    return out;
}

inline std::vector<StepPair> initial_pairs(const GbmParams& p, const GridSpec& g)
{
    if (!g.y_down.empty() || !g.y_up.empty())
    {
        require(!g.y_down.empty() && !g.y_up.empty(), "explicit grids need both sides");
        return pairs_from_sides(p, g.y_down, g.y_up, g);
    }
    require(g.points_per_side >= 1, "grid needs at least one point per side");
    const auto r = default_ranges(p, g);
    return pairs_from_sides(p, linspace(r.down_lo, r.down_hi, g.points_per_side),
                            linspace(r.up_lo, r.up_hi, g.points_per_side), g);
}

struct Incumbent
{
    double value = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> index;
};

/// Objective of a candidate given as indices into per-step pair lists.
class Evaluator
{
public:
    Evaluator(const GbmParams& p, const PayoffSpec& f, const std::vector<std::vector<StepPair>>& pairs,
              double denom_floor)
        : p_(p), f_(f), laws_(pairs.size())
    {
        for (std::size_t s = 0; s < pairs.size(); ++s)
            for (const auto& pr : pairs[s])
                laws_[s].push_back(step_law(p, pr, denom_floor));
    }

    [[nodiscard]] double operator()(const std::vector<std::size_t>& idx) const
    {
        std::vector<StepLaw> laws(idx.size());
        for (std::size_t s = 0; s < idx.size(); ++s)
            laws[s] = laws_[s][idx[s]];
        return objective_from_laws(p_.s0, f_, laws);
    }

private:
    const GbmParams& p_;
    const PayoffSpec& f_;
    std::vector<std::vector<StepLaw>> laws_;
};

inline std::vector<std::size_t> decode(std::size_t code, const std::vector<std::vector<StepPair>>& pairs)
{
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t s = pairs.size(); s-- > 0;)
    {
        idx[s] = code % pairs[s].size();
        code /= pairs[s].size();
    }
    return idx;
}

/// Scans codes [0, total) in order; the first maximal code wins ties.
inline Incumbent exhaustive_search(const Evaluator& eval, const std::vector<std::vector<StepPair>>& pairs,
                                   std::size_t total, std::size_t threads)
{
    threads = std::max<std::size_t>(1, std::min(threads, total));
    std::vector<Incumbent> best(threads);
    auto work = [&](std::size_t t) {
        const std::size_t begin = total * t / threads;
        const std::size_t end = total * (t + 1) / threads;
        for (std::size_t code = begin; code < end; ++code)
        {
            auto idx = decode(code, pairs);
            const double v = eval(idx);
            if (v > best[t].value)
                best[t] = {v, std::move(idx)};
        }
    };
    if (threads == 1)
        work(0);
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(work, t);
        for (auto& th : pool)
            th.join();
    }
    Incumbent out;
    for (auto& b : best)
        if (b.value > out.value)
            out = std::move(b);
    return out;
}

/// Cyclic coordinate ascent: each step is swept over its whole pair list
/// with the other steps held fixed, until a full cycle brings no gain.
inline Incumbent coordinate_ascent(const Evaluator& eval, const std::vector<std::vector<StepPair>>& pairs,
                                   Incumbent start, std::size_t max_sweeps, std::size_t& evaluations)
{
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep)
    {
        bool improved = false;
        for (std::size_t s = 0; s < pairs.size(); ++s)
        {
            auto idx = start.index;
            for (std::size_t j = 0; j < pairs[s].size(); ++j)
            {
                if (j == start.index[s])
                    continue;
                idx[s] = j;
                const double v = eval(idx);
                ++evaluations;
                if (v > start.value)
                {
                    start = {v, idx};
                    improved = true;
                }
            }
        }
        if (!improved)
            break;
    }
    return start;
}

inline PricingCandidate candidate_of(const std::vector<std::vector<StepPair>>& pairs,
                                     const std::vector<std::size_t>& idx)
{
    std::vector<StepPair> steps(idx.size());
    for (std::size_t s = 0; s < idx.size(); ++s)
        steps[s] = pairs[s][idx[s]];
    return PricingCandidate::from_steps(steps);
}
} // namespace detail

/// Maximizes the objective over the grid: exhaustive joint enumeration when
/// the candidate count allows, coordinate ascent otherwise, then coordinate-wise
/// refinement rounds shrinking each side's range by 1/4 around the incumbent.
/// Ties resolve to the first candidate in lexicographic (y_down, y_up) step order.
inline PricingResult price_sup(const GbmParams& p, const PayoffSpec& f, const GridSpec& grid)
{
    p.validate();
    f.validate();
    const std::size_t N = p.n_steps;
    detail::require(N <= grid.joint_enum_cap, "n_steps exceeds the joint enumeration cap");
    const std::size_t threads = grid.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : grid.threads;

    const auto base = detail::initial_pairs(p, grid);
    detail::require(!base.empty(), "grid produces no admissible pair");
    std::vector<std::vector<StepPair>> pairs(N, base);

    PricingResult res;
    res.grid = grid;
    detail::Evaluator eval(p, f, pairs, grid.denom_floor);

    std::size_t total = 1;
    bool exhaustive = true;
    for (std::size_t s = 0; s < N; ++s)
    {
        if (total > grid.exhaustive_limit / base.size())
        {
            exhaustive = false;
            break;
        }
        total *= base.size();
    }

    detail::Incumbent inc;
    if (exhaustive)
    {
        inc = detail::exhaustive_search(eval, pairs, total, threads);
        res.evaluations += total;
    }
    else
    {
        for (std::size_t j = 0; j < base.size(); ++j)
        {
            std::vector<std::size_t> idx(N, j);
            const double v = eval(idx);
            ++res.evaluations;
            if (v > inc.value)
                inc = {v, std::move(idx)};
        }
        inc = detail::coordinate_ascent(eval, pairs, std::move(inc), grid.max_sweeps, res.evaluations);
    }
    res.exhaustive = exhaustive;
    res.price = inc.value;
    res.argmax = detail::candidate_of(pairs, inc.index);

    auto consider = [&](const PricingCandidate& c) {
        const double v = objective(p, f, c, grid.joint_enum_cap, grid.denom_floor);
        ++res.evaluations;
        if (v > res.price)
        {
            res.price = v;
            res.argmax = c;
        }
    };
    for (const auto& seed : grid.seeds)
        consider(seed);

    if (grid.refine_rounds > 0)
    {
        const double d = centering_offset(p);
        detail::SideRanges r{};
        if (!grid.y_down.empty())
        {
            r = {*std::min_element(grid.y_down.begin(), grid.y_down.end()),
                 *std::max_element(grid.y_down.begin(), grid.y_down.end()),
                 *std::min_element(grid.y_up.begin(), grid.y_up.end()),
                 *std::max_element(grid.y_up.begin(), grid.y_up.end())};
        }
        else
            r = detail::default_ranges(p, grid);
        std::vector<detail::SideRanges> ranges(N, r);
        const std::size_t pts = std::max<std::size_t>(grid.points_per_side, 2);
        for (std::size_t round = 0; round < grid.refine_rounds; ++round)
        {
            std::vector<std::vector<StepPair>> local(N);
            std::vector<std::size_t> start(N, 0);
            for (std::size_t s = 0; s < N; ++s)
            {
                auto& rg = ranges[s];
                const StepPair cur = res.argmax.step(s);
                if (!cur.degenerate)
                {
                    const double wd = 0.25 * (rg.down_hi - rg.down_lo);
                    const double wu = 0.25 * (rg.up_hi - rg.up_lo);
                    const double dlo = std::max(r.down_lo, cur.y_down - 0.5 * wd);
                    const double uhi = std::min(r.up_hi, cur.y_up + 0.5 * wu);
                    rg = {dlo, std::min(r.down_hi, dlo + wd), std::max(r.up_lo, uhi - wu), uhi};
                }
                std::vector<double> downs = detail::linspace(rg.down_lo, rg.down_hi, pts);
                std::vector<double> ups = detail::linspace(rg.up_lo, rg.up_hi, pts);
                if (!cur.degenerate)
                {
                    downs.push_back(cur.y_down);
                    ups.push_back(cur.y_up);
                }
                for (double& y : downs)
                    y = std::min(y, -d);
                local[s] = detail::pairs_from_sides(p, downs, ups, grid);
                for (std::size_t j = 0; j < local[s].size(); ++j)
                {
                    const auto& pr = local[s][j];
                    if (pr.degenerate == cur.degenerate &&
                        (cur.degenerate || (pr.y_down == cur.y_down && pr.y_up == cur.y_up)))
                        start[s] = j;
                }
            }
            detail::Evaluator leval(p, f, local, grid.denom_floor);
            detail::Incumbent seed{leval(start), start};
            ++res.evaluations;
            auto refined = detail::coordinate_ascent(leval, local, seed, grid.max_sweeps, res.evaluations);
            if (refined.value > res.price)
            {
                res.price = refined.value;
                res.argmax = detail::candidate_of(local, refined.index);
            }
        }
    }
    return res;
}

enum class OracleMode
{
    exact,
    interpolated
};

struct OracleOptions
{
    OracleMode mode = OracleMode::exact;
    std::size_t lattice_points = 2001;
    std::size_t max_states = 5'000'000;
};

/// V_N = f; V_{n-1}(s) = max over the step's pairs of w_down V_n(s l) + w_up V_n(s u),
/// the degenerate pair contributing V_n(s). Exact mode tracks every reachable
/// price as a multiset of gross returns; interpolated mode uses a geometric
/// lattice per step with linear interpolation in log price.
inline double backward_induction_oracle(const GbmParams& p, const PayoffSpec& f,
                                        const std::vector<std::vector<StepPair>>& step_pairs,
                                        const OracleOptions& opt = {}, double denom_floor = 1e-9)
{
    p.validate();
    f.validate();
    const std::size_t N = p.n_steps;
    detail::require(step_pairs.size() == N, "oracle needs one pair list per step");
    std::vector<std::vector<StepLaw>> laws(N);
    for (std::size_t s = 0; s < N; ++s)
    {
        detail::require(!step_pairs[s].empty(), "oracle step with an empty pair list");
        for (const auto& pr : step_pairs[s])
            laws[s].push_back(step_law(p, pr, denom_floor));
    }

    if (opt.mode == OracleMode::exact)
    {
        std::vector<double> returns;
        for (const auto& ls : laws)
            for (const auto& lw : ls)
            {
                returns.push_back(lw.l);
                returns.push_back(lw.u);
            }
        std::sort(returns.begin(), returns.end());
        returns.erase(std::unique(returns.begin(), returns.end()), returns.end());
        auto index_of = [&](double g) {
            return static_cast<std::uint16_t>(std::lower_bound(returns.begin(), returns.end(), g) - returns.begin());
        };
        using State = std::vector<std::uint16_t>;
        auto price_of = [&](const State& st) {
            double s = p.s0;
            for (std::size_t k = 0; k < st.size(); ++k)
                for (std::uint16_t c = 0; c < st[k]; ++c)
                    s *= returns[k];
            return s;
        };
        std::vector<std::vector<State>> levels(N + 1);
        levels[0].push_back(State(returns.size(), 0));
        for (std::size_t n = 0; n < N; ++n)
        {
            std::map<State, bool> next;
            for (const auto& st : levels[n])
                for (const auto& lw : laws[n])
                    for (double g : {lw.l, lw.u})
                    {
                        State nx = st;
                        ++nx[index_of(g)];
                        next.emplace(std::move(nx), true);
                    }
            detail::require(next.size() <= opt.max_states, "exact oracle state count exceeds the limit");
            for (auto& kv : next)
                levels[n + 1].push_back(kv.first);
        }
        std::map<State, double> value;
        for (const auto& st : levels[N])
            value[st] = evaluate_payoff(f, price_of(st));
        for (std::size_t n = N; n-- > 0;)
        {
            std::map<State, double> prev;
            for (const auto& st : levels[n])
            {
                double best = -std::numeric_limits<double>::infinity();
                for (const auto& lw : laws[n])
                {
                    State a = st;
                    ++a[index_of(lw.l)];
                    double v = lw.w_down * value.at(a);
                    if (lw.w_up > 0.0)
                    {
                        State b = st;
                        ++b[index_of(lw.u)];
                        v += lw.w_up * value.at(b);
                    }
                    best = std::max(best, v);
                }
                prev[st] = best;
            }
            value = std::move(prev);
        }
        return value.at(levels[0].front());
    }

    detail::require(opt.lattice_points >= 2, "interpolated oracle needs at least two lattice points");
    double gmin = 1.0;
    double gmax = 1.0;
    for (const auto& ls : laws)
        for (const auto& lw : ls)
        {
            gmin = std::min(gmin, lw.l);
            gmax = std::max(gmax, lw.u);
        }
    // lattice[n] spans [s0 gmin^n, s0 gmax^n] in log price.
    std::vector<std::vector<double>> lattice(N + 1);
    lattice[0] = {std::log(p.s0)};
    for (std::size_t n = 1; n <= N; ++n)
    {
        const double lo = std::log(p.s0) + static_cast<double>(n) * std::log(gmin);
        const double hi = std::log(p.s0) + static_cast<double>(n) * std::log(gmax);
        lattice[n] = hi > lo ? detail::linspace(lo, hi, opt.lattice_points) : std::vector<double>{lo};
    }
    std::vector<std::vector<double>> V(N + 1);
    auto interp = [&](std::size_t n, double s) {
        if (n == N)
            return evaluate_payoff(f, s);
        const auto& xs = lattice[n];
        const double x = std::log(s);
        const double slack = 1e-12 * std::max(1.0, std::abs(x));
        if (x < xs.front() - slack || x > xs.back() + slack)
            throw ValidationError("price " + std::to_string(s) + " outside the lattice at step " + std::to_string(n));
        if (xs.size() == 1 || x <= xs.front())
            return V[n].front();
        if (x >= xs.back())
            return V[n].back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        return V[n][lo] + t * (V[n][hi] - V[n][lo]);
    };
    for (std::size_t n = N; n-- > 0;)
    {
        V[n].resize(lattice[n].size());
        for (std::size_t j = 0; j < lattice[n].size(); ++j)
        {
            const double s = n == 0 ? p.s0 : std::exp(lattice[n][j]);
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& lw : laws[n])
            {
                double v = lw.w_down * interp(n + 1, s * lw.l);
                if (lw.w_up > 0.0)
                    v += lw.w_up * interp(n + 1, s * lw.u);
                best = std::max(best, v);
            }
            V[n][j] = best;
        }
    }
    return V[0].front();
}

/// Oracle on the same initial grid as price_sup uses before refinement.
inline double backward_induction_oracle(const GbmParams& p, const PayoffSpec& f, const GridSpec& grid,
                                        const OracleOptions& opt = {})
{
    const auto base = detail::initial_pairs(p, grid);
    return backward_induction_oracle(p, f, std::vector<std::vector<StepPair>>(p.n_steps, base), opt,
                                     grid.denom_floor);
}

struct HedgeNode
{
    std::size_t time = 0;
    std::size_t block = 0;
    double price = 0.0;
    double value = 0.0;
    /// Coefficient and holding in units of m = S/s0 for the step out of this node.
    double alpha = 0.0;
    double holding = 0.0;
    /// Shares of the discounted asset: holding / s0.
    double delta = 0.0;
};

struct HedgeResult
{
    std::vector<HedgeNode> nodes;
    double initial_value = 0.0;
    /// min over terminal atoms of M_N - f(S_N).
    double worst_terminal_gap = 0.0;
    Filtration filtration;
    AdaptedProcess value;
    Decomposition decomposition;
    std::vector<double> terminal_prices;
};

/// Hedge of the maximizing scenario tree: the finite market of the argmax
/// (two atoms per moving step, one per degenerate step) with its product
/// martingale measure, the value process E{f(S_N)|F_n} and its decomposition.
inline HedgeResult hedge_from_price(const GbmParams& p, const PayoffSpec& f, const PricingResult& result,
                                    double denom_floor = 1e-9)
{
    p.validate();
    f.validate();
    const auto& c = result.argmax;
    detail::check_candidate(p, c);
    const std::size_t N = p.n_steps;

    std::vector<StepLaw> laws(N);
    std::vector<std::size_t> sizes(N);
    for (std::size_t s = 0; s < N; ++s)
    {
        laws[s] = step_law(p, c.step(s), denom_floor);
        sizes[s] = (c.degenerate[s] || laws[s].w_up <= 0.0) ? 1 : 2;
    }
    Filtration filt = Filtration::product(sizes);
    const std::size_t atoms = filt.atom_count();

    std::vector<double> q(atoms, 1.0);
    std::vector<double> s_n(atoms, p.s0);
    for (std::size_t atom = 0; atom < atoms; ++atom)
    {
        std::size_t rem = atom;
        std::vector<std::size_t> coord(N);
        for (std::size_t s = N; s-- > 0;)
        {
            coord[s] = rem % sizes[s];
            rem /= sizes[s];
        }
        for (std::size_t s = 0; s < N; ++s)
        {
            if (sizes[s] == 1)
                continue;
            q[atom] *= coord[s] == 0 ? laws[s].w_down : laws[s].w_up;
            s_n[atom] *= coord[s] == 0 ? laws[s].l : laws[s].u;
        }
    }
    std::vector<double> target(atoms);
    std::vector<double> pay(atoms);
    for (std::size_t atom = 0; atom < atoms; ++atom)
    {
        target[atom] = s_n[atom] / p.s0;
        pay[atom] = evaluate_payoff(f, s_n[atom]);
        detail::require(pay[atom] >= 0.0, "hedging needs a nonnegative payoff");
    }
    Measure qm(q, 1e-10);
    MeasureSet set(qm, RandomVariable(target), {qm});
    const RandomVariable payoff(pay);
    AdaptedProcess value = esssup_process(payoff, set, filt);
    Decomposition dec = optional_decomposition(value, set, filt);

    HedgeResult out{{}, value.value(0, 0), std::numeric_limits<double>::infinity(), filt, value, dec, s_n};
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
        {
            const std::size_t atom = filt.partition(n)[b].front();
            double s = p.s0;
            // price at the node: product of the first n moves of any atom in the block
            {
                std::size_t rem = atom;
                std::vector<std::size_t> coord(N);
                for (std::size_t k = N; k-- > 0;)
                {
                    coord[k] = rem % sizes[k];
                    rem /= sizes[k];
                }
                for (std::size_t k = 0; k < n; ++k)
                    if (sizes[k] == 2)
                        s *= coord[k] == 0 ? laws[k].l : laws[k].u;
            }
            const double hold = dec.holding[n][b];
            out.nodes.push_back({n, b, s, value.value(n, b), dec.certificate.alpha[n][b], hold, hold / p.s0});
        }
    for (std::size_t atom = 0; atom < atoms; ++atom)
    {
        const std::size_t b = filt.block_of(N, atom);
        out.worst_terminal_gap = std::min(out.worst_terminal_gap, dec.martingale_part.value(N, b) - pay[atom]);
    }
    return out;
}

} // namespace superhedge

#endif // SUPERHEDGE_PRICER_HPP
