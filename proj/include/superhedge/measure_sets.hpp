#ifndef SUPERHEDGE_MEASURE_SETS_HPP
#define SUPERHEDGE_MEASURE_SETS_HPP

// Families of martingale-type measures: two-point extremes, zero- and
// unit-expectation measures built from pair mixing densities, consistency
// measures R_s^k, and finite product regular sets.

#include "superhedge/errors.hpp"
#include "superhedge/finite_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace superhedge
{

struct TwoPointMeasureSpec
{
    std::size_t neg_atom = 0;
    std::size_t pos_atom = 0;
    double xi_minus = 0.0;
    double xi_plus = 0.0;
};

/// Mass xi+/(xi- + xi+) on the negative atom and xi-/(xi- + xi+) on the positive one.
inline Measure two_point_measure(const TwoPointMeasureSpec& spec, std::size_t atom_count)
{
    detail::require(spec.neg_atom < atom_count && spec.pos_atom < atom_count, "two-point atoms out of range");
    detail::require(spec.neg_atom != spec.pos_atom, "two-point atoms must be distinct");
    detail::require(spec.xi_minus >= 0.0 && std::isfinite(spec.xi_minus), "xi_minus must be finite and nonnegative");
    detail::require(spec.xi_plus > 0.0 && std::isfinite(spec.xi_plus), "xi_plus must be finite and positive");
    const double total = spec.xi_minus + spec.xi_plus;
    std::vector<double> w(atom_count, 0.0);
    w[spec.neg_atom] = spec.xi_plus / total;
    w[spec.pos_atom] = spec.xi_minus / total;
    return Measure(std::move(w));
}

/// Two-point spec for the pair (neg, pos) of a signed random variable.
inline TwoPointMeasureSpec pair_spec(const RandomVariable& xi, std::size_t neg_atom, std::size_t pos_atom)
{
    detail::require(neg_atom < xi.size() && pos_atom < xi.size(), "pair atoms out of range");
    detail::require(xi[neg_atom] <= 0.0, "negative atom carries a positive value");
    detail::require(xi[pos_atom] > 0.0, "positive atom carries a nonpositive value");
    return {neg_atom, pos_atom, -xi[neg_atom], xi[pos_atom]};
}

/// Atoms with xi <= 0 and atoms with xi > 0, each in increasing order.
struct SignSplit
{
    std::vector<std::size_t> neg;
    std::vector<std::size_t> pos;
};

inline SignSplit split_signs(const RandomVariable& xi)
{
    SignSplit s;
    for (std::size_t i = 0; i < xi.size(); ++i)
        (xi[i] <= 0.0 ? s.neg : s.pos).push_back(i);
    return s;
}

/// Dense mixing density over (negative atom, positive atom) index pairs.
class PairDensity
{
public:
    PairDensity() = default;
    PairDensity(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value)
    {
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail
{
/// Sum of alpha(i,j) p(neg_i) p(pos_j) with p given as raw weights.
inline double pair_normalization(std::span<const double> p, const SignSplit& s, const PairDensity& alpha)
{
    double total = 0.0;
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
            total += alpha(i, j) * p[s.neg[i]] * p[s.pos[j]];
    return total;
}

inline void check_pair_inputs(std::span<const double> p, const RandomVariable& xi, const SignSplit& s,
                              const PairDensity& alpha)
{
    require(p.size() == xi.size(), "dimension mismatch: measure vs random variable");
    double neg_mass = 0.0;
    double pos_mass = 0.0;
    for (std::size_t i : s.neg)
        neg_mass += p[i];
    for (std::size_t j : s.pos)
        pos_mass += p[j];
    require(neg_mass > 0.0 && pos_mass > 0.0, "random variable must take both signs with positive mass");
    require(alpha.rows() == s.neg.size() && alpha.cols() == s.pos.size(),
            "mixing density shape does not match the sign split");
    for (std::size_t i = 0; i < alpha.rows(); ++i)
        for (std::size_t j = 0; j < alpha.cols(); ++j)
            require(alpha(i, j) >= 0.0 && std::isfinite(alpha(i, j)), "mixing density must be finite and nonnegative");
}

/// Adds scale * Q to out, where Q is the pair-mixture measure of p, xi, alpha.
/// alpha is rescaled by its exact normalization, which must be 1 within 1e-9.
inline void accumulate_pair_mixture(std::span<const double> p, const RandomVariable& xi, const SignSplit& s,
                                    const PairDensity& alpha, double scale, std::vector<double>& out)
{
    check_pair_inputs(p, xi, s, alpha);
    const double norm = pair_normalization(p, s, alpha);
    require(std::abs(norm - 1.0) <= 1e-9,
            "mixing density is not normalized: sum alpha p p = " + std::to_string(norm));
    for (std::size_t i = 0; i < s.neg.size(); ++i)
    {
        const std::size_t w1 = s.neg[i];
        const double xm = -xi[w1];
        for (std::size_t j = 0; j < s.pos.size(); ++j)
        {
            const std::size_t w2 = s.pos[j];
            const double xp = xi[w2];
            const double mass = scale * alpha(i, j) * p[w1] * p[w2] / norm;
            out[w1] += mass * xp / (xm + xp);
            out[w2] += mass * xm / (xm + xp);
        }
    }
}
} // namespace detail

/// alpha constant over the pair product, normalized against p.
inline PairDensity uniform_pair_density(const Measure& p, const RandomVariable& xi)
{
    const SignSplit s = split_signs(xi);
    double neg_mass = 0.0;
    double pos_mass = 0.0;
    for (std::size_t i : s.neg)
        neg_mass += p[i];
    for (std::size_t j : s.pos)
        pos_mass += p[j];
    detail::require(neg_mass > 0.0 && pos_mass > 0.0, "random variable must take both signs with positive mass");
    return PairDensity(s.neg.size(), s.pos.size(), 1.0 / (neg_mass * pos_mass));
}

/// alpha = C1 on the pairs flagged in `in_set`, C2 elsewhere, normalized so
/// that sum alpha p p = 1 with the given split of total mass between the two.
inline PairDensity indicator_pair_density(const Measure& p, const RandomVariable& xi,
                                          const std::vector<std::vector<bool>>& in_set, double share_in = 0.5)
{
    const SignSplit s = split_signs(xi);
    detail::require(in_set.size() == s.neg.size(), "indicator shape does not match the sign split");
    double mass_in = 0.0;
    double mass_out = 0.0;
    for (std::size_t i = 0; i < s.neg.size(); ++i)
    {
        detail::require(in_set[i].size() == s.pos.size(), "indicator shape does not match the sign split");
        for (std::size_t j = 0; j < s.pos.size(); ++j)
            (in_set[i][j] ? mass_in : mass_out) += p[s.neg[i]] * p[s.pos[j]];
    }
    detail::require(share_in >= 0.0 && share_in <= 1.0, "indicator share must lie in [0, 1]");
    if (mass_in == 0.0)
        share_in = 0.0;
    if (mass_out == 0.0)
        share_in = 1.0;
    const double c_in = mass_in > 0.0 ? share_in / mass_in : 0.0;
    const double c_out = mass_out > 0.0 ? (1.0 - share_in) / mass_out : 0.0;
    PairDensity alpha(s.neg.size(), s.pos.size());
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
            alpha(i, j) = in_set[i][j] ? c_in : c_out;
    return alpha;
}

/// Q(w1) = p(w1) sum_j alpha p(w2) xi+/(xi- + xi+), Q(w2) = p(w2) sum_i alpha p(w1) xi-/(xi- + xi+).
inline Measure zero_expectation_measure(const Measure& p, const RandomVariable& xi, const PairDensity& alpha)
{
    const SignSplit s = split_signs(xi);
    std::vector<double> q(p.size(), 0.0);
    detail::accumulate_pair_mixture(p.weights(), xi, s, alpha, 1.0, q);
    return Measure(std::move(q));
}

/// Zero-expectation measure for eta = xi0 - 1, so that E^Q xi0 = 1.
inline Measure unit_expectation_measure(const Measure& p, const RandomVariable& xi0, const PairDensity& alpha)
{
    std::vector<double> eta(xi0.size());
    for (std::size_t i = 0; i < eta.size(); ++i)
    {
        detail::require(xi0[i] >= 0.0, "unit-expectation target must be nonnegative");
        eta[i] = xi0[i] - 1.0;
    }
    return zero_expectation_measure(p, RandomVariable(std::move(eta)), alpha);
}

/// psi, d and the canonical density alpha1 of a zero-expectation measure.
struct CanonicalRepresentation
{
    std::vector<double> psi;
    double d = 0.0;
    PairDensity alpha1;
};

namespace detail
{
inline CanonicalRepresentation canonical_from_psi(const Measure& p, const RandomVariable& xi, const SignSplit& s,
                                                  std::vector<double> psi)
{
    double d_neg = 0.0;
    double d_pos = 0.0;
    for (std::size_t i : s.neg)
        d_neg += -xi[i] * psi[i] * p[i];
    for (std::size_t j : s.pos)
        d_pos += xi[j] * psi[j] * p[j];
    require(d_neg > 0.0 && d_pos > 0.0, "measure does not charge both signs of the random variable");
    require(std::abs(d_neg - d_pos) <= 1e-9 * std::max(1.0, d_pos), "measure does not give zero expectation");
    CanonicalRepresentation c{std::move(psi), 0.5 * (d_neg + d_pos), PairDensity(s.neg.size(), s.pos.size())};
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
        {
            const std::size_t w1 = s.neg[i];
            const std::size_t w2 = s.pos[j];
            c.alpha1(i, j) = c.psi[w1] * c.psi[w2] * (-xi[w1] + xi[w2]) / c.d;
        }
    return c;
}
} // namespace detail

/// Canonical representation computed from a mixing density:
/// psi1(w1) = sum_j alpha p(w2) xi+/(xi- + xi+), psi2(w2) = sum_i alpha p(w1) xi-/(xi- + xi+),
/// d = sum xi- psi1 p, alpha1 = psi1 psi2 (xi- + xi+) / d.
inline CanonicalRepresentation canonical_representation(const Measure& p, const RandomVariable& xi,
                                                        const PairDensity& alpha)
{
    const SignSplit s = split_signs(xi);
    detail::check_pair_inputs(p.weights(), xi, s, alpha);
    std::vector<double> psi(p.size(), 0.0);
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
        {
            const std::size_t w1 = s.neg[i];
            const std::size_t w2 = s.pos[j];
            const double xm = -xi[w1];
            const double xp = xi[w2];
            psi[w1] += alpha(i, j) * p[w2] * xp / (xm + xp);
            psi[w2] += alpha(i, j) * p[w1] * xm / (xm + xp);
        }
    return detail::canonical_from_psi(p, xi, s, std::move(psi));
}

/// Canonical representation of a measure q with E^q xi = 0 (psi = dq/dp).
inline CanonicalRepresentation canonical_representation(const Measure& p, const RandomVariable& xi, const Measure& q)
{
    detail::require(p.strictly_positive(), "reference measure must be strictly positive");
    detail::require(q.size() == p.size() && xi.size() == p.size(), "dimension mismatch in canonical representation");
    std::vector<double> psi(p.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = q[i] / p[i];
    return detail::canonical_from_psi(p, xi, split_signs(xi), std::move(psi));
}

/// Measure whose conditional expectation of xi vanishes on every block of g.
/// Within each block B the pair construction is applied to P(. | B) on the
/// atoms of B split by the sign of xi; the block keeps its mass P(B).
inline Measure conditional_zero_family(const Measure& p, const RandomVariable& xi, const Partition& g,
                                       const std::vector<PairDensity>& block_alpha)
{
    detail::require(p.size() == xi.size(), "dimension mismatch: measure vs random variable");
    const Filtration check(p.size(), {Partition{[&] {
                                          Block all(p.size());
                                          for (std::size_t i = 0; i < all.size(); ++i)
                                              all[i] = i;
                                          return all;
                                      }()},
                                      g});
    const Partition& blocks = check.partition(1);
    detail::require(block_alpha.size() == blocks.size(), "one mixing density per block is required");
    std::vector<double> q(p.size(), 0.0);
    for (std::size_t b = 0; b < blocks.size(); ++b)
    {
        const double mass = p.mass(blocks[b]);
        if (mass <= 0.0)
            continue;
        std::vector<double> local(p.size(), 0.0);
        for (std::size_t atom : blocks[b])
            local[atom] = p[atom] / mass;
        SignSplit s;
        for (std::size_t atom : blocks[b])
            (xi[atom] <= 0.0 ? s.neg : s.pos).push_back(atom);
        detail::require(!s.neg.empty() && !s.pos.empty(),
                        "random variable is single-signed on block " + std::to_string(b));
        detail::accumulate_pair_mixture(local, xi, s, block_alpha[b], mass, q);
    }
    return Measure(std::move(q), 1e-10);
}

/// Per-block constant mixing densities for conditional_zero_family.
inline std::vector<PairDensity> uniform_block_densities(const Measure& p, const RandomVariable& xi, const Partition& g)
{
    std::vector<PairDensity> out;
    out.reserve(g.size());
    for (const auto& block : g)
    {
        const double mass = p.mass(block);
        double neg = 0.0;
        double pos = 0.0;
        std::size_t n_neg = 0;
        std::size_t n_pos = 0;
        for (std::size_t atom : block)
        {
            if (xi[atom] <= 0.0)
            {
                neg += p[atom];
                ++n_neg;
            }
            else
            {
                pos += p[atom];
                ++n_pos;
            }
        }
        detail::require(mass > 0.0 && neg > 0.0 && pos > 0.0, "random variable is single-signed on a block");
        out.emplace_back(n_neg, n_pos, mass * mass / (neg * pos));
    }
    return out;
}

/// R_s^k: density E^{Q1}{D|F_k} / E^{Q1}{D|F_s} with respect to q1, D = dq2/dq1.
inline Measure consistency_measure(const Measure& q1, const Measure& q2, const Filtration& f, std::size_t s,
                                   std::size_t k)
{
    detail::require(q1.strictly_positive() && q2.strictly_positive(),
                    "consistency measure requires strictly positive measures");
    detail::require(s <= k && k <= f.horizon(), "consistency measure needs s <= k <= horizon");
    const RandomVariable dens = density(q2, q1);
    const auto dk = conditional_expectation(q1, dens, f, k);
    const auto ds = conditional_expectation(q1, dens, f, s);
    std::vector<double> w(q1.size());
    for (std::size_t atom = 0; atom < w.size(); ++atom)
        w[atom] = q1[atom] * dk[f.block_of(k, atom)] / ds[f.block_of(s, atom)];
    return Measure(std::move(w), 1e-10);
}

/// Finite family of measures with designated extreme points. Every extreme
/// gives the target unit expectation and together they charge every atom.
class MeasureSet
{
public:
    MeasureSet(Measure reference, RandomVariable target, std::vector<Measure> extremes, bool mixtures_allowed = true,
               double tolerance = kDefaultTolerance)
        : reference_(std::move(reference)), target_(std::move(target)), extremes_(std::move(extremes)),
          mixtures_allowed_(mixtures_allowed)
    {
        detail::require(!extremes_.empty(), "measure set needs at least one extreme point");
        detail::require(target_.size() == reference_.size(), "dimension mismatch: target vs reference");
        const double tol = tolerance * std::max(1.0, target_.sup_abs());
        std::vector<bool> charged(reference_.size(), false);
        for (std::size_t e = 0; e < extremes_.size(); ++e)
        {
            const Measure& q = extremes_[e];
            detail::require(q.size() == reference_.size(), "dimension mismatch: extreme vs reference");
            const double ex = expectation(q, target_);
            detail::require(std::abs(ex - 1.0) <= tol, "extreme point " + std::to_string(e) +
                                                           " gives target expectation " + std::to_string(ex));
            for (std::size_t i = 0; i < q.size(); ++i)
                if (q[i] > 0.0)
                    charged[i] = true;
        }
        for (std::size_t i = 0; i < charged.size(); ++i)
            detail::require(charged[i], "atom " + std::to_string(i) + " is not charged by any extreme point");
    }

    [[nodiscard]] const Measure& reference() const noexcept { return reference_; }
    [[nodiscard]] const RandomVariable& target() const noexcept { return target_; }
    [[nodiscard]] const std::vector<Measure>& extremes() const noexcept { return extremes_; }
    [[nodiscard]] std::size_t extreme_count() const noexcept { return extremes_.size(); }
    [[nodiscard]] std::size_t atom_count() const noexcept { return reference_.size(); }
    [[nodiscard]] bool mixtures_allowed() const noexcept { return mixtures_allowed_; }

private:
    Measure reference_;
    RandomVariable target_;
    std::vector<Measure> extremes_;
    bool mixtures_allowed_;
};

inline Measure mixture_measure(const MeasureSet& set, std::span<const double> weights)
{
    detail::require(weights.size() == set.extreme_count(), "mixture weight count does not match the extreme count");
    double total = 0.0;
    for (double w : weights)
    {
        detail::require(w >= 0.0 && std::isfinite(w), "mixture weights must be finite and nonnegative");
        total += w;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to one");
    std::vector<double> q(set.atom_count(), 0.0);
    for (std::size_t e = 0; e < weights.size(); ++e)
    {
        if (weights[e] == 0.0)
            continue;
        const auto& m = set.extremes()[e];
        for (std::size_t i = 0; i < q.size(); ++i)
            q[i] += weights[e] * m[i];
    }
    return Measure(std::move(q));
}

/// Every two-point measure of xi, one per (negative, positive) atom pair in row-major order.
inline std::vector<Measure> pair_extremes(const RandomVariable& xi)
{
    const SignSplit s = split_signs(xi);
    std::vector<Measure> out;
    out.reserve(s.neg.size() * s.pos.size());
    for (std::size_t i : s.neg)
        for (std::size_t j : s.pos)
            out.push_back(two_point_measure(pair_spec(xi, i, j), xi.size()));
    return out;
}

/// Weights alpha(i,j) p(i) p(j) reading a zero-expectation measure as a
/// mixture of pair_extremes(xi).
inline std::vector<double> pair_mixture_weights(const Measure& p, const RandomVariable& xi, const PairDensity& alpha)
{
    const SignSplit s = split_signs(xi);
    detail::check_pair_inputs(p.weights(), xi, s, alpha);
    const double norm = detail::pair_normalization(p.weights(), s, alpha);
    std::vector<double> w;
    w.reserve(s.neg.size() * s.pos.size());
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
            w.push_back(alpha(i, j) * p[s.neg[i]] * p[s.pos[j]] / norm);
    return w;
}

struct ClosureWitness
{
    Measure q;
    Measure target;
    double distance;
    double bound;
    [[nodiscard]] bool within_bound() const noexcept { return distance <= bound; }
};

/// Equivalent measure Q^eps with mass 1 - eps on the chosen pair's two-point
/// measure and eps spread over the other pairs, with its distance to that
/// two-point measure and the bound 4 eps.
inline ClosureWitness closure_witness(const Measure& p, const RandomVariable& xi, std::size_t neg_atom,
                                      std::size_t pos_atom, double epsilon)
{
    detail::require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    detail::require(p.strictly_positive(), "closure witness needs a strictly positive reference measure");
    const TwoPointMeasureSpec spec = pair_spec(xi, neg_atom, pos_atom);
    const SignSplit s = split_signs(xi);
    const auto row = static_cast<std::size_t>(std::find(s.neg.begin(), s.neg.end(), neg_atom) - s.neg.begin());
    const auto col = static_cast<std::size_t>(std::find(s.pos.begin(), s.pos.end(), pos_atom) - s.pos.begin());

    double other = 0.0;
    for (std::size_t i = 0; i < s.neg.size(); ++i)
        for (std::size_t j = 0; j < s.pos.size(); ++j)
            if (i != row || j != col)
                other += p[s.neg[i]] * p[s.pos[j]];

    const double pair_mass = p[neg_atom] * p[pos_atom];
    PairDensity alpha(s.neg.size(), s.pos.size(), other > 0.0 ? epsilon / other : 0.0);
    alpha(row, col) = (other > 0.0 ? 1.0 - epsilon : 1.0) / pair_mass;

    Measure q = zero_expectation_measure(p, xi, alpha);
    Measure target = two_point_measure(spec, p.size());
    const double dist = tv_metric(q, target);
    return {std::move(q), std::move(target), dist, 4.0 * epsilon};
}

/// One factor of a product regular set.
struct ProductStep
{
    Measure reference;
    RandomVariable eta;
    /// Coefficient per block of the previous partition, each in (0, 1].
    std::vector<double> a;
    /// (negative atom, positive atom) pairs of eta; empty selects all pairs.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct ProductRegularSpec
{
    std::vector<ProductStep> steps;
    std::size_t max_extremes = 1u << 16;
};

struct ProductRegularSet
{
    Filtration filtration;
    MeasureSet set;
    /// m_n = prod_{i <= n} (1 + a_i eta_i) per block.
    AdaptedProcess martingale;
};

/// Product space of the steps with extremes prod_i nu_i over the per-step pair
/// choices and target xi0 = prod_i (1 + a_i eta_i).
inline ProductRegularSet build_product_regular_set(const ProductRegularSpec& spec)
{
    const auto& steps = spec.steps;
    detail::require(!steps.empty(), "product regular set needs at least one step");

    std::vector<std::size_t> sizes;
    std::vector<std::vector<Measure>> factor_nus;
    std::size_t prefix_blocks = 1;
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        const auto& st = steps[i];
        const std::string tag = "step " + std::to_string(i + 1) + ": ";
        detail::require(st.eta.size() == st.reference.size(), tag + "eta and reference sizes differ");
        detail::require(st.reference.strictly_positive(), tag + "reference measure must be strictly positive");
        const SignSplit s = split_signs(st.eta);
        detail::require(!s.neg.empty() && !s.pos.empty(), tag + "eta must take both signs");
        detail::require(st.a.size() == prefix_blocks, tag + "expected " + std::to_string(prefix_blocks) +
                                                          " coefficients, got " + std::to_string(st.a.size()));
        for (double a : st.a)
        {
            detail::require(a > 0.0 && a <= 1.0, tag + "coefficients must lie in (0, 1]");
            for (double e : st.eta)
                detail::require(1.0 + a * e >= 0.0, tag + "1 + a eta must be nonnegative");
        }
        std::vector<std::pair<std::size_t, std::size_t>> pairs = st.pairs;
        if (pairs.empty())
            for (std::size_t n : s.neg)
                for (std::size_t p : s.pos)
                    pairs.emplace_back(n, p);
        std::vector<Measure> nus;
        for (auto [n, p] : pairs)
            nus.push_back(two_point_measure(pair_spec(st.eta, n, p), st.eta.size()));
        sizes.push_back(st.eta.size());
        factor_nus.push_back(std::move(nus));
        prefix_blocks *= st.eta.size();
    }

    std::size_t extreme_count = 1;
    for (const auto& nus : factor_nus)
    {
        extreme_count *= nus.size();
        detail::require(extreme_count <= spec.max_extremes, "product regular set exceeds the extreme-point cap");
    }

    Filtration filt = Filtration::product(sizes);
    const std::size_t atoms = filt.atom_count();
    const std::size_t horizon = steps.size();

    // coords[atom][i] is the factor atom of step i.
    std::vector<std::vector<std::size_t>> coords(atoms, std::vector<std::size_t>(horizon));
    for (std::size_t atom = 0; atom < atoms; ++atom)
    {
        std::size_t rem = atom;
        for (std::size_t i = horizon; i-- > 0;)
        {
            coords[atom][i] = rem % sizes[i];
            rem /= sizes[i];
        }
    }

    std::vector<double> ref(atoms, 1.0);
    std::vector<double> xi0(atoms, 1.0);
    for (std::size_t atom = 0; atom < atoms; ++atom)
        for (std::size_t i = 0; i < horizon; ++i)
        {
            const std::size_t c = coords[atom][i];
            ref[atom] *= steps[i].reference[c];
            const std::size_t prev_block = i == 0 ? 0 : filt.block_of(i, atom);
            xi0[atom] *= 1.0 + steps[i].a[prev_block] * steps[i].eta[c];
        }

    std::vector<std::vector<double>> m(horizon + 1);
    m[0] = {1.0};
    for (std::size_t n = 1; n <= horizon; ++n)
    {
        m[n].resize(filt.block_count(n));
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
        {
            const std::size_t atom = filt.partition(n)[b].front();
            const std::size_t parent = filt.parent(n, b);
            const std::size_t prev_block = n == 1 ? 0 : filt.block_of(n - 1, atom);
            m[n][b] = m[n - 1][parent] * (1.0 + steps[n - 1].a[prev_block] * steps[n - 1].eta[coords[atom][n - 1]]);
        }
    }

    std::vector<Measure> extremes;
    extremes.reserve(extreme_count);
    std::vector<std::size_t> choice(horizon, 0);
    for (std::size_t e = 0; e < extreme_count; ++e)
    {
        std::vector<double> w(atoms, 1.0);
        for (std::size_t atom = 0; atom < atoms; ++atom)
            for (std::size_t i = 0; i < horizon && w[atom] != 0.0; ++i)
                w[atom] *= factor_nus[i][choice[i]][coords[atom][i]];
        extremes.emplace_back(std::move(w), 1e-10);
        for (std::size_t i = horizon; i-- > 0;)
        {
            if (++choice[i] < factor_nus[i].size())
                break;
            choice[i] = 0;
        }
    }

    MeasureSet set(Measure(std::move(ref), 1e-10), RandomVariable(std::move(xi0)), std::move(extremes));
    AdaptedProcess mart(filt, std::move(m));
    return {std::move(filt), std::move(set), std::move(mart)};
}

} // namespace superhedge

#endif // SUPERHEDGE_MEASURE_SETS_HPP
