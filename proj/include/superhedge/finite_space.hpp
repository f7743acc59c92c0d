#ifndef SUPERHEDGE_FINITE_SPACE_HPP
#define SUPERHEDGE_FINITE_SPACE_HPP

// Finite filtered probability spaces: atoms, refining partitions, measures,
// adapted processes and blockwise conditional expectation.

#include "superhedge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace superhedge
{

/// Absolute tolerance used for exact identities unless a call overrides it.
inline constexpr double kDefaultTolerance = 1e-12;

/// Weights at or below this value do not count as strictly positive.
inline constexpr double kPositivityFloor = 1e-15;

using Block = std::vector<std::size_t>;
using Partition = std::vector<Block>;

class AtomSpace
{
public:
    explicit AtomSpace(std::size_t atom_count) : labels_(atom_count)
    {
        detail::require(atom_count >= 1, "atom space needs at least one atom");
        for (std::size_t i = 0; i < atom_count; ++i)
            labels_[i] = "w" + std::to_string(i);
    }

    explicit AtomSpace(std::vector<std::string> labels) : labels_(std::move(labels))
    {
        detail::require(!labels_.empty(), "atom space needs at least one atom");
        std::unordered_set<std::string> seen(labels_.begin(), labels_.end());
        detail::require(seen.size() == labels_.size(), "atom labels must be unique");
    }

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<std::string> labels_;
};

/// A scalar per atom.
class RandomVariable
{
public:
    RandomVariable() = default;
    explicit RandomVariable(std::vector<double> values) : values_(std::move(values)) {}
    RandomVariable(std::initializer_list<double> values) : values_(values) {}
    RandomVariable(std::size_t size, double value) : values_(size, value) {}

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] auto begin() const noexcept { return values_.begin(); }
    [[nodiscard]] auto end() const noexcept { return values_.end(); }

    [[nodiscard]] double min() const { return *std::min_element(values_.begin(), values_.end()); }
    [[nodiscard]] double max() const { return *std::max_element(values_.begin(), values_.end()); }
    [[nodiscard]] double sup_abs() const
    {
        double s = 0.0;
        for (double v : values_)
            s = std::max(s, std::abs(v));
        return s;
    }

private:
    std::vector<double> values_;
};

/// Probability vector over atoms. Weights are nonnegative and sum to one.
class Measure
{
public:
    explicit Measure(std::vector<double> weights, double tolerance = kDefaultTolerance)
        : weights_(std::move(weights))
    {
        detail::require(!weights_.empty(), "measure over an empty atom set");
        double total = 0.0;
        for (double w : weights_)
        {
            detail::require(std::isfinite(w) && w >= 0.0, "measure weights must be finite and nonnegative");
            total += w;
        }
        detail::require(std::abs(total - 1.0) <= tolerance,
                        "measure weights sum to " + std::to_string(total) + ", expected 1");
        strictly_positive_ = std::all_of(weights_.begin(), weights_.end(),
                                         [](double w) { return w > kPositivityFloor; });
    }

    /// Rescales nonnegative masses to total one.
    static Measure normalized(std::vector<double> masses)
    {
        const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
        detail::require(total > 0.0 && std::isfinite(total), "cannot normalize zero or non-finite mass");
        for (double& w : masses)
            w /= total;
        return Measure(std::move(masses), 1e-9);
    }

    static Measure uniform(std::size_t n) { return Measure(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

    static Measure point_mass(std::size_t n, std::size_t atom)
    {
        detail::require(atom < n, "point mass atom out of range");
        std::vector<double> w(n, 0.0);
        w[atom] = 1.0;
        return Measure(std::move(w));
    }

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return weights_[i]; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] bool strictly_positive() const noexcept { return strictly_positive_; }

    [[nodiscard]] double mass(const Block& block) const
    {
        double m = 0.0;
        for (std::size_t i : block)
            m += weights_[i];
        return m;
    }

private:
    std::vector<double> weights_;
    bool strictly_positive_ = false;
};

/// Refining sequence of partitions of the atom indices, times 0..horizon().
class Filtration
{
public:
    Filtration(std::size_t atom_count, std::vector<Partition> partitions)
        : atom_count_(atom_count), partitions_(std::move(partitions))
    {
        detail::require(atom_count_ >= 1, "filtration over an empty atom set");
        detail::require(!partitions_.empty(), "filtration needs at least the trivial partition");
        detail::require(partitions_.front().size() == 1, "partition 0 must be the single block of all atoms");

        block_of_.assign(partitions_.size(), std::vector<std::size_t>(atom_count_, kUnassigned));
        for (std::size_t n = 0; n < partitions_.size(); ++n)
        {
            auto& part = partitions_[n];
            for (std::size_t b = 0; b < part.size(); ++b)
            {
                auto& block = part[b];
                detail::require(!block.empty(), "partition " + std::to_string(n) + " has an empty block");
                std::sort(block.begin(), block.end());
                for (std::size_t atom : block)
                {
                    detail::require(atom < atom_count_, "partition " + std::to_string(n) + " references atom out of range");
                    detail::require(block_of_[n][atom] == kUnassigned,
                                    "partition " + std::to_string(n) + " blocks overlap at atom " + std::to_string(atom));
                    block_of_[n][atom] = b;
                }
            }
            for (std::size_t atom = 0; atom < atom_count_; ++atom)
                detail::require(block_of_[n][atom] != kUnassigned,
                                "partition " + std::to_string(n) + " does not cover atom " + std::to_string(atom));
        }

        parent_.resize(partitions_.size());
        children_.resize(partitions_.size());
        for (std::size_t n = 0; n < partitions_.size(); ++n)
            children_[n].resize(partitions_[n].size());
        for (std::size_t n = 1; n < partitions_.size(); ++n)
        {
            parent_[n].resize(partitions_[n].size());
            for (std::size_t b = 0; b < partitions_[n].size(); ++b)
            {
                const auto& block = partitions_[n][b];
                const std::size_t p = block_of_[n - 1][block.front()];
                for (std::size_t atom : block)
                    detail::require(block_of_[n - 1][atom] == p,
                                    "partition " + std::to_string(n) + " does not refine partition " + std::to_string(n - 1));
                parent_[n][b] = p;
                children_[n - 1][p].push_back(b);
            }
        }
    }

    /// Filtration of a product space with the given factor sizes. Atoms are
    /// indexed lexicographically (first factor most significant); the block
    /// at time n groups atoms sharing their first n coordinates.
    static Filtration product(std::span<const std::size_t> factor_sizes)
    {
        std::size_t atoms = 1;
        for (std::size_t k : factor_sizes)
        {
            detail::require(k >= 1, "product factor with no atoms");
            atoms *= k;
        }
        std::vector<Partition> parts;
        std::size_t block_size = atoms;
        parts.push_back(Partition{make_range(0, atoms)});
        for (std::size_t k : factor_sizes)
        {
            block_size /= k;
            Partition part;
            for (std::size_t start = 0; start < atoms; start += block_size)
                part.push_back(make_range(start, start + block_size));
            parts.push_back(std::move(part));
        }
        return Filtration(atoms, std::move(parts));
    }

    [[nodiscard]] std::size_t atom_count() const noexcept { return atom_count_; }
    [[nodiscard]] std::size_t horizon() const noexcept { return partitions_.size() - 1; }
    [[nodiscard]] const Partition& partition(std::size_t n) const { return partitions_.at(n); }
    [[nodiscard]] const std::vector<Partition>& partitions() const noexcept { return partitions_; }
    [[nodiscard]] std::size_t block_count(std::size_t n) const { return partitions_.at(n).size(); }
    [[nodiscard]] std::size_t block_of(std::size_t n, std::size_t atom) const { return block_of_.at(n).at(atom); }

    /// Blocks of time n+1 contained in block b of time n.
    [[nodiscard]] const std::vector<std::size_t>& children(std::size_t n, std::size_t b) const
    {
        return children_.at(n).at(b);
    }

    /// Block of time n-1 containing block b of time n (n >= 1).
    [[nodiscard]] std::size_t parent(std::size_t n, std::size_t b) const { return parent_.at(n).at(b); }

    [[nodiscard]] bool separates_atoms() const { return partitions_.back().size() == atom_count_; }

private:
    static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

    static Block make_range(std::size_t begin, std::size_t end)
    {
        Block b(end - begin);
        std::iota(b.begin(), b.end(), begin);
        return b;
    }

    std::size_t atom_count_;
    std::vector<Partition> partitions_;
    std::vector<std::vector<std::size_t>> block_of_;
    std::vector<std::vector<std::size_t>> parent_;
    std::vector<std::vector<std::vector<std::size_t>>> children_;
};

/// Time-indexed process with one value per block of the partition at each time.
class AdaptedProcess
{
public:
    AdaptedProcess() = default;

    AdaptedProcess(const Filtration& filtration, std::vector<std::vector<double>> values)
        : values_(std::move(values))
    {
        detail::require(values_.size() == filtration.horizon() + 1,
                        "process length does not match the filtration horizon");
        for (std::size_t n = 0; n < values_.size(); ++n)
            detail::require(values_[n].size() == filtration.block_count(n),
                            "process value count at time " + std::to_string(n) + " does not match the block count");
    }

    /// Zero process shaped like the filtration.
    static AdaptedProcess zeros(const Filtration& filtration)
    {
        std::vector<std::vector<double>> v(filtration.horizon() + 1);
        for (std::size_t n = 0; n < v.size(); ++n)
            v[n].assign(filtration.block_count(n), 0.0);
        return AdaptedProcess(filtration, std::move(v));
    }

    [[nodiscard]] std::size_t horizon() const noexcept { return values_.size() - 1; }
    [[nodiscard]] std::span<const double> at(std::size_t n) const { return values_.at(n); }
    [[nodiscard]] double value(std::size_t n, std::size_t block) const { return values_.at(n).at(block); }
    double& value(std::size_t n, std::size_t block) { return values_.at(n).at(block); }
    [[nodiscard]] const std::vector<std::vector<double>>& values() const noexcept { return values_; }

    /// Values at time n spread onto atoms.
    [[nodiscard]] RandomVariable atomwise(const Filtration& filtration, std::size_t n) const
    {
        std::vector<double> x(filtration.atom_count());
        for (std::size_t atom = 0; atom < x.size(); ++atom)
            x[atom] = values_.at(n)[filtration.block_of(n, atom)];
        return RandomVariable(std::move(x));
    }

    [[nodiscard]] double min() const
    {
        double m = values_.front().front();
        for (const auto& row : values_)
            for (double v : row)
                m = std::min(m, v);
        return m;
    }

private:
    std::vector<std::vector<double>> values_;
};

namespace detail
{
inline void require_same_size(std::size_t a, std::size_t b, const char* what)
{
    require(a == b, std::string("dimension mismatch: ") + what);
}

inline void check_time(const Filtration& f, std::size_t n)
{
    require(n <= f.horizon(), "time index " + std::to_string(n) + " beyond filtration horizon");
}
} // namespace detail

/// Reads the values of an F_n-measurable random variable per block of time n.
inline std::vector<double> block_values(const RandomVariable& x, const Filtration& f, std::size_t n,
                                        double tolerance = kDefaultTolerance)
{
    detail::check_time(f, n);
    detail::require_same_size(x.size(), f.atom_count(), "random variable vs filtration");
    const auto& part = f.partition(n);
    std::vector<double> out(part.size());
    for (std::size_t b = 0; b < part.size(); ++b)
    {
        out[b] = x[part[b].front()];
        for (std::size_t atom : part[b])
            detail::require(std::abs(x[atom] - out[b]) <= tolerance,
                            "random variable is not measurable with respect to partition " + std::to_string(n));
    }
    return out;
}

inline double expectation(const Measure& m, const RandomVariable& x)
{
    detail::require_same_size(m.size(), x.size(), "measure vs random variable");
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        e += m[i] * x[i];
    return e;
}

/// E^m{x | F_n} per block of partition n; blocks with zero mass give nullopt.
inline std::vector<std::optional<double>> conditional_expectation_on_support(const Measure& m, const RandomVariable& x,
                                                                             const Filtration& f, std::size_t n)
{
    detail::check_time(f, n);
    detail::require_same_size(m.size(), f.atom_count(), "measure vs filtration");
    detail::require_same_size(x.size(), f.atom_count(), "random variable vs filtration");
    const auto& part = f.partition(n);
    std::vector<std::optional<double>> out(part.size());
    for (std::size_t b = 0; b < part.size(); ++b)
    {
        double mass = 0.0;
        double weighted = 0.0;
        for (std::size_t atom : part[b])
        {
            mass += m[atom];
            weighted += m[atom] * x[atom];
        }
        if (mass > 0.0)
            out[b] = weighted / mass;
    }
    return out;
}

/// E^m{x | F_n} per block of partition n. Throws on a block of zero mass.
inline std::vector<double> conditional_expectation(const Measure& m, const RandomVariable& x, const Filtration& f,
                                                   std::size_t n)
{
    auto partial = conditional_expectation_on_support(m, x, f, n);
    std::vector<double> out(partial.size());
    for (std::size_t b = 0; b < partial.size(); ++b)
    {
        detail::require(partial[b].has_value(),
                        "block " + std::to_string(b) + " of partition " + std::to_string(n) + " has zero mass");
        out[b] = *partial[b];
    }
    return out;
}

/// Radon-Nikodym derivative dP1/dP2 atomwise; P2 must be strictly positive.
inline RandomVariable density(const Measure& p1, const Measure& p2)
{
    detail::require_same_size(p1.size(), p2.size(), "density of measures");
    detail::require(p2.strictly_positive(), "density with respect to a measure that is not strictly positive");
    std::vector<double> d(p1.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = p1[i] / p2[i];
    return RandomVariable(std::move(d));
}

/// E^{P1}{x | F_n} evaluated under P2 with the normalized density
/// phi_n = (dP1/dP2) / E^{P2}{dP1/dP2 | F_n}.
inline std::vector<double> change_of_measure_cond_exp(const Measure& p1, const Measure& p2, const RandomVariable& x,
                                                      const Filtration& f, std::size_t n)
{
    detail::require(p1.strictly_positive() && p2.strictly_positive(),
                    "change of measure requires strictly positive measures");
    const RandomVariable dens = density(p1, p2);
    const auto dens_cond = conditional_expectation(p2, dens, f, n);
    std::vector<double> weighted(x.size());
    for (std::size_t atom = 0; atom < x.size(); ++atom)
    {
        const double c = dens_cond[f.block_of(n, atom)];
        detail::require(c > 0.0, "zero conditional density mass: measures are not equivalent");
        weighted[atom] = x[atom] * dens[atom] / c;
    }
    return conditional_expectation(p2, RandomVariable(std::move(weighted)), f, n);
}

/// rho(Q1, Q2) = sum_i |Q1(w_i) - Q2(w_i)|.
inline double tv_metric(const Measure& q1, const Measure& q2)
{
    detail::require_same_size(q1.size(), q2.size(), "tv_metric");
    double s = 0.0;
    for (std::size_t i = 0; i < q1.size(); ++i)
        s += std::abs(q1[i] - q2[i]);
    return s;
}

} // namespace superhedge

#endif // SUPERHEDGE_FINITE_SPACE_HPP
