#ifndef SUPERHEDGE_CLI_HPP
#define SUPERHEDGE_CLI_HPP

// Batch front end: JSON run configuration, command dispatch and CSV/JSON output.

#include "superhedge/errors.hpp"
#include "superhedge/finite_space.hpp"
#include "superhedge/gbm_market.hpp"
#include "superhedge/measure_sets.hpp"
#include "superhedge/pricer.hpp"
#include "superhedge/supermartingale.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace superhedge::cli
{

using json = nlohmann::json;

enum ExitCode : int
{
    ok = 0,
    internal_error = 1,
    parse_error = 2,
    validation_error = 3,
    invariant_violation = 4,
    numeric_overflow = 5
};

/// Finite market: filtration, measure set and either a process or a payoff.
struct FiniteMarket
{
    Filtration filtration;
    MeasureSet set;
    std::optional<AdaptedProcess> process;
    std::optional<RandomVariable> payoff;
};

struct SweepSpec
{
    std::string parameter;
    std::vector<double> values;
};

struct RunConfig
{
    std::string command;
    std::optional<GbmParams> market;
    std::optional<std::filesystem::path> market_file;
    std::optional<json> finite_market;
    PayoffSpec payoff = PayoffSpec::call(1.0);
    bool payoff_given = false;
    GridSpec grid;
    std::uint64_t seed = 0;
    std::filesystem::path output_path = "out";
    std::optional<SweepSpec> sweep;
    std::vector<double> bound_sweep{2.0, 4.0, 6.0, 8.0, 10.0};
    bool oracle = false;
    std::size_t samples = 0;
};

struct RunOptions
{
    std::optional<std::filesystem::path> out_dir;
    std::size_t threads = 1;
    bool quiet = false;
};

namespace detail
{
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw ParseError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ParseError("unknown key '" + key + "' in " + where);
}

inline double number(const json& j, const std::string& what)
{
    if (!j.is_number())
        throw ParseError(what + " must be a number");
    return j.get<double>();
}

inline std::size_t count(const json& j, const std::string& what)
{
    if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
        throw ParseError(what + " must be an integer");
    const double v = j.get<double>();
    if (v < 0)
        throw ParseError(what + " must be nonnegative");
    return static_cast<std::size_t>(v);
}

inline std::vector<double> numbers(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw ParseError(what + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j)
        out.push_back(number(v, what));
    return out;
}

inline std::vector<std::size_t> indices(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw ParseError(what + " must be an array of integers");
    std::vector<std::size_t> out;
    for (const auto& v : j)
        out.push_back(count(v, what));
    return out;
}

inline bool boolean(const json& j, const std::string& what)
{
    if (!j.is_boolean())
        throw ParseError(what + " must be a boolean");
    return j.get<bool>();
}

inline std::string text(const json& j, const std::string& what)
{
    if (!j.is_string())
        throw ParseError(what + " must be a string");
    return j.get<std::string>();
}

inline GbmParams parse_market(const json& j)
{
    check_keys(j, {"s0", "r", "sigma", "mu", "dt", "n_steps"}, "market");
    GbmParams p;
    if (j.contains("s0")) p.s0 = number(j["s0"], "market.s0");
    if (j.contains("r")) p.r = number(j["r"], "market.r");
    if (j.contains("sigma")) p.sigma = number(j["sigma"], "market.sigma");
    if (j.contains("mu") && !j["mu"].is_null()) p.mu = number(j["mu"], "market.mu");
    if (j.contains("dt")) p.dt = number(j["dt"], "market.dt");
    if (j.contains("n_steps")) p.n_steps = count(j["n_steps"], "market.n_steps");
    p.validate();
    return p;
}

inline PayoffSpec parse_payoff(const json& j)
{
    check_keys(j, {"kind", "strike", "breakpoints", "values", "value"}, "payoff");
    const std::string kind = text(j.value("kind", json("call")), "payoff.kind");
    PayoffSpec f;
    if (kind == "call" || kind == "put" || kind == "digital")
    {
        if (!j.contains("strike"))
            throw ParseError("payoff." + kind + " needs a strike");
        const double k = number(j["strike"], "payoff.strike");
        f = kind == "call" ? PayoffSpec::call(k) : kind == "put" ? PayoffSpec::put(k) : PayoffSpec::digital(k);
    }
    else if (kind == "table")
        f = PayoffSpec::table(numbers(j.value("breakpoints", json::array()), "payoff.breakpoints"),
                              numbers(j.value("values", json::array()), "payoff.values"));
    else if (kind == "constant")
    {
        if (!j.contains("value"))
            throw ParseError("payoff.constant needs a value");
        f = PayoffSpec::constant(number(j["value"], "payoff.value"));
    }
    else
        throw ParseError("unknown payoff kind '" + kind + "'");
    f.validate();
    return f;
}

inline GridSpec parse_grid(const json& j)
{
    check_keys(j,
               {"points_per_side", "bound", "delta", "refine_rounds", "denom_floor", "joint_enum_cap",
                "exhaustive_limit", "max_sweeps", "y_down", "y_up", "include_degenerate"},
               "grid");
    GridSpec g;
    if (j.contains("points_per_side")) g.points_per_side = count(j["points_per_side"], "grid.points_per_side");
    if (j.contains("bound")) g.bound = number(j["bound"], "grid.bound");
    if (j.contains("delta")) g.delta = number(j["delta"], "grid.delta");
    if (j.contains("refine_rounds")) g.refine_rounds = count(j["refine_rounds"], "grid.refine_rounds");
    if (j.contains("denom_floor")) g.denom_floor = number(j["denom_floor"], "grid.denom_floor");
    if (j.contains("joint_enum_cap")) g.joint_enum_cap = count(j["joint_enum_cap"], "grid.joint_enum_cap");
    if (j.contains("exhaustive_limit")) g.exhaustive_limit = count(j["exhaustive_limit"], "grid.exhaustive_limit");
    if (j.contains("max_sweeps")) g.max_sweeps = count(j["max_sweeps"], "grid.max_sweeps");
    if (j.contains("y_down")) g.y_down = numbers(j["y_down"], "grid.y_down");
    if (j.contains("y_up")) g.y_up = numbers(j["y_up"], "grid.y_up");
    if (j.contains("include_degenerate")) g.include_degenerate = boolean(j["include_degenerate"], "grid.include_degenerate");
    superhedge::detail::require(g.points_per_side >= 1, "grid.points_per_side must be at least 1");
    superhedge::detail::require(g.denom_floor > 0.0, "grid.denom_floor must be positive");
    return g;
}

inline std::vector<std::vector<double>> matrix(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw ParseError(what + " must be an array of arrays");
    std::vector<std::vector<double>> out;
    for (const auto& row : j)
        out.push_back(numbers(row, what));
    return out;
}

inline Measure measure_of(const json& j, const std::string& what) { return Measure(numbers(j, what), 1e-10); }
} // namespace detail

/// Reads a finite market description.
inline FiniteMarket parse_finite_market(const json& j)
{
    using namespace detail;
    check_keys(j, {"atoms", "partitions", "reference", "target", "extremes", "process", "payoff", "product"},
               "finite market");
    std::optional<Filtration> filt;
    std::optional<MeasureSet> set;
    if (j.contains("product"))
    {
        for (const char* k : {"atoms", "partitions", "reference", "target", "extremes"})
            if (j.contains(k))
                throw ParseError(std::string("finite market mixes 'product' with '") + k + "'");
        const json& pj = j["product"];
        check_keys(pj, {"steps", "max_extremes"}, "product");
        ProductRegularSpec spec;
        if (pj.contains("max_extremes")) spec.max_extremes = count(pj["max_extremes"], "product.max_extremes");
        if (!pj.contains("steps") || !pj["steps"].is_array())
            throw ParseError("product.steps must be an array");
        std::size_t prefix = 1;
        for (const auto& sj : pj["steps"])
        {
            check_keys(sj, {"reference", "eta", "a", "pairs"}, "product step");
            if (!sj.contains("reference") || !sj.contains("eta"))
                throw ParseError("product step needs reference and eta");
            ProductStep st{measure_of(sj["reference"], "step.reference"), RandomVariable(numbers(sj["eta"], "step.eta")),
                           {}, {}};
            if (!sj.contains("a"))
                st.a.assign(prefix, 1.0);
            else if (sj["a"].is_number())
                st.a.assign(prefix, number(sj["a"], "step.a"));
            else
                st.a = numbers(sj["a"], "step.a");
            if (sj.contains("pairs"))
            {
                if (!sj["pairs"].is_array())
                    throw ParseError("step.pairs must be an array of [neg, pos]");
                for (const auto& pr : sj["pairs"])
                {
                    const auto ij = indices(pr, "step.pairs");
                    if (ij.size() != 2)
                        throw ParseError("step.pairs entries must have two indices");
                    st.pairs.emplace_back(ij[0], ij[1]);
                }
            }
            prefix *= st.eta.size();
            spec.steps.push_back(std::move(st));
        }
        auto built = build_product_regular_set(spec);
        filt.emplace(std::move(built.filtration));
        set.emplace(std::move(built.set));
    }
    else
    {
        for (const char* k : {"atoms", "partitions", "reference", "target", "extremes"})
            if (!j.contains(k))
                throw ParseError(std::string("finite market needs '") + k + "'");
        std::size_t atoms = 0;
        if (j["atoms"].is_array())
        {
            std::vector<std::string> labels;
            for (const auto& l : j["atoms"])
                labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
            atoms = AtomSpace(labels).size();
        }
        else
            atoms = count(j["atoms"], "atoms");
        std::vector<Partition> parts;
        if (!j["partitions"].is_array())
            throw ParseError("partitions must be an array");
        for (const auto& pj : j["partitions"])
        {
            if (!pj.is_array())
                throw ParseError("each partition must be an array of blocks");
            Partition part;
            for (const auto& bj : pj)
                part.push_back(indices(bj, "partition block"));
            parts.push_back(std::move(part));
        }
        filt.emplace(atoms, std::move(parts));
        std::vector<Measure> extremes;
        if (!j["extremes"].is_array())
            throw ParseError("extremes must be an array of measures");
        for (const auto& ej : j["extremes"])
            extremes.push_back(measure_of(ej, "extreme"));
        set.emplace(measure_of(j["reference"], "reference"), RandomVariable(numbers(j["target"], "target")),
                    std::move(extremes), true, 1e-10);
    }
    FiniteMarket fm{std::move(*filt), std::move(*set), std::nullopt, std::nullopt};
    superhedge::detail::require(fm.set.atom_count() == fm.filtration.atom_count(),
                                "measure vectors and filtration disagree on the atom count");
    if (j.contains("process"))
        fm.process = AdaptedProcess(fm.filtration, matrix(j["process"], "process"));
    if (j.contains("payoff"))
    {
        fm.payoff = RandomVariable(numbers(j["payoff"], "payoff"));
        superhedge::detail::require(fm.payoff->size() == fm.filtration.atom_count(), "payoff length must equal the atom count");
    }
    return fm;
}

inline json load_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path.string());
    try
    {
        return json::parse(in);
    }
    catch (const json::exception& e)
    {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {})
{
    using namespace detail;
    check_keys(j,
               {"command", "market", "market_file", "finite_market", "payoff", "grid", "seed", "output_path", "sweep",
                "bound_sweep", "oracle", "samples"},
               "config");
    RunConfig c;
    if (!j.contains("command"))
        throw ParseError("config needs a command");
    c.command = text(j["command"], "command");
    if (c.command != "price" && c.command != "decompose" && c.command != "verify" && c.command != "sweep")
        throw ParseError("unknown command '" + c.command + "'");
    const int sources = int(j.contains("market")) + int(j.contains("market_file")) + int(j.contains("finite_market"));
    superhedge::detail::require(sources == 1, "exactly one of market, market_file, finite_market is required");
    if (j.contains("market"))
        c.market = parse_market(j["market"]);
    if (j.contains("market_file"))
    {
        std::filesystem::path mf = text(j["market_file"], "market_file");
        c.market_file = mf.is_absolute() ? mf : base_dir / mf;
    }
    if (j.contains("finite_market"))
        c.finite_market = j["finite_market"];
    if (j.contains("payoff"))
    {
        c.payoff = parse_payoff(j["payoff"]);
        c.payoff_given = true;
    }
    if (j.contains("grid"))
        c.grid = parse_grid(j["grid"]);
    if (j.contains("seed"))
        c.seed = count(j["seed"], "seed");
    if (j.contains("output_path"))
        c.output_path = text(j["output_path"], "output_path");
    if (j.contains("sweep"))
    {
        check_keys(j["sweep"], {"parameter", "values"}, "sweep");
        SweepSpec s{text(j["sweep"].value("parameter", json("")), "sweep.parameter"),
                    numbers(j["sweep"].value("values", json::array()), "sweep.values")};
        static const std::set<std::string> params{"sigma", "r", "strike", "n_steps", "bound"};
        if (!params.count(s.parameter))
            throw ParseError("sweep.parameter must be one of sigma, r, strike, n_steps, bound");
        superhedge::detail::require(!s.values.empty(), "sweep.values must not be empty");
        c.sweep = std::move(s);
    }
    if (j.contains("bound_sweep"))
        c.bound_sweep = numbers(j["bound_sweep"], "bound_sweep");
    if (j.contains("oracle"))
        c.oracle = boolean(j["oracle"], "oracle");
    if (j.contains("samples"))
        c.samples = count(j["samples"], "samples");

    if (c.command == "price" || c.command == "sweep")
        superhedge::detail::require(c.market.has_value(), "command '" + c.command + "' needs a GBM market");
    if (c.command == "sweep")
        superhedge::detail::require(c.sweep.has_value(), "command 'sweep' needs a sweep section");
    return c;
}

/// "%.17g" formatting used for every number written.
inline std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail
{
class CsvWriter
{
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path)
    {
        if (!out_)
            throw ValidationError("cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline std::string fmt_size(std::size_t v) { return std::to_string(v); }

class Checks
{
public:
    void record(const std::string& name, bool passed, double value, const std::string& detail = {})
    {
        checks_.push_back({{"name", name}, {"passed", passed}, {"value", value}});
        if (!passed)
            violations_.push_back({{"check", name}, {"detail", detail}, {"value", value}});
    }

    [[nodiscard]] bool ok() const { return violations_.empty(); }

    void write(const std::filesystem::path& path) const
    {
        json j{{"checks", checks_}, {"violations", violations_}, {"ok", ok()}};
        std::ofstream out(path);
        if (!out)
            throw ValidationError("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }

    /// Runs fn and records a failed check instead of propagating invariant failures.
    template <typename Fn>
    void guard(const std::string& name, Fn&& fn)
    {
        try
        {
            fn();
        }
        catch (const InfeasibleError& e)
        {
            record(name, false, 0.0, e.what());
        }
        catch (const ValidationError& e)
        {
            record(name, false, 0.0, e.what());
        }
    }

private:
    json checks_ = json::array();
    json violations_ = json::array();
};

inline void write_price_files(const RunConfig& c, const GbmParams& p, const PricingResult& res,
                              const std::filesystem::path& out)
{
    {
        CsvWriter w(out / "price.csv",
                    {"price", "evaluations", "exhaustive", "oracle_price", "bound", "points_per_side",
                     "refine_rounds", "sigma_warning"});
        w.row({fmt(res.price), fmt_size(res.evaluations), res.exhaustive ? "1" : "0",
               res.oracle_price ? fmt(*res.oracle_price) : "", fmt(c.grid.effective_bound(p)),
               fmt_size(c.grid.points_per_side), fmt_size(c.grid.refine_rounds), p.sigma_warning() ? "1" : "0"});
    }
    CsvWriter w(out / "argmax.csv", {"step", "y_down", "y_up", "degenerate", "l", "u", "w_down", "w_up"});
    for (std::size_t s = 0; s < p.n_steps; ++s)
    {
        const auto law = step_law(p, res.argmax.step(s), c.grid.denom_floor);
        w.row({fmt_size(s + 1), fmt(res.argmax.y_down[s]), fmt(res.argmax.y_up[s]),
               res.argmax.degenerate[s] ? "1" : "0", fmt(law.l), fmt(law.u), fmt(law.w_down), fmt(law.w_up)});
    }
}

inline PricingResult price_with(const GbmParams& p, const PayoffSpec& f, GridSpec g, std::size_t threads)
{
    g.threads = threads;
    return price_sup(p, f, g);
}

inline int cmd_price(const RunConfig& c, const GbmParams& p, const std::filesystem::path& out, const RunOptions& o)
{
    PricingResult res = price_with(p, c.payoff, c.grid, o.threads);
    if (c.oracle)
        res.oracle_price =
            backward_induction_oracle(p, c.payoff, c.grid, OracleOptions{OracleMode::interpolated, 2001, 0});
    write_price_files(c, p, res, out);

    CsvWriter w(out / "bound_sweep.csv", {"bound", "price", "evaluations"});
    std::vector<PricingCandidate> seeds = c.grid.seeds;
    for (double k : c.bound_sweep)
    {
        GridSpec g = c.grid;
        g.bound = k * std::sqrt(p.dt);
        g.seeds = seeds;
        const PricingResult r = price_with(p, c.payoff, g, o.threads);
        seeds.push_back(r.argmax);
        w.row({fmt(*g.bound), fmt(r.price), fmt_size(r.evaluations)});
    }

    if (c.samples > 0)
    {
        const auto ys = sample_increments(p, c.samples, c.seed);
        CsvWriter sw(out / "samples.csv", {"path", "terminal_price", "payoff"});
        for (std::size_t i = 0; i < c.samples; ++i)
        {
            const std::span<const double> path(ys.data() + i * p.n_steps, p.n_steps);
            const double s = terminal_price(p, path);
            sw.row({fmt_size(i), fmt(s), fmt(evaluate_payoff(c.payoff, s))});
        }
    }
    if (!o.quiet)
        std::cout << "price " << fmt(res.price) << " (" << res.evaluations << " evaluations)\n";
    return ok;
}

inline void write_decomposition(const Filtration& filt, const Decomposition& dec, const std::filesystem::path& path)
{
    CsvWriter w(path, {"time", "block", "M", "g", "alpha", "holding"});
    for (std::size_t n = 0; n <= filt.horizon(); ++n)
        for (std::size_t b = 0; b < filt.block_count(n); ++b)
        {
            const bool has_step = n < filt.horizon();
            w.row({fmt_size(n), fmt_size(b), fmt(dec.martingale_part.value(n, b)), fmt(dec.compensator.value(n, b)),
                   has_step ? fmt(dec.certificate.alpha[n][b]) : "", has_step ? fmt(dec.holding[n][b]) : ""});
        }
}

inline AdaptedProcess finite_process(const FiniteMarket& fm)
{
    if (fm.process)
        return *fm.process;
    superhedge::detail::require(fm.payoff.has_value(), "finite market needs a process or a payoff");
    return esssup_process(*fm.payoff, fm.set, fm.filtration);
}

inline int cmd_decompose_gbm(const RunConfig& c, const GbmParams& p, const std::filesystem::path& out,
                             const RunOptions& o)
{
    const PricingResult res = price_with(p, c.payoff, c.grid, o.threads);
    const HedgeResult h = hedge_from_price(p, c.payoff, res, c.grid.denom_floor);
    write_decomposition(h.filtration, h.decomposition, out / "decomposition.csv");
    CsvWriter w(out / "hedge.csv", {"time", "block", "price", "value", "alpha", "holding", "delta"});
    for (const auto& n : h.nodes)
        w.row({fmt_size(n.time), fmt_size(n.block), fmt(n.price), fmt(n.value), fmt(n.alpha), fmt(n.holding),
               fmt(n.delta)});
    if (!o.quiet)
        std::cout << "hedge value " << fmt(h.initial_value) << ", terminal gap " << fmt(h.worst_terminal_gap) << '\n';
    return ok;
}

inline int cmd_decompose_finite(const FiniteMarket& fm, const std::filesystem::path& out, const RunOptions& o)
{
    const AdaptedProcess f = finite_process(fm);
    const Decomposition dec = optional_decomposition(f, fm.set, fm.filtration);
    write_decomposition(fm.filtration, dec, out / "decomposition.csv");
    CsvWriter w(out / "certificate.csv", {"step", "atom", "ratio_bound"});
    for (std::size_t n = 0; n < dec.certificate.ratio_bound.size(); ++n)
        for (std::size_t a = 0; a < fm.filtration.atom_count(); ++a)
            w.row({fmt_size(n + 1), fmt_size(a), fmt(dec.certificate.ratio_bound[n][a])});
    if (!o.quiet)
        std::cout << "decomposition written, shift " << fmt(dec.certificate.shift) << '\n';
    return ok;
}

inline int cmd_verify_finite(const FiniteMarket& fm, const std::filesystem::path& out, const RunOptions& o)
{
    Checks checks;
    const auto& set = fm.set;
    const auto& filt = fm.filtration;
    for (std::size_t e = 0; e < set.extreme_count(); ++e)
    {
        const double ex = expectation(set.extremes()[e], set.target());
        checks.record("extreme_unit_expectation[" + std::to_string(e) + "]", std::abs(ex - 1.0) <= 1e-10, ex);
    }
    checks.guard("regular_martingale", [&] {
        const auto m = regular_martingale(set, filt);
        const auto rep = is_martingale(m, set, filt, 1e-10);
        checks.record("regular_martingale", rep.holds && rep.routes_agree(), rep.worst_deviation);
    });
    std::optional<AdaptedProcess> f;
    checks.guard("value_process", [&] { f = finite_process(fm); });
    if (f)
    {
        if (fm.payoff && !fm.process)
        {
            const auto direct = esssup_direct(*fm.payoff, set, filt);
            double worst = 0.0;
            for (std::size_t n = 0; n <= filt.horizon(); ++n)
                for (std::size_t b = 0; b < filt.block_count(n); ++b)
                    worst = std::max(worst, direct.value(n, b) - f->value(n, b));
            checks.record("esssup_dominates_extremes", worst <= 1e-12, worst);
        }
        const auto sup = is_supermartingale(*f, set, filt, 1e-10);
        checks.record("supermartingale", sup.holds, sup.worst_violation);
        checks.guard("decomposition", [&] {
            const auto dec = optional_decomposition(*f, set, filt);
            const auto rep = verify_decomposition(*f, dec, set, filt);
            checks.record("decomposition_identity", rep.identity, rep.worst_identity);
            checks.record("compensator_starts_at_zero", rep.g_starts_at_zero, rep.g_initial);
            checks.record("compensator_nondecreasing", rep.g_nondecreasing, rep.worst_g_decrease);
            checks.record("martingale_part", rep.martingale.holds, rep.martingale.worst_deviation);
            double slack = std::numeric_limits<double>::infinity();
            for (double s : dec.certificate.worst_slack)
                slack = std::min(slack, s);
            checks.record("hedge_bound", dec.certificate.worst_slack.empty() || slack >= -1e-12,
                          dec.certificate.worst_slack.empty() ? 0.0 : slack);
        });
    }
    checks.write(out / "violations.json");
    if (!o.quiet)
        std::cout << (checks.ok() ? "verify: all checks passed\n" : "verify: violations found\n");
    return checks.ok() ? ok : invariant_violation;
}

inline int cmd_verify_gbm(const RunConfig& c, const GbmParams& p, const std::filesystem::path& out,
                          const RunOptions& o)
{
    Checks checks;
    const PricingResult res = price_with(p, c.payoff, c.grid, o.threads);
    const double obj = objective(p, c.payoff, res.argmax, c.grid.joint_enum_cap, c.grid.denom_floor);
    checks.record("price_equals_objective", std::abs(obj - res.price) <= 1e-12, obj - res.price);
    double worst_w = 0.0;
    for (std::size_t s = 0; s < p.n_steps; ++s)
    {
        const auto law = step_law(p, res.argmax.step(s), c.grid.denom_floor);
        worst_w = std::max({worst_w, std::abs(law.w_down + law.w_up - 1.0),
                            std::abs(law.w_down * law.l + law.w_up * law.u - 1.0)});
    }
    checks.record("step_weight_identities", worst_w <= 1e-12, worst_w);
    if (p.n_steps <= 12)
    {
        std::vector<double> y1 = res.argmax.y_down;
        std::vector<double> y2 = res.argmax.y_up;
        bool moving = true;
        for (bool deg : res.argmax.degenerate)
            moving = moving && !deg;
        if (moving)
        {
            const double a = objective_formula(p, c.payoff, y1, y2);
            const double b = objective_formula(p, c.payoff, y2, y1);
            checks.record("formula_label_swap", std::abs(a - b) <= 1e-12 && std::abs(a - obj) <= 1e-12,
                          std::max(std::abs(a - b), std::abs(a - obj)));
        }
    }
    checks.guard("hedge", [&] {
        const HedgeResult h = hedge_from_price(p, c.payoff, res, c.grid.denom_floor);
        checks.record("hedge_starts_at_price", std::abs(h.initial_value - res.price) <= 1e-10,
                      h.initial_value - res.price);
        checks.record("hedge_dominates_payoff", h.worst_terminal_gap >= -1e-10, h.worst_terminal_gap);
    });
    checks.write(out / "violations.json");
    if (!o.quiet)
        std::cout << (checks.ok() ? "verify: all checks passed\n" : "verify: violations found\n");
    return checks.ok() ? ok : invariant_violation;
}

inline int cmd_sweep(const RunConfig& c, const GbmParams& base, const std::filesystem::path& out, const RunOptions& o)
{
    const auto& s = *c.sweep;
    CsvWriter w(out / "sweep.csv", {s.parameter, "price", "evaluations"});
    std::vector<PricingCandidate> seeds;
    for (double v : s.values)
    {
        GbmParams p = base;
        PayoffSpec f = c.payoff;
        GridSpec g = c.grid;
        if (s.parameter == "sigma")
            p.sigma = v;
        else if (s.parameter == "r")
            p.r = v;
        else if (s.parameter == "strike")
        {
            superhedge::detail::require(f.kind != PayoffKind::table, "strike sweep needs a parametric payoff");
            f.strike = v;
        }
        else if (s.parameter == "n_steps")
        {
            superhedge::detail::require(v >= 1 && std::floor(v) == v, "n_steps sweep values must be positive integers");
            p.n_steps = static_cast<std::size_t>(v);
        }
        else
        {
            g.bound = v;
            g.seeds = seeds;
        }
        p.validate();
        f.validate();
        const PricingResult r = price_with(p, f, g, o.threads);
        if (s.parameter == "bound")
            seeds.push_back(r.argmax);
        w.row({fmt(v), fmt(r.price), fmt_size(r.evaluations)});
    }
    if (!o.quiet)
        std::cout << "sweep over " << s.parameter << " written (" << s.values.size() << " rows)\n";
    return ok;
}
} // namespace detail

/// Executes a parsed configuration; exceptions propagate to run_file.
inline int run(const RunConfig& c, const RunOptions& o = {})
{
    const std::filesystem::path out = o.out_dir.value_or(c.output_path);
    std::filesystem::create_directories(out);
    if (c.market)
    {
        const GbmParams& p = *c.market;
        if (p.sigma_warning() && !o.quiet)
            std::cerr << "warning: sigma >= 1/(2 dt); the integrability hypothesis of the price formula fails\n";
        if (c.command == "price")
            return detail::cmd_price(c, p, out, o);
        if (c.command == "decompose")
            return detail::cmd_decompose_gbm(c, p, out, o);
        if (c.command == "verify")
            return detail::cmd_verify_gbm(c, p, out, o);
        return detail::cmd_sweep(c, p, out, o);
    }
    const json fj = c.finite_market ? *c.finite_market : load_json(*c.market_file);
    const FiniteMarket fm = parse_finite_market(fj);
    if (c.command == "decompose")
        return detail::cmd_decompose_finite(fm, out, o);
    if (c.command == "verify")
        return detail::cmd_verify_finite(fm, out, o);
    throw ValidationError("command '" + c.command + "' needs a GBM market");
}

/// Loads, runs and maps failures to exit codes.
inline int run_file(const std::filesystem::path& config, const RunOptions& o = {}, std::ostream& err = std::cerr)
{
    try
    {
        const json j = load_json(config);
        const RunConfig c = parse_config(j, config.parent_path());
        return run(c, o);
    }
    catch (const ParseError& e)
    {
        err << "parse error: " << e.what() << '\n';
        return parse_error;
    }
    catch (const ValidationError& e)
    {
        err << "validation error: " << e.what() << '\n';
        return validation_error;
    }
    catch (const InfeasibleError& e)
    {
        err << "invariant violation: " << e.what() << '\n';
        return invariant_violation;
    }
    catch (const NumericOverflow& e)
    {
        err << "numeric overflow: " << e.what() << '\n';
        return numeric_overflow;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return internal_error;
    }
}

} // namespace superhedge::cli

#endif // SUPERHEDGE_CLI_HPP
