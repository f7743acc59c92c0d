#include "superhedge/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using namespace superhedge;

namespace
{

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("superhedge_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const fs::path& config, const fs::path& out, const std::string& extra = "")
{
    const std::string cmd = std::string(SUPERHEDGE_CLI_PATH) + " --config '" + config.string() + "' --out '" +
                            out.string() + "' --quiet " + extra + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_config(const std::string& name, const std::string& json_text)
{
    const fs::path dir = scratch(name);
    write_text(dir / "config.json", json_text);
    return run_cli(dir / "config.json", dir / "out");
}

std::vector<double> csv_column(const fs::path& path, std::size_t col)
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line))
    {
        std::stringstream row(line);
        std::string cell;
        for (std::size_t i = 0; i <= col; ++i)
            std::getline(row, cell, ',');
        out.push_back(std::stod(cell));
    }
    return out;
}

const fs::path kFixtures = SUPERHEDGE_FIXTURE_DIR;

} // namespace

TEST(CliParse, RejectsUnknownKeys)
{
    const auto j = nlohmann::json::parse(R"({"command":"price","market":{"sigma":0.2,"volatility":1},
                                            "payoff":{"kind":"call","strike":1}})");
    EXPECT_THROW(cli::parse_config(j), ParseError);
    const auto k = nlohmann::json::parse(R"({"command":"price","market":{"sigma":0.2},"payoff":{"kind":"call","strike":1},
                                            "extra":1})");
    EXPECT_THROW(cli::parse_config(k), ParseError);
}

TEST(CliParse, AcceptsScientificNotation)
{
    const auto j = nlohmann::json::parse(R"({"command":"price","market":{"sigma":2e-1,"r":5E-2,"n_steps":2},
                                            "payoff":{"kind":"put","strike":1.1e0},"grid":{"delta":1e-7}})");
    const auto c = cli::parse_config(j);
    ASSERT_TRUE(c.market.has_value());
    EXPECT_DOUBLE_EQ(c.market->sigma, 0.2);
    EXPECT_DOUBLE_EQ(c.market->r, 0.05);
    EXPECT_EQ(c.payoff.kind, PayoffKind::put);
    EXPECT_DOUBLE_EQ(c.grid.delta, 1e-7);
}

TEST(CliParse, NeedsExactlyOneMarket)
{
    const auto none = nlohmann::json::parse(R"({"command":"verify"})");
    EXPECT_ANY_THROW(cli::parse_config(none));
    const auto bad_command = nlohmann::json::parse(R"({"command":"hedge","market":{"sigma":0.2}})");
    EXPECT_THROW(cli::parse_config(bad_command), ParseError);
}

TEST(CliRun, VerifyShippedFixtures)
{
    for (const char* name : {"verify_binomial_two_step.json", "verify_trinomial_product.json"})
    {
        const fs::path out = scratch(std::string("fixture_") + name);
        EXPECT_EQ(run_cli(kFixtures / name, out), 0) << name;
        const auto report = nlohmann::json::parse(read_text(out / "violations.json"));
        EXPECT_TRUE(report["ok"].get<bool>());
        EXPECT_TRUE(report["violations"].empty());
    }
}

TEST(CliRun, PriceIsByteIdentical)
{
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    ASSERT_EQ(run_cli(kFixtures / "price_call.json", a), 0);
    ASSERT_EQ(run_cli(kFixtures / "price_call.json", b, "--threads 3"), 0);
    for (const char* file : {"price.csv", "argmax.csv", "bound_sweep.csv", "samples.csv"})
    {
        const std::string x = read_text(a / file);
        EXPECT_FALSE(x.empty()) << file;
        EXPECT_EQ(x, read_text(b / file)) << file;
        EXPECT_EQ(x.back(), '\n');
    }
}

TEST(CliRun, ConstantPayoffPrice)
{
    const fs::path dir = scratch("constant");
    write_text(dir / "config.json", R"({"command":"price","market":{"sigma":0.2,"r":0.01,"n_steps":2},
        "payoff":{"kind":"constant","value":0.4},"grid":{"points_per_side":6,"refine_rounds":1},
        "bound_sweep":[2,4]})");
    ASSERT_EQ(run_cli(dir / "config.json", dir / "out"), 0);
    const auto price = csv_column(dir / "out" / "price.csv", 0);
    ASSERT_EQ(price.size(), 1u);
    EXPECT_NEAR(price[0], 0.4, 1e-13);
}

TEST(CliRun, BoundSweepIsMonotone)
{
    const fs::path dir = scratch("sweep");
    write_text(dir / "config.json", R"({"command":"sweep","market":{"sigma":0.2,"n_steps":1},
        "payoff":{"kind":"call","strike":1},"grid":{"points_per_side":16,"refine_rounds":2},
        "sweep":{"parameter":"bound","values":[2,4,6,8,10]}})");
    ASSERT_EQ(run_cli(dir / "config.json", dir / "out"), 0);
    const auto prices = csv_column(dir / "out" / "sweep.csv", 1);
    ASSERT_EQ(prices.size(), 5u);
    for (std::size_t i = 1; i < prices.size(); ++i)
        EXPECT_GE(prices[i], prices[i - 1]);
}

TEST(CliRun, DecomposeWritesFiles)
{
    const fs::path dir = scratch("decompose");
    write_text(dir / "config.json", R"({"command":"decompose","market":{"sigma":0.2,"r":0.02,"n_steps":2},
        "payoff":{"kind":"call","strike":1},"grid":{"points_per_side":8,"refine_rounds":1}})");
    ASSERT_EQ(run_cli(dir / "config.json", dir / "out"), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "decomposition.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "hedge.csv"));

    const fs::path fin = scratch("decompose_finite");
    write_text(fin / "config.json", R"({"command":"decompose","market_file":")" +
                                         (kFixtures / "trinomial_product.json").string() + R"("})");
    ASSERT_EQ(run_cli(fin / "config.json", fin / "out"), 0);
    EXPECT_TRUE(fs::exists(fin / "out" / "certificate.csv"));
}

TEST(CliRun, ExitCodes)
{
    EXPECT_EQ(run_config("parse_json", "{not json"), 2);
    EXPECT_EQ(run_config("parse_key", R"({"command":"price","market":{"sigma":0.2},"payoff":{"kind":"call","strike":1},
                                          "colour":"red"})"),
              2);
    EXPECT_EQ(run_config("parse_type", R"({"command":"price","market":{"sigma":"high"},
                                           "payoff":{"kind":"call","strike":1}})"),
              2);
    EXPECT_EQ(run_config("validation", R"({"command":"price","market":{"sigma":-0.2},
                                           "payoff":{"kind":"call","strike":1}})"),
              3);
    EXPECT_EQ(run_config("overflow", R"({"command":"price","market":{"sigma":100,"n_steps":1},
                                         "payoff":{"kind":"call","strike":1},"grid":{"bound":10,"points_per_side":4}})"),
              5);
    EXPECT_EQ(run_config("violation", R"({"command":"verify","finite_market":{
        "atoms":2,"partitions":[[[0,1]],[[0],[1]]],"reference":[0.5,0.5],"target":[0.5,1.5],
        "extremes":[[0.5,0.5]],"process":[[1.0],[1.5,1.5]]}})"),
              4);
    EXPECT_EQ(run_config("infeasible", R"({"command":"decompose","finite_market":{
        "atoms":2,"partitions":[[[0,1]],[[0],[1]]],"reference":[0.5,0.5],"target":[0.5,1.5],
        "extremes":[[0.5,0.5]],"process":[[1.0],[1.5,1.5]]}})"),
              4);

    const fs::path dir = scratch("missing");
    EXPECT_EQ(run_cli(dir / "absent.json", dir / "out"), 2);
    EXPECT_EQ(run_cli(kFixtures / "price_call.json", dir / "out", "--bogus-flag"), 2);
}

TEST(CliRun, ViolationReportIsMachineReadable)
{
    const fs::path dir = scratch("report");
    write_text(dir / "config.json", R"({"command":"verify","finite_market":{
        "atoms":2,"partitions":[[[0,1]],[[0],[1]]],"reference":[0.5,0.5],"target":[0.5,1.5],
        "extremes":[[0.5,0.5]],"process":[[1.0],[1.5,1.5]]}})");
    ASSERT_EQ(run_cli(dir / "config.json", dir / "out"), 4);
    const auto report = nlohmann::json::parse(read_text(dir / "out" / "violations.json"));
    EXPECT_FALSE(report["ok"].get<bool>());
    ASSERT_FALSE(report["violations"].empty());
    bool found = false;
    for (const auto& v : report["violations"])
        found = found || v["check"] == "supermartingale";
    EXPECT_TRUE(found);
}
