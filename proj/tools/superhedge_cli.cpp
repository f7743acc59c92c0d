#include "superhedge/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <thread>

int main(int argc, char** argv)
{
    CLI::App app{"Super-hedge pricing and optional decomposition"};
    std::string config;
    std::string out;
    std::size_t threads = 1;
    bool quiet = false;
    app.add_option("--config", config, "Run configuration (JSON)")->required();
    app.add_option("--out", out, "Output directory (overrides output_path)");
    app.add_option("--threads", threads, "Worker threads, 0 = auto");
    app.add_flag("--quiet", quiet, "Suppress progress output");
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return superhedge::cli::parse_error;
    }

    superhedge::cli::RunOptions opts;
    if (!out.empty())
        opts.out_dir = out;
    opts.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    opts.quiet = quiet;
    return superhedge::cli::run_file(config, opts);
}
