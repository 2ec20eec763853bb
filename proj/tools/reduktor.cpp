#include <reduktor/cli.hpp>
#include <reduktor/io.hpp>
#include <reduktor/parallel.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using Command = std::function<int(const reduktor::RunConfig&, const reduktor::CommandOptions&,
                                  std::ostream&, std::ostream&)>;

int run(const Command& cmd, const std::string& config_path, const std::optional<std::string>& out_path,
        const reduktor::CommandOptions& opt) {
    const reduktor::RunConfig cfg = reduktor::load_config(config_path);
    if (!out_path) return cmd(cfg, opt, std::cout, std::cerr);
    std::ofstream out(*out_path, std::ios::binary);
    if (!out) throw reduktor::Error(reduktor::Errc::ConfigParse, "cannot write " + *out_path);
    const int rc = cmd(cfg, opt, out, std::cout);
    out.flush();
    if (!out) throw reduktor::Error(reduktor::Errc::ConfigParse, "write to " + *out_path + " failed");
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Averaged evolution of stochastically reduced quantum systems"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool quiet = false;
    app.add_option("--out", out, "Write the primary output here instead of stdout");
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--workers", workers, "Worker threads (default: REDUKTOR_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--quiet", quiet, "Suppress summary lines");

    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"solve", {"Trapezoidal march of the averaged evolution", reduktor::cmd_solve}},
        {"series", {"Jump-count (Neumann) series", reduktor::cmd_series}},
        {"simulate", {"Monte Carlo average over Poisson jump times", reduktor::cmd_simulate}},
        {"compare", {"Solver, series and Monte Carlo cross-check", reduktor::cmd_compare}},
        {"asymptote", {"Long-time compression profile and convergence verdict", reduktor::cmd_asymptote}},
        {"genericity", {"Sampled compression minimum of M(t)", reduktor::cmd_genericity}},
        {"scalar", {"Scalar reduced equation (march, delay, trig)", reduktor::cmd_scalar}},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config, "JSON run configuration")->required();
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : reduktor::exit_code(reduktor::ErrorKind::Usage);
    }

    reduktor::CommandOptions opt;
    opt.workers = workers.value_or(reduktor::default_workers());
    opt.seed = seed;
    opt.quiet = quiet;
    try {
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) return run(commands.at(name).second, config, out, opt);
    } catch (const reduktor::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return reduktor::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return reduktor::exit_code(reduktor::ErrorKind::Numerical);
    }
    return reduktor::exit_code(reduktor::ErrorKind::Usage);
}
