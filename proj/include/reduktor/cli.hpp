// cli.hpp: command implementations behind tools/reduktor.
//
// Each command writes its primary output (CSV or JSON) to `data` and human
// summary lines to `report`. The tool routes `data` to --out when given.
#pragma once

#include "asymptotics.hpp"
#include "channel.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "jump_mc.hpp"
#include "scalar.hpp"
#include "volterra.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace reduktor {

struct CommandOptions {
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed; // overrides the config seed
    bool quiet = false;
};

namespace detail {

inline std::uint64_t seed_of(const RunConfig& cfg, const CommandOptions& opt) {
    return opt.seed.value_or(cfg.seed);
}

inline std::string partition_text(const BlockPartition& p) {
    std::string s = "{";
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        s += b ? " | " : "";
        for (std::size_t i = 0; i < p.blocks[b].size(); ++i)
            s += (i ? "," : "") + std::to_string(p.blocks[b][i]);
    }
    s += "}";
    if (!p.id_sector.empty()) {
        s += " id{";
        for (std::size_t i = 0; i < p.id_sector.size(); ++i)
            s += (i ? "," : "") + std::to_string(p.id_sector[i]);
        s += "}";
    }
    return s;
}

/// exp(nu (M - 1) T) M, the solution for a time-independent M.
inline Matrix constant_closed_form(const Matrix& m, double nu, double t) {
    const Matrix gen = nu * t * (m - Matrix::Identity(m.rows(), m.cols()));
    return Matrix(gen.exp()) * m;
}

inline double sampled_horizon(const RunConfig& cfg, const ConvergenceOptions& o) {
    return o.sample_horizon > 0.0 ? o.sample_horizon : cfg.grid.t_max();
}

} // namespace detail

inline int cmd_solve(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                     std::ostream& report) {
    const MatrixSource src = cfg.source();
    const Trajectory tr = march_solve(src, cfg.solver(opt.workers));
    write_trajectory_csv(data, tr);
    if (opt.quiet) return 0;
    const BlockPartition part = predict_partition(src, detail::sampled_horizon(cfg, cfg.asymptote),
                                                  cfg.asymptote.samples, cfg.asymptote.support_tol);
    const Matrix lim = theta_of(part, static_cast<std::size_t>(src.dim)).matrix();
    report << "t_max=" << fmt17(tr.grid.t_max()) << " final_c=" << fmt17(compression(tr.back()))
           << " distance_to_predicted_limit=" << fmt17(sup_distance(tr.back(), lim))
           << " partition=" << detail::partition_text(part) << '\n';
    if (cfg.constant) {
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.values.size(); ++k)
            worst = std::max(worst, sup_distance(tr.values[k], detail::constant_closed_form(
                                                                   *cfg.constant, cfg.nu, tr.grid.t(k))));
        report << "closed_form_max_error=" << fmt17(worst) << '\n';
    }
    return 0;
}

inline int cmd_series(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                      std::ostream& report) {
    const SeriesResult s = neumann_series(cfg.source(), cfg.solver(opt.workers), cfg.T());
    write_trajectory_csv(data, s.trajectory);
    if (!opt.quiet)
        report << "T=" << fmt17(cfg.T()) << " terms=" << s.terms << " tail_bound=" << fmt17(s.tail_bound)
               << " final_c=" << fmt17(compression(s.value())) << '\n';
    return 0;
}

inline int cmd_simulate(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                        std::ostream& report) {
    const McEstimate e = monte_carlo_average(cfg.source(), cfg.nu, cfg.T(), cfg.realizations,
                                             detail::seed_of(cfg, opt), opt.workers);
    write_mc_csv(data, e, cfg.nu, cfg.T());
    if (!opt.quiet)
        report << "T=" << fmt17(cfg.T()) << " R=" << e.realizations
               << " max_stderr=" << fmt17(e.stderr_.maxCoeff()) << '\n';
    return 0;
}

namespace detail {

struct McAgreement {
    double max_abs_diff = 0.0;
    double max_sigmas = 0.0;
    double fraction_within = 0.0;
};

inline McAgreement mc_agreement(const Matrix& x, const McEstimate& e, double sigmas) {
    McAgreement a;
    std::size_t within = 0;
    const auto count = static_cast<std::size_t>(x.size());
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j) {
            const double d = std::abs(x(i, j) - e.mean(i, j));
            const double se = e.stderr_(i, j);
            a.max_abs_diff = std::max(a.max_abs_diff, d);
            // zero variance (e.g. nu = 0): allow roundoff only
            const bool ok = se > 0.0 ? d <= sigmas * se : d <= 1e-12;
            if (se > 0.0) a.max_sigmas = std::max(a.max_sigmas, d / se);
            within += ok ? 1 : 0;
        }
    a.fraction_within = static_cast<double>(within) / static_cast<double>(count);
    return a;
}

} // namespace detail

/// Solver, series and Monte Carlo at T, with pairwise verdicts. Returns 3
/// when any pair fails.
inline int cmd_compare(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                       std::ostream& report) {
    const MatrixSource src = cfg.source();
    const double T = cfg.T();
    SolverConfig sc = cfg.solver(opt.workers);
    const std::size_t kt = detail::node_of(sc.grid, T);
    const Trajectory tr = march_solve(src, sc);
    const Matrix& solved = tr.values[kt];

    Json out;
    out["T"] = T;
    out["nu"] = cfg.nu;
    out["h"] = sc.grid.h();

    std::optional<Matrix> series;
    Json sv;
    try {
        const SeriesResult s = neumann_series(src, sc, T);
        series = s.value();
        const double d = sup_distance(solved, *series);
        sv = {{"max_abs_diff", d}, {"tol", cfg.compare_series_tol}, {"terms", s.terms},
              {"tail_bound", s.tail_bound}, {"pass", d <= cfg.compare_series_tol}};
    } catch (const Error& e) {
        if (e.code() != Errc::GridTooCoarse && e.code() != Errc::TailBoundExceedsTol) throw;
        sv = {{"error", std::string(errc_name(e.code()))}, {"message", e.what()}, {"pass", false}};
        if (e.code() == Errc::GridTooCoarse)
            sv["advice"] = "refine the grid so that h * nu <= " + fmt17(kMaxSeriesStep);
        else
            sv["advice"] = "raise N_max or drop it to use the automatic cap";
    }
    out["solver_vs_series"] = sv;

    const McEstimate e = monte_carlo_average(src, cfg.nu, T, cfg.realizations, detail::seed_of(cfg, opt),
                                             opt.workers);
    auto mc_json = [&](const Matrix& x) {
        const auto a = detail::mc_agreement(x, e, cfg.compare_sigmas);
        return Json{{"max_abs_diff", a.max_abs_diff},
                    {"max_sigmas", a.max_sigmas},
                    {"fraction_within", a.fraction_within},
                    {"sigmas", cfg.compare_sigmas},
                    {"pass", a.fraction_within >= cfg.compare_fraction}};
    };
    out["solver_vs_mc"] = mc_json(solved);
    out["series_vs_mc"] = series ? mc_json(*series) : Json{{"error", "series unavailable"}, {"pass", false}};
    out["mc"] = {{"R", e.realizations}, {"seed", e.seed}, {"max_stderr", e.stderr_.maxCoeff()}};

    const bool pass = out["solver_vs_series"]["pass"].get<bool>() && out["solver_vs_mc"]["pass"].get<bool>() &&
                      out["series_vs_mc"]["pass"].get<bool>();
    out["pass"] = pass;
    data << out.dump(2) << '\n';
    if (!opt.quiet) report << "compare: " << (pass ? "pass" : "fail") << '\n';
    return pass ? 0 : exit_code(ErrorKind::Numerical);
}

/// CSV t,c_value,block_c_value,distance to `data`; JSON verdict to `report`
/// (always, also under --quiet).
inline int cmd_asymptote(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                         std::ostream& report) {
    const MatrixSource src = cfg.source();
    const ConvergenceReport rep = convergence_report(src, cfg.solver(opt.workers), cfg.asymptote);
    data << "t,c_value,block_c_value,distance\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        data << fmt17(rep.times[k]) << ',' << fmt17(rep.c_values[k]) << ','
             << fmt17(rep.block_c_values[k]) << ',' << fmt17(rep.distance[k]) << '\n';
    const Json v{{"verdict", std::string(verdict_name(rep.verdict))},
                 {"partition", partition_json(rep.partition)},
                 {"predicted_limit", matrix_json(rep.predicted_limit.matrix())},
                 {"final_distance", rep.final_distance()},
                 {"window_max_distance", rep.window_max_distance(cfg.asymptote.window)},
                 {"max_c", *std::max_element(rep.c_values.begin(), rep.c_values.end())},
                 {"final_c", rep.c_values.back()},
                 {"max_block_c", *std::max_element(rep.block_c_values.begin(), rep.block_c_values.end())},
                 {"final_block_c", rep.block_c_values.back()},
                 {"epsilon", cfg.asymptote.epsilon}};
    report << v.dump(2) << '\n';
    return 0;
}

/// c(M(t)) on `samples` evenly spaced times in (0, t_max]; JSON to `data`.
inline int cmd_genericity(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                          std::ostream& report) {
    const MatrixSource src = cfg.source();
    const std::size_t n = cfg.genericity_samples;
    if (n == 0) throw Error(Errc::InvalidArgument, "genericity needs at least one sample");
    std::vector<double> times(n), c(n);
    for (std::size_t k = 0; k < n; ++k)
        times[k] = cfg.grid.t_max() * static_cast<double>(k + 1) / static_cast<double>(n);
    parallel_for(n, opt.workers, [&](std::size_t k) { c[k] = compression(src.value(times[k])); });
    const GenericityResult g = genericity_check(c, times, cfg.delta_threshold);
    const Json out{{"generic", g.generic},
                   {"witness_t", g.witness_t},
                   {"c_min", g.c_min},
                   {"delta", cfg.delta_threshold},
                   {"samples", n},
                   {"t_max", cfg.grid.t_max()}};
    data << out.dump(2) << '\n';
    if (!opt.quiet) report << "generic=" << (g.generic ? "true" : "false") << '\n';
    return 0;
}

inline int cmd_scalar(const RunConfig& cfg, const CommandOptions& opt, std::ostream& data,
                      std::ostream& report) {
    if (!cfg.scalar) throw Error(Errc::ConfigParse, "config has no \"scalar\" section");
    const ScalarSpec& s = *cfg.scalar;
    ScalarTrajectory tr{cfg.grid, {}, {}, {}};
    double max_imag = 0.0;
    switch (s.method) {
    case ScalarMethod::March:
        tr = scalar_march(s.input, cfg.nu, cfg.grid);
        break;
    case ScalarMethod::Delay: {
        const auto* p = std::get_if<PiecewiseInput>(&s.input.variant());
        if (!p || p->pattern != std::vector<double>{1.0, 0.0})
            throw Error(Errc::InvalidArgument, "the delay method needs the alternating 1,0 input");
        tr = piecewise_delay_solve(p->tau, cfg.nu, s.intervals, s.steps_per_interval);
        break;
    }
    case ScalarMethod::Trig:
    case ScalarMethod::TrigCombined: {
        const auto* p = std::get_if<TrigInput>(&s.input.variant());
        if (!p || p->mean != 0.5 || p->amplitude != 0.5 || cfg.nu != 1.0)
            throw Error(Errc::InvalidArgument, "the trig method needs alpha = (1 + cos t) / 2 and nu = 1");
        auto sol = trig_ode_solve(cfg.grid, s.method == ScalarMethod::Trig ? TrigSystem::Split
                                                                            : TrigSystem::Combined);
        max_imag = sol.max_imaginary;
        tr = std::move(sol.trajectory);
        break;
    }
    }
    write_scalar_csv(data, tr);
    if (!opt.quiet) {
        report << "t_max=" << fmt17(tr.grid.t_max()) << " beta=" << fmt17(tr.back())
               << " jumps=" << tr.jumps.size();
        if (s.method == ScalarMethod::Trig || s.method == ScalarMethod::TrigCombined)
            report << " max_imaginary=" << fmt17(max_imag);
        report << '\n';
    }
    return 0;
}

} // namespace reduktor
