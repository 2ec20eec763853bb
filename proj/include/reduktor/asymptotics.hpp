// asymptotics.hpp: long-time behaviour of the averaged evolution: the
// delta statistic, convergence to the block maximal-entropy limit, the
// cyclic-permutation case and the period/rate rescaling law.
#pragma once

#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "scalar.hpp"
#include "volterra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace reduktor {

struct DeltaStatistic {
    double value = 0.0;
    double tail_bound = 0.0; // e^{-H}, the mass beyond the horizon
};

/// int_0^H alpha(t) e^{-t} dt by the trapezoid rule.
inline DeltaStatistic delta_statistic(const ScalarInput& alpha, double horizon = 40.0,
                                      std::size_t steps = 100000) {
    if (!(horizon > 0.0) || steps < 2) throw Error(Errc::InvalidArgument, "bad quadrature setup");
    steps += steps % 2;
    const double h = horizon / static_cast<double>(steps);
    // trapezoid on h and 2h, one Richardson step; jump nodes use the mean of both one-sided values
    double fine = 0.5 * (alpha.value(0.0) + alpha.left(horizon) * std::exp(-horizon));
    double coarse = fine;
    for (std::size_t k = 1; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const double f = 0.5 * (alpha.value(t) + alpha.left(t)) * std::exp(-t);
        fine += f;
        if (k % 2 == 0) coarse += f;
    }
    fine *= h;
    coarse *= 2.0 * h;
    return {(4.0 * fine - coarse) / 3.0, std::exp(-horizon)};
}

enum class Verdict { Converged, NotConverged, IdentitySectorOnly };

inline constexpr std::string_view verdict_name(Verdict v) noexcept {
    switch (v) {
    case Verdict::Converged: return "converged";
    case Verdict::NotConverged: return "not_converged";
    case Verdict::IdentitySectorOnly: return "identity_sector_only";
    }
    return "unknown";
}

struct ConvergenceOptions {
    double epsilon = 1e-3;        // final distance threshold
    double window = 0.1;          // trailing fraction of nodes checked for the plateau
    double contraction = 0.1;     // final block compression must fall below this times its max
    std::size_t samples = 64;     // sampled times for the support analysis
    double sample_horizon = 0.0;  // 0: use the grid horizon
    double support_tol = 1e-10;
    double identity_tol = 1e-9;
};

struct ConvergenceReport {
    std::vector<double> times;
    std::vector<double> c_values;       // c(Mbar(t))
    std::vector<double> block_c_values; // max over predicted blocks of c(Mbar(t)|block)
    std::vector<double> distance;       // sup-norm distance to the predicted limit
    BlockPartition partition;
    DStochMatrix predicted_limit;
    Verdict verdict = Verdict::NotConverged;

    double final_distance() const { return distance.back(); }
    double window_max_distance(double fraction) const {
        const auto n = distance.size();
        const auto start = n - std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(n)));
        return *std::max_element(distance.begin() + static_cast<std::ptrdiff_t>(start), distance.end());
    }
};

/// Predicted block limit from the support pattern of M on sampled times in (0, horizon].
inline BlockPartition predict_partition(const MatrixSource& src, double horizon,
                                        std::size_t samples, double tol) {
    std::vector<DStochMatrix> ms;
    ms.reserve(samples);
    for (std::size_t k = 1; k <= samples; ++k) {
        const double t = horizon * static_cast<double>(k) / static_cast<double>(samples);
        ms.push_back(validate_dstoch(src.value(t), Tolerance{1e-9, 1e-9}));
    }
    return support_blocks(ms, tol);
}

/// Builds a report from an already solved trajectory.
inline ConvergenceReport convergence_report(const MatrixSource& src, const Trajectory& tr,
                                            const ConvergenceOptions& opt = {}) {
    ConvergenceReport rep;
    const double horizon = opt.sample_horizon > 0.0 ? opt.sample_horizon : tr.grid.t_max();
    rep.partition = predict_partition(src, horizon, opt.samples, opt.support_tol);
    const auto n = static_cast<std::size_t>(src.dim);
    rep.predicted_limit = theta_of(rep.partition, n);
    const Matrix& lim = rep.predicted_limit.matrix();
    for (std::size_t k = 0; k < tr.values.size(); ++k) {
        rep.times.push_back(tr.grid.t(k));
        rep.c_values.push_back(compression(tr.values[k]));
        rep.block_c_values.push_back(block_compression(tr.values[k], rep.partition));
        rep.distance.push_back(sup_distance(tr.values[k], lim));
    }
    if (rep.partition.blocks.empty()) {
        const double worst = *std::max_element(rep.distance.begin(), rep.distance.end());
        rep.verdict = worst <= opt.identity_tol ? Verdict::IdentitySectorOnly : Verdict::NotConverged;
        return rep;
    }
    const double cmax = *std::max_element(rep.block_c_values.begin(), rep.block_c_values.end());
    const bool contracted = rep.block_c_values.back() <= opt.contraction * cmax;
    const bool plateau = rep.window_max_distance(opt.window) < opt.epsilon;
    rep.verdict = contracted && plateau ? Verdict::Converged : Verdict::NotConverged;
    return rep;
}

inline ConvergenceReport convergence_report(const MatrixSource& src, const SolverConfig& cfg,
                                            const ConvergenceOptions& opt = {}) {
    return convergence_report(src, march_solve(src, cfg), opt);
}

// ---------------------------------------------------------------------------
// Cyclic permutations

struct CyclicResult {
    Trajectory trajectory;
    DStochMatrix limit;      // (1/k) sum_{i=1}^k P^i
    double limit_residual;   // sup-norm distance at the horizon
};

/// Order of a permutation matrix if it is exactly k, else NotCyclicOfOrderK.
inline void require_cyclic(const Matrix& p, std::size_t k) {
    const Index n = p.rows();
    const Matrix id = Matrix::Identity(n, n);
    Matrix pw = id;
    for (std::size_t i = 1; i <= k; ++i) {
        pw = pw * p;
        const bool is_id = (pw - id).cwiseAbs().maxCoeff() < 1e-12;
        if (i < k && is_id)
            throw Error(Errc::NotCyclicOfOrderK, "P^" + std::to_string(i) + " is the identity", i);
        if (i == k && !is_id)
            throw Error(Errc::NotCyclicOfOrderK, "P^" + std::to_string(k) + " is not the identity", k);
    }
}

inline Matrix cyclic_average(const Matrix& p, std::size_t k) {
    Matrix acc = Matrix::Zero(p.rows(), p.cols());
    Matrix pw = Matrix::Identity(p.rows(), p.cols());
    for (std::size_t i = 1; i <= k; ++i) {
        pw = pw * p;
        acc += pw;
    }
    return acc / static_cast<double>(k);
}

/// Averaged evolution for the constant map M = P with P of exact order k.
inline CyclicResult cyclic_example(const DStochMatrix& p, std::size_t k, double nu,
                                   const TimeGrid& grid) {
    require_cyclic(p.matrix(), k);
    SolverConfig cfg;
    cfg.nu = nu;
    cfg.grid = grid;
    Trajectory tr = march_solve(constant_source(p.matrix()), cfg);
    DStochMatrix lim = DStochMatrix::trusted(cyclic_average(p.matrix(), k));
    const double res = sup_distance(tr.back(), lim.matrix());
    return {std::move(tr), std::move(lim), res};
}

// ---------------------------------------------------------------------------
// Rescaling law

/// Solves (M, nu) on grid and (M'(t) = M(2 pi t / tau), nu' = 2 pi nu / tau) on
/// the grid whose nodes map onto it, and returns the largest node distance
/// between Mbar'(t) and Mbar(2 pi t / tau).
inline double rescaling_check(const MatrixSource& src, double tau, double nu, const TimeGrid& grid,
                              std::size_t period_samples = 16) {
    if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be > 0");
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t k = 0; k < period_samples; ++k) {
        const double t = two_pi * (static_cast<double>(k) + 0.37) / static_cast<double>(period_samples);
        const double dev = sup_distance(src.value(t + two_pi), src.value(t));
        if (dev > 1e-9)
            throw Error(Errc::PeriodMismatch, "M(t + 2 pi) != M(t) at t = " + std::to_string(t), k, dev);
    }
    const double s = two_pi / tau;
    SolverConfig base;
    base.nu = nu;
    base.grid = grid;
    SolverConfig scaled;
    scaled.nu = nu * s;
    scaled.grid = TimeGrid(grid.t_max() / s, grid.steps());
    const Trajectory a = march_solve(src, base);
    const Trajectory b = march_solve(rescaled_source(src, s), scaled);
    return max_distance(a, b);
}

} // namespace reduktor
