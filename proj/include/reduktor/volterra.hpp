// volterra.hpp: solvers for the averaged evolution
//
//   Mbar(T) = e^{-nu T} ( M(T) + nu * int_0^T M(T - t) Mbar(t) e^{nu t} dt ),
//
// its Neumann (jump-count) series, the generalized-kernel variant
//
//   Mbar(T) = a(T) M(T) + int_0^T M(T - t) Mbar(t) b(t, T) dt,
//
// and the once-differentiated consistency check.
//
// All solvers use the composite trapezoid rule on a uniform grid. Writing
// N(T) = e^{nu T} Mbar(T) turns the first equation into the standard second
// kind problem N = M + nu (M * N); the diagonal quadrature term multiplies
// M(0), so each step is one small linear solve. Row and column sums of the
// discrete N obey the same recurrence as the scalar problem with M = 1,
// whose solution is g^m with g = (1 + nu h / 2) / (1 - nu h / 2). Dividing by
// g^m instead of e^{nu T} keeps every node exactly doubly stochastic and the
// march runs directly on the normalized values, so nothing overflows.
#pragma once

#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reduktor {

inline constexpr double kSeriesTailTol = 1e-10;
inline constexpr double kMaxSeriesStep = 0.5; // largest admissible h * nu for the series
inline constexpr double kKernelNormTol = 1e-6;

struct SolverConfig {
    double nu = 1.0;
    TimeGrid grid{1.0, 100};
    std::optional<std::size_t> series_cap; // N_max; default from the Poisson tail
    double series_tol = kSeriesTailTol;
    std::size_t workers = 1; // for sampling the source

    void check() const {
        if (!(nu >= 0.0) || !std::isfinite(nu))
            throw Error(Errc::InvalidArgument, "reduction rate nu must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Poisson tail helpers

inline double poisson_pmf(double lambda, std::size_t k) {
    if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
    const double kk = static_cast<double>(k);
    return std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
}

/// P[K > n] for K ~ Poisson(lambda), summed upward to avoid cancellation.
inline double poisson_tail(double lambda, std::size_t n) {
    if (lambda == 0.0) return 0.0;
    double tail = 0.0;
    for (std::size_t k = n + 1;; ++k) {
        const double p = poisson_pmf(lambda, k);
        tail += p;
        if (static_cast<double>(k) > lambda && p < 1e-18 * std::max(tail, 1e-300)) break;
        if (k > n + 100000) break;
    }
    return tail;
}

/// Smallest N whose Poisson(lambda) tail is below tol.
inline std::size_t series_cap_for(double lambda, double tol = kSeriesTailTol) {
    std::size_t n = 0;
    while (poisson_tail(lambda, n) >= tol) ++n;
    return n;
}

namespace detail {

// Flat column-major storage for a run of equally sized square matrices.
class MatrixRun {
public:
    MatrixRun() = default;
    MatrixRun(std::size_t count, Index n) : n_(n), data_(count * static_cast<std::size_t>(n * n), 0.0) {}

    Index n() const noexcept { return n_; }
    std::size_t stride() const noexcept { return static_cast<std::size_t>(n_ * n_); }
    double* at(std::size_t k) noexcept { return data_.data() + k * stride(); }
    const double* at(std::size_t k) const noexcept { return data_.data() + k * stride(); }
    Eigen::Map<Matrix> map(std::size_t k) noexcept { return {at(k), n_, n_}; }
    Eigen::Map<const Matrix> map(std::size_t k) const noexcept { return {at(k), n_, n_}; }
    Matrix get(std::size_t k) const { return map(k); }
    void set(std::size_t k, const Matrix& m) { map(k) = m; }

private:
    Index n_ = 0;
    std::vector<double> data_;
};

// acc += w * A * B for n x n column-major blocks
inline void gemm_acc(double* acc, const double* a, const double* b, Index n, double w) {
    for (Index c = 0; c < n; ++c) {
        const double* bc = b + c * n;
        double* out = acc + c * n;
        for (Index k = 0; k < n; ++k) {
            const double s = w * bc[k];
            const double* ak = a + k * n;
            for (Index r = 0; r < n; ++r) out[r] += ak[r] * s;
        }
    }
}

// acc += sum_{j=lo}^{hi-1} weights[m-j] * A[m-j] * X[j]
inline void convolve_acc(double* acc, const MatrixRun& a, const MatrixRun& x, std::size_t m,
                         std::size_t lo, std::size_t hi, double w) {
    const Index n = a.n();
    for (std::size_t j = lo; j < hi; ++j) gemm_acc(acc, a.at(m - j), x.at(j), n, w);
}

inline MatrixRun to_run(const std::vector<Matrix>& ms, Index n) {
    MatrixRun r(ms.size(), n);
    for (std::size_t k = 0; k < ms.size(); ++k) r.set(k, ms[k]);
    return r;
}

inline Trajectory to_trajectory(const TimeGrid& grid, const MatrixRun& right, const MatrixRun* left,
                                std::size_t nodes) {
    Trajectory tr{grid, {}, {}};
    tr.values.reserve(nodes);
    for (std::size_t k = 0; k < nodes; ++k) tr.values.push_back(right.get(k));
    if (left) {
        tr.left.reserve(nodes);
        for (std::size_t k = 0; k < nodes; ++k) tr.left.push_back(left->get(k));
    }
    return tr;
}

inline std::size_t node_of(const TimeGrid& grid, double t) {
    const double x = t / grid.h();
    const double k = std::round(x);
    if (t < 0.0 || k > static_cast<double>(grid.steps()) ||
        std::abs(x - k) > 1e-9 * std::max(1.0, x))
        throw Error(Errc::InvalidArgument,
                    "time " + std::to_string(t) + " is not a node of the grid");
    return static_cast<std::size_t>(k);
}

} // namespace detail

/// Trapezoidal march on pre-sampled node values of M.
inline Trajectory march_solve(const SampledSource& m, const SolverConfig& cfg) {
    cfg.check();
    const TimeGrid& grid = cfg.grid;
    const std::size_t nodes = grid.nodes();
    const Index n = m.right.front().rows();
    const double h = grid.h();
    const double half = 0.5 * cfg.nu * h;
    if (!(half < 1.0))
        throw Error(Errc::GridTooCoarse, "nu * h must stay below 2 for the trapezoid march", {},
                    cfg.nu * h);
    const double decay = (1.0 - half) / (1.0 + half); // 1/g
    const bool jumps = !m.left.empty();

    // weighted samples d^k M_k
    std::vector<double> dpow(nodes);
    dpow[0] = 1.0;
    for (std::size_t k = 1; k < nodes; ++k) dpow[k] = dpow[k - 1] * decay;
    detail::MatrixRun wr(nodes, n), wl;
    for (std::size_t k = 0; k < nodes; ++k) wr.set(k, dpow[k] * m.right[k]);
    if (jumps) {
        wl = detail::MatrixRun(nodes, n);
        for (std::size_t k = 0; k < nodes; ++k) wl.set(k, dpow[k] * m.left_at(k));
    }

    const Matrix implicit =
        (Matrix::Identity(n, n) - half * m.right[0]).partialPivLu().inverse();

    detail::MatrixRun xr(nodes, n), xl;
    xr.set(0, m.right[0]);
    if (jumps) {
        xl = detail::MatrixRun(nodes, n);
        xl.set(0, m.right[0]);
    }
    Matrix acc(n, n);
    for (std::size_t k = 1; k < nodes; ++k) {
        acc.setZero();
        if (jumps) {
            detail::convolve_acc(acc.data(), wl, xr, k, 0, k, 1.0);
            detail::convolve_acc(acc.data(), wr, xl, k, 1, k, 1.0);
        } else {
            detail::convolve_acc(acc.data(), wr, xr, k, 0, 1, 1.0);
            detail::convolve_acc(acc.data(), wr, xr, k, 1, k, 2.0);
        }
        const Matrix rhs = dpow[k] * m.left_at(k) + half * acc;
        const Matrix lower = implicit * rhs;
        if (jumps) {
            xl.set(k, lower);
            xr.set(k, lower + dpow[k] * (m.right[k] - m.left[k]));
        } else {
            xr.set(k, lower);
        }
    }
    Trajectory tr = detail::to_trajectory(grid, xr, jumps ? &xl : nullptr, nodes);
    validate_trajectory(tr);
    return tr;
}

inline Trajectory march_solve(const MatrixSource& src, const SolverConfig& cfg) {
    return march_solve(sample(src, cfg.grid, cfg.workers), cfg);
}

// ---------------------------------------------------------------------------
// Neumann series

struct SeriesResult {
    Trajectory trajectory; // nodes 0 .. k_T
    std::size_t terms = 0; // N_max
    double tail_bound = 0.0;

    const Matrix& value() const { return trajectory.back(); }
};

/// Sums nu^k e^{-nu T} (k-fold iterated trapezoid integral of the ordered
/// products) for k = 0 .. N_max at every node up to T.
inline SeriesResult neumann_series(const SampledSource& m, const SolverConfig& cfg, double T) {
    cfg.check();
    const TimeGrid& grid = cfg.grid;
    const double h = grid.h();
    if (cfg.nu * h > kMaxSeriesStep)
        throw Error(Errc::GridTooCoarse,
                    "h * nu = " + std::to_string(cfg.nu * h) + " exceeds " +
                        std::to_string(kMaxSeriesStep) + "; refine the grid",
                    {}, cfg.nu * h);
    const std::size_t kt = detail::node_of(grid, T);
    const std::size_t nodes = kt + 1;
    const double lambda = cfg.nu * T;
    const std::size_t cap = cfg.series_cap.value_or(series_cap_for(lambda, cfg.series_tol));
    const double tail = poisson_tail(lambda, cap);
    if (tail > cfg.series_tol)
        throw Error(Errc::TailBoundExceedsTol,
                    "Poisson tail " + std::to_string(tail) + " with N_max = " + std::to_string(cap),
                    cap, tail);

    const Index n = m.right.front().rows();
    const bool jumps = !m.left.empty();
    detail::MatrixRun mr(nodes, n), ml;
    for (std::size_t k = 0; k < nodes; ++k) mr.set(k, m.right[k]);
    if (jumps) {
        ml = detail::MatrixRun(nodes, n);
        for (std::size_t k = 0; k < nodes; ++k) ml.set(k, m.left_at(k));
    }

    // current term (right and left node values) and running sums
    detail::MatrixRun term_r = mr, term_l = jumps ? ml : detail::MatrixRun{};
    detail::MatrixRun sum_r = mr, sum_l = term_l;
    std::vector<double> scalar_term(nodes, 1.0), scalar_sum(nodes, 1.0);
    const double w = 0.5 * cfg.nu * h;

    for (std::size_t order = 1; order <= cap; ++order) {
        detail::MatrixRun next(nodes, n);
        std::vector<double> next_scalar(nodes, 0.0);
        for (std::size_t k = 1; k < nodes; ++k) {
            double* acc = next.at(k);
            if (jumps) {
                detail::convolve_acc(acc, ml, term_r, k, 0, k, w);
                detail::convolve_acc(acc, mr, term_l, k, 1, k + 1, w);
            } else {
                detail::convolve_acc(acc, mr, term_r, k, 0, 1, w);
                detail::convolve_acc(acc, mr, term_r, k, 1, k, 2.0 * w);
                detail::convolve_acc(acc, mr, term_r, k, k, k + 1, w);
            }
            double s = scalar_term[0] + scalar_term[k];
            for (std::size_t j = 1; j < k; ++j) s += 2.0 * scalar_term[j];
            next_scalar[k] = w * s;
        }
        // the integral is continuous in T, so both one-sided values coincide
        term_r = next;
        if (jumps) term_l = next;
        scalar_term = next_scalar;
        for (std::size_t k = 0; k < nodes; ++k) {
            sum_r.map(k) += term_r.map(k);
            if (jumps) sum_l.map(k) += term_l.map(k);
            scalar_sum[k] += scalar_term[k];
        }
    }
    for (std::size_t k = 0; k < nodes; ++k) {
        sum_r.map(k) /= scalar_sum[k];
        if (jumps) sum_l.map(k) /= scalar_sum[k];
    }
    const TimeGrid sub = kt == grid.steps() ? grid : TimeGrid(grid.t(kt), kt == 0 ? 1 : kt);
    SeriesResult out{detail::to_trajectory(sub, sum_r, jumps ? &sum_l : nullptr, nodes), cap, tail};
    if (kt == 0) {
        out.trajectory.values.resize(1);
        if (jumps) out.trajectory.left.resize(1);
    }
    return out;
}

inline SeriesResult neumann_series(const MatrixSource& src, const SolverConfig& cfg, double T) {
    return neumann_series(sample(src, cfg.grid, cfg.workers), cfg, T);
}

// ---------------------------------------------------------------------------
// Generalized kernels

/// Weights of the generalized equation. Normalization requires
/// int_0^T b(t, T) dt = 1 - a(T).
struct Kernel {
    std::function<double(double)> a;
    std::function<double(double, double)> b;
    std::string tag;
};

inline Kernel poisson_kernel(double nu) {
    return {[nu](double T) { return std::exp(-nu * T); },
            [nu](double t, double T) { return nu * std::exp(-nu * (T - t)); },
            "poisson(nu=" + std::to_string(nu) + ")"};
}

inline Kernel rational_kernel() {
    return {[](double T) { return 1.0 / (1.0 + T); },
            [](double, double T) { return 1.0 / (1.0 + T); }, "rational"};
}

inline Kernel no_reduction_kernel() {
    return {[](double) { return 1.0; }, [](double, double) { return 0.0; }, "none"};
}

/// |int_0^T b(t, T) dt + a(T) - 1| by the trapezoid rule with one Richardson
/// step (trapezoid on `steps` and `steps / 2` panels).
inline double kernel_normalization_residual(const Kernel& k, double T, std::size_t steps = 1000) {
    if (T < 0.0) throw Error(Errc::InvalidArgument, "T must be >= 0");
    if (T == 0.0) return std::abs(k.a(0.0) - 1.0);
    steps += steps % 2;
    auto trap = [&](std::size_t panels) {
        const double h = T / static_cast<double>(panels);
        double s = 0.5 * (k.b(0.0, T) + k.b(T, T));
        for (std::size_t j = 1; j < panels; ++j) s += k.b(static_cast<double>(j) * h, T);
        return s * h;
    };
    const double fine = trap(steps);
    const double coarse = trap(steps / 2);
    const double integral = fine + (fine - coarse) / 3.0;
    return std::abs(integral + k.a(T) - 1.0);
}

inline Trajectory march_solve_general(const SampledSource& m, const Kernel& kernel,
                                      const TimeGrid& grid) {
    // normalization on a handful of sampled horizons
    for (std::size_t s = 1; s <= 8; ++s) {
        const double T = grid.t_max() * static_cast<double>(s) / 8.0;
        const double r = kernel_normalization_residual(kernel, T);
        if (r > kKernelNormTol)
            throw Error(Errc::KernelNormalizationViolation,
                        "kernel '" + kernel.tag + "' at T = " + std::to_string(T) +
                            " has residual " + std::to_string(r),
                        {}, r);
    }
    const std::size_t nodes = grid.nodes();
    const Index n = m.right.front().rows();
    const double h = grid.h();
    const bool jumps = !m.left.empty();
    const detail::MatrixRun mr = detail::to_run(m.right, n);
    detail::MatrixRun ml;
    if (jumps) ml = detail::to_run(m.left, n);

    detail::MatrixRun yr(nodes, n), yl;
    if (jumps) yl = detail::MatrixRun(nodes, n);
    std::vector<double> s(nodes);
    const double a0 = kernel.a(0.0);
    yr.set(0, a0 * m.right[0]);
    if (jumps) yl.set(0, a0 * m.right[0]);
    s[0] = a0;

    Matrix acc(n, n);
    for (std::size_t k = 1; k < nodes; ++k) {
        const double T = grid.t(k);
        const double ak = kernel.a(T);
        acc.setZero();
        double sacc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double bj = kernel.b(grid.t(j), T);
            const double wj = 0.5 * h * bj * (j == 0 ? 1.0 : 2.0);
            sacc += wj * s[j];
            if (jumps) {
                detail::gemm_acc(acc.data(), ml.at(k - j), yr.at(j), n, 0.5 * h * bj);
                if (j > 0) detail::gemm_acc(acc.data(), mr.at(k - j), yl.at(j), n, 0.5 * h * bj);
            } else {
                detail::gemm_acc(acc.data(), mr.at(k - j), yr.at(j), n, wj);
            }
        }
        const double diag = 0.5 * h * kernel.b(T, T);
        s[k] = (ak + sacc) / (1.0 - diag);
        const Matrix lower = (Matrix::Identity(n, n) - diag * m.right[0]).partialPivLu().solve(
            ak * m.left_at(k) + acc);
        if (jumps) {
            yl.set(k, lower);
            yr.set(k, lower + ak * (m.right[k] - m.left[k]));
        } else {
            yr.set(k, lower);
        }
    }
    for (std::size_t k = 0; k < nodes; ++k) {
        yr.map(k) /= s[k];
        if (jumps) yl.map(k) /= s[k];
    }
    Trajectory tr = detail::to_trajectory(grid, yr, jumps ? &yl : nullptr, nodes);
    validate_trajectory(tr);
    return tr;
}

inline Trajectory march_solve_general(const MatrixSource& src, const Kernel& kernel,
                                      const TimeGrid& grid, std::size_t workers = 1) {
    return march_solve_general(sample(src, grid, workers), kernel, grid);
}

// ---------------------------------------------------------------------------
// Differentiated form

/// Checks the once-differentiated equation
///
///   Mbar'(T) = e^{-nu T} [ M'(T) + L_1(T) + nu int_0^T M(T-t) Mbar'(t) e^{nu t} dt ],
///   L_1(T)   = nu M(T) Mbar(0) - nu M(T)          (L_0 = 0),
///
/// with Mbar' from grid finite differences of the trajectory and M' from a
/// fine centered difference of the source. Returns the largest entrywise
/// residual over the nodes.
inline double derivative_consistency(const MatrixSource& src, const Trajectory& tr,
                                     const SolverConfig& cfg, int order = 1) {
    if (order != 1)
        throw Error(Errc::UnsupportedOrder, "only first derivatives are supported",
                    static_cast<std::size_t>(order));
    if (src.has_jumps())
        throw Error(Errc::InvalidArgument, "derivative check needs a continuous source");
    cfg.check();
    const TimeGrid& grid = tr.grid;
    const std::size_t nodes = tr.values.size();
    if (nodes < 3) throw Error(Errc::InvalidArgument, "need at least three nodes");
    const double h = grid.h();
    const double nu = cfg.nu;
    const Index n = tr.values.front().rows();

    std::vector<Matrix> dbar(nodes);
    dbar[0] = (-3.0 * tr.values[0] + 4.0 * tr.values[1] - tr.values[2]) / (2.0 * h);
    for (std::size_t k = 1; k + 1 < nodes; ++k)
        dbar[k] = (tr.values[k + 1] - tr.values[k - 1]) / (2.0 * h);
    const std::size_t e = nodes - 1;
    dbar[e] = (3.0 * tr.values[e] - 4.0 * tr.values[e - 1] + tr.values[e - 2]) / (2.0 * h);

    std::vector<Matrix> ms(nodes);
    for (std::size_t k = 0; k < nodes; ++k) ms[k] = src.value(grid.t(k));

    const double delta = 1e-4;
    auto dm = [&](double t) -> Matrix {
        if (t >= delta) return (src.value(t + delta) - src.value(t - delta)) / (2.0 * delta);
        return (-3.0 * src.value(t) + 4.0 * src.value(t + delta) - src.value(t + 2.0 * delta)) /
               (2.0 * delta);
    };

    const Matrix id = Matrix::Identity(n, n);
    double worst = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double T = grid.t(k);
        const Matrix l1 = nu * ms[k] * (tr.values[0] - id);
        Matrix integral = Matrix::Zero(n, n);
        for (std::size_t j = 0; j <= k; ++j) {
            const double w = (j == 0 || j == k) ? 0.5 * h : h;
            integral += (w * std::exp(-nu * (T - grid.t(j)))) * (ms[k - j] * dbar[j]);
        }
        if (k == 0) integral.setZero();
        const Matrix rhs = std::exp(-nu * T) * (dm(T) + l1) + nu * integral;
        worst = std::max(worst, sup_distance(dbar[k], rhs));
    }
    return worst;
}

} // namespace reduktor
