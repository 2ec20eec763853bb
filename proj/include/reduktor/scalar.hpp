// scalar.hpp: the scalar reduction M(t) = alpha(t) 1 + (1 - alpha(t)) Theta.
//
// On that family the averaged evolution stays of the same form,
// Mbar(t) = beta(t) 1 + (1 - beta(t)) Theta, with
//
//   beta(T) = e^{-nu T} alpha(T) + nu e^{-nu T} int_0^T alpha(T - t) beta(t) e^{nu t} dt.
//
// Three solution routes live here: the trapezoid march (any input), the
// method of steps for a 1,0,1,0,... input on intervals of length tau, and the
// constant-coefficient ODE route for alpha = 1/2 + cos(t)/2 at nu = 1.
#pragma once

#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace reduktor {

inline constexpr double kScalarTol = 1e-7;

// ---------------------------------------------------------------------------
// Inputs

struct ConstantInput {
    double c = 1.0;
};

/// alpha(t) = pattern[floor(t / tau) mod pattern.size()], right-continuous.
struct PiecewiseInput {
    double tau = 1.0;
    std::vector<double> pattern{1.0, 0.0};
};

/// alpha(t) = mean + amplitude cos(t)
struct TrigInput {
    double mean = 0.5;
    double amplitude = 0.5;
};

/// Samples at t = k * spacing, linearly interpolated and held past the end.
struct TabulatedInput {
    double spacing = 1.0;
    std::vector<double> values;
};

/// Any continuous alpha with values in [0, 1].
struct CustomInput {
    std::function<double(double)> fn;
};

class ScalarInput {
public:
    using Variant = std::variant<ConstantInput, PiecewiseInput, TrigInput, TabulatedInput, CustomInput>;

    ScalarInput(Variant v) : v_(std::move(v)) { check(); }

    static ScalarInput constant(double c) { return ScalarInput(ConstantInput{c}); }
    static ScalarInput alternating(double tau) { return ScalarInput(PiecewiseInput{tau, {1.0, 0.0}}); }
    static ScalarInput cosine() { return ScalarInput(TrigInput{0.5, 0.5}); }

    const Variant& variant() const noexcept { return v_; }

    double value(double t) const {
        return std::visit(
            [t](const auto& in) -> double {
                using T = std::decay_t<decltype(in)>;
                if constexpr (std::is_same_v<T, ConstantInput>) {
                    return in.c;
                } else if constexpr (std::is_same_v<T, PiecewiseInput>) {
                    return in.pattern[slot(in, t)];
                } else if constexpr (std::is_same_v<T, TrigInput>) {
                    return in.mean + in.amplitude * std::cos(t);
                } else if constexpr (std::is_same_v<T, TabulatedInput>) {
                    const double x = t / in.spacing;
                    if (x <= 0.0) return in.values.front();
                    const auto k = static_cast<std::size_t>(x);
                    if (k + 1 >= in.values.size()) return in.values.back();
                    const double f = x - static_cast<double>(k);
                    return (1.0 - f) * in.values[k] + f * in.values[k + 1];
                } else {
                    return in.fn(t);
                }
            },
            v_);
    }

    /// alpha(t^-); equals value(t) away from jumps.
    double left(double t) const {
        if (const auto* p = std::get_if<PiecewiseInput>(&v_)) {
            const double x = t / p->tau;
            const double k = std::round(x);
            if (k >= 1.0 && std::abs(x - k) <= 1e-12 * std::max(1.0, x)) {
                const auto idx = static_cast<std::size_t>(k) - 1;
                return p->pattern[idx % p->pattern.size()];
            }
        }
        return value(t);
    }

    bool has_jumps() const noexcept { return std::holds_alternative<PiecewiseInput>(v_); }

    /// Discontinuity times in (0, t_max].
    std::vector<double> jump_times(double t_max) const {
        std::vector<double> out;
        if (const auto* p = std::get_if<PiecewiseInput>(&v_)) {
            const std::size_t len = p->pattern.size();
            for (std::size_t k = 1; static_cast<double>(k) * p->tau <= t_max * (1.0 + 1e-12); ++k)
                if (p->pattern[k % len] != p->pattern[(k - 1) % len])
                    out.push_back(static_cast<double>(k) * p->tau);
        }
        return out;
    }

    std::string describe() const {
        return std::visit(
            [](const auto& in) -> std::string {
                using T = std::decay_t<decltype(in)>;
                if constexpr (std::is_same_v<T, ConstantInput>) return "constant";
                else if constexpr (std::is_same_v<T, PiecewiseInput>) return "piecewise";
                else if constexpr (std::is_same_v<T, TrigInput>) return "trig";
                else if constexpr (std::is_same_v<T, TabulatedInput>) return "tabulated";
                else return "custom";
            },
            v_);
    }

private:
    static std::size_t slot(const PiecewiseInput& p, double t) {
        const double x = t / p.tau;
        double k = std::floor(x);
        // snap values a hair below an integer multiple of tau onto it
        if (std::abs(x - std::round(x)) <= 1e-12 * std::max(1.0, x)) k = std::round(x);
        if (k < 0.0) k = 0.0;
        return static_cast<std::size_t>(k) % p.pattern.size();
    }

    void check() const {
        auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
        std::visit(
            [&](const auto& in) {
                using T = std::decay_t<decltype(in)>;
                if constexpr (std::is_same_v<T, ConstantInput>) {
                    if (!in_range(in.c)) throw Error(Errc::InvalidArgument, "alpha outside [0,1]");
                } else if constexpr (std::is_same_v<T, PiecewiseInput>) {
                    if (!(in.tau > 0.0) || in.pattern.empty())
                        throw Error(Errc::InvalidArgument, "piecewise input needs tau > 0 and a pattern");
                    for (double v : in.pattern)
                        if (!in_range(v)) throw Error(Errc::InvalidArgument, "alpha outside [0,1]");
                } else if constexpr (std::is_same_v<T, TrigInput>) {
                    if (!in_range(in.mean - std::abs(in.amplitude)) ||
                        !in_range(in.mean + std::abs(in.amplitude)))
                        throw Error(Errc::InvalidArgument, "alpha outside [0,1]");
                } else if constexpr (std::is_same_v<T, TabulatedInput>) {
                    if (!(in.spacing > 0.0) || in.values.empty())
                        throw Error(Errc::InvalidArgument, "tabulated input needs samples");
                    for (double v : in.values)
                        if (!in_range(v)) throw Error(Errc::InvalidArgument, "alpha outside [0,1]");
                } else {
                    if (!in.fn) throw Error(Errc::InvalidArgument, "empty custom input");
                }
            },
            v_);
    }

    Variant v_;
};

/// alpha(t) 1 + (1 - alpha(t)) Theta_n as a matrix source (with left limits
/// when alpha jumps).
inline MatrixSource scalar_source(const ScalarInput& alpha, Index n) {
    const Matrix id = Matrix::Identity(n, n);
    const Matrix th = theta(static_cast<std::size_t>(n)).matrix();
    MatrixSource s;
    s.dim = n;
    s.value = [alpha, id, th](double t) {
        const double a = alpha.value(t);
        return Matrix(a * id + (1.0 - a) * th);
    };
    if (alpha.has_jumps())
        s.left_limit = [alpha, id, th](double t) {
            const double a = alpha.left(t);
            return Matrix(a * id + (1.0 - a) * th);
        };
    return s;
}

// ---------------------------------------------------------------------------
// Trajectories

struct Jump {
    double t;
    double left;
    double right;
};

struct ScalarTrajectory {
    TimeGrid grid;
    std::vector<double> beta;      // right limits at the nodes
    std::vector<double> beta_left; // left limits (equal to beta away from jumps)
    std::vector<Jump> jumps;

    double back() const { return beta.back(); }
};

inline std::vector<Jump> collect_jumps(const TimeGrid& grid, const std::vector<double>& right,
                                       const std::vector<double>& left,
                                       const std::vector<double>& jump_times) {
    std::vector<Jump> out;
    for (double t : jump_times) {
        const double x = t / grid.h();
        const auto k = static_cast<std::size_t>(std::llround(x));
        if (k < right.size()) out.push_back({grid.t(k), left[k], right[k]});
    }
    return out;
}

namespace detail {
inline void require_jumps_on_nodes(const std::vector<double>& times, const TimeGrid& grid) {
    for (double t : times) {
        const double x = t / grid.h();
        if (std::abs(x - std::round(x)) > 1e-9 * std::max(1.0, x))
            throw Error(Errc::InvalidArgument,
                        "discontinuity at t = " + std::to_string(t) + " is not a grid node");
    }
}
} // namespace detail

/// Trapezoid march specialized to scalars; same normalization and one-sided
/// node handling as the matrix solver.
inline ScalarTrajectory scalar_march(const ScalarInput& alpha, double nu, const TimeGrid& grid) {
    if (!(nu >= 0.0)) throw Error(Errc::InvalidArgument, "nu must be >= 0");
    const std::size_t nodes = grid.nodes();
    const double h = grid.h();
    const double half = 0.5 * nu * h;
    if (!(half < 1.0)) throw Error(Errc::GridTooCoarse, "nu * h must stay below 2", {}, nu * h);
    const double decay = (1.0 - half) / (1.0 + half);
    const auto jt = alpha.jump_times(grid.t_max());
    detail::require_jumps_on_nodes(jt, grid);

    std::vector<double> dpow(nodes), ar(nodes), al(nodes), wr(nodes), wl(nodes);
    dpow[0] = 1.0;
    for (std::size_t k = 1; k < nodes; ++k) dpow[k] = dpow[k - 1] * decay;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double t = grid.t(k);
        ar[k] = alpha.value(t);
        al[k] = k == 0 ? ar[0] : alpha.left(t);
        wr[k] = dpow[k] * ar[k];
        wl[k] = dpow[k] * al[k];
    }
    std::vector<double> br(nodes), bl(nodes);
    br[0] = bl[0] = ar[0];
    const double implicit = 1.0 / (1.0 - half * ar[0]);
    for (std::size_t k = 1; k < nodes; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += wl[k - j] * br[j];
        for (std::size_t j = 1; j < k; ++j) acc += wr[k - j] * bl[j];
        bl[k] = implicit * (dpow[k] * al[k] + half * acc);
        br[k] = bl[k] + dpow[k] * (ar[k] - al[k]);
        for (double v : {bl[k], br[k]})
            if (v < -kScalarTol || v > 1.0 + kScalarTol)
                throw Error(Errc::ValueEscape,
                            "beta = " + std::to_string(v) + " at node " + std::to_string(k), k, v);
    }
    ScalarTrajectory out{grid, std::move(br), std::move(bl), {}};
    out.jumps = collect_jumps(grid, out.beta, out.beta_left, jt);
    return out;
}

/// Per-node beta 1 + (1 - beta) Theta_n.
inline Trajectory lift_scalar(const ScalarTrajectory& s, Index n) {
    if (n < 2) throw Error(Errc::InvalidArgument, "lift needs n >= 2");
    const Matrix id = Matrix::Identity(n, n);
    const Matrix th = theta(static_cast<std::size_t>(n)).matrix();
    Trajectory tr{s.grid, {}, {}};
    for (double b : s.beta) tr.values.push_back(b * id + (1.0 - b) * th);
    bool jumps = false;
    for (std::size_t k = 0; k < s.beta.size(); ++k) jumps = jumps || s.beta_left[k] != s.beta[k];
    if (jumps)
        for (double b : s.beta_left) tr.left.push_back(b * id + (1.0 - b) * th);
    validate_trajectory(tr);
    return tr;
}

// ---------------------------------------------------------------------------
// Method of steps for the alternating 1,0 input

/// Polynomial in the local variable s = (t - i tau) / tau on [0, 1].
struct LocalPolynomial {
    std::vector<double> c; // c[0] + c[1] s + ...

    double operator()(double s) const {
        double v = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * s + *it;
        return v;
    }
    LocalPolynomial antiderivative() const {
        LocalPolynomial p;
        p.c.assign(c.size() + 1, 0.0);
        for (std::size_t k = 0; k < c.size(); ++k) p.c[k + 1] = c[k] / static_cast<double>(k + 1);
        return p;
    }
    LocalPolynomial derivative() const {
        LocalPolynomial p;
        for (std::size_t k = 1; k < c.size(); ++k) p.c.push_back(c[k] * static_cast<double>(k));
        if (p.c.empty()) p.c.push_back(0.0);
        return p;
    }
    LocalPolynomial& axpy(double w, const LocalPolynomial& o) {
        if (c.size() < o.c.size()) c.resize(o.c.size(), 0.0);
        for (std::size_t k = 0; k < o.c.size(); ++k) c[k] += w * o.c[k];
        return *this;
    }
};

/// Exact piecewise-polynomial solution for alpha = 1 on [2k tau, (2k+1) tau)
/// and 0 on [(2k+1) tau, (2k+2) tau).
///
/// Intervals 0 and 1 are closed form: beta = 1, then
/// beta = 1 + (nu tau - nu T - 1) e^{-nu tau}. From interval 2 on, the
/// two-lag recurrence
///
///   beta'(T + 2 tau) = e^{-2 nu tau} beta'(T) - nu e^{-nu tau} beta(T + tau)
///                      + nu e^{-2 nu tau} beta(T)
///
/// has a polynomial right-hand side, so each interval integrates exactly;
/// it starts from the previous interval's end plus the jump
/// (-1)^k e^{-nu k tau}.
class DelaySolution {
public:
    DelaySolution(double tau, double nu, std::size_t intervals) : tau_(tau), nu_(nu) {
        if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be > 0");
        if (!(nu >= 0.0)) throw Error(Errc::InvalidArgument, "nu must be >= 0");
        if (intervals < 2) throw Error(Errc::InvalidArgument, "need at least two intervals");
        const double e1 = std::exp(-nu * tau);
        const double e2 = e1 * e1;
        const double nt = nu * tau;
        pieces_.push_back({{1.0}});
        pieces_.push_back({{1.0 - e1, -nt * e1}});
        for (std::size_t i = 2; i < intervals; ++i) {
            const LocalPolynomial& p1 = pieces_[i - 1];
            const LocalPolynomial& p2 = pieces_[i - 2];
            LocalPolynomial integrand;
            integrand.axpy(-nt * e1, p1).axpy(nt * e2, p2);
            LocalPolynomial q = integrand.antiderivative();
            q.axpy(e2, p2);
            const double start = p1(1.0) + jump(i);
            q.c[0] += start - e2 * p2(0.0);
            pieces_.push_back(std::move(q));
        }
    }

    double tau() const noexcept { return tau_; }
    double nu() const noexcept { return nu_; }
    std::size_t intervals() const noexcept { return pieces_.size(); }
    const LocalPolynomial& piece(std::size_t i) const { return pieces_.at(i); }
    double horizon() const noexcept { return tau_ * static_cast<double>(pieces_.size()); }

    /// (-1)^k e^{-nu k tau}
    double jump(std::size_t k) const {
        const double mag = std::exp(-nu_ * tau_ * static_cast<double>(k));
        return k % 2 ? -mag : mag;
    }

    /// Right-continuous value. At the horizon this includes the jump there;
    /// beyond it the value is held.
    double operator()(double t) const {
        auto [i, s] = locate(t);
        if (i >= pieces_.size()) return pieces_.back()(1.0) + jump(pieces_.size());
        return pieces_[i](s);
    }

    double left(double t) const {
        auto [i, s] = locate(t);
        if (s == 0.0 && i > 0) return pieces_[i - 1](1.0);
        if (i >= pieces_.size()) return pieces_.back()(1.0);
        return pieces_[i](s);
    }

private:
    std::pair<std::size_t, double> locate(double t) const {
        const double x = t / tau_;
        double k = std::floor(x);
        if (std::abs(x - std::round(x)) <= 1e-12 * std::max(1.0, x)) k = std::round(x);
        if (k < 0.0) k = 0.0;
        const auto i = static_cast<std::size_t>(k);
        double s = x - k;
        if (s < 0.0 || std::abs(s) <= 1e-12 * std::max(1.0, x)) s = 0.0;
        return {i, s};
    }

    double tau_;
    double nu_;
    std::vector<LocalPolynomial> pieces_;
};

/// Samples the method-of-steps solution on K intervals, steps_per_interval
/// nodes per interval.
inline ScalarTrajectory piecewise_delay_solve(double tau, double nu, std::size_t intervals,
                                              std::size_t steps_per_interval = 100) {
    const DelaySolution sol(tau, nu, intervals);
    const TimeGrid grid(sol.horizon(), intervals * steps_per_interval);
    ScalarTrajectory out{grid, {}, {}, {}};
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const std::size_t i = k / steps_per_interval;
        const std::size_t r = k % steps_per_interval;
        const double right = sol(grid.t(k));
        const double left = (r == 0 && i > 0) ? sol.piece(i - 1)(1.0) : right;
        out.beta.push_back(right);
        out.beta_left.push_back(left);
        if (r == 0 && i > 0) out.jumps.push_back({grid.t(k), left, right});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cosine input, nu = 1: constant-coefficient ODE route

enum class TrigSystem {
    /// e^t beta = a + b e^{it} + conj(b) e^{-it} with
    /// a''' - a'' + a' - a/2 = 0,               a(0) = a'(0) = a''(0) = 1/2,
    /// b''' + (3i - 1) b'' - 2(i + 1) b' - b/4 = 0,
    ///                                          b(0) = 1/4, b'(0) = -1/4, b''(0) = (i - 1)/4.
    Split,
    /// y = e^t beta solves y''' - y'' + y' - y/2 = 0 (the Laplace-transform
    /// characteristic of the equation) with y(0) = 1, y'(0) = 1, y''(0) = 1/2.
    Combined,
};

struct TrigSolution {
    ScalarTrajectory trajectory;
    // state per node: a, a', a'' (real) and b, b', b'' (complex; zero for Combined)
    std::vector<Eigen::Vector3d> a;
    std::vector<Eigen::Vector3cd> b;
    double max_imaginary = 0.0;
};

namespace detail {

// x' = A x for the 9-dim real state (a, a', a'', Re b, Im b, Re b', Im b', Re b'', Im b'')
inline Eigen::Matrix<double, 9, 9> trig_system_matrix(TrigSystem sys) {
    Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
    m(0, 1) = 1.0;
    m(1, 2) = 1.0;
    m(2, 0) = 0.5; // a''' = a'' - a' + a/2
    m(2, 1) = -1.0;
    m(2, 2) = 1.0;
    if (sys == TrigSystem::Split) {
        // b''' = -(3i - 1) b'' + 2(i + 1) b' + b/4
        using C = std::complex<double>;
        const C c2 = -C(-1.0, 3.0), c1 = C(2.0, 2.0), c0 = C(0.25, 0.0);
        m(3, 5) = 1.0;
        m(4, 6) = 1.0;
        m(5, 7) = 1.0;
        m(6, 8) = 1.0;
        auto put = [&](C c, int col) {
            m(7, col) += c.real();
            m(7, col + 1) += -c.imag();
            m(8, col) += c.imag();
            m(8, col + 1) += c.real();
        };
        put(c0, 3);
        put(c1, 5);
        put(c2, 7);
    }
    return m;
}

} // namespace detail

/// RK4 integration of the trig ODE route on the grid (substeps of at most
/// 1e-3), reconstructing beta(t) = e^{-t} (a + b e^{it} + conj(b) e^{-it}).
inline TrigSolution trig_ode_solve(const TimeGrid& grid, TrigSystem sys = TrigSystem::Split) {
    using State = Eigen::Matrix<double, 9, 1>;
    const auto A = detail::trig_system_matrix(sys);
    State x = State::Zero();
    if (sys == TrigSystem::Split) {
        x << 0.5, 0.5, 0.5, 0.25, 0.0, -0.25, 0.0, -0.25, 0.25;
    } else {
        x << 1.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
    }
    const std::size_t sub = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(grid.h() / 1e-3 - 1e-9)));
    const double dt = grid.h() / static_cast<double>(sub);

    TrigSolution out{ScalarTrajectory{grid, {}, {}, {}}, {}, {}, 0.0};
    auto record = [&](double t, const State& s) {
        using C = std::complex<double>;
        const C b(s(3), s(4));
        const C rot = std::polar(1.0, t);
        const C z = C(s(0), 0.0) + b * rot + std::conj(b) * std::conj(rot);
        out.max_imaginary = std::max(out.max_imaginary, std::abs(z.imag()));
        const double beta = std::exp(-t) * z.real();
        out.trajectory.beta.push_back(beta);
        out.trajectory.beta_left.push_back(beta);
        out.a.emplace_back(s(0), s(1), s(2));
        out.b.emplace_back(C(s(3), s(4)), C(s(5), s(6)), C(s(7), s(8)));
    };
    record(0.0, x);
    for (std::size_t k = 1; k < grid.nodes(); ++k) {
        for (std::size_t j = 0; j < sub; ++j) {
            const State k1 = A * x;
            const State k2 = A * (x + 0.5 * dt * k1);
            const State k3 = A * (x + 0.5 * dt * k2);
            const State k4 = A * (x + dt * k3);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        record(grid.t(k), x);
    }
    if (out.max_imaginary > kScalarTol)
        throw Error(Errc::NonRealReconstruction, "imaginary residue " + std::to_string(out.max_imaginary),
                    {}, out.max_imaginary);
    return out;
}

} // namespace reduktor
