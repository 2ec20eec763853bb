#include <reduktor/scalar.hpp>
#include <reduktor/volterra.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace reduktor;

namespace {

// |beta(T) - e^{-nu T} alpha(T) - nu int_0^T alpha(T - t) beta(t) e^{-nu (T - t)} dt|
// with Gauss-Legendre panels split at every discontinuity of the integrand.
double equation_residual(const std::function<double(double)>& beta, const std::function<double(double)>& alpha,
                         double nu, double T, double tau) {
    std::vector<double> cuts{0.0, T};
    if (tau > 0.0)
        for (double k = 1.0; k * tau < T; k += 1.0) {
            cuts.push_back(k * tau);
            cuts.push_back(T - k * tau);
        }
    std::sort(cuts.begin(), cuts.end());
    auto f = [&](double t) { return alpha(T - t) * beta(t) * std::exp(-nu * (T - t)); };
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        if (cuts[k + 1] - cuts[k] > 1e-14)
            integral += boost::math::quadrature::gauss<double, 30>::integrate(f, cuts[k], cuts[k + 1]);
    return std::abs(beta(T) - std::exp(-nu * T) * alpha(T) - nu * integral);
}

double alternating(double t, double tau) {
    return static_cast<long>(std::floor(t / tau + 1e-13)) % 2 == 0 ? 1.0 : 0.0;
}

// y''' = y'' - y' + y / 2, y(0) = 1, y'(0) = 1, y''(0) = 1/2; beta = e^{-t} y.
double cosine_beta_exact(double t) {
    Eigen::Matrix3d a;
    a << 0, 1, 0, 0, 0, 1, 0.5, -1, 1;
    const Eigen::Vector3d y0(1.0, 1.0, 0.5);
    const Eigen::Matrix3d e = (a * t).exp();
    return std::exp(-t) * (e * y0)(0);
}

} // namespace

TEST(ScalarInput, ValuesAndJumps) {
    const auto alt = ScalarInput::alternating(0.5);
    EXPECT_EQ(alt.value(0.0), 1.0);
    EXPECT_EQ(alt.value(0.49), 1.0);
    EXPECT_EQ(alt.value(0.5), 0.0);
    EXPECT_EQ(alt.left(0.5), 1.0);
    EXPECT_EQ(alt.value(1.0), 1.0);
    EXPECT_EQ(alt.left(1.0), 0.0);
    EXPECT_EQ(alt.jump_times(2.0), (std::vector<double>{0.5, 1.0, 1.5, 2.0}));
    EXPECT_NEAR(ScalarInput::cosine().value(1.0), 0.5 + 0.5 * std::cos(1.0), 1e-16);
    const ScalarInput tab(TabulatedInput{0.5, {0.0, 1.0, 0.5}});
    EXPECT_NEAR(tab.value(0.25), 0.5, 1e-16);
    EXPECT_NEAR(tab.value(0.75), 0.75, 1e-16);
    EXPECT_EQ(tab.value(9.0), 0.5);
    EXPECT_THROW(ScalarInput::constant(1.5), Error);
    EXPECT_THROW(ScalarInput(TrigInput{0.5, 0.7}), Error);
}

TEST(ConvexFamily, ClosedUnderProducts) {
    std::mt19937_64 rng(301);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Matrix id = Matrix::Identity(4, 4);
    const Matrix th = theta(4).matrix();
    for (int k = 0; k < 50; ++k) {
        const double a = u(rng), b = u(rng);
        const Matrix lhs = (a * id + (1 - a) * th) * (b * id + (1 - b) * th);
        EXPECT_LT(sup_distance(lhs, a * b * id + (1 - a * b) * th), 1e-15);
    }
}

TEST(ScalarMarch, FixedPoints) {
    const TimeGrid grid(5.0, 500);
    for (double b : scalar_march(ScalarInput::constant(1.0), 1.3, grid).beta) EXPECT_NEAR(b, 1.0, 1e-12);
    for (double b : scalar_march(ScalarInput::constant(0.0), 1.3, grid).beta) EXPECT_EQ(b, 0.0);
}

TEST(ScalarMarch, StartsAtAlpha) {
    EXPECT_EQ(scalar_march(ScalarInput::constant(0.4), 1.0, TimeGrid(1.0, 10)).beta[0], 0.4);
    EXPECT_EQ(scalar_march(ScalarInput::cosine(), 1.0, TimeGrid(1.0, 10)).beta[0], 1.0);
}

TEST(ScalarMarch, ConstantInputClosedForm) {
    // beta = c e^{-nu (1 - c) T}
    const double c = 0.6, nu = 1.5;
    const auto s = scalar_march(ScalarInput::constant(c), nu, TimeGrid(4.0, 4000));
    for (std::size_t k = 0; k < s.beta.size(); k += 250)
        EXPECT_NEAR(s.beta[k], c * std::exp(-nu * (1 - c) * s.grid.t(k)), 1e-7);
}

TEST(ScalarMarch, EscapingValuesAreReported) {
    const ScalarInput wild(CustomInput{[](double) { return 3.0; }});
    try {
        (void)scalar_march(wild, 1.0, TimeGrid(2.0, 20));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ValueEscape);
        ASSERT_TRUE(e.index().has_value());
    }
}

TEST(ScalarMarch, JumpsMustSitOnNodes) {
    EXPECT_THROW(scalar_march(ScalarInput::alternating(0.33), 1.0, TimeGrid(1.0, 10)), Error);
}

TEST(ScalarMarch, GenericInputDecays) {
    // delta = int alpha e^{-t} < 1 here, so beta -> 0 with a decreasing envelope.
    const auto s = scalar_march(ScalarInput::cosine(), 1.0, TimeGrid(60.0, 6000));
    auto sup_on = [&](double a, double b) {
        double m = 0.0;
        for (std::size_t k = 0; k < s.beta.size(); ++k)
            if (s.grid.t(k) >= a && s.grid.t(k) <= b) m = std::max(m, s.beta[k]);
        return m;
    };
    double prev = sup_on(10.0, 15.0);
    for (double T = 15.0; T <= 50.0; T += 5.0) {
        const double cur = sup_on(T, T + 5.0);
        EXPECT_LT(cur, prev);
        prev = cur;
    }
    EXPECT_LT(s.back(), 1e-4);
}

TEST(Delay, FirstTwoIntervalsClosedForm) {
    for (auto [tau, nu] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
        const DelaySolution sol(tau, nu, 10);
        for (double s : {0.0, 0.1, 0.5, 0.99}) EXPECT_NEAR(sol(s * tau), 1.0, 1e-15);
        for (double s : {0.0, 0.2, 0.7, 0.999}) {
            const double T = tau * (1.0 + s);
            EXPECT_NEAR(sol(T), 1.0 + (nu * tau - nu * T - 1.0) * std::exp(-nu * tau), 1e-14);
        }
    }
}

TEST(Delay, JumpConditions) {
    for (auto [tau, nu] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
        const DelaySolution sol(tau, nu, 10);
        for (std::size_t k = 1; k <= 8; ++k) {
            const double t = tau * double(k);
            const double expect = (k % 2 ? -1.0 : 1.0) * std::exp(-nu * double(k) * tau);
            EXPECT_NEAR(sol(t) - sol.left(t), expect, 1e-13) << "k=" << k;
        }
    }
}

TEST(Delay, SatisfiesTwoLagRecurrence) {
    // beta'(T + 2 tau) = e^{-2 nu tau} beta'(T) - nu e^{-nu tau} beta(T + tau) + nu e^{-2 nu tau} beta(T)
    const double tau = 0.8, nu = 1.4;
    const DelaySolution sol(tau, nu, 9);
    const double e1 = std::exp(-nu * tau), e2 = e1 * e1;
    for (std::size_t i = 0; i + 2 < sol.intervals(); ++i)
        for (double s : {0.1, 0.45, 0.9}) {
            const double d2 = sol.piece(i + 2).derivative()(s) / tau;
            const double d0 = sol.piece(i).derivative()(s) / tau;
            const double rhs = e2 * d0 - nu * e1 * sol.piece(i + 1)(s) + nu * e2 * sol.piece(i)(s);
            EXPECT_NEAR(d2, rhs, 1e-12);
        }
}

TEST(Delay, SolvesTheIntegralEquation) {
    for (auto [tau, nu] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}, std::pair{0.7, 0.6}}) {
        const DelaySolution sol(tau, nu, 10);
        auto beta = [&](double t) { return sol(t); };
        auto alpha = [tau = tau](double t) { return alternating(t, tau); };
        for (double T = 0.13; T < sol.horizon(); T += 0.37 * tau)
            EXPECT_LT(equation_residual(beta, alpha, nu, T, tau), 1e-12) << "tau=" << tau << " T=" << T;
    }
}

TEST(Delay, AgreesWithScalarMarch) {
    for (auto [tau, nu] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
        const auto delay = piecewise_delay_solve(tau, nu, 10, 1000);
        const auto march = scalar_march(ScalarInput::alternating(tau), nu, delay.grid);
        ASSERT_EQ(delay.beta.size(), march.beta.size());
        for (std::size_t k = 0; k < delay.beta.size(); ++k) {
            EXPECT_NEAR(delay.beta[k], march.beta[k], 1e-6);
            EXPECT_NEAR(delay.beta_left[k], march.beta_left[k], 1e-6);
        }
        ASSERT_EQ(delay.jumps.size(), march.jumps.size());
        for (std::size_t k = 0; k < delay.jumps.size(); ++k) {
            EXPECT_NEAR(delay.jumps[k].t, march.jumps[k].t, 1e-12);
            EXPECT_NEAR(delay.jumps[k].right - delay.jumps[k].left, march.jumps[k].right - march.jumps[k].left, 1e-6);
        }
    }
}

TEST(Trig, CombinedSystemMatchesItsClosedForm) {
    const auto sol = trig_ode_solve(TimeGrid(5.0, 500), TrigSystem::Combined);
    for (std::size_t k = 0; k < sol.trajectory.beta.size(); k += 20)
        EXPECT_NEAR(sol.trajectory.beta[k], cosine_beta_exact(sol.trajectory.grid.t(k)), 1e-12);
}

TEST(Trig, CombinedClosedFormSolvesTheIntegralEquation) {
    auto alpha = [](double t) { return 0.5 + 0.5 * std::cos(t); };
    for (double T : {0.5, 1.0, 2.5, 5.0}) EXPECT_LT(equation_residual(cosine_beta_exact, alpha, 1.0, T, 0.0), 1e-12);
}

TEST(Trig, CombinedAgreesWithScalarMarch) {
    const TimeGrid grid(5.0, 5000);
    const auto ode = trig_ode_solve(grid, TrigSystem::Combined);
    const auto march = scalar_march(ScalarInput::cosine(), 1.0, grid);
    for (std::size_t k = 0; k < grid.nodes(); ++k) EXPECT_NEAR(ode.trajectory.beta[k], march.beta[k], 1e-6);
}

TEST(Trig, SplitSystemInitialDataAndRealness) {
    const auto sol = trig_ode_solve(TimeGrid(5.0, 500), TrigSystem::Split);
    EXPECT_EQ(sol.trajectory.beta[0], 1.0);
    EXPECT_LT(sol.max_imaginary, 1e-9);
}

TEST(Trig, SplitSystemIntegratorMatchesMatrixExponential) {
    // RK4 output against exp(A t) x0 for the 9-dimensional real system.
    const auto a = detail::trig_system_matrix(TrigSystem::Split);
    Eigen::Matrix<double, 9, 1> x0;
    x0 << 0.5, 0.5, 0.5, 0.25, 0.0, -0.25, 0.0, -0.25, 0.25;
    const auto sol = trig_ode_solve(TimeGrid(5.0, 50), TrigSystem::Split);
    for (std::size_t k = 0; k < sol.a.size(); k += 10) {
        const double t = sol.trajectory.grid.t(k);
        const Eigen::Matrix<double, 9, 9> at = a * t;
        const Eigen::Matrix<double, 9, 1> x = at.exp() * x0;
        EXPECT_NEAR(sol.a[k](0), x(0), 1e-10);
        EXPECT_NEAR(sol.b[k](0).real(), x(3), 1e-10);
        EXPECT_NEAR(sol.b[k](0).imag(), x(4), 1e-10);
    }
}

TEST(Lift, EndpointsAndFullSolver) {
    ScalarTrajectory s{TimeGrid(1.0, 1), {1.0, 0.0}, {1.0, 0.0}, {}};
    const Trajectory tr = lift_scalar(s, 3);
    EXPECT_EQ(tr.values[0], Matrix(Matrix::Identity(3, 3)));
    EXPECT_LT(sup_distance(tr.values[1], theta(3).matrix()), 1e-16);

    const TimeGrid grid(5.0, 5000);
    SolverConfig c;
    c.nu = 1.0;
    c.grid = grid;
    const Trajectory full = march_solve(scalar_source(ScalarInput::cosine(), 3), c);
    const Trajectory lifted = lift_scalar(trig_ode_solve(grid, TrigSystem::Combined).trajectory, 3);
    EXPECT_LT(max_distance(full, lifted), 1e-6);
}
