#include <reduktor/jump_mc.hpp>
#include <reduktor/volterra.hpp>

#include "support/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace reduktor;

namespace {

// Fraction of entries with |x - mean| <= k * stderr.
double fraction_within(const Matrix& x, const McEstimate& e, double k) {
    int ok = 0;
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j) ok += std::abs(x(i, j) - e.mean(i, j)) <= k * e.stderr_(i, j) ? 1 : 0;
    return double(ok) / double(x.size());
}

} // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int k = 0; k < 100; ++k) {
        const auto x = a();
        EXPECT_EQ(x, b());
        EXPECT_NE(x, c());
        EXPECT_NE(x, d());
    }
}

TEST(Rng, UniformMoments) {
    CounterRng r(1, 0);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = r.open_uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
        s2 += u * u;
    }
    EXPECT_NEAR(s / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(s2 / n, 1.0 / 3.0, 0.003);
}

TEST(Realization, NoRateMeansNoJumps) {
    CounterRng r(3, 0);
    for (int k = 0; k < 100; ++k) EXPECT_TRUE(sample_realization(0.0, 5.0, r).jumps.empty());
}

TEST(Realization, CountIsPoisson) {
    // nu T = 10: mean count within 3 sigma = 3 sqrt(10 / R) of 10, variance close to 10
    const std::size_t R = 100000;
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < R; ++k) {
        CounterRng r(99, k);
        const auto real = sample_realization(2.0, 5.0, r);
        ASSERT_TRUE(real.valid());
        const double c = double(real.jumps.size());
        s += c;
        s2 += c * c;
    }
    const double mean = s / double(R);
    EXPECT_NEAR(mean, 10.0, 0.1);
    EXPECT_NEAR(s2 / double(R) - mean * mean, 10.0, 0.3);
}

TEST(Realization, PositionsAreUniform) {
    // Conditional on the count, positions are uniform on (0, T): first moment T/2.
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < 20000; ++k) {
        CounterRng r(5, k);
        for (double t : sample_realization(1.0, 4.0, r).jumps) {
            s += t;
            ++n;
        }
    }
    EXPECT_NEAR(s / double(n), 2.0, 4 * 4.0 / std::sqrt(12.0 * double(n)));
}

TEST(Realization, ReplayIsIdentical) {
    CounterRng a(11, 3), b(11, 3);
    EXPECT_EQ(sample_realization(3.0, 2.0, a).jumps, sample_realization(3.0, 2.0, b).jumps);
}

TEST(Evolve, OrderedProducts) {
    const auto model = fixtures::random_model(3, 2, 201);
    const auto src = model_source(model);
    EXPECT_EQ(evolve_realization(src, PoissonRealization{2.0, {}}), src.value(2.0));
    const Matrix one = evolve_realization(src, PoissonRealization{2.0, {0.7}});
    EXPECT_LT(sup_distance(one, src.value(1.3) * src.value(0.7)), 1e-15);
    const Matrix two = evolve_realization(src, PoissonRealization{2.0, {0.5, 1.2}});
    EXPECT_LT(sup_distance(two, src.value(0.8) * src.value(0.7) * src.value(0.5)), 1e-15);
}

TEST(Evolve, ProductsStayDoublyStochastic) {
    const auto model = fixtures::random_model(3, 2, 202);
    const auto src = model_source(model);
    for (std::size_t k = 0; k < 500; ++k) {
        CounterRng r(8, k);
        EXPECT_NO_THROW(validate_dstoch(evolve_realization(src, sample_realization(2.0, 3.0, r)), 1e-9));
    }
}

TEST(MonteCarlo, RequiresEnoughRealizations) {
    EXPECT_THROW(monte_carlo_average(constant_source(theta(2).matrix()), 1.0, 1.0, 99, 1), Error);
}

TEST(MonteCarlo, NoRateIsExact) {
    const auto model = fixtures::random_model(2, 2, 203);
    const auto src = model_source(model);
    const auto e = monte_carlo_average(src, 0.0, 2.5, 1000, 1);
    EXPECT_LT(sup_distance(e.mean, src.value(2.5)), 1e-15);
    EXPECT_EQ(e.stderr_.maxCoeff(), 0.0);
}

TEST(MonteCarlo, ConstantMapMatchesMatrixExponential) {
    const Matrix m = fixtures::symmetric_constants()[0];
    const auto e = monte_carlo_average(constant_source(m), 1.0, 2.0, 100000, 2024);
    EXPECT_EQ(fraction_within(fixtures::constant_solution(m, 1.0, 2.0), e, 3.0), 1.0);
}

TEST(MonteCarlo, AgreesWithMarch) {
    const auto model = fixtures::random_model(2, 2, 204);
    const auto src = model_source(model);
    SolverConfig c;
    c.nu = 1.0;
    c.grid = TimeGrid(3.0, 600);
    const Matrix solved = march_solve(src, c).back();
    const auto e = monte_carlo_average(src, 1.0, 3.0, 100000, 77);
    EXPECT_EQ(fraction_within(solved, e, 3.0), 1.0);
    EXPECT_LT(sup_distance(solved, e.mean), 0.01);
    EXPECT_LT(sup_distance(e.mean.rowwise().sum(), Eigen::VectorXd::Ones(2)), 3 * e.stderr_.maxCoeff());
}

TEST(MonteCarlo, IndependentOfWorkerCount) {
    const auto model = fixtures::random_model(3, 2, 205);
    const auto src = model_source(model);
    const auto a = monte_carlo_average(src, 1.5, 2.0, 5000, 9, 1);
    for (std::size_t w : {2u, 8u}) {
        const auto b = monte_carlo_average(src, 1.5, 2.0, 5000, 9, w);
        EXPECT_EQ(a.mean, b.mean);
        EXPECT_EQ(a.stderr_, b.stderr_);
    }
}

TEST(MonteCarlo, StderrScalesWithRealizations) {
    const auto model = fixtures::random_model(2, 2, 206);
    const auto src = model_source(model);
    const double s1 = monte_carlo_average(src, 1.0, 2.0, 20000, 4).stderr_.maxCoeff();
    const double s2 = monte_carlo_average(src, 1.0, 2.0, 40000, 4).stderr_.maxCoeff();
    EXPECT_NEAR(s2 / s1, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}
