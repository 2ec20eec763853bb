// Test fixtures: random bath models and reference oracles that do not share
// code paths with the library.
#pragma once

#include <reduktor/channel.hpp>
#include <reduktor/dstoch.hpp>
#include <reduktor/grid.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace fixtures {

using reduktor::BathModel;
using reduktor::CMatrix;
using reduktor::Complex;
using reduktor::Index;
using reduktor::Matrix;

inline CMatrix random_hermitian(Index dim, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix a(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
    return 0.5 * scale * (a + a.adjoint());
}

inline CMatrix random_unitary(Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix a(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
    Eigen::HouseholderQR<CMatrix> qr(a);
    return qr.householderQ() * CMatrix::Identity(dim, dim);
}

/// Random Hermitian generator on C^n (x) C^n2, computational basis.
inline BathModel random_model(std::size_t n, std::size_t n2, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    const CMatrix big = random_hermitian(static_cast<Index>(n * n2), rng, scale);
    return BathModel::from_generator(big, n, n2, CMatrix::Identity(static_cast<Index>(n), static_cast<Index>(n)));
}

/// Generator W diag(integers) W^dagger, so exp(-i G t) has period 2 pi.
inline BathModel periodic_model(std::size_t n, std::size_t n2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto d = static_cast<Index>(n * n2);
    const CMatrix w = random_unitary(d, rng);
    std::uniform_int_distribution<int> level(-3, 3);
    Eigen::VectorXcd diag(d);
    for (Index i = 0; i < d; ++i) diag(i) = Complex(level(rng), 0.0);
    CMatrix big = w * diag.asDiagonal() * w.adjoint();
    big = 0.5 * (big + big.adjoint());
    return BathModel::from_generator(big, n, n2, CMatrix::Identity(static_cast<Index>(n), static_cast<Index>(n)));
}

/// Generator coupling only the system levels inside each group.
inline BathModel block_model(const std::vector<std::vector<std::size_t>>& groups, std::size_t n,
                             std::size_t n2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto ni = static_cast<Index>(n);
    const auto d = static_cast<Index>(n * n2);
    const CMatrix full = random_hermitian(d, rng);
    std::vector<int> group_of(n, -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (auto i : groups[g]) group_of[i] = static_cast<int>(g);
    CMatrix big = CMatrix::Zero(d, d);
    for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < d; ++c) {
            const auto i = static_cast<std::size_t>(r % ni);
            const auto j = static_cast<std::size_t>(c % ni);
            if (group_of[i] >= 0 && group_of[i] == group_of[j]) big(r, c) = full(r, c);
        }
    return BathModel::from_generator(big, n, n2, CMatrix::Identity(ni, ni));
}

/// M(t) by explicit matrix exponential and direct summation over bath indices.
inline Matrix m_direct(const BathModel& model, double t) {
    const CMatrix g = model.generator();
    const CMatrix u = (CMatrix(g * Complex(0.0, -t))).exp();
    const auto n = static_cast<Index>(model.n());
    const auto n2 = static_cast<Index>(model.n2());
    const CMatrix& v = model.basis();
    Matrix m = Matrix::Zero(n, n);
    for (Index a = 0; a < n2; ++a)
        for (Index b = 0; b < n2; ++b) {
            const CMatrix blk = v.adjoint() * u.block(a * n, b * n, n, n) * v;
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) m(i, j) += std::norm(blk(i, j));
        }
    return m / static_cast<double>(n2);
}

/// exp(nu (M - 1) t) M
inline Matrix constant_solution(const Matrix& m, double nu, double t) {
    const Matrix gen = nu * t * (m - Matrix::Identity(m.rows(), m.cols()));
    return Matrix(gen.exp()) * m;
}

/// exp(nu (M - 1) t) without the trailing M; checked by acceptance criterion 1.
inline Matrix constant_solution_without_m(const Matrix& m, double nu, double t) {
    const Matrix gen = nu * t * (m - Matrix::Identity(m.rows(), m.cols()));
    return gen.exp();
}

/// Symmetric doubly stochastic 3 x 3 matrices used for the constant-M checks.
inline std::vector<Matrix> symmetric_constants() {
    Matrix a(3, 3), b(3, 3), c(3, 3);
    a << 0.5, 0.3, 0.2, 0.3, 0.4, 0.3, 0.2, 0.3, 0.5;
    b << 0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8;
    c << 0.2, 0.7, 0.1, 0.7, 0.1, 0.2, 0.1, 0.2, 0.7;
    return {a, b, c};
}

inline Matrix cycle3() {
    Matrix p = Matrix::Zero(3, 3);
    p(1, 0) = p(2, 1) = p(0, 2) = 1.0;
    return p;
}

/// diag(P, P) for the 3-cycle P: reducible, order 3.
inline Matrix doubled_cycle() {
    Matrix p = Matrix::Zero(6, 6);
    p.topLeftCorner(3, 3) = cycle3();
    p.bottomRightCorner(3, 3) = cycle3();
    return p;
}

} // namespace fixtures
