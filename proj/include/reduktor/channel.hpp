// channel.hpp: system-bath models, their Kraus families and the induced
// doubly stochastic evolution M(t) in a chosen measurement basis.
#pragma once

#include "dstoch.hpp"
#include "errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace reduktor {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kOffDiagTol = 1e-10;
inline constexpr double kKrausTol = 1e-9;

/// Generator of a joint system-bath evolution: an n2 x n2 array of n x n
/// complex blocks with B_ab = B_ba^dagger, together with the measurement basis
/// (columns of a unitary) that defines the projectors P_i.
class BathModel {
public:
    BathModel(std::size_t n, std::size_t n2, std::vector<std::vector<CMatrix>> blocks,
              CMatrix basis)
        : n_(n), n2_(n2), blocks_(std::move(blocks)), basis_(std::move(basis)) {
        check();
        decompose();
    }

    BathModel(std::size_t n, std::size_t n2, std::vector<std::vector<CMatrix>> blocks)
        : BathModel(n, n2, std::move(blocks), CMatrix::Identity(static_cast<Index>(n),
                                                                static_cast<Index>(n))) {}

    /// Model with a single bath level: plain unitary evolution under h.
    static BathModel bathless(const CMatrix& h, CMatrix basis) {
        const auto n = static_cast<std::size_t>(h.rows());
        return BathModel(n, 1, {{h}}, std::move(basis));
    }
    static BathModel bathless(const CMatrix& h) {
        return bathless(h, CMatrix::Identity(h.rows(), h.rows()));
    }

    /// Builds the model from the assembled (n n2) x (n n2) Hermitian generator.
    static BathModel from_generator(const CMatrix& big, std::size_t n, std::size_t n2,
                                    CMatrix basis) {
        if (big.rows() != static_cast<Index>(n * n2) || big.cols() != big.rows())
            throw Error(Errc::InvalidArgument, "generator has wrong dimension");
        std::vector<std::vector<CMatrix>> b(n2, std::vector<CMatrix>(n2));
        const auto ni = static_cast<Index>(n);
        for (std::size_t a = 0; a < n2; ++a)
            for (std::size_t c = 0; c < n2; ++c)
                b[a][c] = big.block(static_cast<Index>(a) * ni, static_cast<Index>(c) * ni, ni, ni);
        return BathModel(n, n2, std::move(b), std::move(basis));
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t n2() const noexcept { return n2_; }
    const CMatrix& block(std::size_t a, std::size_t b) const { return blocks_.at(a).at(b); }
    const CMatrix& basis() const noexcept { return basis_; }

    /// The assembled generator, block (a, b) = B_ab.
    CMatrix generator() const {
        const auto ni = static_cast<Index>(n_);
        CMatrix big(ni * static_cast<Index>(n2_), ni * static_cast<Index>(n2_));
        for (std::size_t a = 0; a < n2_; ++a)
            for (std::size_t b = 0; b < n2_; ++b)
                big.block(static_cast<Index>(a) * ni, static_cast<Index>(b) * ni, ni, ni) =
                    blocks_[a][b];
        return big;
    }

    /// exp(-i G t) for the assembled generator G.
    CMatrix propagator(double t) const {
        const Eigen::VectorXcd phase =
            (eigenvalues_.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
        return eigenvectors_ * phase.asDiagonal() * eigenvectors_.adjoint();
    }

    /// Propagator with every block expressed in the measurement basis:
    /// block (a, b) equals V^dagger U_ab V.
    CMatrix rotated_propagator(double t) const {
        const Eigen::VectorXcd phase =
            (eigenvalues_.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
        return left_ * phase.asDiagonal() * right_;
    }

    const RealVector& eigenvalues() const noexcept { return eigenvalues_; }

private:
    void check() const {
        if (n_ == 0 || n2_ == 0) throw Error(Errc::InvalidArgument, "empty dimension");
        if (blocks_.size() != n2_)
            throw Error(Errc::InvalidArgument, "expected n2 rows of blocks");
        for (const auto& row : blocks_) {
            if (row.size() != n2_) throw Error(Errc::InvalidArgument, "expected n2 blocks per row");
            for (const auto& b : row)
                if (b.rows() != static_cast<Index>(n_) || b.cols() != static_cast<Index>(n_))
                    throw Error(Errc::InvalidArgument, "block is not n x n");
        }
        for (std::size_t a = 0; a < n2_; ++a)
            for (std::size_t b = 0; b < n2_; ++b) {
                const double dev = (blocks_[a][b] - blocks_[b][a].adjoint()).cwiseAbs().maxCoeff();
                if (dev > kHermitianTol)
                    throw Error(Errc::NonHermitianModel,
                                "B_" + std::to_string(a) + std::to_string(b) +
                                    " != B_" + std::to_string(b) + std::to_string(a) + "^dagger",
                                a * n2_ + b, dev);
            }
        if (basis_.rows() != static_cast<Index>(n_) || basis_.cols() != static_cast<Index>(n_))
            throw Error(Errc::InvalidArgument, "basis is not n x n");
        const double dev =
            (basis_.adjoint() * basis_ - CMatrix::Identity(basis_.rows(), basis_.cols()))
                .cwiseAbs()
                .maxCoeff();
        if (dev > kUnitaryTol) throw Error(Errc::NonUnitaryBasis, "basis is not unitary", {}, dev);
    }

    void decompose() {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(generator());
        eigenvalues_ = es.eigenvalues();
        eigenvectors_ = es.eigenvectors();
        const auto ni = static_cast<Index>(n_);
        CMatrix vdag_big = CMatrix::Zero(ni * static_cast<Index>(n2_), ni * static_cast<Index>(n2_));
        for (std::size_t a = 0; a < n2_; ++a)
            vdag_big.block(static_cast<Index>(a) * ni, static_cast<Index>(a) * ni, ni, ni) =
                basis_.adjoint();
        left_ = vdag_big * eigenvectors_;
        right_ = left_.adjoint();
    }

    std::size_t n_;
    std::size_t n2_;
    std::vector<std::vector<CMatrix>> blocks_;
    CMatrix basis_;
    RealVector eigenvalues_;
    CMatrix eigenvectors_;
    CMatrix left_;
    CMatrix right_;
};

/// Kraus operators A_ab(t) = [exp(-i G t)]_ab / sqrt(n2).
struct KrausFamily {
    double t = 0.0;
    std::vector<std::vector<CMatrix>> ops;

    /// max of |sum A A^dagger - 1| and |sum A^dagger A - 1| entrywise
    double normalization_residual() const {
        if (ops.empty()) return 0.0;
        const Index n = ops.front().front().rows();
        CMatrix left = CMatrix::Zero(n, n);
        CMatrix right = CMatrix::Zero(n, n);
        for (const auto& row : ops)
            for (const auto& a : row) {
                left += a * a.adjoint();
                right += a.adjoint() * a;
            }
        const CMatrix id = CMatrix::Identity(n, n);
        return std::max((left - id).cwiseAbs().maxCoeff(), (right - id).cwiseAbs().maxCoeff());
    }
};

inline KrausFamily kraus_at(const BathModel& model, double t) {
    const CMatrix u = model.propagator(t);
    const auto n = static_cast<Index>(model.n());
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.n2()));
    KrausFamily k;
    k.t = t;
    k.ops.assign(model.n2(), std::vector<CMatrix>(model.n2()));
    for (std::size_t a = 0; a < model.n2(); ++a)
        for (std::size_t b = 0; b < model.n2(); ++b)
            k.ops[a][b] = u.block(static_cast<Index>(a) * n, static_cast<Index>(b) * n, n, n) * scale;
    return k;
}

/// M_ij(t) = sum_ab |<i|A_ab(t)|j>|^2 in the model basis.
inline Matrix m_of_t_raw(const BathModel& model, double t) {
    const CMatrix u = model.rotated_propagator(t);
    const auto n = static_cast<Index>(model.n());
    const auto n2 = static_cast<Index>(model.n2());
    Matrix m = Matrix::Zero(n, n);
    for (Index a = 0; a < n2; ++a)
        for (Index b = 0; b < n2; ++b)
            m += u.block(a * n, b * n, n, n).cwiseAbs2();
    return m / static_cast<double>(n2);
}

inline DStochMatrix m_of_t(const BathModel& model, double t) {
    return validate_dstoch(m_of_t_raw(model, t), Tolerance{1e-9, 1e-9});
}

/// Second-order Taylor coefficient of M(t) at t = 0:
/// (M2)_jl = (2/n2) (sum_ab |<j|B_ab|l>|^2 - delta_jl sum_ac <j|B_ac B_ca|l>).
inline Matrix second_order_matrix(const BathModel& model) {
    const auto n = static_cast<Index>(model.n());
    const CMatrix& v = model.basis();
    Matrix first = Matrix::Zero(n, n);
    CMatrix square = CMatrix::Zero(n, n);
    for (std::size_t a = 0; a < model.n2(); ++a)
        for (std::size_t b = 0; b < model.n2(); ++b) {
            first += (v.adjoint() * model.block(a, b) * v).cwiseAbs2();
            square += model.block(a, b) * model.block(b, a);
        }
    const CMatrix square_rot = v.adjoint() * square * v;
    Matrix m2 = first;
    for (Index j = 0; j < n; ++j) m2(j, j) -= square_rot(j, j).real();
    return m2 * (2.0 / static_cast<double>(model.n2()));
}

/// True iff every off-diagonal element of B_ab in the model basis is nonzero.
inline bool basis_genericity(const BathModel& model, std::size_t a, std::size_t b,
                             double tol = kOffDiagTol) {
    if (a >= model.n2() || b >= model.n2())
        throw Error(Errc::BlockIndexOutOfRange,
                    "block (" + std::to_string(a) + "," + std::to_string(b) + ")");
    const CMatrix rot = model.basis().adjoint() * model.block(a, b) * model.basis();
    for (Index i = 0; i < rot.rows(); ++i)
        for (Index j = 0; j < rot.cols(); ++j)
            if (i != j && std::abs(rot(i, j)) <= tol) return false;
    return true;
}

struct GenericityResult {
    bool generic = false;
    double witness_t = 0.0;
    double c_min = 1.0;
};

/// Samples c(M(t)) on the given times. The map counts as generic when some
/// sample drops to delta_threshold or below.
inline GenericityResult genericity_check(std::span<const double> c_values,
                                         std::span<const double> times, double delta_threshold) {
    if (times.empty()) throw Error(Errc::InvalidArgument, "empty time grid");
    GenericityResult r;
    r.c_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (c_values[k] < r.c_min) {
            r.c_min = c_values[k];
            r.witness_t = times[k];
        }
    }
    r.generic = r.c_min <= delta_threshold;
    return r;
}

inline GenericityResult genericity_check(const BathModel& model, std::span<const double> times,
                                         double delta_threshold) {
    std::vector<double> c(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) c[k] = compression(m_of_t_raw(model, times[k]));
    return genericity_check(c, times, delta_threshold);
}

} // namespace reduktor
