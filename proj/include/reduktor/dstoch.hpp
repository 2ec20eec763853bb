// dstoch.hpp: doubly stochastic matrices, the compression functional, block
// projectors onto maximal-entropy states and the unit-compression test.
#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reduktor {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Tolerance {
    double sum = 1e-9;
    double entry = 1e-12;
};

inline constexpr double kUnitCompressionTol = 1e-8;
inline constexpr std::size_t kExhaustivePermutationCap = 8;

/// A square matrix with nonnegative entries whose rows and columns each sum to one.
///
/// Instances only come out of `validate_dstoch` (or the internal `trusted`
/// factory for matrices that are doubly stochastic by construction), so
/// holding one is evidence that the check passed.
class DStochMatrix {
public:
    DStochMatrix() = default;

    const Matrix& matrix() const noexcept { return m_; }
    Index dim() const noexcept { return m_.rows(); }
    double operator()(Index i, Index j) const { return m_(i, j); }

    DStochMatrix operator*(const DStochMatrix& rhs) const { return trusted(m_ * rhs.m_); }

    static DStochMatrix identity(Index n) { return trusted(Matrix::Identity(n, n)); }
    static DStochMatrix uniform(Index n) {
        return trusted(Matrix::Constant(n, n, 1.0 / static_cast<double>(n)));
    }
    // Skips validation. Callers guarantee the invariant holds.
    static DStochMatrix trusted(Matrix m) {
        DStochMatrix d;
        d.m_ = std::move(m);
        return d;
    }

private:
    Matrix m_;
};

inline DStochMatrix validate_dstoch(const Matrix& raw, Tolerance tol = {}) {
    if (raw.rows() != raw.cols())
        throw Error(Errc::NotSquare, "matrix is " + std::to_string(raw.rows()) + "x" +
                                         std::to_string(raw.cols()));
    const Index n = raw.rows();
    for (Index i = 0; i < n; ++i) {
        const double s = raw.row(i).sum();
        if (!(std::abs(s - 1.0) <= tol.sum))
            throw Error(Errc::RowSumViolation, "row " + std::to_string(i) + " sums to " +
                                                   std::to_string(s),
                        static_cast<std::size_t>(i), s);
    }
    for (Index j = 0; j < n; ++j) {
        const double s = raw.col(j).sum();
        if (!(std::abs(s - 1.0) <= tol.sum))
            throw Error(Errc::ColSumViolation, "column " + std::to_string(j) + " sums to " +
                                                   std::to_string(s),
                        static_cast<std::size_t>(j), s);
    }
    Matrix m = raw;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            double& v = m(i, j);
            if (v < -tol.entry)
                throw Error(Errc::NegativeEntry,
                            "entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " +
                                std::to_string(v),
                            static_cast<std::size_t>(i * n + j), v);
            if (v < 0.0) v = 0.0;
            if (v > 1.0 && v <= 1.0 + tol.entry) v = 1.0;
        }
    }
    return DStochMatrix::trusted(std::move(m));
}

inline DStochMatrix validate_dstoch(const Matrix& raw, double tol) {
    return validate_dstoch(raw, Tolerance{tol, tol});
}

/// Orthonormal basis of the zero-sum subspace {v : sum v = 0}, as the columns
/// of an n x (n-1) Helmert matrix. Deterministic, so compressions are
/// reproducible bit for bit.
inline Matrix zero_sum_basis(Index n) {
    Matrix q = Matrix::Zero(n, std::max<Index>(n - 1, 0));
    for (Index k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        const double norm = std::sqrt(kk * (kk + 1.0));
        for (Index i = 0; i < k; ++i) q(i, k - 1) = 1.0 / norm;
        q(k, k - 1) = -kk / norm;
    }
    return q;
}

/// Spectral norm of M restricted to the zero-sum subspace. Works on any real
/// square matrix; for doubly stochastic input the result lies in [0, 1].
inline double compression(const Matrix& m) {
    const Index n = m.rows();
    if (n < 2) return 0.0;
    const Matrix q = zero_sum_basis(n);
    const Matrix r = q.transpose() * m * q;
    Eigen::JacobiSVD<Matrix> svd(r);
    return svd.singularValues()(0);
}

inline double compression(const DStochMatrix& m) { return compression(m.matrix()); }

// ---------------------------------------------------------------------------
// Block partitions and block-uniform projectors

struct BlockPartition {
    std::vector<std::vector<std::size_t>> blocks; // each of size >= 2
    std::vector<std::size_t> id_sector;

    bool operator==(const BlockPartition&) const = default;

    bool single_block(std::size_t n) const {
        return blocks.size() == 1 && blocks.front().size() == n && id_sector.empty();
    }
};

inline void check_partition(const BlockPartition& p, std::size_t n) {
    std::vector<int> seen(n, 0);
    auto mark = [&](std::size_t i) {
        if (i >= n)
            throw Error(Errc::InvalidPartition, "index " + std::to_string(i) + " out of range");
        if (seen[i]++)
            throw Error(Errc::InvalidPartition, "index " + std::to_string(i) + " listed twice");
    };
    for (const auto& b : p.blocks) {
        if (b.size() < 2) throw Error(Errc::InvalidPartition, "block of size < 2");
        for (auto i : b) mark(i);
    }
    for (auto i : p.id_sector) mark(i);
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i])
            throw Error(Errc::InvalidPartition, "index " + std::to_string(i) + " not covered");
}

/// Sorts blocks internally and by first element, so equal partitions compare equal.
inline BlockPartition canonical(BlockPartition p) {
    for (auto& b : p.blocks) std::sort(b.begin(), b.end());
    std::sort(p.blocks.begin(), p.blocks.end());
    std::sort(p.id_sector.begin(), p.id_sector.end());
    return p;
}

/// Block-diagonal limit matrix: uniform 1/|block| inside every block and the
/// identity on the id sector.
inline DStochMatrix theta_of(const BlockPartition& p, std::size_t n) {
    check_partition(p, n);
    Matrix m = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (const auto& b : p.blocks) {
        const double w = 1.0 / static_cast<double>(b.size());
        for (auto i : b)
            for (auto j : b) m(static_cast<Index>(i), static_cast<Index>(j)) = w;
    }
    for (auto i : p.id_sector) m(static_cast<Index>(i), static_cast<Index>(i)) = 1.0;
    return DStochMatrix::trusted(std::move(m));
}

inline DStochMatrix theta(std::size_t n) {
    BlockPartition p;
    if (n == 1) {
        p.id_sector = {0};
    } else {
        p.blocks.emplace_back(n);
        std::iota(p.blocks.front().begin(), p.blocks.front().end(), std::size_t{0});
    }
    return theta_of(p, n);
}

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }
    std::size_t size() const noexcept { return parent_.size(); }

private:
    std::vector<std::size_t> parent_;
};

inline BlockPartition partition_from(DisjointSets& ds) {
    const std::size_t n = ds.size();
    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[ds.find(i)].push_back(i);
    BlockPartition p;
    for (auto& g : groups) {
        if (g.size() >= 2)
            p.blocks.push_back(std::move(g));
        else if (g.size() == 1)
            p.id_sector.push_back(g.front());
    }
    return canonical(std::move(p));
}

// Symmetrized support components of one matrix; rows permuted by perm.
inline BlockPartition support_components(const Matrix& m, std::span<const std::size_t> perm,
                                         double tol) {
    const auto n = static_cast<std::size_t>(m.rows());
    DisjointSets ds(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (m(static_cast<Index>(perm[i]), static_cast<Index>(j)) > tol) ds.unite(i, j);
    return partition_from(ds);
}

} // namespace detail

/// Connected components of the union of the (symmetrized) supports of the
/// samples. Singleton components form the id sector.
inline BlockPartition support_blocks(std::span<const DStochMatrix> samples, double tol = 1e-10) {
    if (samples.empty()) throw Error(Errc::EmptySampleList, "no samples");
    const auto n = static_cast<std::size_t>(samples.front().dim());
    detail::DisjointSets ds(n);
    for (const auto& s : samples) {
        if (static_cast<std::size_t>(s.dim()) != n)
            throw Error(Errc::InvalidArgument, "samples have different dimensions");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (s(static_cast<Index>(i), static_cast<Index>(j)) > tol) ds.unite(i, j);
    }
    return detail::partition_from(ds);
}

struct DecompositionWitness {
    // row permutation: (P M)(i, .) = M(perm[i], .)
    std::vector<std::size_t> perm;
    BlockPartition partition;
};

inline Matrix permutation_matrix(std::span<const std::size_t> perm) {
    const auto n = static_cast<Index>(perm.size());
    Matrix p = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) p(i, static_cast<Index>(perm[static_cast<std::size_t>(i)])) = 1.0;
    return p;
}

/// Returns a permutation P and a nontrivial partition that makes P M block
/// diagonal whenever c(M) >= 1 - tol, and nothing otherwise.
///
/// Unit compression means some zero-sum vector is mapped isometrically, which
/// forces every permutation in a Birkhoff decomposition of M to act alike on
/// it; composing with one of their inverses gives a matrix preserving the
/// level sets of that vector. The search is exhaustive over permutations, so
/// it is limited to n <= cap; the identity is always tried first.
inline std::optional<DecompositionWitness>
decomposability_witness(const DStochMatrix& m, double tol = kUnitCompressionTol,
                        std::size_t cap = kExhaustivePermutationCap, double support_tol = 1e-12) {
    const auto n = static_cast<std::size_t>(m.dim());
    if (n < 2 || compression(m) < 1.0 - tol) return std::nullopt;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto nontrivial = [n](const BlockPartition& p) {
        return !(p.blocks.size() == 1 && p.blocks.front().size() == n);
    };

    auto part = detail::support_components(m.matrix(), perm, support_tol);
    if (nontrivial(part)) return DecompositionWitness{perm, std::move(part)};
    if (n > cap)
        throw Error(Errc::DimensionTooLargeForExhaustive,
                    "n = " + std::to_string(n) + " exceeds exhaustive cap " + std::to_string(cap));

    while (std::next_permutation(perm.begin(), perm.end())) {
        part = detail::support_components(m.matrix(), perm, support_tol);
        if (nontrivial(part)) return DecompositionWitness{perm, std::move(part)};
    }
    return std::nullopt;
}

/// Compression of the principal submatrix on an index subset.
inline double restricted_compression(const Matrix& m, std::span<const std::size_t> idx) {
    const auto k = static_cast<Index>(idx.size());
    Matrix sub(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j)
            sub(i, j) = m(static_cast<Index>(idx[static_cast<std::size_t>(i)]),
                          static_cast<Index>(idx[static_cast<std::size_t>(j)]));
    return compression(sub);
}

/// Largest compression over the blocks of a partition (zero if there are none).
inline double block_compression(const Matrix& m, const BlockPartition& p) {
    double c = 0.0;
    for (const auto& b : p.blocks) c = std::max(c, restricted_compression(m, b));
    return c;
}

inline double sup_distance(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace reduktor
