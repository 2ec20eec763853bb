// jump_mc.hpp: direct simulation of the reduction process: Poisson jump
// times, composition of the inter-jump evolutions, and averaging.
#pragma once

#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace reduktor {

inline constexpr std::size_t kMinRealizations = 100;
inline constexpr std::size_t kChunk = 1024;

struct PoissonRealization {
    double T = 0.0;
    std::vector<double> jumps; // strictly increasing, inside (0, T)

    bool valid() const {
        double prev = 0.0;
        for (double t : jumps) {
            if (!(t > prev) || !(t < T)) return false;
            prev = t;
        }
        return true;
    }
};

/// Exact construction: Poisson(nu T) count, then sorted uniform positions.
inline PoissonRealization sample_realization(double nu, double T, CounterRng& rng) {
    if (!(nu >= 0.0)) throw Error(Errc::InvalidArgument, "nu must be >= 0");
    if (!(T > 0.0)) throw Error(Errc::InvalidArgument, "T must be > 0");
    PoissonRealization r{T, {}};
    const std::uint64_t count = poisson_variate(rng, nu * T);
    r.jumps.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) r.jumps.push_back(T * rng.open_uniform());
    std::sort(r.jumps.begin(), r.jumps.end());
    // coincident draws have probability ~1e-16 per pair; nudge them apart
    for (std::size_t k = 1; k < r.jumps.size(); ++k)
        if (!(r.jumps[k] > r.jumps[k - 1])) r.jumps[k] = std::nextafter(r.jumps[k - 1], T);
    return r;
}

/// M(T - t_k) ... M(t_2 - t_1) M(t_1): the latest gap acts last.
inline Matrix evolve_realization(const MatrixSource& m, const PoissonRealization& r) {
    double prev = 0.0;
    Matrix acc = Matrix::Identity(m.dim, m.dim);
    bool first = true;
    for (double t : r.jumps) {
        const Matrix step = m.value(t - prev);
        acc = first ? step : Matrix(step * acc);
        first = false;
        prev = t;
    }
    const Matrix last = m.value(r.T - prev);
    return first ? last : Matrix(last * acc);
}

struct McEstimate {
    Matrix mean;
    Matrix stderr_; // entrywise standard error of the mean
    std::size_t realizations = 0;
    std::uint64_t seed = 0;
};

namespace detail {

struct Moments {
    std::size_t count = 0;
    Matrix mean;
    Matrix m2;

    void add(const Matrix& x) {
        ++count;
        if (count == 1) {
            mean = x;
            m2 = Matrix::Zero(x.rows(), x.cols());
            return;
        }
        const Matrix delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta.cwiseProduct(x - mean);
    }

    void merge(const Moments& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(count);
        const double nb = static_cast<double>(o.count);
        const Matrix delta = o.mean - mean;
        mean += delta * (nb / (na + nb));
        m2 += o.m2 + delta.cwiseAbs2() * (na * nb / (na + nb));
        count += o.count;
    }
};

} // namespace detail

/// Entrywise mean and standard error over R realizations. Realization r
/// draws from stream (seed, r) and partial sums are merged in chunk order,
/// so the result is bit-identical for any worker count.
inline McEstimate monte_carlo_average(const MatrixSource& m, double nu, double T, std::size_t R,
                                      std::uint64_t seed, std::size_t workers = 1) {
    if (R < kMinRealizations)
        throw Error(Errc::InvalidArgument,
                    "need at least " + std::to_string(kMinRealizations) + " realizations");
    const std::size_t chunks = (R + kChunk - 1) / kChunk;
    std::vector<detail::Moments> parts(chunks);
    parallel_for(chunks, workers, [&](std::size_t c) {
        detail::Moments mom;
        const std::size_t end = std::min(R, (c + 1) * kChunk);
        for (std::size_t r = c * kChunk; r < end; ++r) {
            CounterRng rng(seed, r);
            mom.add(evolve_realization(m, sample_realization(nu, T, rng)));
        }
        parts[c] = std::move(mom);
    });
    detail::Moments total;
    for (const auto& p : parts) total.merge(p);

    McEstimate est;
    est.mean = total.mean;
    const double rr = static_cast<double>(R);
    est.stderr_ = (total.m2.cwiseMax(0.0) / ((rr - 1.0) * rr)).cwiseSqrt();
    est.realizations = R;
    est.seed = seed;
    return est;
}

} // namespace reduktor
