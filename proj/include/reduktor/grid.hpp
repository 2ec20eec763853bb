// grid.hpp: uniform time grids, matrix-valued sources and trajectories.
#pragma once

#include "channel.hpp"
#include "dstoch.hpp"
#include "errors.hpp"
#include "parallel.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace reduktor {

class TimeGrid {
public:
    TimeGrid(double t_max, std::size_t steps) : t_max_(t_max), steps_(steps) {
        if (!(t_max > 0.0) || steps == 0 || !std::isfinite(t_max))
            throw Error(Errc::InvalidArgument, "time grid needs t_max > 0 and steps > 0");
    }
    /// Grid with the given spacing covering [0, steps * h].
    static TimeGrid with_step(double h, std::size_t steps) {
        return TimeGrid(h * static_cast<double>(steps), steps);
    }

    double t_max() const noexcept { return t_max_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t nodes() const noexcept { return steps_ + 1; }
    double h() const noexcept { return t_max_ / static_cast<double>(steps_); }
    double t(std::size_t k) const noexcept {
        return k == steps_ ? t_max_ : static_cast<double>(k) * h();
    }

private:
    double t_max_;
    std::size_t steps_;
};

/// A map t -> matrix on t >= 0, sampled lazily.
///
/// `value` is the right-continuous value. Sources with jumps also provide
/// `left_limit`; solvers then keep both one-sided values at grid nodes so
/// that no quadrature panel straddles a discontinuity (jumps must sit on
/// grid nodes for that to hold).
struct MatrixSource {
    Index dim = 0;
    std::function<Matrix(double)> value;
    std::function<Matrix(double)> left_limit;

    bool has_jumps() const noexcept { return static_cast<bool>(left_limit); }
    Matrix left(double t) const { return left_limit ? left_limit(t) : value(t); }
};

inline MatrixSource constant_source(const Matrix& m) {
    return MatrixSource{m.rows(), [m](double) { return m; }, {}};
}

inline MatrixSource model_source(const BathModel& model) {
    return MatrixSource{static_cast<Index>(model.n()),
                        [model](double t) { return m_of_t_raw(model, t); }, {}};
}

/// Time-rescaled source t -> M(s t).
inline MatrixSource rescaled_source(MatrixSource src, double s) {
    MatrixSource out;
    out.dim = src.dim;
    out.value = [f = src.value, s](double t) { return f(s * t); };
    if (src.left_limit) out.left_limit = [f = src.left_limit, s](double t) { return f(s * t); };
    return out;
}

/// Node samples of a source on a grid, right values and left limits.
struct SampledSource {
    std::vector<Matrix> right;
    std::vector<Matrix> left; // empty when the source is continuous

    const Matrix& left_at(std::size_t k) const { return left.empty() ? right[k] : left[k]; }
};

inline SampledSource sample(const MatrixSource& src, const TimeGrid& grid, std::size_t workers = 1) {
    SampledSource s;
    s.right.resize(grid.nodes());
    parallel_for(grid.nodes(), workers, [&](std::size_t k) { s.right[k] = src.value(grid.t(k)); });
    if (src.has_jumps()) {
        s.left.resize(grid.nodes());
        parallel_for(grid.nodes(), workers, [&](std::size_t k) {
            s.left[k] = k == 0 ? s.right[0] : src.left_limit(grid.t(k));
        });
    }
    return s;
}

/// Matrix values on the nodes of a grid. `values` are right limits; `left`
/// holds left limits when the trajectory has jumps and is empty otherwise.
struct Trajectory {
    TimeGrid grid;
    std::vector<Matrix> values;
    std::vector<Matrix> left;

    const Matrix& at(std::size_t k) const { return values.at(k); }
    const Matrix& left_at(std::size_t k) const { return left.empty() ? values.at(k) : left.at(k); }
    const Matrix& back() const { return values.back(); }
};

inline constexpr double kTrajectoryTol = 1e-7;

/// Throws ValidationFailure naming the first node that is not doubly stochastic.
inline void validate_trajectory(const Trajectory& tr, double tol = kTrajectoryTol) {
    auto check = [&](const Matrix& m, std::size_t k) {
        try {
            (void)validate_dstoch(m, Tolerance{tol, tol});
        } catch (const Error& e) {
            throw Error(Errc::ValidationFailure,
                        "node " + std::to_string(k) + " (t = " + std::to_string(tr.grid.t(k)) +
                            "): " + e.what(),
                        k, e.magnitude());
        }
    };
    for (std::size_t k = 0; k < tr.values.size(); ++k) {
        check(tr.values[k], k);
        if (!tr.left.empty()) check(tr.left[k], k);
    }
}

inline double max_distance(const Trajectory& a, const Trajectory& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.values.size() && k < b.values.size(); ++k)
        d = std::max(d, sup_distance(a.values[k], b.values[k]));
    return d;
}

} // namespace reduktor
