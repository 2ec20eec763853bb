// io.hpp: run configuration (JSON) and CSV emitters.
//
// Model file layout:
//   {
//     "n": 2, "n2": 1,
//     "B": [[ block ]],          // n2 x n2 blocks, each n x n of [re, im] pairs
//     "basis": [[[re, im], ...]] // optional unitary, columns are the basis vectors
//     "constant_matrix": [[...]] // alternative to B: M(t) = const (real)
//     "scalar": {...}            // alternative to B for the `scalar` command
//     "nu": 1.0,
//     "grid": {"t_max": 5.0, "steps": 500},
//     "T": 3.0, "R": 100000, "seed": 1, "N_max": 30,
//     "asymptote": {"epsilon": 1e-3, "window": 0.1, "samples": 64},
//     "genericity": {"delta": 0.99, "samples": 256},
//     "compare": {"series_tol": 1e-6, "sigmas": 3.0, "fraction": 0.99}
//   }
#pragma once

#include "asymptotics.hpp"
#include "channel.hpp"
#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "jump_mc.hpp"
#include "scalar.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace reduktor {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_matrix_rows(std::ostream& os, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt17(m(i, j));
        os << '\n';
    }
}

/// Header `t,entry_0_0,entry_0_1,...`, then one row per node.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    const Index n = tr.values.front().rows();
    os << 't';
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) os << ",entry_" << i << '_' << j;
    os << '\n';
    for (std::size_t k = 0; k < tr.values.size(); ++k) {
        os << fmt17(tr.grid.t(k));
        const Matrix& m = tr.values[k];
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) os << ',' << fmt17(m(i, j));
        os << '\n';
    }
}

/// `t,beta` rows followed by a `# jumps` section of `t,left,right` rows.
inline void write_scalar_csv(std::ostream& os, const ScalarTrajectory& s) {
    os << "t,beta\n";
    for (std::size_t k = 0; k < s.beta.size(); ++k)
        os << fmt17(s.grid.t(k)) << ',' << fmt17(s.beta[k]) << '\n';
    os << "# jumps\n";
    os << "# t,left,right\n";
    for (const auto& j : s.jumps)
        os << "# " << fmt17(j.t) << ',' << fmt17(j.left) << ',' << fmt17(j.right) << '\n';
}

/// Metadata lines prefixed `#`, then the mean block and the stderr block.
inline void write_mc_csv(std::ostream& os, const McEstimate& e, double nu, double T) {
    os << "# reduktor simulate\n";
    os << "# nu=" << fmt17(nu) << '\n';
    os << "# T=" << fmt17(T) << '\n';
    os << "# R=" << e.realizations << '\n';
    os << "# seed=" << e.seed << '\n';
    os << "# block=mean\n";
    write_matrix_rows(os, e.mean);
    os << "# block=stderr\n";
    write_matrix_rows(os, e.stderr_);
}

inline Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json partition_json(const BlockPartition& p) {
    return Json{{"blocks", p.blocks}, {"id_sector", p.id_sector}};
}

// ---------------------------------------------------------------------------
// Configuration

enum class ScalarMethod { March, Delay, Trig, TrigCombined };

struct ScalarSpec {
    ScalarInput input = ScalarInput::constant(1.0);
    ScalarMethod method = ScalarMethod::March;
    std::size_t intervals = 10;
    std::size_t steps_per_interval = 100;
};

struct RunConfig {
    std::optional<BathModel> model;
    std::optional<Matrix> constant;
    std::optional<ScalarSpec> scalar;
    double nu = 1.0;
    TimeGrid grid{1.0, 100};
    std::optional<double> horizon;
    std::size_t realizations = 100000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> series_cap;
    ConvergenceOptions asymptote;
    double delta_threshold = 0.99;
    std::size_t genericity_samples = 256;
    double compare_series_tol = 1e-6;
    double compare_sigmas = 3.0;
    double compare_fraction = 0.99;

    double T() const { return horizon.value_or(grid.t_max()); }

    Index dim() const {
        if (model) return static_cast<Index>(model->n());
        if (constant) return constant->rows();
        throw Error(Errc::ConfigParse, "config has neither \"B\" nor \"constant_matrix\"");
    }

    MatrixSource source() const {
        if (model) return model_source(*model);
        if (constant) return constant_source(*constant);
        throw Error(Errc::ConfigParse, "config has neither \"B\" nor \"constant_matrix\"");
    }

    SolverConfig solver(std::size_t workers = 1) const {
        SolverConfig c;
        c.nu = nu;
        c.grid = grid;
        c.series_cap = series_cap;
        c.workers = workers;
        return c;
    }
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& what) { throw Error(Errc::ConfigParse, what); }

inline Complex parse_complex(const Json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        config_fail("complex entries must be [re, im] pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline CMatrix parse_cmatrix(const Json& j, std::size_t n, const std::string& what) {
    if (!j.is_array() || j.size() != n) config_fail(what + ": expected " + std::to_string(n) + " rows");
    CMatrix m(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n)
            config_fail(what + ": row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
        for (std::size_t k = 0; k < n; ++k)
            m(static_cast<Index>(i), static_cast<Index>(k)) = parse_complex(j[i][k]);
    }
    return m;
}

inline Matrix parse_rmatrix(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) config_fail(what + ": expected a nonempty array of rows");
    const std::size_t n = j.size();
    Matrix m(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n) config_fail(what + ": matrix must be square");
        for (std::size_t k = 0; k < n; ++k) {
            if (!j[i][k].is_number()) config_fail(what + ": entries must be numbers");
            m(static_cast<Index>(i), static_cast<Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        config_fail(std::string("field \"") + key + "\" has the wrong type");
    }
}

inline ScalarInput parse_scalar_input(const Json& j) {
    const auto kind = get_or<std::string>(j, "kind", "constant");
    if (kind == "constant") return ScalarInput(ConstantInput{get_or(j, "c", 1.0)});
    if (kind == "piecewise")
        return ScalarInput(PiecewiseInput{get_or(j, "tau", 1.0),
                                          get_or(j, "pattern", std::vector<double>{1.0, 0.0})});
    if (kind == "trig") return ScalarInput(TrigInput{get_or(j, "mean", 0.5), get_or(j, "amplitude", 0.5)});
    if (kind == "tabulated")
        return ScalarInput(TabulatedInput{get_or(j, "spacing", 1.0), get_or(j, "values", std::vector<double>{})});
    config_fail("unknown scalar input kind \"" + kind + "\"");
}

inline ScalarSpec parse_scalar(const Json& j) {
    ScalarSpec s;
    if (!j.contains("input")) config_fail("scalar section needs \"input\"");
    s.input = parse_scalar_input(j.at("input"));
    const auto method = get_or<std::string>(j, "method", "march");
    if (method == "march") s.method = ScalarMethod::March;
    else if (method == "delay") s.method = ScalarMethod::Delay;
    else if (method == "trig") s.method = ScalarMethod::Trig;
    else if (method == "trig_combined") s.method = ScalarMethod::TrigCombined;
    else config_fail("unknown scalar method \"" + method + "\"");
    s.intervals = get_or<std::size_t>(j, "intervals", s.intervals);
    s.steps_per_interval = get_or<std::size_t>(j, "steps_per_interval", s.steps_per_interval);
    return s;
}

} // namespace detail

/// Parses a run configuration. JSON syntax and schema problems raise
/// ConfigParse; physically invalid models (non-Hermitian blocks, non-unitary
/// basis) keep their validation codes.
inline RunConfig parse_config(const Json& j) {
    using detail::config_fail;
    using detail::get_or;
    if (!j.is_object()) config_fail("config must be a JSON object");
    RunConfig c;
    c.nu = get_or(j, "nu", 1.0);
    if (j.contains("grid")) {
        const Json& g = j.at("grid");
        try {
            c.grid = TimeGrid(get_or(g, "t_max", 1.0), get_or<std::size_t>(g, "steps", 100));
        } catch (const Error& e) {
            config_fail(std::string("grid: ") + e.what());
        }
    }
    if (j.contains("T")) c.horizon = j.at("T").get<double>();
    c.realizations = get_or<std::size_t>(j, "R", c.realizations);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("N_max")) c.series_cap = j.at("N_max").get<std::size_t>();

    if (j.contains("B")) {
        const auto n = get_or<std::size_t>(j, "n", 0);
        const auto n2 = get_or<std::size_t>(j, "n2", 1);
        if (n == 0) config_fail("\"n\" must be a positive integer");
        const Json& b = j.at("B");
        if (!b.is_array() || b.size() != n2) config_fail("\"B\" must hold n2 rows of blocks");
        std::vector<std::vector<CMatrix>> blocks(n2);
        for (std::size_t a = 0; a < n2; ++a) {
            if (!b[a].is_array() || b[a].size() != n2) config_fail("\"B\" must hold n2 blocks per row");
            for (std::size_t k = 0; k < n2; ++k)
                blocks[a].push_back(detail::parse_cmatrix(
                    b[a][k], n, "B[" + std::to_string(a) + "][" + std::to_string(k) + "]"));
        }
        CMatrix basis = CMatrix::Identity(static_cast<Index>(n), static_cast<Index>(n));
        if (j.contains("basis")) basis = detail::parse_cmatrix(j.at("basis"), n, "basis");
        c.model.emplace(n, n2, std::move(blocks), std::move(basis));
    } else if (j.contains("constant_matrix")) {
        c.constant = validate_dstoch(detail::parse_rmatrix(j.at("constant_matrix"), "constant_matrix"))
                         .matrix();
    }
    if (j.contains("scalar")) c.scalar = detail::parse_scalar(j.at("scalar"));

    if (j.contains("asymptote")) {
        const Json& a = j.at("asymptote");
        c.asymptote.epsilon = get_or(a, "epsilon", c.asymptote.epsilon);
        c.asymptote.window = get_or(a, "window", c.asymptote.window);
        c.asymptote.samples = get_or<std::size_t>(a, "samples", c.asymptote.samples);
        c.asymptote.sample_horizon = get_or(a, "sample_horizon", c.asymptote.sample_horizon);
    }
    if (j.contains("genericity")) {
        const Json& g = j.at("genericity");
        c.delta_threshold = get_or(g, "delta", c.delta_threshold);
        c.genericity_samples = get_or<std::size_t>(g, "samples", c.genericity_samples);
    }
    if (j.contains("compare")) {
        const Json& g = j.at("compare");
        c.compare_series_tol = get_or(g, "series_tol", c.compare_series_tol);
        c.compare_sigmas = get_or(g, "sigmas", c.compare_sigmas);
        c.compare_fraction = get_or(g, "fraction", c.compare_fraction);
    }
    if (!(c.nu >= 0.0)) config_fail("\"nu\" must be >= 0");
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigParse, e.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigParse, e.what());
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigParse, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace reduktor
