#pragma once

// Benchmark problems: the F-8 stall-stabilization model and a Chebyshev
// pseudospectral semidiscretization of the Allen-Cahn equation with Dirichlet
// boundaries eliminated and the target interface profile shifted to the
// origin. Plus the generic JSON model loader.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppr/serialize.hpp"
#include "ppr/system.hpp"

namespace ppr {

/// F-8 Crusader pitch-axis model (angle of attack, pitch angle, pitch rate;
/// input = tail elevator angle), with Q = I/4, R = I.
inline std::pair<PolyDynamics, PolyCost> aircraft_f8() {
    PolyDynamics dyn;
    dyn.n = 3;
    dyn.m = 1;
    dyn.A.setZero(3, 3);
    dyn.A << -0.877, 0.0, 1.0,  //
        0.0, 0.0, 1.0,          //
        -4.208, 0.0, -0.396;
    dyn.B.resize(3, 1);
    dyn.B << -0.215, 0.0, -20.967;

    auto idx2 = [](Index i, Index j) { return i * 3 + j; };
    auto idx3 = [](Index i, Index j, Index l) { return (i * 3 + j) * 3 + l; };

    std::vector<Eigen::Triplet<double>> f2{
        {0, static_cast<int>(idx2(0, 0)), 0.47},    // +0.47 x1^2
        {0, static_cast<int>(idx2(1, 1)), -0.019},  // -0.019 x2^2
        {0, static_cast<int>(idx2(0, 2)), -0.088},  // -0.088 x1 x3
        {2, static_cast<int>(idx2(0, 0)), -0.47},   // -0.47 x1^2
    };
    SparseMatrix F2(3, 9);
    F2.setFromTriplets(f2.begin(), f2.end());
    dyn.F[2] = std::move(F2);

    std::vector<Eigen::Triplet<double>> f3{
        {0, static_cast<int>(idx3(0, 0, 0)), 3.846},  // +3.846 x1^3
        {0, static_cast<int>(idx3(0, 0, 2)), -1.0},   // -x1^2 x3
        {2, static_cast<int>(idx3(0, 0, 0)), -3.564},
    };
    SparseMatrix F3(3, 27);
    F3.setFromTriplets(f3.begin(), f3.end());
    dyn.F[3] = std::move(F3);

    // G_2 (x^(x)2 (x) I_1): +0.28 x1^2 u on row 1, +6.265 x1^2 u on row 3
    std::vector<Eigen::Triplet<double>> g2{
        {0, static_cast<int>(idx2(0, 0)), 0.28},
        {2, static_cast<int>(idx2(0, 0)), 6.265},
    };
    SparseMatrix G2(3, 9);
    G2.setFromTriplets(g2.begin(), g2.end());
    dyn.G[2] = std::move(G2);

    PolyCost cost;
    cost.Q = 0.25 * Matrix::Identity(3, 3);
    cost.R = Matrix::Identity(1, 1);
    dyn.validate();
    cost.validate(dyn.n, dyn.m);
    return {std::move(dyn), std::move(cost)};
}

// ---------------------------------------------------------------------------
// Allen-Cahn

struct AllenCahnConfig {
    Index nodes = 129;              // Chebyshev nodes incl. boundaries (odd, >= 9)
    double epsilon = 0.01;          // diffusion coefficient
    double z0 = 0.5;                // target interface location in (-1,1)
    std::vector<Index> control_nodes;  // 1-based node indices; empty = default
};

struct ShiftedModel {
    PolyDynamics dyn;   // in shifted coordinates xbar = x - x_ref (interior nodes)
    PolyCost cost;
    Vector x_ref;       // interior reference state
    Vector z;           // all node locations, z[0] = 1 down to z[nodes-1] = -1
    double equilibrium_residual = 0.0;
    double boundary_left = -1.0;   // w(z = -1)
    double boundary_right = 1.0;   // w(z = +1)
    std::vector<Index> control_interior;  // 0-based interior indices of inputs

    /// Physical profile [w(+1), interior..., w(-1)] from a shifted state.
    Vector physical_profile(const Vector& xbar) const {
        Vector w(z.size());
        w[0] = boundary_right;
        w.segment(1, xbar.size()) = xbar + x_ref;
        w[z.size() - 1] = boundary_left;
        return w;
    }
};

/// Chebyshev points z_j = cos(j pi / (N-1)) and the first-derivative
/// collocation matrix on them.
inline std::pair<Vector, Matrix> chebyshev_diff(Index nodes) {
    if (nodes < 2) throw ModelError("chebyshev_diff: need at least 2 nodes");
    const Index nmax = nodes - 1;
    Vector z(nodes);
    for (Index j = 0; j < nodes; ++j) z[j] = std::cos(std::numbers::pi * static_cast<double>(j) / nmax);
    Vector c = Vector::Ones(nodes);
    c[0] = 2.0;
    c[nmax] = 2.0;
    Matrix d(nodes, nodes);
    for (Index i = 0; i < nodes; ++i) {
        double row_sum = 0.0;
        for (Index j = 0; j < nodes; ++j) {
            if (i == j) continue;
            const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            d(i, j) = (c[i] / c[j]) * sign / (z[i] - z[j]);
            row_sum += d(i, j);
        }
        d(i, i) = -row_sum;  // negative row sums beat the explicit diagonal formula
    }
    return {std::move(z), std::move(d)};
}

inline double allen_cahn_reference(double z, double epsilon, double z0) {
    return std::tanh((z - z0) / std::sqrt(2.0 * epsilon));
}

/// Builds the shifted Allen-Cahn model: Dirichlet boundary nodes are
/// eliminated (their coupling becomes an affine drift term absorbed by the
/// equilibrium shift), the reference interface profile is refined to the
/// exact discrete equilibrium by Newton, and the cubic reaction is expanded
/// about it.
inline ShiftedModel allen_cahn(const AllenCahnConfig& cfg) {
    if (cfg.nodes < 9 || cfg.nodes % 2 == 0) throw ModelError("allen_cahn: nodes must be odd and >= 9");
    if (cfg.epsilon <= 0.0) throw ModelError("allen_cahn: epsilon must be positive");
    if (!(cfg.z0 > -1.0 && cfg.z0 < 1.0)) throw ModelError("allen_cahn: z0 must lie in (-1,1)");

    auto [z, d1] = chebyshev_diff(cfg.nodes);
    const Matrix d2 = d1 * d1;
    const Index n = cfg.nodes - 2;  // interior state dimension
    const Matrix lap_ii = d2.block(1, 1, n, n);
    // Dirichlet data taken from the reference profile (within 2e-3 of the
    // nominal +/-1 at the benchmark configuration): the tanh kink solves
    // eps w'' + w - w^3 = 0 exactly, so with these boundary values a discrete
    // equilibrium exists next to the seed. With hard +/-1 data and z0 != 0
    // the bounded problem has no steady interface away from z = 0 and the
    // Newton refinement below could not terminate.
    const double w_right = allen_cahn_reference(1.0, cfg.epsilon, cfg.z0);   // node 0 is z = +1
    const double w_left = allen_cahn_reference(-1.0, cfg.epsilon, cfg.z0);
    const Vector affine = cfg.epsilon * (d2.block(1, 0, n, 1) * w_right + d2.block(1, cfg.nodes - 1, n, 1) * w_left);

    // f(x) = eps*Lap x + x - x.^3 + affine on the interior
    auto residual = [&](const Vector& x) -> Vector {
        return cfg.epsilon * (lap_ii * x) + x - x.array().cube().matrix() + affine;
    };

    // damped Newton refinement of the tanh seed to the exact discrete
    // equilibrium; backtracking guards against overshoot across the
    // unstable middle branch of the cubic
    Vector x_ref(n);
    for (Index i = 0; i < n; ++i) x_ref[i] = allen_cahn_reference(z[i + 1], cfg.epsilon, cfg.z0);
    double res_norm = residual(x_ref).norm();
    for (int iter = 0; iter < 100 && res_norm > 1e-12; ++iter) {
        Matrix jac = cfg.epsilon * lap_ii + Matrix::Identity(n, n);
        jac.diagonal() -= 3.0 * x_ref.array().square().matrix();
        const Vector step = jac.partialPivLu().solve(residual(x_ref));
        double lambda = 1.0;
        Vector trial;
        double trial_norm = res_norm;
        for (int cut = 0; cut < 30; ++cut) {
            trial = x_ref - lambda * step;
            trial_norm = residual(trial).norm();
            if (trial_norm < res_norm) break;
            lambda *= 0.5;
        }
        if (!(trial_norm < res_norm)) break;  // numerical floor reached
        x_ref = trial;
        res_norm = trial_norm;
    }
    if (!(res_norm <= 1e-9))
        throw ModelError("allen_cahn: Newton did not reach a discrete equilibrium (residual " +
                         std::to_string(res_norm) + "); refine the grid or adjust epsilon/z0");

    ShiftedModel model;
    model.x_ref = x_ref;
    model.z = z;
    model.equilibrium_residual = res_norm;
    model.boundary_left = w_left;
    model.boundary_right = w_right;

    // control placement: the 129-node benchmark layout, otherwise the
    // interior nodes nearest z = -0.5, 0, 0.5
    std::vector<Index> nodes_1b = cfg.control_nodes;
    if (nodes_1b.empty()) {
        if (cfg.nodes == 129) {
            nodes_1b = {33, 65, 97};
        } else {
            for (double target : {0.5, 0.0, -0.5}) {
                Index best = 1;
                for (Index jn = 1; jn + 1 < cfg.nodes; ++jn)
                    if (std::abs(z[jn] - target) < std::abs(z[best] - target)) best = jn;
                nodes_1b.push_back(best + 1);  // to 1-based over all nodes
            }
        }
    }
    PolyDynamics& dyn = model.dyn;
    dyn.n = n;
    dyn.m = static_cast<Index>(nodes_1b.size());
    dyn.B = Matrix::Zero(n, dyn.m);
    for (Index c = 0; c < dyn.m; ++c) {
        const Index node0 = nodes_1b[c] - 1;
        if (node0 < 1 || node0 > cfg.nodes - 2)
            throw ModelError("allen_cahn: control node " + std::to_string(nodes_1b[c]) + " is not interior");
        dyn.B(node0 - 1, c) = 1.0;
        model.control_interior.push_back(node0 - 1);
    }

    // shifted cubic: -(xbar + r)^3 = -r^3 - 3 r^2 xbar - 3 r xbar^2 - xbar^3
    dyn.A = cfg.epsilon * lap_ii + Matrix::Identity(n, n);
    dyn.A.diagonal() -= 3.0 * x_ref.array().square().matrix();
    std::vector<Eigen::Triplet<double>> f2, f3;
    for (Index i = 0; i < n; ++i) {
        f2.emplace_back(static_cast<int>(i), static_cast<int>(i * n + i), -3.0 * x_ref[i]);
        f3.emplace_back(static_cast<int>(i), static_cast<int>((i * n + i) * n + i), -1.0);
    }
    SparseMatrix F2(n, n * n);
    F2.setFromTriplets(f2.begin(), f2.end());
    dyn.F[2] = std::move(F2);
    SparseMatrix F3(n, n * n * n);
    F3.setFromTriplets(f3.begin(), f3.end());
    dyn.F[3] = std::move(F3);

    PolyCost& cost = model.cost;
    cost.Q = 0.1 * Matrix::Identity(n, n);
    cost.R = Matrix::Identity(dyn.m, dyn.m);
    {
        // q_4^T xbar^(x)4 = sum_i xbar_i^4 (already symmetric)
        Vector q4 = Vector::Zero(kron_length(n, 4));
        for (Index i = 0; i < n; ++i) q4[((i * n + i) * n + i) * n + i] = 1.0;
        cost.q[4] = std::move(q4);
    }
    dyn.validate();
    cost.validate(dyn.n, dyn.m);
    return model;
}

/// Benchmark initial profile w(z,0) = 0.53 z + 0.47 sin(-1.5 pi z), as a
/// shifted interior state.
inline Vector allen_cahn_benchmark_ic(const ShiftedModel& model) {
    const Index n = model.dyn.n;
    Vector x0(n);
    for (Index i = 0; i < n; ++i) {
        const double zi = model.z[i + 1];
        x0[i] = 0.53 * zi + 0.47 * std::sin(-1.5 * std::numbers::pi * zi) - model.x_ref[i];
    }
    return x0;
}

/// Number of sign changes along a sampled profile (interface count).
inline int count_interfaces(const Vector& profile) {
    int count = 0;
    double prev = profile[0];
    for (Index i = 1; i < profile.size(); ++i) {
        const double cur = profile[i];
        if (cur == 0.0) continue;
        if (prev != 0.0 && ((prev < 0.0) != (cur < 0.0))) ++count;
        prev = cur;
    }
    return count;
}

// ---------------------------------------------------------------------------
// JSON model format

namespace detail {

inline SparseMatrix sparse_from_coords(const Json& j, Index rows, Index cols, const char* name) {
    if (!j.contains("coords")) throw ModelError(std::string(name) + ": expected a {\"coords\": [[row,col,val],...]} block");
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& entry : j.at("coords")) {
        if (!entry.is_array() || entry.size() != 3) throw ModelError(std::string(name) + ": coords entries must be [row,col,val]");
        const Index r = entry[0].get<Index>();
        const Index c = entry[1].get<Index>();
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw ModelError(std::string(name) + ": coordinate out of range");
        trip.emplace_back(static_cast<int>(r), static_cast<int>(c), entry[2].get<double>());
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

inline Json sparse_to_coords(const SparseMatrix& m) {
    Json coords = Json::array();
    for (Index c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            coords.push_back(Json::array({it.row(), it.col(), it.value()}));
    return Json{{"coords", std::move(coords)}};
}

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const PolyDynamics& dyn, const PolyCost& cost,
                       const Json& meta = Json::object()) {
    Json j;
    j["n"] = dyn.n;
    j["m"] = dyn.m;
    j["A"] = detail::matrix_to_json(dyn.A);
    j["B"] = detail::matrix_to_json(dyn.B);
    j["Q"] = detail::matrix_to_json(cost.Q);
    j["R"] = detail::matrix_to_json(cost.R);
    if (!dyn.F.empty()) {
        Json f;
        for (const auto& [p, mat] : dyn.F) f[std::to_string(p)] = detail::sparse_to_coords(mat);
        j["F"] = std::move(f);
    }
    if (!dyn.G.empty()) {
        Json g;
        for (const auto& [p, mat] : dyn.G) g[std::to_string(p)] = detail::sparse_to_coords(mat);
        j["G"] = std::move(g);
    }
    if (!cost.q.empty()) {
        Json q;
        for (const auto& [p, vec] : cost.q) {
            Json coords = Json::array();
            for (Index i = 0; i < vec.size(); ++i)
                if (vec[i] != 0.0) coords.push_back(Json::array({i, vec[i]}));
            q[std::to_string(p)] = Json{{"coords", std::move(coords)}};
        }
        j["q"] = std::move(q);
    }
    j["meta"] = meta;
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline std::pair<PolyDynamics, PolyCost> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ModelError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const char* key : {"n", "m", "A", "B", "Q", "R"})
        if (!j.contains(key)) throw ModelError("model file is missing required field \"" + std::string(key) + "\"");

    PolyDynamics dyn;
    dyn.n = j.at("n").get<Index>();
    dyn.m = j.at("m").get<Index>();
    dyn.A = detail::matrix_from_json(j.at("A"), "A");
    dyn.B = detail::matrix_from_json(j.at("B"), "B");
    if (j.contains("F"))
        for (const auto& [key, block] : j.at("F").items()) {
            const int p = std::stoi(key);
            dyn.F[p] = detail::sparse_from_coords(block, dyn.n, kron_length(dyn.n, p), ("F_" + key).c_str());
        }
    if (j.contains("G"))
        for (const auto& [key, block] : j.at("G").items()) {
            const int p = std::stoi(key);
            dyn.G[p] = detail::sparse_from_coords(block, dyn.n, dyn.m * kron_length(dyn.n, p), ("G_" + key).c_str());
        }

    PolyCost cost;
    cost.Q = detail::matrix_from_json(j.at("Q"), "Q");
    cost.R = detail::matrix_from_json(j.at("R"), "R");
    if (j.contains("q"))
        for (const auto& [key, block] : j.at("q").items()) {
            const int p = std::stoi(key);
            const Index len = kron_length(dyn.n, p);
            Vector qp = Vector::Zero(len);
            if (!block.contains("coords")) throw ModelError("q_" + key + ": expected a coords block");
            for (const auto& entry : block.at("coords")) {
                if (!entry.is_array() || entry.size() != 2) throw ModelError("q_" + key + ": coords entries must be [index,val]");
                const Index idx = entry[0].get<Index>();
                if (idx < 0 || idx >= len)
                    throw ModelError("q_" + key + ": index " + std::to_string(idx) + " out of range for length n^p");
                qp[idx] = entry[1].get<double>();
            }
            cost.add_state_term(p, std::move(qp), dyn.n);
        }
    dyn.validate();
    cost.validate(dyn.n, dyn.m);
    return {std::move(dyn), std::move(cost)};
}

}  // namespace ppr
