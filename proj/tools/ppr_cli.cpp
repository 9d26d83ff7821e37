// Command-line frontend: polynomial controller synthesis, closed-loop
// simulation, value-function verification, and benchmark cost tables.
// Exit codes: 0 success, 2 usage, 3 model error, 4 synthesis error,
// 5 verification failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "ppr/control.hpp"
#include "ppr/models.hpp"
#include "ppr/serialize.hpp"
#include "ppr/sim.hpp"
#include "ppr/synthesis.hpp"

namespace fs = std::filesystem;
using ppr::Index;
using ppr::Json;
using ppr::Matrix;
using ppr::Vector;

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

ppr::SynthesisOptions synthesis_options_from_env(double tol) {
    ppr::SynthesisOptions opts;
    opts.are_tol = tol;
    opts.solver_tol = tol;
    if (const char* budget = std::getenv("PPR_ELEMENT_BUDGET")) {
        try {
            opts.element_budget = static_cast<Index>(std::stod(budget));
        } catch (const std::exception&) {
            throw ppr::ModelError("PPR_ELEMENT_BUDGET is not a number: " + std::string(budget));
        }
    }
    return opts;
}

// A resolved model: dynamics + cost, plus the shift metadata when the model
// lives in moved coordinates.
struct ResolvedModel {
    ppr::PolyDynamics dyn;
    ppr::PolyCost cost;
    std::optional<ppr::ShiftedModel> shifted;
    std::string name;
    Json desc;
    ppr::SimOptions sim_defaults;
};

struct ModelFlags {
    std::string model;
    Index nodes = 129;
    double epsilon = 0.01;
    double z0 = 0.5;
    std::vector<Index> control_nodes;
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--model", flags.model, "Model: aircraft | allen-cahn | <file.json>")->required();
    cmd->add_option("--nodes,--n", flags.nodes, "allen-cahn: Chebyshev node count incl. boundaries (odd)");
    cmd->add_option("--epsilon", flags.epsilon, "allen-cahn: diffusion coefficient");
    cmd->add_option("--z0", flags.z0, "allen-cahn: target interface location in (-1,1)");
    cmd->add_option("--control-nodes", flags.control_nodes, "allen-cahn: 1-based control node indices");
}

ResolvedModel resolve_model(const ModelFlags& flags) {
    ResolvedModel out;
    if (flags.model == "aircraft") {
        auto [dyn, cost] = ppr::aircraft_f8();
        out.dyn = std::move(dyn);
        out.cost = std::move(cost);
        out.name = "aircraft";
        out.desc = Json{{"model", "aircraft"}};
        out.sim_defaults.rtol = 1e-8;
        out.sim_defaults.atol = 1e-10;
        out.sim_defaults.method = ppr::SimMethod::RK45;
    } else if (flags.model == "allen-cahn") {
        ppr::AllenCahnConfig cfg;
        cfg.nodes = flags.nodes;
        cfg.epsilon = flags.epsilon;
        cfg.z0 = flags.z0;
        cfg.control_nodes = flags.control_nodes;
        ppr::ShiftedModel model = ppr::allen_cahn(cfg);
        out.dyn = model.dyn;
        out.cost = model.cost;
        out.name = "allen-cahn";
        out.desc = Json{{"model", "allen-cahn"},
                        {"nodes", cfg.nodes},
                        {"state_dim", model.dyn.n},
                        {"epsilon", cfg.epsilon},
                        {"z0", cfg.z0},
                        {"equilibrium_residual", model.equilibrium_residual}};
        out.shifted = std::move(model);
        out.sim_defaults.rtol = 1e-6;
        out.sim_defaults.atol = 1e-8;
        out.sim_defaults.method = ppr::SimMethod::Rosenbrock;
    } else {
        auto [dyn, cost] = ppr::load_model(flags.model);
        out.dyn = std::move(dyn);
        out.cost = std::move(cost);
        out.name = fs::path(flags.model).stem().string();
        out.desc = Json{{"model", flags.model}};
        out.sim_defaults.method = ppr::SimMethod::Auto;
    }
    return out;
}

void write_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& argv,
                    const Json& params, const std::vector<std::string>& outputs) {
    Json j;
    j["command"] = command;
    j["argv"] = argv;
    j["params"] = params;
    j["outputs"] = outputs;
    j["timestamp"] = iso_timestamp();
    j["version"] = PPR_VERSION;
    std::ofstream out(path);
    if (!out) throw ppr::ModelError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

void write_trajectory_csv(const fs::path& path, const ppr::Trajectory& traj, const ResolvedModel& model) {
    std::ofstream out(path);
    if (!out) throw ppr::ModelError("cannot write " + path.string());
    const Index n = traj.states.cols();
    const Index m = traj.inputs.cols();
    out << "t";
    for (Index i = 1; i <= n; ++i) out << ",x" << i;
    for (Index i = 1; i <= m; ++i) out << ",u" << i;
    out << ",J\n";
    for (Index r = 0; r < traj.samples(); ++r) {
        out << g17(traj.times[static_cast<size_t>(r)]);
        for (Index i = 0; i < n; ++i) {
            double v = traj.states(r, i);
            if (model.shifted) v += model.shifted->x_ref[i];  // physical profile
            out << "," << g17(v);
        }
        for (Index i = 0; i < m; ++i) out << "," << g17(traj.inputs(r, i));
        out << "," << g17(traj.accumulated_cost[static_cast<size_t>(r)]);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------

struct SynthesizeArgs {
    ModelFlags model;
    int degree = 0;
    double tol = 1e-10;
    std::string prefix = "ppr_run";
};

int cmd_synthesize(const SynthesizeArgs& args, const std::vector<std::string>& argv) {
    ResolvedModel model = resolve_model(args.model);
    ppr::SynthesisReport report;
    const auto t0 = std::chrono::steady_clock::now();
    ppr::ValueFunction value =
        ppr::synthesize(model.dyn, model.cost, args.degree, synthesis_options_from_env(args.tol), &report);
    ppr::PolyController ctrl = ppr::extract_gains(value, model.dyn, model.cost.R);
    const double total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path value_path = args.prefix + ".value.json";
    const fs::path ctrl_path = args.prefix + ".controller.json";
    const fs::path report_path = args.prefix + ".report.json";
    ppr::save_value(value_path, value);
    ppr::save_controller(ctrl_path, ctrl);

    ppr::DegreeResiduals residuals = ppr::hjb_degree_residuals(model.dyn, model.cost, value, 100);
    Json degrees = Json::array();
    for (const auto& d : report.degrees)
        degrees.push_back(Json{{"k", d.k},
                               {"solve_rel_residual", d.rel_residual},
                               {"imag_ratio", d.imag_ratio},
                               {"refinements", d.refinements},
                               {"seconds", d.seconds}});
    Json hjb = Json::array();
    for (int k = 2; k <= value.degree; ++k)
        hjb.push_back(Json{{"k", k}, {"absolute", residuals.absolute[k]}, {"relative", residuals.relative(k)}});
    const Matrix lqr_gain = -model.cost.R.ldlt().solve(model.dyn.B.transpose() * value.v2());
    Json rj;
    rj["model"] = model.desc;
    rj["degree"] = args.degree;
    rj["are_residual"] = report.are_residual;
    rj["closed_loop_abscissa"] = report.abscissa;
    rj["degree_solves"] = degrees;
    rj["hjb_degree_residuals"] = hjb;
    rj["k1_matches_lqr_gain"] = (ctrl.gain(1) - lqr_gain).cwiseAbs().maxCoeff() <=
                                1e-12 * std::max(1.0, lqr_gain.cwiseAbs().maxCoeff());
    rj["warnings"] = report.warnings;
    rj["wall_seconds"] = total_s;
    std::ofstream(report_path) << rj.dump(2) << "\n";

    Json params{{"model", model.desc}, {"degree", args.degree}, {"tol", args.tol}};
    write_manifest(args.prefix + ".manifest.json", "synthesize", argv, params,
                   {value_path.string(), ctrl_path.string(), report_path.string()});
    std::cout << "synthesized degree-" << args.degree << " value function for " << model.name << " (n="
              << model.dyn.n << "); controller degree " << ctrl.degree() << "\n"
              << "  ARE residual " << report.are_residual << ", wall " << total_s << " s\n"
              << "  wrote " << value_path.string() << ", " << ctrl_path.string() << ", "
              << report_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    ModelFlags model;
    std::string controller_file;
    bool open_loop = false;
    std::vector<double> x0;
    double alpha0_deg = std::numeric_limits<double>::quiet_NaN();
    std::string ic;  // "benchmark" | "zero"
    double horizon = 10.0;
    double rtol = 0.0;
    double atol = 0.0;
    std::string method = "default";
    std::string prefix = "ppr_run";
};

Vector initial_state(const SimulateArgs& args, const ResolvedModel& model) {
    const Index n = model.dyn.n;
    if (!args.x0.empty()) {
        if (static_cast<Index>(args.x0.size()) != n)
            throw ppr::ModelError("--x0 has " + std::to_string(args.x0.size()) + " entries, model needs " +
                                  std::to_string(n));
        return Eigen::Map<const Vector>(args.x0.data(), n);
    }
    if (!std::isnan(args.alpha0_deg)) {
        if (model.name != "aircraft") throw ppr::ModelError("--alpha0-deg is an aircraft preset");
        Vector x0 = Vector::Zero(n);
        x0[0] = args.alpha0_deg * std::numbers::pi / 180.0;
        return x0;
    }
    if (args.ic == "benchmark") {
        if (!model.shifted) throw ppr::ModelError("--ic benchmark is an allen-cahn preset");
        return ppr::allen_cahn_benchmark_ic(*model.shifted);
    }
    if (args.ic == "zero" || args.ic.empty()) return Vector::Zero(n);
    throw ppr::ModelError("unknown --ic preset: " + args.ic);
}

ppr::SimOptions sim_options(const SimulateArgs& args, const ResolvedModel& model) {
    ppr::SimOptions opts = model.sim_defaults;
    if (args.rtol > 0.0) opts.rtol = args.rtol;
    if (args.atol > 0.0) opts.atol = args.atol;
    if (args.method == "rk45")
        opts.method = ppr::SimMethod::RK45;
    else if (args.method == "rosenbrock")
        opts.method = ppr::SimMethod::Rosenbrock;
    else if (args.method == "auto")
        opts.method = ppr::SimMethod::Auto;
    else if (args.method != "default")
        throw ppr::ModelError("unknown --method: " + args.method);
    return opts;
}

int cmd_simulate(const SimulateArgs& args, const std::vector<std::string>& argv) {
    ResolvedModel model = resolve_model(args.model);
    std::optional<ppr::PolyController> ctrl;
    if (!args.open_loop) {
        if (args.controller_file.empty())
            throw ppr::ModelError("simulate needs --controller FILE or --open-loop");
        ctrl = ppr::load_controller(args.controller_file);
    }
    const Vector x0 = initial_state(args, model);
    const ppr::SimOptions opts = sim_options(args, model);
    ppr::Trajectory traj =
        ppr::simulate(model.dyn, ctrl ? &*ctrl : nullptr, &model.cost, x0, args.horizon, opts);

    const fs::path csv_path = args.prefix + ".trajectory.csv";
    const fs::path summary_path = args.prefix + ".summary.json";
    write_trajectory_csv(csv_path, traj, model);
    Json summary;
    summary["model"] = model.desc;
    summary["T"] = args.horizon;
    summary["samples"] = traj.samples();
    summary["final_state_norm"] = traj.final_state().norm();
    summary["total_cost"] = traj.total_cost();
    summary["diverged"] = traj.diverged;
    if (traj.diverged) summary["divergence_reason"] = traj.divergence_reason;
    summary["coordinates"] = model.shifted ? "physical (reference added back)" : "model";
    std::ofstream(summary_path) << summary.dump(2) << "\n";

    Json params{{"model", model.desc},
                {"T", args.horizon},
                {"rtol", opts.rtol},
                {"atol", opts.atol},
                {"open_loop", args.open_loop},
                {"controller", args.controller_file}};
    write_manifest(args.prefix + ".manifest.json", "simulate", argv, params,
                   {csv_path.string(), summary_path.string()});
    std::cout << (traj.diverged ? "diverged" : "completed") << " at t = " << traj.times.back()
              << "; final state norm " << traj.final_state().norm() << ", cost " << traj.total_cost() << "\n"
              << "  wrote " << csv_path.string() << ", " << summary_path.string() << "\n";
    return 0;  // divergence is an expected outcome, reported in the summary
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    ModelFlags model;
    std::string value_file;
    double threshold = 1e-8;
    std::string prefix = "ppr_run";
};

int cmd_verify(const VerifyArgs& args, const std::vector<std::string>& argv) {
    ResolvedModel model = resolve_model(args.model);
    ppr::ValueFunction value = ppr::load_value(args.value_file);
    if (value.n != model.dyn.n)
        throw ppr::ModelError("value function dimension " + std::to_string(value.n) +
                              " does not match the model (n=" + std::to_string(model.dyn.n) + ")");
    ppr::DegreeResiduals res = ppr::hjb_degree_residuals(model.dyn, model.cost, value, 200);
    const double slope = ppr::hjb_residual_slope(model.dyn, model.cost, value);

    std::printf("degree |    residual (abs) |    residual (rel) | status\n");
    bool ok = true;
    Json rows = Json::array();
    for (int k = 2; k <= value.degree; ++k) {
        const double rel = res.relative(k);
        const bool pass = rel <= args.threshold;
        ok = ok && pass;
        std::printf("%6d | %17.6e | %17.6e | %s\n", k, res.absolute[k], rel, pass ? "pass" : "FAIL");
        rows.push_back(Json{{"k", k}, {"absolute", res.absolute[k]}, {"relative", rel}, {"pass", pass}});
    }
    std::printf("log-log truncation slope over ||x|| in [1e-3, 1e-1]: %.3f (value degree %d)\n", slope,
                value.degree);

    const fs::path report_path = args.prefix + ".verify.json";
    Json rj{{"model", model.desc},
            {"value", args.value_file},
            {"threshold", args.threshold},
            {"degrees", rows},
            {"truncation_slope", slope},
            {"pass", ok}};
    std::ofstream(report_path) << rj.dump(2) << "\n";
    write_manifest(args.prefix + ".manifest.json", "verify", argv,
                   Json{{"model", model.desc}, {"value", args.value_file}, {"threshold", args.threshold}},
                   {report_path.string()});
    if (!ok)
        throw ppr::VerificationError("HJB degree residuals exceed the threshold; see " + report_path.string());
    return 0;
}

// ---------------------------------------------------------------------------

struct TableArgs {
    std::string bench;
    Index nodes = 129;
    double z0 = 0.5;
    std::vector<double> epsilons;
    std::vector<int> degrees;  // controller degrees; value degree is one higher
    double horizon = 0.0;
    double alpha0_deg = 25.0;
    int jobs = 1;
    double tol = 1e-10;
    std::string prefix = "ppr_run";
};

struct TableCell {
    std::string controller;
    int degree = 0;
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double alpha0_deg = std::numeric_limits<double>::quiet_NaN();
    double cost = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    double reference = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

std::string controller_name(int value_degree) {
    switch (value_degree) {
        case 2: return "LQR";
        case 3: return "Quadratic PPR";
        case 4: return "Cubic PPR";
        case 5: return "Quartic PPR";
        case 6: return "Quintic PPR";
        case 7: return "Sextic PPR";
        case 8: return "Septic PPR";
        default: return "Degree-" + std::to_string(value_degree - 1) + " PPR";
    }
}

// Reference constants transcribed from the published benchmark tables; used
// only for delta reporting, never as computation inputs.
double aircraft_reference(int value_degree) {
    switch (value_degree) {
        case 2: return 0.053166;
        case 4: return 0.044503;
        case 6: return 0.040593;
        case 8: return 0.039393;
        default: return std::numeric_limits<double>::quiet_NaN();
    }
}

double allen_cahn_reference(Index nodes, double epsilon, int value_degree) {
    if (nodes != 129) return std::numeric_limits<double>::quiet_NaN();
    auto near = [&](double x) { return std::abs(epsilon - x) < 1e-12; };
    if (near(0.01)) {
        if (value_degree == 2) return 5475.640;
        if (value_degree == 3) return 4339.483;
        if (value_degree == 4) return 1372.454;
    } else if (near(0.0075)) {
        if (value_degree == 2) return 19376.855;
        if (value_degree == 3) return 14042.908;
        if (value_degree == 4) return 4153.668;
    } else if (near(0.005)) {
        if (value_degree == 2) return 87268.670;
        if (value_degree == 3) return 57876.913;
        if (value_degree == 4) return 20711.449;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

void run_cells(std::vector<TableCell>& cells, const std::function<void(TableCell&)>& work, int jobs) {
    if (jobs <= 1) {
        for (auto& cell : cells) work(cell);
        return;
    }
    std::mutex m;
    size_t next = 0;
    auto worker = [&] {
        for (;;) {
            size_t mine;
            {
                std::lock_guard<std::mutex> lock(m);
                if (next >= cells.size()) return;
                mine = next++;
            }
            work(cells[mine]);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

int cmd_table(const TableArgs& args, const std::vector<std::string>& argv) {
    std::vector<TableCell> cells;
    if (args.bench == "aircraft") {
        std::vector<int> degrees = args.degrees.empty() ? std::vector<int>{1, 3, 5, 7} : args.degrees;
        for (int ctrl_degree : degrees) {
            const int d = ctrl_degree + 1;  // value degree
            TableCell cell;
            cell.degree = d;
            cell.controller = controller_name(d);
            cell.alpha0_deg = args.alpha0_deg;
            cell.reference = std::abs(args.alpha0_deg - 25.0) < 1e-12 ? aircraft_reference(d)
                                                                      : std::numeric_limits<double>::quiet_NaN();
            cells.push_back(cell);
        }
        const double horizon = args.horizon > 0.0 ? args.horizon : 12.0;
        auto work = [&](TableCell& cell) {
            try {
                auto [dyn, cost] = ppr::aircraft_f8();
                ppr::ValueFunction value =
                    ppr::synthesize(dyn, cost, cell.degree, synthesis_options_from_env(args.tol));
                ppr::PolyController ctrl = ppr::extract_gains(value, dyn, cost.R);
                Vector x0 = Vector::Zero(3);
                x0[0] = cell.alpha0_deg * std::numbers::pi / 180.0;
                ppr::SimOptions opts;
                opts.rtol = 1e-8;
                opts.atol = 1e-10;
                opts.method = ppr::SimMethod::RK45;
                ppr::Trajectory traj = ppr::simulate(dyn, &ctrl, &cost, x0, horizon, opts);
                cell.cost = traj.total_cost();
                cell.diverged = traj.diverged;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        };
        run_cells(cells, work, args.jobs);
    } else if (args.bench == "allen-cahn") {
        std::vector<double> epsilons =
            args.epsilons.empty() ? std::vector<double>{0.01, 0.0075, 0.005} : args.epsilons;
        std::vector<int> degrees = args.degrees.empty() ? std::vector<int>{1, 2, 3} : args.degrees;
        for (double eps : epsilons)
            for (int ctrl_degree : degrees) {
                const int d = ctrl_degree + 1;  // value degree
                TableCell cell;
                cell.degree = d;
                cell.controller = controller_name(d);
                cell.epsilon = eps;
                cell.reference = allen_cahn_reference(args.nodes, eps, d);
                cells.push_back(cell);
            }
        const double horizon = args.horizon > 0.0 ? args.horizon : 1000.0;
        auto work = [&](TableCell& cell) {
            try {
                ppr::AllenCahnConfig cfg;
                cfg.nodes = args.nodes;
                cfg.epsilon = cell.epsilon;
                cfg.z0 = args.z0;
                ppr::ShiftedModel model = ppr::allen_cahn(cfg);
                ppr::ValueFunction value =
                    ppr::synthesize(model.dyn, model.cost, cell.degree, synthesis_options_from_env(args.tol));
                ppr::PolyController ctrl = ppr::extract_gains(value, model.dyn, model.cost.R);
                Vector x0 = ppr::allen_cahn_benchmark_ic(model);
                ppr::SimOptions opts;
                opts.rtol = 1e-6;
                opts.atol = 1e-8;
                opts.method = ppr::SimMethod::Rosenbrock;
                ppr::Trajectory traj = ppr::simulate(model.dyn, &ctrl, &model.cost, x0, horizon, opts);
                cell.cost = traj.total_cost();
                cell.diverged = traj.diverged;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        };
        run_cells(cells, work, args.jobs);
    } else {
        throw ppr::ModelError("unknown --bench: " + args.bench + " (expected aircraft | allen-cahn)");
    }

    const fs::path csv_path = args.prefix + ".table.csv";
    std::ofstream out(csv_path);
    if (!out) throw ppr::ModelError("cannot write " + csv_path.string());
    out << "bench,controller,controller_degree,value_degree,epsilon,alpha0_deg,cost,diverged,reference,delta_rel,error\n";
    for (const auto& cell : cells) {
        const double delta = (std::isnan(cell.reference) || std::isnan(cell.cost))
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : (cell.cost - cell.reference) / cell.reference;
        auto fmt = [](double v, const char* spec) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), spec, v);
            return std::string(buf);
        };
        out << args.bench << ',' << cell.controller << ',' << cell.degree - 1 << ',' << cell.degree << ','
            << (std::isnan(cell.epsilon) ? "" : fmt(cell.epsilon, "%g")) << ','
            << (std::isnan(cell.alpha0_deg) ? "" : fmt(cell.alpha0_deg, "%g")) << ','
            << (std::isnan(cell.cost) ? "" : fmt(cell.cost, "%.9g")) << ','
            << (cell.diverged ? "true" : "false") << ','
            << (std::isnan(cell.reference) ? "" : fmt(cell.reference, "%.6f")) << ','
            << (std::isnan(delta) ? "" : fmt(delta, "%.3e")) << ',' << cell.error << "\n";
        std::string tag = std::isnan(cell.epsilon) ? "" : ("eps=" + g17(cell.epsilon) + " ");
        std::printf("%-14s degree %d %scost %-12.6f %s\n", cell.controller.c_str(), cell.degree, tag.c_str(),
                    cell.cost, cell.error.empty() ? (cell.diverged ? "(diverged)" : "") : cell.error.c_str());
    }
    Json params{{"bench", args.bench}, {"nodes", args.nodes}, {"jobs", args.jobs}};
    write_manifest(args.prefix + ".manifest.json", "table", argv, params, {csv_path.string()});
    std::cout << "wrote " << csv_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& argv);

int cmd_rerun(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ppr::ModelError("cannot open manifest " + manifest_path);
    Json j = Json::parse(in, nullptr, true, true);
    std::vector<std::string> argv = j.at("argv").get<std::vector<std::string>>();
    if (argv.empty()) throw ppr::ModelError("manifest has an empty argv");
    return dispatch(argv);
}

int dispatch(const std::vector<std::string>& argv) {
    CLI::App app{"Polynomial feedback synthesis via value-function approximation"};
    app.require_subcommand(1);

    SynthesizeArgs syn;
    CLI::App* syn_cmd = app.add_subcommand("synthesize", "Compute a value function and polynomial controller");
    add_model_flags(syn_cmd, syn.model);
    syn_cmd->add_option("--degree", syn.degree, "Value-function degree d >= 2")->required();
    syn_cmd->add_option("--tol", syn.tol, "Solver residual tolerance (default 1e-10)");
    syn_cmd->add_option("--out", syn.prefix, "Output file prefix (default ppr_run)");

    SimulateArgs sim;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Integrate the closed or open loop and the running cost");
    add_model_flags(sim_cmd, sim.model);
    sim_cmd->add_option("--controller", sim.controller_file, "Controller JSON produced by synthesize");
    sim_cmd->add_flag("--open-loop", sim.open_loop, "Simulate with u = 0");
    sim_cmd->add_option("--x0", sim.x0, "Initial state (model coordinates)");
    sim_cmd->add_option("--alpha0-deg", sim.alpha0_deg, "Aircraft preset: initial angle of attack in degrees");
    sim_cmd->add_option("--ic", sim.ic, "allen-cahn preset initial condition: benchmark | zero");
    sim_cmd->add_option("--T", sim.horizon, "Horizon (time units)")->required();
    sim_cmd->add_option("--rtol", sim.rtol, "Relative tolerance (default per model)");
    sim_cmd->add_option("--atol", sim.atol, "Absolute tolerance (default per model)");
    sim_cmd->add_option("--method", sim.method, "Integrator: auto | rk45 | rosenbrock");
    sim_cmd->add_option("--out", sim.prefix, "Output file prefix");

    VerifyArgs ver;
    CLI::App* ver_cmd = app.add_subcommand("verify", "Check HJB residuals of a value-function file");
    add_model_flags(ver_cmd, ver.model);
    ver_cmd->add_option("--value", ver.value_file, "Value-function JSON")->required();
    ver_cmd->add_option("--threshold", ver.threshold, "Relative degree-residual threshold (default 1e-8)");
    ver_cmd->add_option("--out", ver.prefix, "Output file prefix");

    TableArgs tab;
    CLI::App* tab_cmd = app.add_subcommand("table", "Reproduce a benchmark cost table");
    tab_cmd->add_option("--bench", tab.bench, "aircraft | allen-cahn")->required();
    tab_cmd->add_option("--nodes,--n", tab.nodes, "allen-cahn node count (default 129)");
    tab_cmd->add_option("--z0", tab.z0, "allen-cahn interface target (default 0.5)");
    tab_cmd->add_option("--epsilons,--epsilon", tab.epsilons, "allen-cahn diffusion sweep (default 0.01 0.0075 0.005)")
        ->delimiter(',');
    tab_cmd->add_option("--degrees", tab.degrees,
                        "controller degrees (default 1,3,5,7 aircraft; 1,2,3 allen-cahn)")
        ->delimiter(',');
    tab_cmd->add_option("--T", tab.horizon, "Horizon override");
    tab_cmd->add_option("--alpha0-deg", tab.alpha0_deg, "aircraft initial angle (default 25)");
    tab_cmd->add_option("--jobs", tab.jobs, "Concurrent sweep cells (default 1)");
    tab_cmd->add_option("--out", tab.prefix, "Output file prefix");

    std::string rerun_manifest;
    CLI::App* rerun_cmd = app.add_subcommand("rerun", "Re-execute the command recorded in a manifest");
    rerun_cmd->add_option("manifest", rerun_manifest, "Manifest JSON written by a previous run")->required();

    try {
        std::vector<std::string> cli_args(argv.begin() + 1, argv.end());
        std::reverse(cli_args.begin(), cli_args.end());
        app.parse(cli_args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (syn_cmd->parsed()) return cmd_synthesize(syn, argv);
    if (sim_cmd->parsed()) return cmd_simulate(sim, argv);
    if (ver_cmd->parsed()) return cmd_verify(ver, argv);
    if (tab_cmd->parsed()) return cmd_table(tab, argv);
    if (rerun_cmd->parsed()) return cmd_rerun(rerun_manifest);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    try {
        return dispatch(args);
    } catch (const ppr::VerificationError& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return 5;
    } catch (const ppr::SynthesisError& e) {
        std::cerr << "synthesis error: " << e.what() << "\n";
        return 4;
    } catch (const ppr::ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 3;
    } catch (const ppr::DimensionError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
