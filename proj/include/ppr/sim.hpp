#pragma once

// Closed-/open-loop integration of polynomial systems and running-cost
// quadrature. Two integrators: an embedded Dormand-Prince 5(4) pair for
// non-stiff problems and a linearly-implicit Rosenbrock 2(3) pair with the
// analytic polynomial Jacobian for stiff PDE discretizations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppr/control.hpp"
#include "ppr/system.hpp"

namespace ppr {

enum class SimMethod { Auto, RK45, Rosenbrock };

struct SimOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    SimMethod method = SimMethod::Auto;
    Index min_samples = 200;     // cap on max step so output stays dense enough
    double divergence_norm = 1e6;
};

struct Trajectory {
    std::vector<double> times;
    Matrix states;                    // #samples x n
    Matrix inputs;                    // #samples x m
    std::vector<double> accumulated_cost;  // running J(t); zeros when no cost given
    bool diverged = false;
    std::string divergence_reason;

    Index samples() const { return static_cast<Index>(times.size()); }
    Vector final_state() const { return states.row(states.rows() - 1).transpose(); }
    double total_cost() const { return accumulated_cost.empty() ? 0.0 : accumulated_cost.back(); }
};

namespace detail {

struct ClosedLoop {
    const PolyDynamics& dyn;
    const PolyController* ctrl;  // nullptr = open loop (u = 0)
    const PolyCost* cost;        // when set, the integrand is tracked as an extra state

    Vector input(const Vector& x) const {
        if (ctrl != nullptr) return ctrl->evaluate<double>(x);
        return Vector::Zero(dyn.m);
    }

    Vector deriv(const Vector& x) const {
        const Vector u = input(x);
        Vector dx = dyn.drift<double>(x);
        dx.noalias() += dyn.input_map<double>(x) * u;
        return dx;
    }

    double cost_rate(const Vector& x, const Vector& u) const { return cost ? cost->integrand(x, u) : 0.0; }

    Matrix jacobian(const Vector& x) const {
        Matrix jac = dyn.drift_jacobian(x);
        if (ctrl != nullptr) {
            const Vector u = ctrl->evaluate<double>(x);
            jac += dyn.input_term_jacobian(x, u);
            jac.noalias() += dyn.input_map<double>(x) * ctrl->jacobian(x);
        }
        return jac;
    }
};

struct StepRecord {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<double> cost;
};

// Conservative starting-step heuristic.
inline double initial_step(const ClosedLoop& sys, const Vector& x0, double t_end) {
    const Vector f0 = sys.deriv(x0);
    const double d0 = x0.norm();
    const double d1 = f0.norm();
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * t_end : 0.01 * d0 / d1;
    h = std::min(h, 0.1 * t_end);
    return std::max(h, 1e-12 * t_end);
}

inline double error_norm(const Vector& err, const Vector& x0, const Vector& x1, double rtol, double atol) {
    double acc = 0.0;
    for (Index i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        const double e = err[i] / sc;
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

/// Integrates xdot = f(x) + g(x) u(x) from x0 over [0, T].
inline Trajectory simulate(const PolyDynamics& dyn, const PolyController* ctrl, const PolyCost* cost,
                           const Vector& x0, double t_end, const SimOptions& opts = {}) {
    dyn.validate();
    if (!(t_end > 0.0)) throw DimensionError("simulate: horizon must be positive");
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw DimensionError("simulate: tolerances must be positive");
    if (x0.size() != dyn.n) throw DimensionError("simulate: x0 has wrong dimension");
    if (ctrl != nullptr && (ctrl->n != dyn.n || ctrl->m != dyn.m))
        throw DimensionError("simulate: controller does not match the model");

    detail::ClosedLoop sys{dyn, ctrl, cost};
    SimMethod method = opts.method;
    if (method == SimMethod::Auto) method = (dyn.n >= 32) ? SimMethod::Rosenbrock : SimMethod::RK45;

    detail::StepRecord rec;
    auto record = [&](double t, const Vector& x, double j) {
        rec.times.push_back(t);
        rec.states.push_back(x);
        rec.cost.push_back(j);
    };

    const double max_step = t_end / static_cast<double>(std::max<Index>(opts.min_samples, 1));
    const double min_step = 1e-14 * t_end;
    double t = 0.0;
    Vector x = x0;
    double jcost = 0.0;
    record(t, x, jcost);

    Trajectory traj;
    double h = std::min(detail::initial_step(sys, x0, t_end), max_step);

    if (method == SimMethod::RK45) {
        // Dormand-Prince 5(4)
        static const double a21 = 1.0 / 5;
        static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
        static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
        static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
        Vector k1 = sys.deriv(x);
        double cost1 = sys.cost_rate(x, sys.input(x));
        while (t < t_end) {
            h = std::min({h, max_step, t_end - t});
            const Vector x2 = x + h * (a21 * k1);
            const Vector k2 = sys.deriv(x2);
            const Vector x3 = x + h * (a31 * k1 + a32 * k2);
            const Vector k3 = sys.deriv(x3);
            const Vector x4 = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
            const Vector k4 = sys.deriv(x4);
            const Vector x5 = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            const Vector k5 = sys.deriv(x5);
            const Vector x6 = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            const Vector k6 = sys.deriv(x6);
            const Vector xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Vector k7 = sys.deriv(xn);
            const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double norm = detail::error_norm(err, x, xn, opts.rtol, opts.atol);
            if (norm <= 1.0) {
                // Simpson across the step; Hermite midpoint from the FSAL slopes
                const Vector xm = 0.5 * (x + xn) + (h / 8.0) * (k1 - k7);
                const double costm = sys.cost_rate(xm, sys.input(xm));
                const double costn = sys.cost_rate(xn, sys.input(xn));
                jcost += h / 6.0 * (cost1 + 4.0 * costm + costn);
                cost1 = costn;
                t += h;
                x = xn;
                k1 = k7;  // FSAL
                record(t, x, jcost);
                if (x.cwiseAbs().maxCoeff() > opts.divergence_norm) {
                    traj.diverged = true;
                    traj.divergence_reason = "state norm exceeded " + std::to_string(opts.divergence_norm);
                    break;
                }
            }
            const double factor = std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -0.2), 0.2, 5.0);
            h *= factor;
            if (h < min_step) {
                traj.diverged = true;
                traj.divergence_reason = "step size underflow (likely finite-time blow-up)";
                break;
            }
        }
    } else {
        // Rosenbrock 2(3) pair with analytic Jacobian, ode23s-style
        const double d = 1.0 / (2.0 + std::sqrt(2.0));
        const double e32 = 6.0 + std::sqrt(2.0);
        const Matrix eye = Matrix::Identity(dyn.n, dyn.n);
        while (t < t_end) {
            h = std::min({h, max_step, t_end - t});
            const Matrix jac = sys.jacobian(x);
            const Vector f0 = sys.deriv(x);
            bool accepted = false;
            for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
                const Eigen::PartialPivLU<Matrix> w((eye - h * d * jac).eval());
                const Vector k1 = w.solve(f0);
                const Vector xh = x + 0.5 * h * k1;
                const Vector f1 = sys.deriv(xh);
                const Vector k2 = w.solve(f1 - k1) + k1;
                const Vector xn = x + h * k2;
                const Vector f2 = sys.deriv(xn);
                const Vector k3 = w.solve(f2 - e32 * (k2 - f1) - 2.0 * (k1 - f0));
                const Vector err = (h / 6.0) * (k1 - 2.0 * k2 + k3);
                const double norm = detail::error_norm(err, x, xn, opts.rtol, opts.atol);
                if (norm <= 1.0) {
                    const double c0 = sys.cost_rate(x, sys.input(x));
                    const double cm = sys.cost_rate(xh, sys.input(xh));
                    const double cn = sys.cost_rate(xn, sys.input(xn));
                    jcost += h / 6.0 * (c0 + 4.0 * cm + cn);
                    t += h;
                    x = xn;
                    record(t, x, jcost);
                    accepted = true;
                }
                const double factor = std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -1.0 / 3.0), 0.2, 5.0);
                h = std::min(h * factor, max_step);
                if (h < min_step) break;
            }
            if (!accepted || x.cwiseAbs().maxCoeff() > opts.divergence_norm) {
                traj.diverged = true;
                traj.divergence_reason = accepted ? "state norm exceeded " + std::to_string(opts.divergence_norm)
                                                  : "step size underflow (likely finite-time blow-up)";
                break;
            }
        }
    }

    const Index rows = static_cast<Index>(rec.times.size());
    traj.times = std::move(rec.times);
    traj.states.resize(rows, dyn.n);
    traj.inputs.resize(rows, dyn.m);
    traj.accumulated_cost = std::move(rec.cost);
    for (Index i = 0; i < rows; ++i) {
        traj.states.row(i) = rec.states[static_cast<size_t>(i)].transpose();
        traj.inputs.row(i) = sys.input(rec.states[static_cast<size_t>(i)]).transpose();
    }
    return traj;
}

/// Quadrature of the running cost over a recorded trajectory: composite
/// Simpson on consecutive sample pairs (non-uniform abscissae), trapezoid on
/// a trailing odd interval. The cost-state augmentation inside simulate() is
/// the sharper estimate; this one is its independent cross-check.
inline double running_cost_integral(const Trajectory& traj, const PolyCost& cost) {
    const Index s = traj.samples();
    if (s == 0) throw DimensionError("running_cost_integral: empty trajectory");
    std::vector<double> g(static_cast<size_t>(s));
    for (Index i = 0; i < s; ++i)
        g[static_cast<size_t>(i)] = cost.integrand(traj.states.row(i).transpose(), traj.inputs.row(i).transpose());
    double total = 0.0;
    Index i = 0;
    while (i + 2 < s) {
        const double h0 = traj.times[static_cast<size_t>(i + 1)] - traj.times[static_cast<size_t>(i)];
        const double h1 = traj.times[static_cast<size_t>(i + 2)] - traj.times[static_cast<size_t>(i + 1)];
        const double hs = h0 + h1;
        // quadratic through the three samples
        total += hs / 6.0 *
                 ((2.0 - h1 / h0) * g[static_cast<size_t>(i)] +
                  (hs * hs / (h0 * h1)) * g[static_cast<size_t>(i + 1)] +
                  (2.0 - h0 / h1) * g[static_cast<size_t>(i + 2)]);
        i += 2;
    }
    if (i + 1 < s) {
        const double h = traj.times[static_cast<size_t>(i + 1)] - traj.times[static_cast<size_t>(i)];
        total += 0.5 * h * (g[static_cast<size_t>(i)] + g[static_cast<size_t>(i + 1)]);
    }
    return total;
}

}  // namespace ppr
