#pragma once

// Sequential computation of the polynomial value function: the quadratic
// coefficient comes from the Riccati equation; each higher coefficient
// solves a k-way Lyapunov-structured linear system whose right-hand side is
// assembled from the already-computed coefficients. Peak extra memory per
// degree is one n^k vector.

#include <chrono>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ppr/lyapunov.hpp"
#include "ppr/system.hpp"

namespace ppr {

// Degree-d polynomial value function
//   V(x) = 1/2 x^T V2 x + 1/2 sum_{i=3..d} v_i^T x^(x)i
// with every v_i a symmetric coefficient. matricization(k) is the n x n^(k-1)
// unfolding V_k with vec(V_k) = v_k, so that V_k x^(x)(k-1) contracts all
// trailing modes.
struct ValueFunction {
    Index n = 0;
    int degree = 0;
    std::vector<Vector> coeffs;  // coeffs[k-2] = v_k, k = 2..degree

    const Vector& coeff(int k) const {
        if (k < 2 || k > degree) throw DimensionError("ValueFunction: no coefficient of order " + std::to_string(k));
        return coeffs[static_cast<size_t>(k) - 2];
    }

    Eigen::Map<const Matrix> matricization(int k) const {
        const Vector& v = coeff(k);
        return Eigen::Map<const Matrix>(v.data(), n, kron_length(n, k - 1));
    }

    Matrix v2() const { return matricization(2); }

    void validate() const {
        if (degree < 2 || coeffs.size() != static_cast<size_t>(degree - 1))
            throw DimensionError("ValueFunction: inconsistent degree/coefficient count");
        for (int k = 2; k <= degree; ++k)
            if (coeff(k).size() != kron_length(n, k)) throw DimensionError("ValueFunction: bad coefficient length");
    }

    template <class Scalar>
    Scalar evaluate(const VectorX<Scalar>& x) const {
        if (x.size() != n) throw DimensionError("ValueFunction::evaluate: state dimension mismatch");
        VectorX<Scalar> xp = kron_power_gen<Scalar>(x, 2);
        Scalar acc = Scalar(0.5) * detail::real_dot(coeff(2), xp);
        for (int k = 3; k <= degree; ++k) {
            VectorX<Scalar> next(xp.size() * n);
            for (Index a = 0; a < xp.size(); ++a) next.segment(a * n, n) = xp[a] * x;
            xp.swap(next);
            acc += Scalar(0.5) * detail::real_dot(coeff(k), xp);
        }
        return acc;
    }

    /// Gradient via the symmetric-coefficient compact form:
    /// sum_i (i/2) V_i x^(x)(i-1).
    template <class Scalar>
    VectorX<Scalar> gradient(const VectorX<Scalar>& x) const {
        if (x.size() != n) throw DimensionError("ValueFunction::gradient: state dimension mismatch");
        VectorX<Scalar> xp = VectorX<Scalar>::Ones(1);
        VectorX<Scalar> out = VectorX<Scalar>::Zero(n);
        for (int k = 2; k <= degree; ++k) {
            VectorX<Scalar> next(xp.size() * n);
            for (Index a = 0; a < xp.size(); ++a) next.segment(a * n, n) = xp[a] * x;
            xp.swap(next);  // xp = x^(x)(k-1)
            const auto vk = matricization(k);
            if constexpr (std::is_same_v<Scalar, double>) {
                out.noalias() += (0.5 * k) * (vk * xp);
            } else {
                for (Index c = 0; c < vk.cols(); ++c)
                    for (Index r = 0; r < n; ++r) out[r] += (0.5 * k) * vk(r, c) * xp[c];
            }
        }
        return out;
    }
};

namespace detail {

// rows (t,u) -> t*n^(i-1)+u, cols alpha: the per-input-channel coefficient
// block of (x^(x)p (x) I_m)^T G_p^T V_i x^(x)(i-1); p = 0 stands for B.
inline Matrix input_value_block(const PolyDynamics& dyn, int p, const Eigen::Map<const Matrix>& vi) {
    if (p == 0) return vi.transpose() * dyn.B;  // n^(i-1) x m
    const Index np = kron_length(dyn.n, p);
    const Index li = vi.cols();
    const Matrix raw = dyn.G.at(p).transpose() * vi;  // m n^p x n^(i-1)
    Matrix out(np * li, dyn.m);
    for (Index t = 0; t < np; ++t)
        for (Index a = 0; a < dyn.m; ++a) out.col(a).segment(t * li, li) = raw.row(t * dyn.m + a).transpose();
    return out;
}

inline Eigen::Map<const Matrix> coeff_matricization(const std::vector<Vector>& coeffs, Index n, int i) {
    const Vector& v = coeffs.at(static_cast<size_t>(i) - 2);
    return Eigen::Map<const Matrix>(v.data(), n, kron_length(n, i - 1));
}

}  // namespace detail

/// Order-k right-hand side for the degree-k coefficient equation, given the
/// symmetric coefficients v_2..v_{k-1}. Four term families: drift coupling,
/// state-cost, pure-input quadratic, and input-map cross terms.
inline Vector assemble_rhs(const PolyDynamics& dyn, const PolyCost& cost, const std::vector<Vector>& coeffs,
                           int k) {
    const Index n = dyn.n;
    if (k < 3) throw DimensionError("assemble_rhs: order must be >= 3");
    if (coeffs.size() < static_cast<size_t>(k) - 2) throw DimensionError("assemble_rhs: missing lower coefficients");
    Vector rhs = Vector::Zero(kron_length(n, k));

    // (i) - sum_{i+p=k+1} L_i(F_p)^T v_i
    for (int i = 2; i <= k - 1; ++i) {
        const int p = k + 1 - i;
        auto it = dyn.F.find(p);
        if (p < 2 || it == dyn.F.end()) continue;
        const Vector& vi = coeffs[static_cast<size_t>(i) - 2];
        for (int s = 0; s < i; ++s) rhs -= detail::contract_mode(it->second, vi, n, i, s);
    }

    // (ii) - q_k
    if (auto it = cost.q.find(k); it != cost.q.end()) rhs -= it->second;

    const Matrix r_inv = cost.r_inverse();

    // (iii) + 1/4 sum_{i+j=k+2, i,j>=3} i j vec(V_i^T B R^-1 B^T V_j);
    // the i=2 / j=2 cross terms live in the closed-loop matrix on the left.
    for (int i = 3; i <= k - 1; ++i) {
        const int j = k + 2 - i;
        if (j < 3 || j > k - 1) continue;
        const Matrix vib = detail::coeff_matricization(coeffs, n, i).transpose() * dyn.B;
        const Matrix vjb = detail::coeff_matricization(coeffs, n, j).transpose() * dyn.B;
        Eigen::Map<Matrix>(rhs.data(), kron_length(n, i - 1), kron_length(n, j - 1)).noalias() +=
            (0.25 * i * j) * (vib * r_inv) * vjb.transpose();
    }

    // (iv) + 1/4 sum over o = p+q >= 1, i+j = k-o+2 of the G_p/G_q cross
    // terms (G_0 = B); each summand materializes one n^k block at most.
    const int ellg = dyn.input_degree();
    for (int o = 1; o <= 2 * ellg && o <= k - 2; ++o) {
        for (int p = 0; p <= o; ++p) {
            const int q = o - p;
            if (p > ellg || q > ellg) continue;
            if (p > 0 && dyn.G.find(p) == dyn.G.end()) continue;
            if (q > 0 && dyn.G.find(q) == dyn.G.end()) continue;
            for (int i = 2; i <= k - o; ++i) {
                const int j = k - o + 2 - i;
                if (j < 2) continue;
                const Matrix zi = detail::input_value_block(dyn, p, detail::coeff_matricization(coeffs, n, i));
                const Matrix wj = detail::input_value_block(dyn, q, detail::coeff_matricization(coeffs, n, j));
                Eigen::Map<Matrix>(rhs.data(), kron_length(n, p + i - 1), kron_length(n, q + j - 1)).noalias() +=
                    (0.25 * i * j) * (zi * r_inv) * wj.transpose();
            }
        }
    }
    return rhs;
}

struct SynthesisOptions {
    double are_tol = 1e-10;
    double solver_tol = 1e-10;
    Index element_budget = 500000000;  // refuse n^d beyond this many doubles
};

struct DegreeReport {
    int k = 0;
    double rel_residual = 0.0;
    double imag_ratio = 0.0;
    int refinements = 0;
    double seconds = 0.0;
};

struct SynthesisReport {
    double are_residual = 0.0;
    double are_seconds = 0.0;
    double abscissa = 0.0;
    std::vector<DegreeReport> degrees;
    std::vector<std::string> warnings;
};

/// Al'brekht synthesis: Riccati at degree 2, then one structured solve plus
/// symmetrization per degree, strictly in increasing k.
inline ValueFunction synthesize(const PolyDynamics& dyn, const PolyCost& cost, int d,
                                const SynthesisOptions& opts = {}, SynthesisReport* report = nullptr) {
    using clock = std::chrono::steady_clock;
    dyn.validate();
    cost.validate(dyn.n, dyn.m);
    if (d < 2) throw DimensionError("synthesize: degree must be >= 2");
    if (std::pow(static_cast<double>(dyn.n), d) > static_cast<double>(opts.element_budget))
        throw SynthesisError("synthesize: n^d = " + std::to_string(dyn.n) + "^" + std::to_string(d) +
                             " exceeds the coefficient element budget (" + std::to_string(opts.element_budget) +
                             "); lower the degree or raise PPR_ELEMENT_BUDGET");

    const auto t0 = clock::now();
    AreSolution are = solve_are(dyn.A, dyn.B, cost.Q, cost.R, opts.are_tol);
    ValueFunction value;
    value.n = dyn.n;
    value.degree = d;
    value.coeffs.emplace_back(Eigen::Map<const Vector>(are.V2.data(), dyn.n * dyn.n));
    if (report) {
        report->are_residual = are.residual_norm;
        report->are_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }

    if (d >= 3) {
        KwayLyapunovSolver solver(are.Acl);
        if (report) report->abscissa = solver.spectral_abscissa();
        for (int k = 3; k <= d; ++k) {
            const auto tk = clock::now();
            Vector rhs = assemble_rhs(dyn, cost, value.coeffs, k);
            KwayLyapunovSolver::SolveInfo info;
            Vector vk = solver.solve(k, rhs, &info, opts.solver_tol);
            rhs.resize(0);
            symmetrize_inplace(vk, dyn.n, k);
            value.coeffs.push_back(std::move(vk));
            if (report)
                report->degrees.push_back({k, info.rel_residual, info.imag_ratio, info.refinements,
                                           std::chrono::duration<double>(clock::now() - tk).count()});
        }
    } else if (report) {
        report->abscissa = detail::spectral_abscissa(are.Acl);
    }
    if (d % 2 == 1 && report)
        report->warnings.push_back(
            "odd value degree " + std::to_string(d) + " yields an even-degree feedback law (degree " +
            std::to_string(d - 1) + "); even-degree controllers are discouraged");
    return value;
}

// ---------------------------------------------------------------------------
// HJB residual machinery.

template <class Scalar>
struct HjbTerms {
    Scalar drift{};  //  dV/dx . f(x)
    Scalar input{};  // -1/2 dV/dx . g R^-1 g^T dV/dx
    Scalar cost{};   //  1/2 (x^T Q x + sum q_p^T x^p)
    Scalar total() const { return drift + input + cost; }
};

template <class Scalar>
HjbTerms<Scalar> hjb_terms_at(const PolyDynamics& dyn, const PolyCost& cost, const ValueFunction& value,
                              const Matrix& r_inv, const VectorX<Scalar>& x) {
    HjbTerms<Scalar> out;
    const VectorX<Scalar> grad = value.gradient(x);
    const VectorX<Scalar> f = dyn.drift(x);
    const MatrixX<Scalar> g = dyn.input_map(x);
    for (Index i = 0; i < dyn.n; ++i) out.drift += grad[i] * f[i];
    VectorX<Scalar> gt = VectorX<Scalar>::Zero(dyn.m);
    for (Index a = 0; a < dyn.m; ++a)
        for (Index i = 0; i < dyn.n; ++i) gt[a] += g(i, a) * grad[i];
    Scalar quad = Scalar(0);
    for (Index a = 0; a < dyn.m; ++a)
        for (Index b = 0; b < dyn.m; ++b) quad += gt[a] * r_inv(a, b) * gt[b];
    out.input = Scalar(-0.5) * quad;
    out.cost = Scalar(0.5) * cost.state_penalty(x);
    return out;
}

/// Pointwise HJB residual; zero for the exact value function.
template <class Scalar>
Scalar hjb_residual_at(const PolyDynamics& dyn, const PolyCost& cost, const ValueFunction& value,
                       const VectorX<Scalar>& x) {
    return hjb_terms_at(dyn, cost, value, cost.r_inverse(), x).total();
}

struct DegreeResiduals {
    int max_degree = 0;
    std::vector<double> absolute;  // max_x |degree-k part of the residual|
    std::vector<double> scale;     // max_x max over term families of |degree-k part|
    double relative(int k) const {
        const double s = std::max(scale[k], 1e-300);
        return absolute[k] / std::max(s, 1e-12 * *std::max_element(scale.begin(), scale.end()));
    }
};

/// Isolates the degree-k parts of the HJB residual over random unit-sphere
/// samples. The residual is a polynomial of bounded degree in the scale
/// factor, so sampling on a complex circle and reading the coefficients off
/// a DFT is exact; term-family magnitudes provide the relative scale.
inline DegreeResiduals hjb_degree_residuals(const PolyDynamics& dyn, const PolyCost& cost,
                                            const ValueFunction& value, int num_samples = 200,
                                            unsigned seed = 0x5eed) {
    using C = std::complex<double>;
    const int max_deg = std::max({2 * (value.degree - 1 + dyn.ell()), cost.max_state_degree(), 2});
    const int m_pts = max_deg + 2;
    const double radius = 0.25;
    const Matrix r_inv = cost.r_inverse();

    DegreeResiduals out;
    out.max_degree = max_deg;
    out.absolute.assign(max_deg + 1, 0.0);
    out.scale.assign(max_deg + 1, 0.0);

    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<HjbTerms<C>> ring(m_pts);
    for (int sample = 0; sample < num_samples; ++sample) {
        Vector dir(dyn.n);
        do {
            for (Index i = 0; i < dyn.n; ++i) dir[i] = gauss(rng);
        } while (dir.norm() == 0.0);
        dir /= dir.norm();
        for (int t = 0; t < m_pts; ++t) {
            const C eps = std::polar(radius, 2.0 * std::numbers::pi * t / m_pts);
            ComplexVector xc = eps * dir.cast<C>();
            ring[t] = hjb_terms_at<C>(dyn, cost, value, r_inv, xc);
        }
        for (int j = 0; j <= max_deg; ++j) {
            C cd = 0, ci = 0, cc = 0;
            for (int t = 0; t < m_pts; ++t) {
                const C w = std::polar(1.0, -2.0 * std::numbers::pi * j * t / m_pts);
                cd += w * ring[t].drift;
                ci += w * ring[t].input;
                cc += w * ring[t].cost;
            }
            const double rj = std::pow(radius, j) * m_pts;
            cd /= rj;
            ci /= rj;
            cc /= rj;
            out.absolute[j] = std::max(out.absolute[j], std::abs(cd + ci + cc));
            out.scale[j] = std::max({out.scale[j], std::abs(cd), std::abs(ci), std::abs(cc)});
        }
    }
    return out;
}

/// Max |degree-k part of the HJB residual| over random unit-sphere samples.
inline double hjb_degree_residual(const PolyDynamics& dyn, const PolyCost& cost, const ValueFunction& value,
                                  int k, int num_samples = 200, unsigned seed = 0x5eed) {
    DegreeResiduals res = hjb_degree_residuals(dyn, cost, value, num_samples, seed);
    if (k < 0 || k > res.max_degree) return 0.0;
    return res.absolute[k];
}

/// Least-squares slope of log(max |HJB residual|) against log(radius);
/// approximately d+1 for a degree-d synthesized value function. Evaluated in
/// extended precision so the floor sits below the smallest radius.
inline double hjb_residual_slope(const PolyDynamics& dyn, const PolyCost& cost, const ValueFunction& value,
                                 double lo = 1e-3, double hi = 1e-1, int num_radii = 9, int num_dirs = 50,
                                 unsigned seed = 0x51073) {
    using LD = long double;
    const Matrix r_inv = cost.r_inverse();
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<VectorX<LD>> dirs;
    for (int i = 0; i < num_dirs; ++i) {
        Vector d(dyn.n);
        do {
            for (Index j = 0; j < dyn.n; ++j) d[j] = gauss(rng);
        } while (d.norm() == 0.0);
        d /= d.norm();
        dirs.push_back(d.cast<LD>());
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < num_radii; ++i) {
        const double r = lo * std::pow(hi / lo, static_cast<double>(i) / (num_radii - 1));
        LD worst = 0;
        for (const auto& d : dirs) {
            VectorX<LD> x = static_cast<LD>(r) * d;
            const LD res = hjb_terms_at<LD>(dyn, cost, value, r_inv, x).total();
            worst = std::max(worst, std::abs(res));
        }
        const double lx = std::log(r);
        const double ly = std::log(static_cast<double>(std::max(worst, LD(1e-300))));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double npts = num_radii;
    return (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
}

}  // namespace ppr
