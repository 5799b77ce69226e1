#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmfg/grid.hpp"

namespace mmfg {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Hamiltonian H(x, p) with its derivative data. `hess_px` is d^2 H / dp dx.
struct HamiltonianSpec {
    std::function<double(double, double)> eval;
    std::function<double(double, double)> grad_p;
    std::function<double(double, double)> grad_x;
    std::function<double(double, double)> hess_pp;  // may be empty
    std::function<double(double, double)> hess_px;  // may be empty
    std::optional<double> convexity;                // lambda' with hess_pp >= lambda'
};

struct LegendreResult {
    double value;       // H(x, p)
    double maximizer;   // alpha* = -grad_p H(x, p)
};

/// Lagrangian L(x, alpha), lambda-strictly convex in alpha.
struct LagrangianSpec {
    std::function<double(double, double)> eval;
    std::function<double(double, double)> grad_alpha;
    double convexity = 0.0;
    /// Closed-form conjugate (H, alpha*), set for quadratic Lagrangians.
    std::function<LegendreResult(double, double)> conjugate;
};

/// Kernel delta_mu f(x, y) tabulated on the grid (row x, column y).
struct MuKernel {
    PeriodicGrid grid;
    std::vector<double> k;  // n*n, row-major

    MuKernel() = default;
    explicit MuKernel(const PeriodicGrid& g) : grid(g), k(g.n * g.n, 0.0) {}

    double& at(int x, int y) { return k[x * grid.n + y]; }
    double at(int x, int y) const { return k[x * grid.n + y]; }

    /// Pairing in y against a signed measure: returns the field
    /// x -> sum_y k(x,y) q_y.
    ScalarField pair_y(const SignedMeasure& q) const {
        ScalarField out(grid);
        for (int x = 0; x < grid.n; ++x) {
            double s = 0.0;
            const double* row = &k[x * grid.n];
            for (int y = 0; y < grid.n; ++y) s += row[y] * q.mass[y];
            out[x] = s;
        }
        return out;
    }
};

/// Cost datum. Time-dependent running costs f0, f; terminal costs g0, g;
/// optional long-time coefficients F0, F (Assumption-B shape).
/// Derivative callbacks are optional; the linearized solver requires them.
struct CostSpec {
    std::function<double(double, double, const DensityField&)> f0;
    std::function<ScalarField(double, double, const DensityField&)> f;
    std::function<double(double, const DensityField&)> g0;
    std::function<ScalarField(double, const DensityField&)> g;
    std::function<double(double)> F0;                      // may be empty
    std::function<ScalarField(const DensityField&)> F;     // may be empty

    std::function<double(double, double, const DensityField&)> grad_x0_f0;
    std::function<ScalarField(double, double, const DensityField&)> delta_mu_f0;
    std::function<ScalarField(double, double, const DensityField&)> grad_x0_f;
    std::function<MuKernel(double, double, const DensityField&)> delta_mu_f;
    std::function<double(double, const DensityField&)> grad_x0_g0;
    std::function<ScalarField(double, const DensityField&)> delta_mu_g0;
    std::function<ScalarField(double, const DensityField&)> grad_x0_g;
    std::function<MuKernel(double, const DensityField&)> delta_mu_g;
};

/// The full problem datum.
struct ModelSpec {
    std::string name;
    HamiltonianSpec H0;
    HamiltonianSpec H;
    LagrangianSpec L0;
    LagrangianSpec L;
    CostSpec costs;
    double sigma0 = 1.0;
    double T = 1.0;
    double x0_domain = 0.0;  // half-width of the major-state box; 0 = auto
    double x0_period = 0.0;  // costs periodic in x0 with this period; 0 = aperiodic
    std::map<std::string, double> params;

    bool has_assumption_b() const { return static_cast<bool>(costs.F0); }

    /// Box half-width covering x0 plus the binomial walk range. For
    /// x0-periodic costs the box is one period.
    double x0_box_half_width(double x0, int tree_depth) const {
        if (x0_domain > 0) return x0_domain;
        if (x0_period > 0) return 0.5 * x0_period;
        double walk = std::sqrt(static_cast<double>(std::max(tree_depth, 1)) * T);
        return std::abs(x0) + std::max(4.0 * sigma0 * std::sqrt(T), walk) + 1.0;
    }
};

// ---------------------------------------------------------------------------
// Legendre transform
// ---------------------------------------------------------------------------

/// H(x,p) = sup_alpha [ -p*alpha - L(x,alpha) ], with the maximizer
/// alpha* = -grad_p H(x,p). Closed form when the Lagrangian provides one,
/// golden-section search on [-50, 50] otherwise.
inline LegendreResult legendre(const LagrangianSpec& L, double x, double p) {
    if (L.conjugate) return L.conjugate(x, p);

    constexpr double lo_box = -50.0, hi_box = 50.0, tol = 1e-10;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    auto phi = [&](double a) { return -p * a - L.eval(x, a); };

    double lo = lo_box, hi = hi_box;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = phi(c), fd = phi(d);
    while (hi - lo > tol) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = phi(d);
        }
    }
    double a_star = 0.5 * (lo + hi);
    if (a_star < lo_box + 1e-6 || a_star > hi_box - 1e-6)
        throw std::domain_error("legendre: maximizer at search-box boundary (|p| too large "
                                "or Lagrangian not coercive)");
    return {phi(a_star), a_star};
}

// ---------------------------------------------------------------------------
// Hamiltonian truncation (cutoff zeta, convexified radial profile phi)
// ---------------------------------------------------------------------------

namespace detail {

/// C^2 cutoff: 1 on [0, R], 0 outside [0, R^2], quintic smoothstep between.
struct TruncationCutoff {
    double R;
    double width;  // R^2 - R

    explicit TruncationCutoff(double R_) : R(R_), width(R_ * R_ - R_) {}

    double value(double p) const {
        double r = std::abs(p);
        if (r <= R) return 1.0;
        if (r >= R * R) return 0.0;
        double t = (r - R) / width;
        return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    }
    double d1(double p) const {
        double r = std::abs(p);
        if (r <= R || r >= R * R) return 0.0;
        double t = (r - R) / width;
        double s1 = -30.0 * t * t * (1.0 - t) * (1.0 - t);
        return s1 / width * (p >= 0 ? 1.0 : -1.0);
    }
    double d2(double p) const {
        double r = std::abs(p);
        if (r <= R || r >= R * R) return 0.0;
        double t = (r - R) / width;
        double s2 = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        return s2 / (width * width);
    }
};

/// Radial profile phi of the proof: phi'' = 1 on [0,R], r/R on [R,R^2],
/// a linear taper down to R/2 on [R^2, 2R^2], and the 2R^5/r^2 tail beyond.
/// phi' and phi are the exact piecewise antiderivatives, so phi is C^2.
struct TruncationProfile {
    double R;
    double dp_R, v_R;    // phi', phi at r = R
    double dp_R2, v_R2;  // at r = R^2
    double dp_2R2, v_2R2;  // at r = 2R^2

    explicit TruncationProfile(double R_) : R(R_) {
        const double R2 = R * R;
        dp_R = R;
        v_R = 0.5 * R * R;
        dp_R2 = dp_R + (R2 * R2 - R * R) / (2.0 * R);
        v_R2 = v_R + 0.5 * R * (R2 - R) + (R2 * R2 * R2 - R * R * R) / (6.0 * R);
        // taper piece has length R^2
        dp_2R2 = dp_R2 + R * R2 - R2 * R2 / (4.0 * R);
        v_2R2 = v_R2 + dp_R2 * R2 + 0.5 * R * R2 * R2 - R2 * R2 * R2 / (12.0 * R);
    }

    double d2(double r) const {
        r = std::abs(r);
        const double R2 = R * R;
        if (r <= R) return 1.0;
        if (r <= R2) return r / R;
        if (r <= 2.0 * R2) return R - (r - R2) / (2.0 * R);
        return 2.0 * R2 * R2 * R / (r * r);
    }
    double d1(double r) const {
        const double sign = r >= 0 ? 1.0 : -1.0;
        r = std::abs(r);
        const double R2 = R * R;
        if (r <= R) return sign * r;
        if (r <= R2) return sign * (dp_R + (r * r - R * R) / (2.0 * R));
        if (r <= 2.0 * R2) {
            double s = r - R2;
            return sign * (dp_R2 + R * s - s * s / (4.0 * R));
        }
        return sign * (dp_2R2 + 2.0 * R2 * R2 * R * (1.0 / (2.0 * R2) - 1.0 / r));
    }
    double value(double r) const {
        r = std::abs(r);
        const double R2 = R * R;
        if (r <= R) return 0.5 * r * r;
        if (r <= R2)
            return v_R + 0.5 * R * (r - R) + (r * r * r - R * R * R) / (6.0 * R);
        if (r <= 2.0 * R2) {
            double s = r - R2;
            return v_R2 + dp_R2 * s + 0.5 * R * s * s - s * s * s / (12.0 * R);
        }
        double s = r - 2.0 * R2;
        const double C = 2.0 * R2 * R2 * R;  // tail curvature constant 2R^5
        return v_2R2 + (dp_2R2 + C / (2.0 * R2)) * s - C * std::log(r / (2.0 * R2));
    }
};

}  // namespace detail

/// Lemma-style truncation: returns H_hat equal to H on |p| <= R, globally
/// Lipschitz in p, with positive curvature everywhere:
///   H_hat(x,p) = (H(x,p) - lambda'/4 |p|^2) zeta(p) + lambda'/2 Phi(p).
/// The pieces of zeta and the radial profile follow the construction with
/// cutoff on [R, R^2] and the 2R^5/r^2 curvature tail. Curvature positivity
/// holds for moderate R and is sampled by callers, not certified.
inline HamiltonianSpec truncate_hamiltonian(const HamiltonianSpec& H, double R) {
    if (R < 2.0) throw std::invalid_argument("truncate_hamiltonian: R must be >= 2");
    if (!H.convexity || !H.hess_pp)
        throw std::invalid_argument("truncate_hamiltonian: needs declared convexity and hess_pp");
    const double lam = *H.convexity;
    auto zeta = std::make_shared<detail::TruncationCutoff>(R);
    auto prof = std::make_shared<detail::TruncationProfile>(R);
    auto base = std::make_shared<HamiltonianSpec>(H);

    HamiltonianSpec out;
    out.eval = [zeta, prof, base, lam](double x, double p) {
        double z = zeta->value(p);
        double core = z == 0.0 ? 0.0 : (base->eval(x, p) - 0.25 * lam * p * p) * z;
        return core + 0.5 * lam * prof->value(p);
    };
    out.grad_p = [zeta, prof, base, lam](double x, double p) {
        double z = zeta->value(p), dz = zeta->d1(p);
        double core = 0.0;
        if (z != 0.0 || dz != 0.0)
            core = (base->grad_p(x, p) - 0.5 * lam * p) * z +
                   (base->eval(x, p) - 0.25 * lam * p * p) * dz;
        return core + 0.5 * lam * prof->d1(p);
    };
    out.grad_x = [zeta, base](double x, double p) {
        double z = zeta->value(p);
        return z == 0.0 ? 0.0 : base->grad_x(x, p) * z;
    };
    out.hess_pp = [zeta, prof, base, lam](double x, double p) {
        double z = zeta->value(p), dz = zeta->d1(p), d2z = zeta->d2(p);
        double core = 0.0;
        if (z != 0.0 || dz != 0.0 || d2z != 0.0)
            core = (base->hess_pp(x, p) - 0.5 * lam) * z +
                   2.0 * (base->grad_p(x, p) - 0.5 * lam * p) * dz +
                   (base->eval(x, p) - 0.25 * lam * p * p) * d2z;
        return core + 0.5 * lam * prof->d2(p);
    };
    if (H.hess_px) {
        out.hess_px = [zeta, base](double x, double p) {
            double z = zeta->value(p), dz = zeta->d1(p);
            return base->hess_px(x, p) * z + base->grad_x(x, p) * dz;
        };
    }
    return out;
}

/// Cutoff used by the truncated major driver L_hat0(x, p) = L0(x, -zeta(p) grad_p H0(x, p)).
inline std::function<double(double, double)> truncated_major_driver(
    const LagrangianSpec& L0, const HamiltonianSpec& H0, double R) {
    if (R < 2.0) throw std::invalid_argument("truncated_major_driver: R must be >= 2");
    auto zeta = std::make_shared<detail::TruncationCutoff>(R);
    auto l0 = std::make_shared<LagrangianSpec>(L0);
    auto h0 = std::make_shared<HamiltonianSpec>(H0);
    return [zeta, l0, h0](double x, double p) {
        return l0->eval(x, -zeta->value(p) * h0->grad_p(x, p));
    };
}

// ---------------------------------------------------------------------------
// Lasry-Lions monotonicity sampling
// ---------------------------------------------------------------------------

struct MonotonicityReport {
    int samples = 0;
    double min_f = 0.0;
    double min_g = 0.0;
    int violations = 0;
    bool monotone_sampled() const { return min_f >= -1e-12 && min_g >= -1e-12; }
};

/// Random smooth density from a low-frequency log-linear profile.
inline DensityField random_smooth_density(const PeriodicGrid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> amp(-1.2, 1.2), phase(0.0, 1.0);
    double a1 = amp(rng), a2 = amp(rng), p1 = phase(rng), p2 = phase(rng);
    std::vector<double> w(g.n);
    for (int j = 0; j < g.n; ++j) {
        double x = g.x(j);
        w[j] = std::exp(a1 * std::sin(2.0 * M_PI * (x + p1)) +
                        a2 * std::cos(4.0 * M_PI * (x + p2)));
    }
    return DensityField::from_weights(g, w);
}

/// Samples int (f(mu') - f(mu)) d(mu' - mu) over random pairs and reports the
/// minimum for f and g. Nonnegative minima mean "monotone (sampled)".
inline MonotonicityReport check_lasry_lions(const CostSpec& cost, const PeriodicGrid& grid,
                                            int n_samples, double T = 1.0,
                                            std::uint64_t seed = 20240801ull) {
    if (n_samples < 1) throw std::invalid_argument("check_lasry_lions: n_samples >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ts(0.0, T), x0s(-2.0, 2.0);
    MonotonicityReport rep;
    rep.samples = n_samples;
    rep.min_f = rep.min_g = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_samples; ++s) {
        DensityField mu = random_smooth_density(grid, rng);
        DensityField nu = random_smooth_density(grid, rng);
        double t = ts(rng), x0 = x0s(rng);
        SignedMeasure d = SignedMeasure::difference(nu, mu);
        ScalarField df = cost.f(t, x0, nu) - cost.f(t, x0, mu);
        double If = d.pair(df);
        ScalarField dg = cost.g(x0, nu) - cost.g(x0, mu);
        double Ig = d.pair(dg);
        rep.min_f = std::min(rep.min_f, If);
        rep.min_g = std::min(rep.min_g, Ig);
        if (If < -1e-12 || Ig < -1e-12) ++rep.violations;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

namespace detail {

inline HamiltonianSpec quadratic_hamiltonian() {
    HamiltonianSpec H;
    H.eval = [](double, double p) { return 0.5 * p * p; };
    H.grad_p = [](double, double p) { return p; };
    H.grad_x = [](double, double) { return 0.0; };
    H.hess_pp = [](double, double) { return 1.0; };
    H.hess_px = [](double, double) { return 0.0; };
    H.convexity = 1.0;
    return H;
}

inline LagrangianSpec quadratic_lagrangian() {
    LagrangianSpec L;
    L.eval = [](double, double a) { return 0.5 * a * a; };
    L.grad_alpha = [](double, double a) { return a; };
    L.convexity = 1.0;
    L.conjugate = [](double, double p) { return LegendreResult{0.5 * p * p, -p}; };
    return L;
}

/// Convolution kernel rho(x) = 1 + r1 cos(2 pi x) + r2 cos(4 pi x); the
/// Fourier coefficients are nonnegative for r1, r2 >= 0, which gives the
/// Lasry-Lions property. Tables are memoized per grid size.
struct ConvKernel {
    double r1, r2;
    mutable std::mutex mu;
    mutable std::map<int, std::vector<double>> tables;

    ConvKernel(double a, double b) : r1(a), r2(b) {}

    const std::vector<double>& table(const PeriodicGrid& g) const {
        std::lock_guard<std::mutex> lock(mu);
        auto it = tables.find(g.n);
        if (it != tables.end()) return it->second;
        std::vector<double> t(g.n);
        for (int k = 0; k < g.n; ++k) {
            double x = k * g.h;
            t[k] = 1.0 + r1 * std::cos(2.0 * M_PI * x) + r2 * std::cos(4.0 * M_PI * x);
        }
        return tables.emplace(g.n, std::move(t)).first->second;
    }

    ScalarField convolve(const DensityField& mu_) const {
        const auto& t = table(mu_.grid);
        const int n = mu_.grid.n;
        ScalarField out(mu_.grid);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += t[(i - j + n) % n] * mu_.mass[j];
            out[i] = s;
        }
        return out;
    }

    /// delta_mu (rho * mu)(x) at y, with the zero-mean-in-mu convention.
    MuKernel kernel(const DensityField& mu_) const {
        const auto& t = table(mu_.grid);
        const int n = mu_.grid.n;
        ScalarField conv = convolve(mu_);
        MuKernel K(mu_.grid);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) K.at(x, y) = t[(x - y + n) % n] - conv[x];
        return K;
    }
};

inline void check_keys(const std::map<std::string, double>& overrides,
                       const std::map<std::string, double>& allowed,
                       const std::string& model) {
    for (const auto& [k, v] : overrides) {
        if (!allowed.count(k))
            throw std::invalid_argument("unknown model key '" + k + "' for model " + model);
    }
}

}  // namespace detail

/// Names of the built-in models.
inline std::vector<std::string> builtin_model_names() {
    return {"zero", "lq", "monotone-conv", "assumption-b"};
}

/// Builds a named model, applying key=value overrides. Unknown keys are a
/// hard error.
inline ModelSpec make_model(const std::string& name,
                            const std::map<std::string, double>& overrides = {}) {
    ModelSpec m;
    m.name = name;
    m.H0 = detail::quadratic_hamiltonian();
    m.H = detail::quadratic_hamiltonian();
    m.L0 = detail::quadratic_lagrangian();
    m.L = detail::quadratic_lagrangian();

    auto zero_scalar = [](double, double, const DensityField& mu) { return 0.0; };
    auto zero_field = [](double, double, const DensityField& mu) { return ScalarField(mu.grid); };

    std::map<std::string, double> p;  // defaults, model specific
    auto common = [&] {
        p["sigma0"] = m.sigma0;
        p["T"] = m.T;
        p["x0_domain"] = 0.0;
    };

    if (name == "zero") {
        m.sigma0 = 1.0;
        m.T = 1.0;
        common();
        detail::check_keys(overrides, p, name);
        for (const auto& [k, v] : overrides) p[k] = v;
        m.costs.f0 = zero_scalar;
        m.costs.f = zero_field;
        m.costs.g0 = [](double, const DensityField&) { return 0.0; };
        m.costs.g = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_f0 = zero_scalar;
        m.costs.delta_mu_f0 = zero_field;
        m.costs.grad_x0_f = zero_field;
        m.costs.delta_mu_f = [](double, double, const DensityField& mu) { return MuKernel(mu.grid); };
        m.costs.grad_x0_g0 = [](double, const DensityField&) { return 0.0; };
        m.costs.delta_mu_g0 = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_g = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.delta_mu_g = [](double, const DensityField& mu) { return MuKernel(mu.grid); };
    } else if (name == "lq") {
        m.sigma0 = 1.0;
        m.T = 1.0;
        common();
        p["q"] = 1.0;
        p["qT"] = 0.5;
        detail::check_keys(overrides, p, name);
        for (const auto& [k, v] : overrides) p[k] = v;
        double q = p["q"], qT = p["qT"];
        m.costs.f0 = [q](double, double x0, const DensityField&) { return 0.5 * q * x0 * x0; };
        m.costs.g0 = [qT](double x0, const DensityField&) { return 0.5 * qT * x0 * x0; };
        m.costs.f = zero_field;
        m.costs.g = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_f0 = [q](double, double x0, const DensityField&) { return q * x0; };
        m.costs.delta_mu_f0 = zero_field;
        m.costs.grad_x0_f = zero_field;
        m.costs.delta_mu_f = [](double, double, const DensityField& mu) { return MuKernel(mu.grid); };
        m.costs.grad_x0_g0 = [qT](double x0, const DensityField&) { return qT * x0; };
        m.costs.delta_mu_g0 = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_g = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.delta_mu_g = [](double, const DensityField& mu) { return MuKernel(mu.grid); };
    } else if (name == "monotone-conv") {
        m.sigma0 = 3.0;
        m.T = 0.5;
        common();
        p["rho1"] = 0.5;
        p["rho2"] = 0.25;
        p["cf"] = 0.5;
        p["cg"] = 0.5;
        p["cgx"] = 0.2;
        p["q0"] = 1.0;
        p["qT0"] = 0.5;
        p["c0"] = 0.3;
        detail::check_keys(overrides, p, name);
        for (const auto& [k, v] : overrides) p[k] = v;
        auto rho = std::make_shared<detail::ConvKernel>(p["rho1"], p["rho2"]);
        double cf = p["cf"], cg = p["cg"], cgx = p["cgx"];
        double q0 = p["q0"], qT0 = p["qT0"], c0 = p["c0"];

        auto mcos = [](const DensityField& mu) {
            double s = 0.0;
            for (int j = 0; j < mu.size(); ++j) s += std::cos(2.0 * M_PI * mu.grid.x(j)) * mu.mass[j];
            return s;
        };
        m.costs.f = [rho, cf](double, double x0, const DensityField& mu) {
            ScalarField out = rho->convolve(mu);
            double th = std::tanh(x0);
            for (int j = 0; j < out.size(); ++j)
                out[j] += cf * std::cos(2.0 * M_PI * out.grid.x(j)) * th;
            return out;
        };
        m.costs.g = [rho, cg, cgx](double x0, const DensityField& mu) {
            ScalarField out = rho->convolve(mu);
            out *= cg;
            double th = std::tanh(x0);
            for (int j = 0; j < out.size(); ++j)
                out[j] += cgx * std::cos(2.0 * M_PI * out.grid.x(j)) * th;
            return out;
        };
        m.costs.f0 = [q0, c0, mcos](double, double x0, const DensityField& mu) {
            return 0.5 * q0 * x0 * x0 + c0 * std::tanh(x0) * mcos(mu);
        };
        m.costs.g0 = [qT0](double x0, const DensityField&) { return 0.5 * qT0 * x0 * x0; };

        m.costs.grad_x0_f0 = [q0, c0, mcos](double, double x0, const DensityField& mu) {
            double sech = 1.0 / std::cosh(x0);
            return q0 * x0 + c0 * sech * sech * mcos(mu);
        };
        m.costs.delta_mu_f0 = [c0, mcos](double, double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            double mc = mcos(mu), th = std::tanh(x0);
            for (int y = 0; y < out.size(); ++y)
                out[y] = c0 * th * (std::cos(2.0 * M_PI * mu.grid.x(y)) - mc);
            return out;
        };
        m.costs.grad_x0_f = [cf](double, double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            double sech = 1.0 / std::cosh(x0);
            for (int j = 0; j < out.size(); ++j)
                out[j] = cf * std::cos(2.0 * M_PI * mu.grid.x(j)) * sech * sech;
            return out;
        };
        m.costs.delta_mu_f = [rho](double, double, const DensityField& mu) {
            return rho->kernel(mu);
        };
        m.costs.grad_x0_g0 = [qT0](double x0, const DensityField&) { return qT0 * x0; };
        m.costs.delta_mu_g0 = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_g = [cgx](double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            double sech = 1.0 / std::cosh(x0);
            for (int j = 0; j < out.size(); ++j)
                out[j] = cgx * std::cos(2.0 * M_PI * mu.grid.x(j)) * sech * sech;
            return out;
        };
        m.costs.delta_mu_g = [rho, cg](double, const DensityField& mu) {
            MuKernel K = rho->kernel(mu);
            for (double& v : K.k) v *= cg;
            return K;
        };
    } else if (name == "assumption-b") {
        m.sigma0 = 2.0;
        m.T = 2.0;
        common();
        p["rho1"] = 0.5;
        p["rho2"] = 0.25;
        p["b0"] = 0.5;
        p["pert_amp"] = 1.0;
        p["c0b"] = 0.3;
        p["gb"] = 0.3;
        p["gbx"] = 0.2;
        p["g0b"] = 0.3;
        detail::check_keys(overrides, p, name);
        for (const auto& [k, v] : overrides) p[k] = v;
        auto rho = std::make_shared<detail::ConvKernel>(p["rho1"], p["rho2"]);
        double b0 = p["b0"], pert = p["pert_amp"], gb = p["gb"], gbx = p["gbx"], g0b = p["g0b"];
        double c0b = p["c0b"];
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        auto mcos = [](const DensityField& mu) {
            double s = 0.0;
            for (int j = 0; j < mu.size(); ++j)
                s += std::cos(2.0 * M_PI * mu.grid.x(j)) * mu.mass[j];
            return s;
        };

        m.costs.F0 = [b0](double x0) { return b0 * std::cos(x0); };
        m.costs.F = [rho](const DensityField& mu) { return rho->convolve(mu); };
        m.costs.f = [rho, pert, inv_sqrt2](double t, double x0, const DensityField& mu) {
            ScalarField out = rho->convolve(mu);
            double decay = pert * std::exp(-t) * inv_sqrt2;
            double cx = std::cos(x0);
            for (int j = 0; j < out.size(); ++j) {
                double x = out.grid.x(j);
                out[j] += decay * (std::sin(2.0 * M_PI * x) + std::cos(2.0 * M_PI * x) * cx);
            }
            return out;
        };
        m.costs.f0 = [b0, pert, c0b, mcos](double t, double x0, const DensityField& mu) {
            return b0 * std::cos(x0) +
                   std::exp(-t) * (pert * std::sin(x0) + c0b * std::cos(x0) * mcos(mu));
        };
        m.costs.g = [rho, gb, gbx](double x0, const DensityField& mu) {
            ScalarField out = rho->convolve(mu);
            out *= gb;
            double cx = std::cos(x0);
            for (int j = 0; j < out.size(); ++j)
                out[j] += gbx * std::cos(2.0 * M_PI * out.grid.x(j)) * cx;
            return out;
        };
        m.costs.g0 = [g0b](double x0, const DensityField&) { return g0b * std::cos(x0); };

        m.costs.grad_x0_f0 = [b0, pert, c0b, mcos](double t, double x0, const DensityField& mu) {
            return -b0 * std::sin(x0) +
                   std::exp(-t) * (pert * std::cos(x0) - c0b * std::sin(x0) * mcos(mu));
        };
        m.costs.delta_mu_f0 = [c0b, mcos](double t, double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            double mc = mcos(mu);
            double amp = c0b * std::exp(-t) * std::cos(x0);
            for (int y = 0; y < out.size(); ++y)
                out[y] = amp * (std::cos(2.0 * M_PI * mu.grid.x(y)) - mc);
            return out;
        };
        m.costs.grad_x0_f = [pert, inv_sqrt2](double t, double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            double decay = pert * std::exp(-t) * inv_sqrt2;
            for (int j = 0; j < out.size(); ++j)
                out[j] = -decay * std::cos(2.0 * M_PI * mu.grid.x(j)) * std::sin(x0);
            return out;
        };
        m.costs.delta_mu_f = [rho](double, double, const DensityField& mu) {
            return rho->kernel(mu);
        };
        m.costs.grad_x0_g0 = [g0b](double x0, const DensityField&) { return -g0b * std::sin(x0); };
        m.costs.delta_mu_g0 = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
        m.costs.grad_x0_g = [gbx](double x0, const DensityField& mu) {
            ScalarField out(mu.grid);
            for (int j = 0; j < out.size(); ++j)
                out[j] = -gbx * std::cos(2.0 * M_PI * mu.grid.x(j)) * std::sin(x0);
            return out;
        };
        m.costs.delta_mu_g = [rho, gb](double, const DensityField& mu) {
            MuKernel K = rho->kernel(mu);
            for (double& v : K.k) v *= gb;
            return K;
        };
        m.x0_period = 2.0 * M_PI;
    } else {
        throw std::invalid_argument("unknown model '" + name + "'");
    }

    m.sigma0 = p["sigma0"];
    m.T = p["T"];
    m.x0_domain = p["x0_domain"];
    if (m.sigma0 <= 0) throw std::invalid_argument("model: sigma0 must be > 0");
    if (m.T <= 0) throw std::invalid_argument("model: T must be > 0");
    if (m.has_assumption_b() && m.sigma0 < 1.0)
        throw std::invalid_argument("model: sigma0 >= 1 required for Assumption-B experiments");
    m.params = p;
    return m;
}

}  // namespace mmfg
