#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmfg/grid.hpp"

namespace mmfg {

/// Periodic central difference (f_{j+1} - f_{j-1}) / (2h).
inline ScalarField gradient(const ScalarField& f) {
    const int n = f.grid.n;
    ScalarField g(f.grid);
    const double inv2h = 1.0 / (2.0 * f.grid.h);
    for (int j = 0; j < n; ++j)
        g[j] = (f.values[(j + 1) % n] - f.values[(j - 1 + n) % n]) * inv2h;
    return g;
}

/// Periodic 3-point stencil (f_{j+1} - 2 f_j + f_{j-1}) / h^2.
inline ScalarField laplacian(const ScalarField& f) {
    const int n = f.grid.n;
    ScalarField g(f.grid);
    const double invh2 = 1.0 / (f.grid.h * f.grid.h);
    for (int j = 0; j < n; ++j)
        g[j] = (f.values[(j + 1) % n] - 2.0 * f.values[j] + f.values[(j - 1 + n) % n]) * invh2;
    return g;
}

namespace detail {

/// Solves (I - nu * D2_h) x = rhs on a periodic grid of spacing h, where D2_h
/// is the 3-point Laplacian. Thomas algorithm plus Sherman-Morrison for the
/// periodic corner entries. Requires nu >= 0 (diagonally dominant M-matrix).
inline void solve_identity_minus_diffusion(std::vector<double>& x,
                                           const std::vector<double>& rhs,
                                           double nu, double h) {
    const int n = static_cast<int>(rhs.size());
    const double c = nu / (h * h);      // off-diagonal magnitude
    const double d = 1.0 + 2.0 * c;     // diagonal
    if (c == 0.0) {
        x = rhs;
        return;
    }

    // Condensed system: strip the wrap entries (-c at corners) via
    // Sherman-Morrison with u = (gamma, 0, ..., 0, -c)^T, v = (1, ..., -c/gamma).
    const double gamma = -d;  // conventional choice keeps pivots away from zero
    static thread_local std::vector<double> diag, y, z, u;
    diag.assign(n, d);
    diag[0] = d - gamma;
    diag[n - 1] = d - (c * c) / gamma;

    auto thomas = [&](const std::vector<double>& b, std::vector<double>& out) {
        static thread_local std::vector<double> cp, dp;
        cp.assign(n, 0.0);
        dp.assign(n, 0.0);
        cp[0] = -c / diag[0];
        dp[0] = b[0] / diag[0];
        for (int i = 1; i < n; ++i) {
            double m = diag[i] + c * cp[i - 1];
            cp[i] = -c / m;
            dp[i] = (b[i] + c * dp[i - 1]) / m;
        }
        out.assign(n, 0.0);
        out[n - 1] = dp[n - 1];
        for (int i = n - 2; i >= 0; --i) out[i] = dp[i] - cp[i] * out[i + 1];
    };

    thomas(rhs, y);
    u.assign(n, 0.0);
    u[0] = gamma;
    u[n - 1] = -c;
    thomas(u, z);

    const double vy = y[0] - (c / gamma) * y[n - 1];
    const double vz = z[0] - (c / gamma) * z[n - 1];
    const double factor = vy / (1.0 + vz);
    x.resize(n);
    for (int i = 0; i < n; ++i) x[i] = y[i] - factor * z[i];
}

/// In-place conservative upwind transport step for d_t m + d_x(b m) = 0.
/// Face velocity is the average of adjacent cell values.
inline void upwind_transport(std::vector<double>& m, const std::vector<double>& b,
                             double dt, double h) {
    const int n = static_cast<int>(m.size());
    static thread_local std::vector<double> flux;
    flux.assign(n, 0.0);  // flux[j] across the face between cells j and j+1
    for (int j = 0; j < n; ++j) {
        int jp = (j + 1) % n;
        double bf = 0.5 * (b[j] + b[jp]);
        flux[j] = bf >= 0.0 ? bf * m[j] : bf * m[jp];
    }
    const double r = dt / h;
    static thread_local std::vector<double> out;
    out.resize(n);
    for (int j = 0; j < n; ++j) {
        int jm = (j - 1 + n) % n;
        out[j] = m[j] - r * (flux[j] - flux[jm]);
    }
    m.swap(out);
}

}  // namespace detail

/// One Fokker-Planck step: explicit conservative upwind transport with
/// velocity `drift`, then implicit diffusion (I - dt/2 * Lap). Preserves total
/// mass and, under the CFL condition dt*max|drift|/h <= 1, nonnegativity.
/// `diffusion` exists for pure-transport test mode.
inline DensityField fp_step(const DensityField& mu, const ScalarField& drift,
                            double dt, bool diffusion = true) {
    if (dt <= 0) throw std::invalid_argument("fp_step: dt must be > 0");
    if (!(mu.grid == drift.grid)) throw std::invalid_argument("fp_step: grid mismatch");
    const double h = mu.grid.h;
    double bmax = drift.sup_norm();
    if (dt * bmax / h > 1.0 + 1e-12)
        throw std::domain_error("fp_step: CFL violated, dt*max|b|/h = " +
                                std::to_string(dt * bmax / h));

    std::vector<double> m = mu.mass;
    detail::upwind_transport(m, drift.values, dt, h);
    if (diffusion) {
        std::vector<double> out;
        detail::solve_identity_minus_diffusion(out, m, 0.5 * dt, h);
        m.swap(out);
    }
    double mn = 0.0;
    for (double& v : m) {
        if (v < mn) mn = v;
        if (v < 0.0 && v > -1e-12) v = 0.0;  // round-off only
    }
    if (mn < -1e-12)
        throw std::domain_error("fp_step: negative mass " + std::to_string(mn));

    DensityField out;
    out.grid = mu.grid;
    out.mass = std::move(m);
    return out;
}

/// One backward HJB step on [t, t+dt]:
///   (I - dt/2 * Lap) u_t = u_next - dt * (H(x, grad u_next) - source).
/// Implicit diffusion, Hamiltonian on the lagged gradient.
inline ScalarField hjb_step_backward(const ScalarField& u_next,
                                     const std::function<double(double, double)>& hamiltonian,
                                     const ScalarField& source, double dt) {
    if (dt <= 0) throw std::invalid_argument("hjb_step_backward: dt must be > 0");
    const int n = u_next.grid.n;
    ScalarField grad = gradient(u_next);
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) {
        double H = hamiltonian(u_next.grid.x(j), grad[j]);
        if (!std::isfinite(H)) throw std::domain_error("hjb_step_backward: non-finite Hamiltonian");
        rhs[j] = u_next.values[j] - dt * (H - source[j]);
    }
    ScalarField u(u_next.grid);
    detail::solve_identity_minus_diffusion(u.values, rhs, 0.5 * dt, u_next.grid.h);
    return u;
}

/// Backward step for the major auxiliary HJB on the x0 box:
///   (I - dt/2 sigma0^2 Lap) w_t = w_next + dt * (F0(x0) - H0(x0, grad w_next)).
inline std::vector<double> w0_step_backward(const std::vector<double>& w_next,
                                            const X0Grid& g,
                                            const std::function<double(double)>& F0,
                                            const std::function<double(double, double)>& H0,
                                            double sigma0, double dt) {
    const int n = g.n;
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) {
        int jp = (j + 1) % n, jm = (j - 1 + n) % n;
        double grad = (w_next[jp] - w_next[jm]) / (2.0 * g.h);
        rhs[j] = w_next[j] + dt * (F0(g.x(j)) - H0(g.x(j), grad));
    }
    std::vector<double> w;
    detail::solve_identity_minus_diffusion(w, rhs, 0.5 * dt * sigma0 * sigma0, g.h);
    return w;
}

/// Linearized Fokker-Planck step: transports the signed measure `dmu` with the
/// base velocity `drift` (upwind) and injects the extra conservative flux
/// `extra_flux` (= delta-drift times base density, centered faces), then applies
/// implicit diffusion. Total signed mass is preserved.
inline SignedMeasure fp_step_linearized(const SignedMeasure& dmu, const ScalarField& drift,
                                        const std::vector<double>& extra_flux_cells,
                                        double dt) {
    const int n = dmu.grid.n;
    const double h = dmu.grid.h;
    std::vector<double> m = dmu.mass;
    detail::upwind_transport(m, drift.values, dt, h);
    // centered conservative update for the known extra flux
    const double r = dt / h;
    std::vector<double> face(n);
    for (int j = 0; j < n; ++j)
        face[j] = 0.5 * (extra_flux_cells[j] + extra_flux_cells[(j + 1) % n]);
    for (int j = 0; j < n; ++j) {
        int jm = (j - 1 + n) % n;
        m[j] -= r * (face[j] - face[jm]);
    }
    std::vector<double> out;
    detail::solve_identity_minus_diffusion(out, m, 0.5 * dt, h);
    SignedMeasure res(dmu.grid);
    res.mass = std::move(out);
    return res;
}

/// Divided differences of orders 1..3; used as smoothness proxies.
inline double sup_divided_difference(const ScalarField& f, int order) {
    const int n = f.grid.n;
    const double h = f.grid.h;
    double m = 0.0;
    for (int j = 0; j < n; ++j) {
        double d = 0.0;
        switch (order) {
        case 1:
            d = (f.at_wrapped(j + 1) - f[j]) / h;
            break;
        case 2:
            d = (f.at_wrapped(j + 1) - 2.0 * f[j] + f.at_wrapped(j - 1)) / (h * h);
            break;
        case 3:
            d = (f.at_wrapped(j + 2) - 3.0 * f.at_wrapped(j + 1) + 3.0 * f[j] -
                 f.at_wrapped(j - 1)) /
                (h * h * h);
            break;
        default:
            throw std::invalid_argument("sup_divided_difference: order must be 1..3");
        }
        m = std::max(m, std::abs(d));
    }
    return m;
}

}  // namespace mmfg
