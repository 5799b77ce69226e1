#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmfg/grid.hpp"
#include "mmfg/model.hpp"
#include "mmfg/operators.hpp"
#include "mmfg/solver_config.hpp"
#include "mmfg/tree.hpp"

namespace mmfg {

/// (X0, Y0, Z0) realizing the major FBSDE on the tree. Z0 lives on non-leaf
/// nodes. The edge identity Y_child = Y_node - dt*driver + sigma0*Z*dB holds
/// exactly after convergence.
struct MajorTriple {
    TreeProcess<double> X0;
    TreeProcess<double> Y0;
    TreeProcess<double> Z0;
    std::vector<double> picard_residuals;
    SolveStatus status = SolveStatus::Converged;
    bool converged() const { return status == SolveStatus::Converged; }
};

using DensityAccessor = std::function<const DensityField&(NodeId)>;
using TerminalScalarFn = std::function<double(double, const DensityField&)>;

/// Solution of the auxiliary deterministic HJB on the major box, stored at
/// macro time slices.
struct AuxiliaryHjb {
    X0Grid grid;
    double dt = 0.0;
    std::vector<std::vector<double>> w0;       // slice per macro level, 0..K
    std::vector<std::vector<double>> grad_w0;  // central differences of w0
    double sup_grad = 0.0;

    /// Periodic linear interpolation of grad w0 at (level, x0).
    double grad_at(int level, double x0) const {
        const auto& g = grad_w0[level];
        double rel = (x0 + grid.half_width) / grid.h - 0.5;
        double base = std::floor(rel);
        double frac = rel - base;
        int j0 = grid.wrap(static_cast<int>(base));
        int j1 = grid.wrap(j0 + 1);
        return (1.0 - frac) * g[j0] + frac * g[j1];
    }
};

/// Backward semi-implicit solve of the auxiliary HJB
///   dw/dt + 1/2 sigma0^2 Lap w + F0(x0) - H0(x0, grad w) = 0, w(T) = 0,
/// on the periodized box. Slices are stored at the K macro times.
inline AuxiliaryHjb solve_w0(const ModelSpec& model, const X0Grid& grid, int levels,
                             int substeps) {
    if (!model.costs.F0)
        throw std::invalid_argument("solve_w0: model has no long-time coefficient F0");
    if (levels < 1) throw std::invalid_argument("solve_w0: levels >= 1");
    AuxiliaryHjb out;
    out.grid = grid;
    out.dt = model.T / levels;
    out.w0.assign(levels + 1, std::vector<double>(grid.n, 0.0));
    out.grad_w0.assign(levels + 1, std::vector<double>(grid.n, 0.0));

    auto H0 = [&](double x, double p) { return model.H0.eval(x, p); };
    const double dt_sub = out.dt / substeps;
    for (int k = levels - 1; k >= 0; --k) {
        std::vector<double> w = out.w0[k + 1];
        for (int s = 0; s < substeps; ++s)
            w = w0_step_backward(w, grid, model.costs.F0, H0, model.sigma0, dt_sub);
        out.w0[k] = std::move(w);
    }
    for (int k = 0; k <= levels; ++k) {
        for (int j = 0; j < grid.n; ++j) {
            double d = (out.w0[k][grid.wrap(j + 1)] - out.w0[k][grid.wrap(j - 1)]) / (2.0 * grid.h);
            out.grad_w0[k][j] = d;
            out.sup_grad = std::max(out.sup_grad, std::abs(d));
        }
    }
    return out;
}

/// Solves the major FBSDE against a given population tree by Picard
/// iteration: forward Euler-Maruyama with drift -grad_p H0(X, Z), then a
/// backward sweep with Z from the martingale representation of the children
/// and the driver f0 + L0(X, -grad_p H0(X, Z)).
///
/// `driver_L0` substitutes the truncated driver; `g0_override` substitutes
/// the terminal cost.
inline MajorTriple solve_major_fbsde(const DensityAccessor& mu, const ModelSpec& model,
                                     const NoiseTree& tree, double x0_init,
                                     const SolverConfig& cfg,
                                     const std::function<double(double, double)>* driver_L0 = nullptr,
                                     const TerminalScalarFn* g0_override = nullptr,
                                     double box_half_width = 0.0) {
    const double sigma0 = model.sigma0;
    const double dt = tree.dt;
    const double sqrt_dt = tree.increment();
    const double box = box_half_width > 0 ? box_half_width
                                          : model.x0_box_half_width(x0_init, tree.depth);

    MajorTriple sol;
    sol.Z0 = TreeProcess<double>(tree, 0.0);
    sol.Y0 = TreeProcess<double>(tree, 0.0);
    auto drift = [&](NodeId id, double x) { return -model.H0.grad_p(x, sol.Z0[id]); };
    sol.X0 = simulate_forward_with(x0_init, drift, sigma0, tree);

    auto l0_of = [&](double x, double z) {
        if (driver_L0) return (*driver_L0)(x, z);
        return model.L0.eval(x, -model.H0.grad_p(x, z));
    };

    auto backward_sweep = [&] {
        NodeId off = tree.level_offset(tree.depth);
        for (NodeId p = 0; p < tree.level_count(tree.depth); ++p) {
            NodeId id = off + p;
            sol.Y0[id] = g0_override ? (*g0_override)(sol.X0[id], mu(id))
                                     : model.costs.g0(sol.X0[id], mu(id));
        }
        for (int level = tree.depth - 1; level >= 0; --level) {
            NodeId loff = tree.level_offset(level);
            double t_level = tree.time_of_level(level);
            for (NodeId p = 0; p < tree.level_count(level); ++p) {
                NodeId id = loff + p;
                double up = sol.Y0[tree.child(id, 1)], down = sol.Y0[tree.child(id, 0)];
                double Z = (up - down) / (2.0 * sigma0 * sqrt_dt);
                sol.Z0[id] = Z;
                double x = sol.X0[id];
                double driver = model.costs.f0(t_level, x, mu(id)) + l0_of(x, Z);
                sol.Y0[id] = 0.5 * (up + down) + dt * driver;
            }
        }
    };

    sol.status = SolveStatus::MaxIterations;
    for (int iter = 0; iter < cfg.inner_max_iter; ++iter) {
        backward_sweep();
        TreeProcess<double> X_new = simulate_forward_with(x0_init, drift, sigma0, tree);
        double res = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id)
            res = std::max(res, std::abs(X_new[id] - sol.X0[id]));
        sol.X0 = std::move(X_new);
        sol.picard_residuals.push_back(res);
        if (res <= cfg.inner_tol) {
            backward_sweep();  // align (Y, Z) with the final X
            sol.status = SolveStatus::Converged;
            break;
        }
    }

    if (model.x0_period <= 0) {  // periodic costs tolerate any excursion
        double xmax = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id)
            xmax = std::max(xmax, std::abs(sol.X0[id]));
        if (xmax > box)
            throw std::domain_error("solve_major_fbsde: |X0| = " + std::to_string(xmax) +
                                    " exits the x0 box (half-width " + std::to_string(box) +
                                    "); enlarge x0_domain");
    }
    return sol;
}

inline MajorTriple solve_major_fbsde(const TreeProcess<DensityField>& mu, const ModelSpec& model,
                                     const NoiseTree& tree, double x0_init,
                                     const SolverConfig& cfg) {
    DensityAccessor acc = [&mu](NodeId id) -> const DensityField& { return mu[id]; };
    return solve_major_fbsde(acc, model, tree, x0_init, cfg);
}

/// Conditional tail sums of sigma0^2 |Z - grad w0(t, X)|^2 dt.
/// `w0_level_offset` aligns the tree's levels with the w0 slices when the
/// tree covers only a window of the w0 horizon.
inline TreeProcess<double> major_bmo_tail(const MajorTriple& triple, const AuxiliaryHjb& w0,
                                          const NoiseTree& tree, double sigma0,
                                          int w0_level_offset = 0) {
    auto local = [&](NodeId id) {
        if (tree.is_leaf(id)) return 0.0;
        int level = std::min<int>(tree.level_of(id) + w0_level_offset,
                                  static_cast<int>(w0.grad_w0.size()) - 1);
        double q = triple.Z0[id] - w0.grad_at(level, triple.X0[id]);
        return sigma0 * sigma0 * q * q * tree.dt;
    };
    return conditional_tail_sum(tree, local);
}

/// sup over nodes of the conditional tail sums (the discrete BMO proxy).
inline double major_bmo_diagnostic(const MajorTriple& triple, const AuxiliaryHjb& w0,
                                   const NoiseTree& tree, double sigma0) {
    TreeProcess<double> A = major_bmo_tail(triple, w0, tree, sigma0);
    double m = 0.0;
    for (NodeId id = 0; id < tree.node_count(); ++id) m = std::max(m, A[id]);
    return m;
}

}  // namespace mmfg
