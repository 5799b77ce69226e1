#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmfg/grid.hpp"
#include "mmfg/metrics.hpp"
#include "mmfg/model.hpp"
#include "mmfg/operators.hpp"
#include "mmfg/parallel.hpp"
#include "mmfg/solver_config.hpp"
#include "mmfg/tree.hpp"

namespace mmfg {

/// Minor population solution on the tree: forward law mu, backward value u,
/// and the martingale-representation field v0 (non-leaf nodes).
struct MinorSolution {
    TreeProcess<DensityField> mu;
    TreeProcess<ScalarField> u;
    TreeProcess<ScalarField> v0;
    int inner_iterations = 0;
    std::vector<double> inner_residuals;
    SolveStatus status = SolveStatus::Converged;
    bool converged() const { return status == SolveStatus::Converged; }
};

using TerminalFieldFn = std::function<ScalarField(double, const DensityField&)>;

namespace detail {

/// Substep count honoring the transport CFL with a 0.9 safety factor.
/// With adaptivity off the configured count is used as is (the conservative
/// scheme still rejects genuine CFL violations).
inline int required_substeps(double dt, double bmax, double h, int m_min,
                             bool adaptive = true) {
    if (!adaptive) return std::max(1, m_min);
    int need = static_cast<int>(std::ceil(dt * bmax / (0.9 * h)));
    return std::max(m_min, std::max(1, need));
}

/// Forward sweep: mu from the root along every path, drift -grad_p H(x, grad u)
/// frozen per edge at the parent node. At least `substeps` conservative steps
/// per edge, more when the edge's drift demands it.
inline void propagate_mu_forward(TreeProcess<DensityField>& mu,
                                 const TreeProcess<ScalarField>& u,
                                 const DensityField& mu_init,
                                 const HamiltonianSpec& H, const NoiseTree& tree,
                                 int substeps, bool adaptive = true) {
    mu[0] = mu_init;
    for (int level = 0; level < tree.depth; ++level) {
        NodeId off = tree.level_offset(level);
        NodeId cnt = tree.level_count(level);
        parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
            NodeId id = off + static_cast<NodeId>(p);
            const PeriodicGrid& g = mu[id].grid;
            ScalarField grad_u = gradient(u[id]);
            ScalarField drift(g);
            for (int j = 0; j < g.n; ++j) drift[j] = -H.grad_p(g.x(j), grad_u[j]);
            int m = required_substeps(tree.dt, drift.sup_norm(), g.h, substeps, adaptive);
            const double dt_sub = tree.dt / m;
            DensityField field = mu[id];
            for (int s = 0; s < m; ++s) field = fp_step(field, drift, dt_sub);
            mu[tree.child(id, 0)] = field;
            mu[tree.child(id, 1)] = field;
        });
    }
}

}  // namespace detail

/// Solves the minor forward-backward system on the tree for a given major
/// trajectory X0. Picard loop: mu forward from the current u, then u swept
/// backward (children averaged, then a semi-implicit HJB step over the edge),
/// v0 from the cellwise martingale representation.
///
/// `H_override` substitutes the minor Hamiltonian (truncated runs);
/// `g_override` substitutes the terminal cost (continuation windows).
inline MinorSolution solve_minor(const TreeProcess<double>& X0, const DensityField& mu_init,
                                 const ModelSpec& model, const NoiseTree& tree,
                                 const SolverConfig& cfg,
                                 const HamiltonianSpec* H_override = nullptr,
                                 const TerminalFieldFn* g_override = nullptr,
                                 const TreeProcess<ScalarField>* u_init = nullptr) {
    const HamiltonianSpec& H = H_override ? *H_override : model.H;
    const PeriodicGrid grid = mu_init.grid;
    const double sigma0 = model.sigma0;
    const double dt = tree.dt;
    const double sqrt_dt = tree.increment();

    MinorSolution sol;
    sol.mu = TreeProcess<DensityField>(tree, DensityField::uniform(grid));
    sol.u = u_init ? *u_init : TreeProcess<ScalarField>(tree, ScalarField(grid));
    sol.v0 = TreeProcess<ScalarField>(tree, ScalarField(grid));

    TreeProcess<ScalarField> u_prev = sol.u;
    TreeProcess<DensityField> mu_prev = sol.mu;
    double omega = cfg.damping;
    double prev_residual = std::numeric_limits<double>::infinity();
    const int max_iter = cfg.fixed_inner_iters > 0 ? cfg.fixed_inner_iters : cfg.inner_max_iter;

    auto hamiltonian_fn = [&H](double x, double p) { return H.eval(x, p); };

    for (int iter = 0; iter < max_iter; ++iter) {
        detail::propagate_mu_forward(sol.mu, sol.u, mu_init, H, tree, cfg.substeps,
                                     cfg.adaptive_cfl);

        TreeProcess<ScalarField> u_new(tree, ScalarField(grid));
        // terminal slices
        {
            NodeId off = tree.level_offset(tree.depth);
            NodeId cnt = tree.level_count(tree.depth);
            parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
                NodeId id = off + static_cast<NodeId>(p);
                u_new[id] = g_override ? (*g_override)(X0[id], sol.mu[id])
                                       : model.costs.g(X0[id], sol.mu[id]);
            });
        }
        for (int level = tree.depth - 1; level >= 0; --level) {
            NodeId off = tree.level_offset(level);
            NodeId cnt = tree.level_count(level);
            double t_level = tree.time_of_level(level);
            parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
                NodeId id = off + static_cast<NodeId>(p);
                const ScalarField& up = u_new[tree.child(id, 1)];
                const ScalarField& down = u_new[tree.child(id, 0)];
                ScalarField ubar(grid);
                for (int j = 0; j < grid.n; ++j) ubar[j] = 0.5 * (up[j] + down[j]);
                ScalarField source = model.costs.f(t_level, X0[id], sol.mu[id]);
                // explicit Hamiltonian on the lagged gradient: same transport
                // CFL as the forward sweep
                ScalarField gbar = gradient(ubar);
                double bmax = 0.0;
                for (int j = 0; j < grid.n; ++j)
                    bmax = std::max(bmax, std::abs(H.grad_p(grid.x(j), gbar[j])));
                int m = detail::required_substeps(dt, bmax, grid.h, cfg.substeps,
                                                  cfg.adaptive_cfl);
                const double dts = dt / m;
                ScalarField w = ubar;
                for (int s = 0; s < m; ++s)
                    w = hjb_step_backward(w, hamiltonian_fn, source, dts);
                u_new[id] = w;
            });
        }

        // damped update and residual
        double res_u = 0.0, res_mu = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id) {
            res_u = std::max(res_u, sup_distance(u_new[id], u_prev[id]));
            if (iter > 0) res_mu = std::max(res_mu, wasserstein1(sol.mu[id], mu_prev[id]));
            if (omega == 1.0) {
                sol.u[id] = u_new[id];
            } else {
                ScalarField mixed = u_prev[id];
                mixed *= (1.0 - omega);
                ScalarField cand = u_new[id];
                cand *= omega;
                mixed += cand;
                sol.u[id] = mixed;
            }
        }
        double residual = res_u + res_mu;
        sol.inner_residuals.push_back(residual);
        sol.inner_iterations = iter + 1;
        u_prev = sol.u;
        mu_prev = sol.mu;

        if (cfg.fixed_inner_iters > 0) {
            if (iter + 1 == cfg.fixed_inner_iters) break;
        } else if (residual <= cfg.inner_tol && iter > 0) {
            break;
        }
        if (residual > prev_residual && omega > 1.0 / 16.0) omega *= 0.5;
        prev_residual = residual;
    }
    bool hit_tol = cfg.fixed_inner_iters > 0 ||
                   (!sol.inner_residuals.empty() && sol.inner_residuals.back() <= cfg.inner_tol);
    sol.status = hit_tol ? SolveStatus::Converged : SolveStatus::MaxIterations;

    // representation field of the converged u
    const double repr = 1.0 / (2.0 * sigma0 * sqrt_dt);
    for (int level = 0; level < tree.depth; ++level) {
        NodeId off = tree.level_offset(level);
        NodeId cnt = tree.level_count(level);
        parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
            NodeId id = off + static_cast<NodeId>(p);
            const ScalarField& up = sol.u[tree.child(id, 1)];
            const ScalarField& down = sol.u[tree.child(id, 0)];
            ScalarField v0(grid);
            for (int j = 0; j < grid.n; ++j) v0[j] = (up[j] - down[j]) * repr;
            sol.v0[id] = v0;
        });
    }
    return sol;
}

/// Deterministic auxiliary MFG on [0, horizon] with running cost F and zero
/// terminal condition; same discretization as solve_minor on a single path.
struct AuxiliaryMfg {
    std::vector<DensityField> mu;  // macro time slices 0..steps
    std::vector<ScalarField> u;
    double dt = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    bool converged() const { return status == SolveStatus::Converged; }
};

/// Deterministic MFG fixed point on a single time path with a general
/// time-dependent source and terminal field.
inline AuxiliaryMfg solve_deterministic_mfg(
    const std::function<ScalarField(double, const DensityField&)>& source,
    const std::function<ScalarField(const DensityField&)>& terminal,
    const DensityField& mu_init, const HamiltonianSpec& H, double t0, double horizon,
    int steps, const SolverConfig& cfg) {
    if (steps < 1) throw std::invalid_argument("solve_deterministic_mfg: steps >= 1");
    const PeriodicGrid grid = mu_init.grid;
    const double dt = horizon / steps;

    AuxiliaryMfg out;
    out.dt = dt;
    out.mu.assign(steps + 1, mu_init);
    out.u.assign(steps + 1, ScalarField(grid));

    auto hamiltonian_fn = [&H](double x, double p) { return H.eval(x, p); };
    std::vector<ScalarField> u_prev = out.u;
    std::vector<DensityField> mu_prev = out.mu;

    for (int iter = 0; iter < cfg.inner_max_iter; ++iter) {
        // forward
        for (int k = 0; k < steps; ++k) {
            ScalarField grad_u = gradient(out.u[k]);
            ScalarField drift(grid);
            for (int j = 0; j < grid.n; ++j) drift[j] = -H.grad_p(grid.x(j), grad_u[j]);
            int m = detail::required_substeps(dt, drift.sup_norm(), grid.h, cfg.substeps,
                                              cfg.adaptive_cfl);
            DensityField field = out.mu[k];
            for (int s = 0; s < m; ++s) field = fp_step(field, drift, dt / m);
            out.mu[k + 1] = field;
        }
        // backward
        out.u[steps] = terminal(out.mu[steps]);
        for (int k = steps - 1; k >= 0; --k) {
            ScalarField src = source(t0 + k * dt, out.mu[k]);
            ScalarField gnext = gradient(out.u[k + 1]);
            double bmax = 0.0;
            for (int j = 0; j < grid.n; ++j)
                bmax = std::max(bmax, std::abs(H.grad_p(grid.x(j), gnext[j])));
            int m = detail::required_substeps(dt, bmax, grid.h, cfg.substeps,
                                              cfg.adaptive_cfl);
            ScalarField w = out.u[k + 1];
            for (int s = 0; s < m; ++s)
                w = hjb_step_backward(w, hamiltonian_fn, src, dt / m);
            out.u[k] = w;
        }
        double res = 0.0;
        for (int k = 0; k <= steps; ++k) {
            res = std::max(res, sup_distance(out.u[k], u_prev[k]));
            if (iter > 0) res = std::max(res, wasserstein1(out.mu[k], mu_prev[k]));
        }
        out.iterations = iter + 1;
        u_prev = out.u;
        mu_prev = out.mu;
        if (res <= cfg.inner_tol && iter > 0) return out;
    }
    out.status = SolveStatus::MaxIterations;
    return out;
}

inline AuxiliaryMfg solve_auxiliary_mfg(const std::function<ScalarField(const DensityField&)>& F,
                                        const DensityField& mu_init, const HamiltonianSpec& H,
                                        double horizon, int steps, const SolverConfig& cfg) {
    auto source = [&F](double, const DensityField& mu) { return F(mu); };
    auto terminal = [](const DensityField& mu) { return ScalarField(mu.grid); };
    return solve_deterministic_mfg(source, terminal, mu_init, H, 0.0, horizon, steps, cfg);
}

struct GradientDiagnostic {
    double sup_grad_u = 0.0;
    double sup_higher = 0.0;  // max over divided-difference orders 1..3
};

/// sup over nodes and cells of |grad u| and of the first three divided
/// differences (smoothness proxies for the Hoelder bounds).
inline GradientDiagnostic gradient_diagnostic(const MinorSolution& sol) {
    GradientDiagnostic d;
    const NoiseTree& tree = sol.u.tree;
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        d.sup_grad_u = std::max(d.sup_grad_u, gradient(sol.u[id]).sup_norm());
        for (int order = 1; order <= 3; ++order)
            d.sup_higher = std::max(d.sup_higher, sup_divided_difference(sol.u[id], order));
    }
    return d;
}

/// Conditional tail sums of the centered-v0 energy,
///   A(node) = E[ sigma0^2 sum_{s >= node} sup_x |v0_s - int v0_s|^2 dt | node ].
inline TreeProcess<double> v0_bmo_tail(const MinorSolution& sol, const NoiseTree& tree,
                                       double sigma0) {
    auto local = [&](NodeId id) {
        if (tree.is_leaf(id)) return 0.0;
        const ScalarField& v = sol.v0[id];
        double mean = v.mean();
        double sup = 0.0;
        for (int j = 0; j < v.size(); ++j) sup = std::max(sup, std::abs(v[j] - mean));
        return sigma0 * sigma0 * sup * sup * tree.dt;
    };
    return conditional_tail_sum(tree, local);
}

/// sup over nodes of the conditional tail sums (the discrete BMO proxy).
inline double v0_bmo_diagnostic(const MinorSolution& sol, const NoiseTree& tree, double sigma0) {
    TreeProcess<double> A = v0_bmo_tail(sol, tree, sigma0);
    double m = 0.0;
    for (NodeId id = 0; id < tree.node_count(); ++id) m = std::max(m, A[id]);
    return m;
}

}  // namespace mmfg
