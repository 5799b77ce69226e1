#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmfg/grid.hpp"
#include "mmfg/major_solver.hpp"
#include "mmfg/metrics.hpp"
#include "mmfg/minor_solver.hpp"
#include "mmfg/model.hpp"
#include "mmfg/operators.hpp"
#include "mmfg/solver_config.hpp"
#include "mmfg/tree.hpp"

namespace mmfg {

// ---------------------------------------------------------------------------
// Coupled equilibrium (the map T: X0 -> minor -> major -> X0)
// ---------------------------------------------------------------------------

struct EquilibriumSolution {
    MajorTriple major;
    MinorSolution minor;
    std::vector<double> outer_residuals;
    std::vector<double> contraction_ratios;
    SolveStatus status = SolveStatus::Converged;
    double trunc_radius_used = 0.0;
    int outer_iterations = 0;
    bool converged() const { return status == SolveStatus::Converged; }
};

/// Terminal-data overrides, used by the continuation windows.
struct TerminalOverride {
    TerminalScalarFn g0;
    TerminalFieldFn g;
};

namespace detail {

inline TreeProcess<double> initial_major_guess(const NoiseTree& tree, double x0, double sigma0,
                                               const SolverConfig& cfg) {
    switch (cfg.init) {
    case InitStrategy::ConstantX0:
        return TreeProcess<double>(tree, x0);
    case InitStrategy::DriftlessWalk: {
        TreeProcess<double> zero(tree, 0.0);
        return simulate_major_forward(x0, zero, sigma0, tree);
    }
    case InitStrategy::WalkWithDrift: {
        TreeProcess<double> d(tree, cfg.init_drift);
        return simulate_major_forward(x0, d, sigma0, tree);
    }
    }
    throw std::logic_error("unreachable");
}

inline double sup_abs_tree(const TreeProcess<double>& a) {
    double m = 0.0;
    for (double v : a.values) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace detail

/// Picks the truncation radius from a short untruncated pilot run:
/// R = 2 (sup |grad u| + sup |Z0|), clamped to [5, inf).
inline double calibrate_truncation_radius(const ModelSpec& model, double x0,
                                          const DensityField& mu0, const NoiseTree& tree,
                                          SolverConfig cfg) {
    cfg.use_truncation = false;
    cfg.outer_max_iter = 3;
    cfg.inner_max_iter = std::min(cfg.inner_max_iter, 40);
    TreeProcess<double> X = detail::initial_major_guess(tree, x0, model.sigma0, cfg);
    double sup_grad = 0.0, sup_z = 0.0;
    for (int it = 0; it < cfg.outer_max_iter; ++it) {
        MinorSolution minor = solve_minor(X, mu0, model, tree, cfg);
        MajorTriple major = solve_major_fbsde(
            [&minor](NodeId id) -> const DensityField& { return minor.mu[id]; }, model, tree, x0,
            cfg);
        sup_grad = std::max(sup_grad, gradient_diagnostic(minor).sup_grad_u);
        sup_z = std::max(sup_z, detail::sup_abs_tree(major.Z0));
        X = major.X0;
    }
    return std::max(5.0, 2.0 * (sup_grad + sup_z));
}

/// Solves the coupled major-minor system by iterating
///   X0 -> (minor solve) -> (major solve) -> X0
/// to a sup-norm fixed point. Runs with the truncated Hamiltonian (radius
/// cfg.trunc_radius, pilot-calibrated when 0) and checks afterwards that the
/// solution stayed strictly inside the truncation-free zone.
inline EquilibriumSolution solve_equilibrium(const ModelSpec& model, double x0,
                                             const DensityField& mu0, const NoiseTree& tree,
                                             const SolverConfig& cfg,
                                             const TerminalOverride* terminal = nullptr) {
    EquilibriumSolution sol;

    HamiltonianSpec H_minor = model.H;
    std::function<double(double, double)> driver_l0;
    const std::function<double(double, double)>* driver_ptr = nullptr;
    if (cfg.use_truncation) {
        double R = cfg.trunc_radius;
        if (R <= 0) R = calibrate_truncation_radius(model, x0, mu0, tree, cfg);
        sol.trunc_radius_used = R;
        H_minor = truncate_hamiltonian(model.H, R);
        driver_l0 = truncated_major_driver(model.L0, model.H0, R);
        driver_ptr = &driver_l0;
    }

    const TerminalFieldFn* g_ptr = terminal && terminal->g ? &terminal->g : nullptr;
    const TerminalScalarFn* g0_ptr = terminal && terminal->g0 ? &terminal->g0 : nullptr;

    TreeProcess<double> X = detail::initial_major_guess(tree, x0, model.sigma0, cfg);
    double prev_res = -1.0;
    int rising = 0;
    sol.status = SolveStatus::MaxIterations;

    for (int iter = 0; iter < cfg.outer_max_iter; ++iter) {
        sol.minor = solve_minor(X, mu0, model, tree, cfg, cfg.use_truncation ? &H_minor : nullptr,
                                g_ptr);
        sol.major = solve_major_fbsde(
            [this_minor = &sol.minor](NodeId id) -> const DensityField& {
                return this_minor->mu[id];
            },
            model, tree, x0, cfg, driver_ptr, g0_ptr);
        double res = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id)
            res = std::max(res, std::abs(sol.major.X0[id] - X[id]));
        sol.outer_residuals.push_back(res);
        if (prev_res > 0) sol.contraction_ratios.push_back(res / prev_res);
        sol.outer_iterations = iter + 1;
        X = sol.major.X0;

        if (res <= cfg.outer_tol) {
            sol.status = SolveStatus::Converged;
            break;
        }
        if (prev_res >= 0 && res >= prev_res) {
            if (++rising >= 3) {
                sol.status = SolveStatus::NoContraction;
                break;
            }
        } else {
            rising = 0;
        }
        prev_res = res;
    }

    // final minor solve against the fixed point
    sol.minor = solve_minor(X, mu0, model, tree, cfg, cfg.use_truncation ? &H_minor : nullptr,
                            g_ptr);

    if (cfg.use_truncation && sol.status == SolveStatus::Converged) {
        double g = gradient_diagnostic(sol.minor).sup_grad_u;
        double z = detail::sup_abs_tree(sol.major.Z0);
        if (std::max(g, z) >= sol.trunc_radius_used) sol.status = SolveStatus::TruncationViolated;
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Flat derivative on the measure space
// ---------------------------------------------------------------------------

/// Finite-difference flat derivative profile y -> delta_mu F(mu, y):
///   [F((1-eps) mu + eps delta_y) - F(mu)] / eps,
/// recentered so its mu-mean vanishes. eps must lie in (0, 1].
inline ScalarField flat_derivative_profile(const std::function<double(const DensityField&)>& F,
                                           const DensityField& mu, double eps) {
    if (eps <= 0.0 || eps > 1.0)
        throw std::invalid_argument("flat_derivative_profile: eps must lie in (0, 1]");
    const int n = mu.size();
    const double base = F(mu);
    ScalarField out(mu.grid);
    for (int y = 0; y < n; ++y) {
        DensityField bumped;
        bumped.grid = mu.grid;
        bumped.mass.resize(n);
        for (int j = 0; j < n; ++j) bumped.mass[j] = (1.0 - eps) * mu.mass[j];
        bumped.mass[y] += eps;
        out[y] = (F(bumped) - base) / eps;
    }
    double mean = 0.0;
    for (int y = 0; y < n; ++y) mean += out[y] * mu.mass[y];
    for (int y = 0; y < n; ++y) out[y] -= mean;
    return out;
}

/// Single-point flat derivative (computes the full profile for the
/// recentering convention).
inline double flat_derivative(const std::function<double(const DensityField&)>& F,
                              const DensityField& mu, int y_cell, double eps) {
    ScalarField prof = flat_derivative_profile(F, mu, eps);
    return prof[mu.grid.wrap(y_cell)];
}

// ---------------------------------------------------------------------------
// Master field
// ---------------------------------------------------------------------------

/// U0(t, x0, mu) and U(t, x0, ., mu) evaluated by re-solving the coupled
/// system from (t, x0, mu) on [t, T]; results are cached. Evaluations are
/// deterministic given the configuration. Safe for concurrent readers.
class MasterField {
public:
    MasterField(const ModelSpec& model, PeriodicGrid grid, SolverConfig cfg, int base_depth)
        : model_(model), grid_(grid), cfg_(cfg), base_depth_(base_depth),
          dt_base_(model.T / base_depth) {}

    struct Value {
        double Y0;
        ScalarField u;
    };

    /// Evaluates (U0, U) at (t, x0, mu). At t = T this is the terminal pair
    /// (g0, g) exactly.
    Value eval(double t, double x0, const DensityField& mu) const {
        if (t > model_.T + 1e-12) throw std::invalid_argument("MasterField: t beyond horizon");
        if (t >= model_.T - 1e-12)
            return {model_.costs.g0(x0, mu), model_.costs.g(x0, mu)};

        std::uint64_t key = cache_key(t, x0, mu);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        double horizon = model_.T - t;
        int depth = std::max(1, static_cast<int>(std::llround(horizon / dt_base_)));
        NoiseTree tree(depth, horizon, t);
        EquilibriumSolution sol = solve_equilibrium(model_, x0, mu, tree, cfg_);
        if (sol.status == SolveStatus::NoContraction)
            throw std::domain_error("MasterField: no contraction at t=" + std::to_string(t));
        Value v{sol.major.Y0[0], sol.minor.u[0]};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            cache_.emplace(key, v);
        }
        return v;
    }

    double eval0(double t, double x0, const DensityField& mu) const {
        return eval(t, x0, mu).Y0;
    }

    const ModelSpec& model() const { return model_; }
    double base_dt() const { return dt_base_; }
    int base_depth() const { return base_depth_; }
    const SolverConfig& config() const { return cfg_; }

private:
    std::uint64_t cache_key(double t, double x0, const DensityField& mu) const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            h ^= bits;
            h *= 1099511628211ull;
        };
        mix(t);
        mix(x0);
        for (double v : mu.mass) mix(v);
        return h;
    }

    ModelSpec model_;
    PeriodicGrid grid_;
    SolverConfig cfg_;
    int base_depth_;
    double dt_base_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::uint64_t, Value> cache_;
};

// ---------------------------------------------------------------------------
// Linearized system
// ---------------------------------------------------------------------------

struct LinearDirection {
    double dx0 = 0.0;
    SignedMeasure dmu;
};

struct LinearizedSolution {
    TreeProcess<double> dX0;
    TreeProcess<double> dY0;
    TreeProcess<double> dZ0;
    TreeProcess<SignedMeasure> dmu;
    TreeProcess<ScalarField> du;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    bool converged() const { return status == SolveStatus::Converged; }
};

namespace detail {

inline void require_linearization_data(const ModelSpec& m) {
    std::string missing;
    auto need = [&missing](bool ok, const char* name) {
        if (!ok) {
            if (!missing.empty()) missing += ", ";
            missing += name;
        }
    };
    need(static_cast<bool>(m.H.hess_pp), "H.hess_pp");
    need(static_cast<bool>(m.H0.hess_pp), "H0.hess_pp");
    need(static_cast<bool>(m.H0.hess_px), "H0.hess_px");
    need(static_cast<bool>(m.H0.grad_x), "H0.grad_x");
    need(static_cast<bool>(m.costs.grad_x0_f0), "costs.grad_x0_f0");
    need(static_cast<bool>(m.costs.delta_mu_f0), "costs.delta_mu_f0");
    need(static_cast<bool>(m.costs.grad_x0_f), "costs.grad_x0_f");
    need(static_cast<bool>(m.costs.delta_mu_f), "costs.delta_mu_f");
    need(static_cast<bool>(m.costs.grad_x0_g0), "costs.grad_x0_g0");
    need(static_cast<bool>(m.costs.delta_mu_g0), "costs.delta_mu_g0");
    need(static_cast<bool>(m.costs.grad_x0_g), "costs.grad_x0_g");
    need(static_cast<bool>(m.costs.delta_mu_g), "costs.delta_mu_g");
    if (!missing.empty())
        throw std::invalid_argument("solve_linearized: model lacks derivative data: " + missing);
}

}  // namespace detail

/// Solves the linearized forward-backward system around a converged base
/// solution, with all coefficient fields frozen along the base:
///   dX0: forward ODE per path driven by dZ0,
///   dmu: linearized Fokker-Planck with source div(mu hess_pp(H) grad du),
///   du:  backward linear PDE with transport field grad_p H(x, grad u),
///   dY0/dZ0: backward linear BSDE with the differentiated major driver.
/// Picard iteration; the stopping rule is relative to the direction size, so
/// the solution is exactly positively homogeneous in the direction.
inline LinearizedSolution solve_linearized(const EquilibriumSolution& base,
                                           const LinearDirection& direction,
                                           const ModelSpec& model, const NoiseTree& tree,
                                           const SolverConfig& cfg) {
    detail::require_linearization_data(model);
    if (!base.converged())
        throw std::invalid_argument("solve_linearized: base solution not converged");
    const PeriodicGrid grid = direction.dmu.grid;
    const double sigma0 = model.sigma0;
    const double dt = tree.dt;
    const double sqrt_dt = tree.increment();

    double dir_scale = std::abs(direction.dx0);
    for (double v : direction.dmu.mass) dir_scale += std::abs(v);
    if (dir_scale == 0.0) dir_scale = 1.0;

    LinearizedSolution sol;
    sol.dX0 = TreeProcess<double>(tree, 0.0);
    sol.dY0 = TreeProcess<double>(tree, 0.0);
    sol.dZ0 = TreeProcess<double>(tree, 0.0);
    sol.dmu = TreeProcess<SignedMeasure>(tree, SignedMeasure(grid));
    sol.du = TreeProcess<ScalarField>(tree, ScalarField(grid));

    // frozen base coefficient fields per node
    const TreeProcess<ScalarField>& u_base = base.minor.u;
    const TreeProcess<DensityField>& mu_base = base.minor.mu;
    const TreeProcess<double>& X_base = base.major.X0;
    const TreeProcess<double>& Z_base = base.major.Z0;

    sol.status = SolveStatus::MaxIterations;
    for (int iter = 0; iter < cfg.inner_max_iter; ++iter) {
        // 1. forward dX (driven by the previous dZ iterate)
        TreeProcess<double> dX(tree, 0.0);
        dX[0] = direction.dx0;
        for (int level = 0; level < tree.depth; ++level) {
            NodeId off = tree.level_offset(level);
            for (NodeId p = 0; p < tree.level_count(level); ++p) {
                NodeId id = off + p;
                double x = X_base[id], z = Z_base[id];
                double step = dX[id] + dt * (-model.H0.hess_px(x, z) * dX[id] -
                                             model.H0.hess_pp(x, z) * sol.dZ0[id]);
                dX[tree.child(id, 0)] = step;
                dX[tree.child(id, 1)] = step;
            }
        }

        // 2. forward dmu (driven by the previous du iterate)
        TreeProcess<SignedMeasure> dmu(tree, SignedMeasure(grid));
        dmu[0] = direction.dmu;
        for (int level = 0; level < tree.depth; ++level) {
            NodeId off = tree.level_offset(level);
            NodeId cnt = tree.level_count(level);
            parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
                NodeId id = off + static_cast<NodeId>(p);
                ScalarField grad_u = gradient(u_base[id]);
                ScalarField grad_du = gradient(sol.du[id]);
                ScalarField drift(grid);
                std::vector<double> extra(grid.n);
                for (int j = 0; j < grid.n; ++j) {
                    double x = grid.x(j);
                    drift[j] = -model.H.grad_p(x, grad_u[j]);
                    extra[j] = -model.H.hess_pp(x, grad_u[j]) * grad_du[j] * mu_base[id].mass[j];
                }
                int m = mmfg::detail::required_substeps(dt, drift.sup_norm(), grid.h,
                                                        cfg.substeps, cfg.adaptive_cfl);
                SignedMeasure q = dmu[id];
                for (int s = 0; s < m; ++s) q = fp_step_linearized(q, drift, extra, dt / m);
                dmu[tree.child(id, 0)] = q;
                dmu[tree.child(id, 1)] = q;
            });
        }

        // 3. backward du
        TreeProcess<ScalarField> du(tree, ScalarField(grid));
        {
            NodeId off = tree.level_offset(tree.depth);
            NodeId cnt = tree.level_count(tree.depth);
            parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
                NodeId id = off + static_cast<NodeId>(p);
                ScalarField gx = model.costs.grad_x0_g(X_base[id], mu_base[id]);
                MuKernel gm = model.costs.delta_mu_g(X_base[id], mu_base[id]);
                ScalarField term = gm.pair_y(dmu[id]);
                for (int j = 0; j < grid.n; ++j) term[j] += gx[j] * dX[id];
                du[id] = term;
            });
        }
        for (int level = tree.depth - 1; level >= 0; --level) {
            NodeId off = tree.level_offset(level);
            NodeId cnt = tree.level_count(level);
            double t_level = tree.time_of_level(level);
            parallel_for(static_cast<std::size_t>(cnt), [&](std::size_t p) {
                NodeId id = off + static_cast<NodeId>(p);
                const ScalarField& up = du[tree.child(id, 1)];
                const ScalarField& down = du[tree.child(id, 0)];
                ScalarField w(grid);
                for (int j = 0; j < grid.n; ++j) w[j] = 0.5 * (up[j] + down[j]);

                ScalarField grad_u = gradient(u_base[id]);
                ScalarField transport(grid);
                for (int j = 0; j < grid.n; ++j)
                    transport[j] = model.H.grad_p(grid.x(j), grad_u[j]);
                ScalarField fx = model.costs.grad_x0_f(t_level, X_base[id], mu_base[id]);
                MuKernel fm = model.costs.delta_mu_f(t_level, X_base[id], mu_base[id]);
                ScalarField dsource = fm.pair_y(dmu[id]);
                for (int j = 0; j < grid.n; ++j) dsource[j] += fx[j] * dX[id];

                int m = mmfg::detail::required_substeps(dt, transport.sup_norm(), grid.h,
                                                        cfg.substeps, cfg.adaptive_cfl);
                const double dts = dt / m;
                for (int s = 0; s < m; ++s) {
                    ScalarField grad_w = gradient(w);
                    std::vector<double> rhs(grid.n);
                    for (int j = 0; j < grid.n; ++j)
                        rhs[j] = w[j] - dts * (transport[j] * grad_w[j] - dsource[j]);
                    detail::solve_identity_minus_diffusion(w.values, rhs, 0.5 * dts, grid.h);
                }
                du[id] = w;
            });
        }

        // 4. backward dY / dZ
        TreeProcess<double> dY(tree, 0.0), dZ(tree, 0.0);
        {
            NodeId off = tree.level_offset(tree.depth);
            for (NodeId p = 0; p < tree.level_count(tree.depth); ++p) {
                NodeId id = off + p;
                double gx0 = model.costs.grad_x0_g0(X_base[id], mu_base[id]);
                ScalarField gm0 = model.costs.delta_mu_g0(X_base[id], mu_base[id]);
                dY[id] = gx0 * dX[id] + dmu[id].pair(gm0);
            }
        }
        for (int level = tree.depth - 1; level >= 0; --level) {
            NodeId off = tree.level_offset(level);
            double t_level = tree.time_of_level(level);
            for (NodeId p = 0; p < tree.level_count(level); ++p) {
                NodeId id = off + p;
                double up = dY[tree.child(id, 1)], down = dY[tree.child(id, 0)];
                double z_lin = (up - down) / (2.0 * sigma0 * sqrt_dt);
                dZ[id] = z_lin;
                double x = X_base[id], z = Z_base[id];
                double fx0 = model.costs.grad_x0_f0(t_level, x, mu_base[id]);
                ScalarField fm0 = model.costs.delta_mu_f0(t_level, x, mu_base[id]);
                // delta of the driver f0 + Z grad_p H0 - H0 (Fenchel form)
                double ddriver = fx0 * dX[id] + dmu[id].pair(fm0) +
                                 (z * model.H0.hess_px(x, z) - model.H0.grad_x(x, z)) * dX[id] +
                                 z * model.H0.hess_pp(x, z) * z_lin;
                dY[id] = 0.5 * (up + down) + dt * ddriver;
            }
        }

        double change = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id) {
            change = std::max(change, std::abs(dX[id] - sol.dX0[id]));
            change = std::max(change, std::abs(dY[id] - sol.dY0[id]));
            change = std::max(change, sup_distance(du[id], sol.du[id]));
        }
        sol.dX0 = std::move(dX);
        sol.dY0 = std::move(dY);
        sol.dZ0 = std::move(dZ);
        sol.dmu = std::move(dmu);
        sol.du = std::move(du);
        sol.iterations = iter + 1;
        if (change <= cfg.inner_tol * dir_scale && iter > 0) {
            sol.status = SolveStatus::Converged;
            break;
        }
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Master-equation residuals
// ---------------------------------------------------------------------------

struct ResidualConfig {
    double eps_mu = 1e-2;   // flat-derivative bump size
    double h_x0 = 2e-2;     // x0 finite-difference step
    double dt_time = 0.0;   // time step for d/dt; 0 = half a base macro step
};

struct MasterEquationResidual {
    double res_major = 0.0;
    ScalarField res_minor;
    double res_minor_sup = 0.0;
};

/// Assembles every term of the two master equations from finite differences
/// of the master field and returns the defects. The minor residual is a field
/// over x.
inline MasterEquationResidual master_equation_residual(const MasterField& mf, double t, double x0,
                                                       const DensityField& mu,
                                                       const ResidualConfig& rc) {
    const ModelSpec& model = mf.model();
    const PeriodicGrid grid = mu.grid;
    const int n = grid.n;
    const double sigma0 = model.sigma0;
    const double dt_t = rc.dt_time > 0 ? rc.dt_time : 0.5 * mf.base_dt();
    const double h0 = rc.h_x0;

    MasterField::Value base = mf.eval(t, x0, mu);
    MasterField::Value tp = mf.eval(t + dt_t, x0, mu);
    MasterField::Value tm = mf.eval(t - dt_t, x0, mu);
    MasterField::Value xp = mf.eval(t, x0 + h0, mu);
    MasterField::Value xm = mf.eval(t, x0 - h0, mu);

    double dt_U0 = (tp.Y0 - tm.Y0) / (2.0 * dt_t);
    double dx0_U0 = (xp.Y0 - xm.Y0) / (2.0 * h0);
    double dxx0_U0 = (xp.Y0 - 2.0 * base.Y0 + xm.Y0) / (h0 * h0);

    // flat-derivative profiles of U0 and of the whole field U
    ScalarField prof0(grid);          // delta_mu U0(t, x0, mu, y)
    MuKernel profU(grid);             // delta_mu U(t, x0, x, mu, y)
    {
        std::vector<MasterField::Value> bumped(n);
        for (int y = 0; y < n; ++y) {
            DensityField by;
            by.grid = grid;
            by.mass.resize(n);
            for (int j = 0; j < n; ++j) by.mass[j] = (1.0 - rc.eps_mu) * mu.mass[j];
            by.mass[y] += rc.eps_mu;
            bumped[y] = mf.eval(t, x0, by);
        }
        for (int y = 0; y < n; ++y) prof0[y] = (bumped[y].Y0 - base.Y0) / rc.eps_mu;
        double mean0 = 0.0;
        for (int y = 0; y < n; ++y) mean0 += prof0[y] * mu.mass[y];
        for (int y = 0; y < n; ++y) prof0[y] -= mean0;

        for (int x = 0; x < n; ++x) {
            double meanx = 0.0;
            for (int y = 0; y < n; ++y) {
                double v = (bumped[y].u[x] - base.u[x]) / rc.eps_mu;
                profU.at(x, y) = v;
                meanx += v * mu.mass[y];
            }
            for (int y = 0; y < n; ++y) profU.at(x, y) -= meanx;
        }
    }

    ScalarField grad_u = gradient(base.u);
    ScalarField dprof0 = gradient(prof0);
    ScalarField lprof0 = laplacian(prof0);

    double integral0 = 0.0;
    for (int y = 0; y < n; ++y) {
        double wass_drift = model.H.grad_p(grid.x(y), grad_u[y]);
        integral0 += mu.mass[y] * (0.5 * lprof0[y] - dprof0[y] * wass_drift);
    }

    MasterEquationResidual out;
    out.res_major = dt_U0 + 0.5 * sigma0 * sigma0 * dxx0_U0 -
                    model.H0.eval(x0, dx0_U0) + model.costs.f0(t, x0, mu) + integral0;

    // minor residual field
    out.res_minor = ScalarField(grid);
    ScalarField lap_u = laplacian(base.u);
    ScalarField f_field = model.costs.f(t, x0, mu);
    double drift_major = model.H0.grad_p(x0, dx0_U0);
    for (int x = 0; x < n; ++x) {
        double dt_U = (tp.u[x] - tm.u[x]) / (2.0 * dt_t);
        double dx0_U = (xp.u[x] - xm.u[x]) / (2.0 * h0);
        double dxx0_U = (xp.u[x] - 2.0 * base.u[x] + xm.u[x]) / (h0 * h0);

        // y-derivatives of the kernel row x
        double integral = 0.0;
        for (int y = 0; y < n; ++y) {
            int yp = (y + 1) % n, ym = (y - 1 + n) % n;
            double dK = (profU.at(x, yp) - profU.at(x, ym)) / (2.0 * grid.h);
            double lK = (profU.at(x, yp) - 2.0 * profU.at(x, y) + profU.at(x, ym)) /
                        (grid.h * grid.h);
            double wass_drift = model.H.grad_p(grid.x(y), grad_u[y]);
            integral += mu.mass[y] * (0.5 * lK - dK * wass_drift);
        }
        out.res_minor[x] = dt_U + 0.5 * lap_u[x] + 0.5 * sigma0 * sigma0 * dxx0_U -
                           model.H.eval(grid.x(x), grad_u[x]) + f_field[x] -
                           drift_major * dx0_U + integral;
    }
    out.res_minor_sup = out.res_minor.sup_norm();
    return out;
}

}  // namespace mmfg
