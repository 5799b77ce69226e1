#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfg/coupled_solver.hpp"
#include "mmfg/metrics.hpp"

namespace mmfg {

// ---------------------------------------------------------------------------
// Measure lattice: base measure shifted by whole/fractional cells and mixed
// with the uniform distribution. The (shift, weight) coordinates of a query
// are recovered exactly from its first Fourier moment.
// ---------------------------------------------------------------------------

struct MuFamily {
    DensityField base;
    double contrast = 0.0;  // |first moment| of base
    double phase = 0.0;
    std::vector<double> shifts;   // lattice in cells
    std::vector<double> weights;  // mixing weight with uniform

    static DensityField shift_cells(const DensityField& mu, double cells) {
        const int n = mu.size();
        double fl = std::floor(cells);
        double frac = cells - fl;
        int k = static_cast<int>(fl);
        DensityField out;
        out.grid = mu.grid;
        out.mass.resize(n);
        for (int j = 0; j < n; ++j) {
            int a = mu.grid.wrap(j - k);
            int b = mu.grid.wrap(j - k - 1);
            out.mass[j] = (1.0 - frac) * mu.mass[a] + frac * mu.mass[b];
        }
        return out;
    }

    void init(const DensityField& b, std::vector<double> sh, std::vector<double> wt) {
        base = b;
        shifts = std::move(sh);
        weights = std::move(wt);
        double re, im;
        first_moment(base, re, im);
        contrast = std::hypot(re, im);
        phase = std::atan2(im, re);
    }

    DensityField member(double shift, double w) const {
        DensityField s = shift_cells(base, shift);
        const int n = s.size();
        for (int j = 0; j < n; ++j) s.mass[j] = (1.0 - w) * s.mass[j] + w / n;
        return s;
    }

    bool degenerate() const { return contrast < 1e-11; }

    /// Coordinates of a query measure in the family: exact on family members.
    void project(const DensityField& q, double& shift, double& w) const {
        if (degenerate()) {
            shift = 0.0;
            w = 0.0;
            return;
        }
        double re, im;
        first_moment(q, re, im);
        double mag = std::hypot(re, im);
        w = 1.0 - mag / contrast;
        double dphase = std::atan2(im, re) - phase;
        while (dphase > M_PI) dphase -= 2.0 * M_PI;
        while (dphase < -M_PI) dphase += 2.0 * M_PI;
        shift = dphase / (2.0 * M_PI * base.grid.h);
    }
};

// ---------------------------------------------------------------------------
// Master-field table at a window edge
// ---------------------------------------------------------------------------

struct EdgeTable {
    double t_edge = 0.0;
    std::vector<double> x0s;  // ascending; periodic when x0_period > 0
    double x0_period = 0.0;
    MuFamily fam;
    double guard_w1 = 0.2;

    // entry layout: [x0][shift][weight]
    std::vector<double> val0;
    std::vector<ScalarField> valU;

    int nx() const { return static_cast<int>(x0s.size()); }
    int nk() const { return static_cast<int>(fam.shifts.size()); }
    int nw() const { return static_cast<int>(fam.weights.size()); }
    int index(int xi, int ki, int wi) const { return (xi * nk() + ki) * nw() + wi; }

    struct Stencil {
        int i0[3], i1[3];
        double f[3];  // interpolation fractions in (x0, shift, weight)
    };

    Stencil locate(double x0, const DensityField& mu) const {
        Stencil st;
        // x0 axis
        if (x0_period > 0) {
            double span = x0s.back() - x0s.front();
            double step = nx() > 1 ? span / (nx() - 1) : 1.0;
            double rel = (x0 - x0s.front()) / x0_period;
            rel -= std::floor(rel);
            double pos = rel * x0_period / step;
            int i = static_cast<int>(std::floor(pos));
            st.i0[0] = i % nx();
            st.i1[0] = (i + 1) % nx();
            st.f[0] = pos - std::floor(pos);
        } else {
            axis(x0s, x0, 0.75, "x0", st.i0[0], st.i1[0], st.f[0]);
        }
        double k, w;
        fam.project(mu, k, w);
        // the measure axes clamp to the lattice hull; the W1 residual below
        // is the actual extrapolation guard
        double k_cl = std::min(std::max(k, fam.shifts.front()), fam.shifts.back());
        double w_cl = std::min(std::max(w, fam.weights.front()), fam.weights.back());
        axis(fam.shifts, k_cl, 0.51, "mu-shift", st.i0[1], st.i1[1], st.f[1]);
        axis(fam.weights, w_cl, 0.51, "mu-weight", st.i0[2], st.i1[2], st.f[2]);

        if (!fam.degenerate()) {
            DensityField proj = fam.member(k_cl, std::min(std::max(w_cl, 0.0), 1.0));
            double res = wasserstein1(mu, proj);
            if (res > guard_w1)
                throw std::domain_error(
                    "continuation: measure leaves the tabulation family (W1 residual " +
                    std::to_string(res) + "); enlarge the lattice");
        }
        return st;
    }

    double eval0(double x0, const DensityField& mu) const {
        Stencil st = locate(x0, mu);
        double acc = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) {
                    double wgt = (a ? st.f[0] : 1 - st.f[0]) * (b ? st.f[1] : 1 - st.f[1]) *
                                 (c ? st.f[2] : 1 - st.f[2]);
                    acc += wgt * val0[index(a ? st.i1[0] : st.i0[0], b ? st.i1[1] : st.i0[1],
                                            c ? st.i1[2] : st.i0[2])];
                }
        return acc;
    }

    ScalarField eval_field(double x0, const DensityField& mu) const {
        Stencil st = locate(x0, mu);
        ScalarField acc(valU.front().grid);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) {
                    double wgt = (a ? st.f[0] : 1 - st.f[0]) * (b ? st.f[1] : 1 - st.f[1]) *
                                 (c ? st.f[2] : 1 - st.f[2]);
                    const ScalarField& v = valU[index(a ? st.i1[0] : st.i0[0],
                                                      b ? st.i1[1] : st.i0[1],
                                                      c ? st.i1[2] : st.i0[2])];
                    for (int j = 0; j < acc.size(); ++j) acc[j] += wgt * v[j];
                }
        return acc;
    }

private:
    static void axis(const std::vector<double>& grid, double v, double margin,
                     const char* name, int& lo, int& hi, double& frac) {
        if (grid.size() == 1) {
            lo = hi = 0;
            frac = 0.0;
            return;
        }
        double step = grid[1] - grid[0];
        if (v < grid.front() - margin * step || v > grid.back() + margin * step)
            throw std::domain_error(std::string("continuation: ") + name +
                                    " query outside the lattice (value " + std::to_string(v) +
                                    "); enlarge the lattice");
        double clamped = std::min(std::max(v, grid.front()), grid.back());
        double pos = (clamped - grid.front()) / step;
        int i = std::min(static_cast<int>(std::floor(pos)), static_cast<int>(grid.size()) - 2);
        lo = i;
        hi = i + 1;
        frac = pos - i;
    }
};

// ---------------------------------------------------------------------------
// Time continuation
// ---------------------------------------------------------------------------

struct ContinuationConfig {
    double window = 0.5;  // target subinterval length
    int window_depth = 4;
    int x0_points = 7;
    int mu_shifts = 2;  // shifts {-mu_shifts, .., +mu_shifts} cells
    double shift_step = 1.0;
    std::vector<double> mu_weights = {0.0, 0.25, 0.5};
    int max_halvings = 6;
    int path_samples = 3;
    double guard_w1 = 0.2;
};

/// Refined lattice for interpolation-error estimates.
inline ContinuationConfig refined_lattice(const ContinuationConfig& c) {
    ContinuationConfig r = c;
    r.x0_points = 2 * c.x0_points - 1;
    r.shift_step = 0.5 * c.shift_step;
    r.mu_shifts = 2 * c.mu_shifts;
    r.mu_weights.clear();
    for (std::size_t i = 0; i + 1 < c.mu_weights.size(); ++i) {
        r.mu_weights.push_back(c.mu_weights[i]);
        r.mu_weights.push_back(0.5 * (c.mu_weights[i] + c.mu_weights[i + 1]));
    }
    r.mu_weights.push_back(c.mu_weights.back());
    return r;
}

struct ContinuationResult {
    EquilibriumSolution first;  // window [0, delta] from the true initial state
    std::vector<EdgeTable> tables;  // tables[w] at t_w for w >= 1
    int windows = 0;
    int window_depth = 0;
    double delta = 0.0;
    int halvings = 0;
    SolveStatus status = SolveStatus::Converged;
    double Y0_root = 0.0;

    // stitched diagnostics over sampled scenario paths
    double sup_grad_u = 0.0;
    double sup_higher = 0.0;
    double v0_bmo_total = 0.0;     // max over samples of the summed per-window
    double major_bmo_total = 0.0;  // root conditional sums
    double window_v0_bmo = 0.0;    // max single-window sup diagnostics
    double window_major_bmo = 0.0;
    bool converged() const { return status == SolveStatus::Converged; }
};

namespace detail {

/// Deterministic balanced bit pattern for path sample s at a given level.
inline int sample_bit(int sample, int global_level) {
    switch (sample % 3) {
    case 0: return global_level % 2;            // 0101...
    case 1: return 1 - global_level % 2;        // 1010...
    default: return (global_level / 2) % 2;     // 00110011...
    }
}

}  // namespace detail

/// Solves on [0, T] by backward induction over subintervals: the last window
/// is solved with the true terminal costs, master fields are tabulated on an
/// (x0, measure) lattice at the window's left edge, and the tables serve as
/// terminal data for the previous window. Windows are halved (up to
/// max_halvings) when a window-level solve fails to contract.
inline ContinuationResult solve_by_continuation(const ModelSpec& model, double x0,
                                                const DensityField& mu0,
                                                const SolverConfig& solver_cfg,
                                                const ContinuationConfig& cc) {
    const PeriodicGrid grid = mu0.grid;

    SolverConfig scfg = solver_cfg;
    for (int halving = 0; halving <= cc.max_halvings; ++halving) {
        double delta = cc.window / (1 << halving);
        int windows = std::max(1, static_cast<int>(std::ceil(model.T / delta - 1e-9)));
        delta = model.T / windows;
        int Kw = cc.window_depth;

        // pin the truncation radius once per attempt (pilot on the last window)
        if (scfg.use_truncation && scfg.trunc_radius <= 0) {
            NoiseTree last(Kw, delta, model.T - delta);
            scfg.trunc_radius =
                calibrate_truncation_radius(model, x0, mu0, last, scfg);
        }

        // arrival-measure predictions from a deterministic MFG whose source is
        // the cost averaged over the x0-marginal (3-point Gauss-Hermite in
        // N(x0, sigma0^2 t)): captures both the drift-sustained density
        // profile and the noise damping of the x0 coupling
        std::vector<DensityField> mu_pred(windows + 1, mu0);
        {
            const double gh_nodes[3] = {-std::sqrt(3.0), 0.0, std::sqrt(3.0)};
            const double gh_weights[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
            auto source = [&](double t, const DensityField& m_) {
                double sd = model.sigma0 * std::sqrt(std::max(t, 0.0));
                ScalarField out(m_.grid);
                for (int q = 0; q < 3; ++q) {
                    ScalarField fq = model.costs.f(t, x0 + sd * gh_nodes[q], m_);
                    fq *= gh_weights[q];
                    out += fq;
                }
                return out;
            };
            auto terminal = [&](const DensityField& m_) {
                double sd = model.sigma0 * std::sqrt(model.T);
                ScalarField out(m_.grid);
                for (int q = 0; q < 3; ++q) {
                    ScalarField gq = model.costs.g(x0 + sd * gh_nodes[q], m_);
                    gq *= gh_weights[q];
                    out += gq;
                }
                return out;
            };
            AuxiliaryMfg pred = solve_deterministic_mfg(source, terminal, mu0, model.H, 0.0,
                                                        model.T, windows * Kw, scfg);
            for (int w = 1; w <= windows; ++w) mu_pred[w] = pred.mu[w * Kw];
        }

        std::vector<double> shift_lattice, weight_lattice = cc.mu_weights;
        for (int k = -cc.mu_shifts; k <= cc.mu_shifts; ++k)
            shift_lattice.push_back(k * cc.shift_step);

        auto x0_lattice = [&](double t_edge) {
            std::vector<double> xs;
            if (model.x0_period > 0) {
                double lo = x0 - 0.5 * model.x0_period;
                double step = model.x0_period / cc.x0_points;
                for (int i = 0; i < cc.x0_points; ++i) xs.push_back(lo + i * step);
            } else {
                double span = 3.0 * model.sigma0 * std::sqrt(std::max(t_edge, delta)) + 0.5;
                double lo = x0 - span;
                double step = 2.0 * span / (cc.x0_points - 1);
                for (int i = 0; i < cc.x0_points; ++i) xs.push_back(lo + i * step);
            }
            return xs;
        };

        bool failed = false;
        std::vector<EdgeTable> tables(windows);  // tables[w] at t_w; [0] unused
        TerminalOverride terminal;               // rebound per window below

        auto window_terminal = [&](int w) -> const TerminalOverride* {
            if (w + 1 >= windows) return nullptr;  // last window: true costs
            const EdgeTable& tab = tables[w + 1];
            terminal.g0 = [&tab](double x, const DensityField& m) { return tab.eval0(x, m); };
            terminal.g = [&tab](double x, const DensityField& m) { return tab.eval_field(x, m); };
            return &terminal;
        };

        auto solve_window = [&](int w, double x_init, const DensityField& m_init) {
            NoiseTree tree(Kw, delta, w * delta);
            return solve_equilibrium(model, x_init, m_init, tree, scfg, window_terminal(w));
        };

        for (int w = windows - 1; w >= 1 && !failed; --w) {
            EdgeTable& tab = tables[w];
            tab.t_edge = w * delta;
            tab.x0_period = model.x0_period;
            tab.guard_w1 = cc.guard_w1;
            tab.x0s = x0_lattice(tab.t_edge);
            tab.fam.init(mu_pred[w], shift_lattice, weight_lattice);
            if (tab.fam.degenerate()) {
                tab.fam.shifts = {0.0};
                tab.fam.weights = {0.0};
            }
            tab.val0.assign(tab.nx() * tab.nk() * tab.nw(), 0.0);
            tab.valU.assign(tab.nx() * tab.nk() * tab.nw(), ScalarField(grid));
            for (int xi = 0; xi < tab.nx() && !failed; ++xi)
                for (int ki = 0; ki < tab.nk() && !failed; ++ki)
                    for (int wi = 0; wi < tab.nw() && !failed; ++wi) {
                        DensityField m = tab.fam.member(tab.fam.shifts[ki],
                                                        tab.fam.weights[wi]);
                        EquilibriumSolution sol = solve_window(w, tab.x0s[xi], m);
                        if (!sol.converged()) {
                            failed = true;
                            break;
                        }
                        tab.val0[tab.index(xi, ki, wi)] = sol.major.Y0[0];
                        tab.valU[tab.index(xi, ki, wi)] = sol.minor.u[0];
                    }
        }
        if (failed) continue;  // halve the window

        ContinuationResult res;
        res.windows = windows;
        res.window_depth = Kw;
        res.delta = delta;
        res.halvings = halving;
        res.first = solve_window(0, x0, mu0);
        if (!res.first.converged()) continue;
        res.Y0_root = res.first.major.Y0[0];
        res.status = SolveStatus::Converged;

        // stitched diagnostics along balanced sampled paths
        AuxiliaryHjb w0;
        bool have_w0 = static_cast<bool>(model.costs.F0);
        if (have_w0) {
            X0Grid xg(128, model.x0_box_half_width(x0, Kw * windows));
            w0 = solve_w0(model, xg, windows * Kw, 2);
        }
        for (int s = 0; s < cc.path_samples; ++s) {
            double xs = x0;
            DensityField ms = mu0;
            double v0_sum = 0.0, mj_sum = 0.0;
            for (int w = 0; w < windows; ++w) {
                // every sample starts from the same window-0 solve
                EquilibriumSolution sol = (w == 0) ? res.first : solve_window(w, xs, ms);
                if (!sol.converged()) {
                    failed = true;
                    break;
                }
                NoiseTree tree(Kw, delta, w * delta);
                auto gd = gradient_diagnostic(sol.minor);
                res.sup_grad_u = std::max(res.sup_grad_u, gd.sup_grad_u);
                res.sup_higher = std::max(res.sup_higher, gd.sup_higher);
                TreeProcess<double> vt = v0_bmo_tail(sol.minor, tree, model.sigma0);
                v0_sum += vt[0];
                double vmax = 0.0;
                for (NodeId id = 0; id < tree.node_count(); ++id)
                    vmax = std::max(vmax, vt[id]);
                res.window_v0_bmo = std::max(res.window_v0_bmo, vmax);
                if (have_w0) {
                    TreeProcess<double> mt =
                        major_bmo_tail(sol.major, w0, tree, model.sigma0, w * Kw);
                    mj_sum += mt[0];
                    double mmax = 0.0;
                    for (NodeId id = 0; id < tree.node_count(); ++id)
                        mmax = std::max(mmax, mt[id]);
                    res.window_major_bmo = std::max(res.window_major_bmo, mmax);
                }
                // follow the sample's bit pattern to the window's leaf
                NodeId node = 0;
                for (int lvl = 0; lvl < Kw; ++lvl)
                    node = tree.child(node, detail::sample_bit(s, w * Kw + lvl));
                xs = sol.major.X0[node];
                ms = sol.minor.mu[node];
            }
            if (failed) break;
            res.v0_bmo_total = std::max(res.v0_bmo_total, v0_sum);
            res.major_bmo_total = std::max(res.major_bmo_total, mj_sum);
        }
        if (failed) continue;
        res.tables = std::move(tables);
        return res;
    }

    ContinuationResult res;
    res.status = SolveStatus::NoContraction;
    res.halvings = cc.max_halvings;
    return res;
}

/// Re-solves only the first window from a different initial state, reusing
/// the tabulated master fields of a completed continuation run. Valid as
/// long as the new state projects into the t_1 table's family.
inline EquilibriumSolution continuation_window0(const ModelSpec& model, double x0,
                                                const DensityField& mu0,
                                                const ContinuationResult& base,
                                                const SolverConfig& scfg) {
    if (!base.converged())
        throw std::invalid_argument("continuation_window0: base run not converged");
    NoiseTree tree(base.window_depth, base.delta, 0.0);
    if (base.windows == 1) return solve_equilibrium(model, x0, mu0, tree, scfg);
    const EdgeTable& tab = base.tables[1];
    TerminalOverride term;
    term.g0 = [&tab](double x, const DensityField& m) { return tab.eval0(x, m); };
    term.g = [&tab](double x, const DensityField& m) { return tab.eval_field(x, m); };
    return solve_equilibrium(model, x0, mu0, tree, scfg, &term);
}

}  // namespace mmfg
