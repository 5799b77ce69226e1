#include "mmfg/coupled_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace mmfg {
namespace {

SolverConfig coupled_cfg() {
    SolverConfig cfg;
    cfg.substeps = 2;
    cfg.inner_tol = 1e-9;
    cfg.outer_tol = 1e-7;
    cfg.trunc_radius = 8.0;  // pinned: keeps the run family discretization-identical
    return cfg;
}

TEST(SolveEquilibrium, ZeroCostsFixImmediately) {
    PeriodicGrid g(24);
    NoiseTree tree(4, 1.0);
    ModelSpec m = make_model("zero");
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution sol = solve_equilibrium(m, 0.2, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(sol.converged());
    EXPECT_LE(sol.outer_iterations, 2);
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        EXPECT_NEAR(sol.major.X0[id], 0.2 + tree.brownian_at(id), 1e-13);
        EXPECT_EQ(sol.major.Y0[id], 0.0);
        EXPECT_EQ(sol.minor.u[id].sup_norm(), 0.0);
    }
}

// Decoupled check: when the minor has no costs, the equilibrium major triple
// equals the standalone FBSDE solve (mu is irrelevant to the major data).
TEST(SolveEquilibrium, LqDecouplesFromPopulation) {
    PeriodicGrid g(16);
    NoiseTree tree(5, 1.0);
    ModelSpec m = make_model("lq");
    SolverConfig cfg = coupled_cfg();
    cfg.inner_tol = 1e-12;
    const double x0 = 0.8;
    EquilibriumSolution sol = solve_equilibrium(m, x0, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(sol.converged());

    auto uniform = std::make_shared<DensityField>(DensityField::uniform(g));
    DensityAccessor acc = [uniform](NodeId) -> const DensityField& { return *uniform; };
    MajorTriple standalone = solve_major_fbsde(acc, m, tree, x0, cfg);
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        EXPECT_NEAR(sol.major.X0[id], standalone.X0[id], 1e-12);
        EXPECT_NEAR(sol.major.Y0[id], standalone.Y0[id], 1e-12);
    }
}

TEST(SolveEquilibrium, ContractionRatiosInGoodRegime) {
    PeriodicGrid g(48);
    ModelSpec m = make_model("monotone-conv");  // sigma0 = 3, T = 0.5
    NoiseTree tree(6, m.T);
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution sol = solve_equilibrium(m, 0.0, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(sol.converged());
    ASSERT_GE(sol.contraction_ratios.size(), 1u);
    for (double r : sol.contraction_ratios) EXPECT_LE(r, 0.5);
}

// Fixed-point property: one more application of the map moves X0 by at most
// twice the tolerance.
TEST(SolveEquilibrium, ReapplyingMapIsStable) {
    PeriodicGrid g(32);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(5, m.T);
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution sol = solve_equilibrium(m, 0.1, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(sol.converged());

    HamiltonianSpec Hh = truncate_hamiltonian(m.H, cfg.trunc_radius);
    auto l0 = truncated_major_driver(m.L0, m.H0, cfg.trunc_radius);
    MinorSolution minor = solve_minor(sol.major.X0, DensityField::uniform(g), m, tree, cfg, &Hh);
    MajorTriple major = solve_major_fbsde(
        [&minor](NodeId id) -> const DensityField& { return minor.mu[id]; }, m, tree, 0.1, cfg,
        &l0);
    double moved = 0.0;
    for (NodeId id = 0; id < tree.node_count(); ++id)
        moved = std::max(moved, std::abs(major.X0[id] - sol.major.X0[id]));
    EXPECT_LE(moved, 2.0 * cfg.outer_tol);
}

// Multi-start uniqueness in the good regime: three distinct outer
// initializations land within 10x tolerance of each other.
TEST(SolveEquilibrium, MultiStartUniqueness) {
    PeriodicGrid g(32);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(5, m.T);
    SolverConfig cfg = coupled_cfg();
    cfg.outer_tol = 1e-6;
    DensityField mu0 = DensityField::uniform(g);

    std::vector<EquilibriumSolution> sols;
    for (InitStrategy init :
         {InitStrategy::ConstantX0, InitStrategy::DriftlessWalk, InitStrategy::WalkWithDrift}) {
        SolverConfig c = cfg;
        c.init = init;
        c.init_drift = 1.0;
        sols.push_back(solve_equilibrium(m, 0.0, mu0, tree, c));
        ASSERT_TRUE(sols.back().converged());
    }
    for (std::size_t a = 0; a < sols.size(); ++a)
        for (std::size_t b = a + 1; b < sols.size(); ++b) {
            double d = 0.0;
            for (NodeId id = 0; id < tree.node_count(); ++id)
                d = std::max(d, std::abs(sols[a].major.X0[id] - sols[b].major.X0[id]));
            EXPECT_LE(d, 10.0 * cfg.outer_tol);
        }
}

TEST(FlatDerivative, LinearFunctional) {
    PeriodicGrid g(32);
    std::mt19937_64 rng(2);
    DensityField mu = random_smooth_density(g, rng);
    ScalarField phi(g);
    for (int j = 0; j < g.n; ++j) phi[j] = std::sin(2.0 * M_PI * g.x(j)) + 0.3;
    auto F = [&phi](const DensityField& m_) { return m_.pair(phi); };
    double base = mu.pair(phi);
    ScalarField prof = flat_derivative_profile(F, mu, 1e-3);
    for (int y = 0; y < g.n; ++y) EXPECT_NEAR(prof[y], phi[y] - base, 1e-10);
    EXPECT_NEAR(flat_derivative(F, mu, 5, 1e-3), phi[5] - base, 1e-10);
}

// Analytic chain rule for F(mu) = (int phi dmu)^2.
TEST(FlatDerivative, QuadraticFunctional) {
    PeriodicGrid g(32);
    std::mt19937_64 rng(6);
    DensityField mu = random_smooth_density(g, rng);
    ScalarField phi(g);
    for (int j = 0; j < g.n; ++j) phi[j] = std::cos(2.0 * M_PI * g.x(j));
    auto F = [&phi](const DensityField& m_) {
        double v = m_.pair(phi);
        return v * v;
    };
    double I = mu.pair(phi);
    const double eps = 1e-3;
    ScalarField prof = flat_derivative_profile(F, mu, eps);
    for (int y = 0; y < g.n; ++y)
        EXPECT_NEAR(prof[y], 2.0 * I * (phi[y] - I), 20.0 * eps);
}

TEST(FlatDerivative, ConstantAndInvalidEps) {
    PeriodicGrid g(16);
    DensityField mu = DensityField::uniform(g);
    auto F = [](const DensityField&) { return 4.2; };
    ScalarField prof = flat_derivative_profile(F, mu, 1e-2);
    for (int y = 0; y < g.n; ++y) EXPECT_EQ(prof[y], 0.0);
    EXPECT_THROW(flat_derivative_profile(F, mu, 1.5), std::invalid_argument);
    EXPECT_THROW(flat_derivative_profile(F, mu, 0.0), std::invalid_argument);
}

TEST(SolveLinearized, ZeroDirectionGivesZero) {
    PeriodicGrid g(24);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(4, m.T);
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution base = solve_equilibrium(m, 0.0, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(base.converged());
    LinearDirection dir;
    dir.dmu = SignedMeasure(g);
    LinearizedSolution lin = solve_linearized(base, dir, m, tree, cfg);
    ASSERT_TRUE(lin.converged());
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        EXPECT_EQ(lin.dX0[id], 0.0);
        EXPECT_EQ(lin.dY0[id], 0.0);
        EXPECT_EQ(lin.du[id].sup_norm(), 0.0);
    }
}

// Exact positive homogeneity: doubling the direction doubles the solution.
TEST(SolveLinearized, HomogeneityExact) {
    PeriodicGrid g(24);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(4, m.T);
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution base = solve_equilibrium(m, 0.1, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(base.converged());

    LinearDirection dir;
    dir.dx0 = 0.7;
    dir.dmu = SignedMeasure(g);
    for (int j = 0; j < g.n; ++j)
        dir.dmu[j] = 1e-2 * std::sin(2.0 * M_PI * g.x(j)) / g.n;
    LinearDirection dir2 = dir;
    dir2.dx0 *= 2.0;
    dir2.dmu *= 2.0;

    LinearizedSolution a = solve_linearized(base, dir, m, tree, cfg);
    LinearizedSolution b = solve_linearized(base, dir2, m, tree, cfg);
    ASSERT_TRUE(a.converged());
    ASSERT_TRUE(b.converged());
    EXPECT_EQ(a.iterations, b.iterations);
    double dir_mass = dir.dmu.total_mass();
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        EXPECT_NEAR(b.dY0[id], 2.0 * a.dY0[id], 1e-10);
        EXPECT_NEAR(b.dX0[id], 2.0 * a.dX0[id], 1e-10);
        // the linearized transport conserves the direction's total mass
        EXPECT_NEAR(a.dmu[id].total_mass(), dir_mass, 1e-12);
        for (int j = 0; j < g.n; ++j) {
            EXPECT_NEAR(b.du[id][j], 2.0 * a.du[id][j], 1e-10);
            EXPECT_NEAR(b.dmu[id][j], 2.0 * a.dmu[id][j], 1e-10);
        }
    }
}

TEST(SolveLinearized, MissingDerivativeDataListed) {
    PeriodicGrid g(16);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(3, m.T);
    SolverConfig cfg = coupled_cfg();
    EquilibriumSolution base = solve_equilibrium(m, 0.0, DensityField::uniform(g), tree, cfg);
    ASSERT_TRUE(base.converged());
    m.costs.delta_mu_f = nullptr;
    m.costs.grad_x0_g = nullptr;
    LinearDirection dir;
    dir.dmu = SignedMeasure(g);
    try {
        solve_linearized(base, dir, m, tree, cfg);
        FAIL() << "expected invalid_argument";
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("delta_mu_f"), std::string::npos);
        EXPECT_NE(msg.find("grad_x0_g"), std::string::npos);
    }
}

// Finite-difference match: the x0-derivative from the linearized system
// agrees with re-solved perturbations; the second-order remainder of Y0
// scales like eps^2 (ratio constant within a factor 3), and the first-order
// defect of X0 shrinks linearly.
TEST(SolveLinearized, FiniteDifferenceMatch) {
    PeriodicGrid g(32);
    ModelSpec m = make_model("monotone-conv");
    NoiseTree tree(4, m.T);
    SolverConfig cfg = coupled_cfg();
    cfg.outer_tol = 1e-11;
    cfg.inner_tol = 1e-12;
    // pinned substeps: the adaptive CFL count may jump between perturbed
    // solves, which would make the discrete map non-differentiable
    cfg.adaptive_cfl = false;
    cfg.substeps = 16;
    const double x0 = 0.2;
    DensityField mu0 = DensityField::uniform(g);

    EquilibriumSolution base = solve_equilibrium(m, x0, mu0, tree, cfg);
    ASSERT_TRUE(base.converged());
    LinearDirection dir;
    dir.dx0 = 1.0;
    dir.dmu = SignedMeasure(g);
    LinearizedSolution lin = solve_linearized(base, dir, m, tree, cfg);
    ASSERT_TRUE(lin.converged());

    std::vector<double> rem_over_eps2, x_defect;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        EquilibriumSolution pert = solve_equilibrium(m, x0 + eps, mu0, tree, cfg);
        ASSERT_TRUE(pert.converged());
        double remainder = std::abs(pert.major.Y0[0] - base.major.Y0[0] - eps * lin.dY0[0]);
        rem_over_eps2.push_back(remainder / (eps * eps));
        double dx = 0.0;
        for (NodeId id = 0; id < tree.node_count(); ++id)
            dx = std::max(dx, std::abs((pert.major.X0[id] - base.major.X0[id]) / eps -
                                       lin.dX0[id]));
        x_defect.push_back(dx);
    }
    double lo = *std::min_element(rem_over_eps2.begin(), rem_over_eps2.end());
    double hi = *std::max_element(rem_over_eps2.begin(), rem_over_eps2.end());
    EXPECT_LE(hi, 3.0 * lo) << "remainders " << rem_over_eps2[0] << " " << rem_over_eps2[1]
                            << " " << rem_over_eps2[2];
    // first-order defect of X0 shrinks linearly in eps until it reaches the
    // solver-noise floor (here the x0-nonlinearity is nearly quadratic, so
    // the defect saturates at the floor almost immediately)
    double floor = 100.0 * cfg.outer_tol;
    EXPECT_LE(x_defect[1], std::max(0.7 * x_defect[0], floor));
    EXPECT_LE(x_defect[2], std::max(0.7 * x_defect[1], floor));
}

TEST(MasterField, TerminalSliceIsExact) {
    PeriodicGrid g(24);
    ModelSpec m = make_model("monotone-conv");
    SolverConfig cfg = coupled_cfg();
    MasterField mf(m, g, cfg, 4);
    std::mt19937_64 rng(12);
    DensityField mu = random_smooth_density(g, rng);
    auto v = mf.eval(m.T, 0.3, mu);
    EXPECT_EQ(v.Y0, m.costs.g0(0.3, mu));
    ScalarField gref = m.costs.g(0.3, mu);
    EXPECT_EQ(sup_distance(v.u, gref), 0.0);
}

// Representation formula: Y0 at interior nodes equals the master field
// re-solved from the node's own state.
TEST(MasterField, RepresentationAlongSolvedTree) {
    PeriodicGrid g(32);
    ModelSpec m = make_model("monotone-conv");
    const int K = 5;
    NoiseTree tree(K, m.T);
    SolverConfig cfg = coupled_cfg();
    cfg.outer_tol = 1e-8;
    DensityField mu0 = DensityField::uniform(g);
    EquilibriumSolution sol = solve_equilibrium(m, 0.0, mu0, tree, cfg);
    ASSERT_TRUE(sol.converged());

    MasterField mf(m, g, cfg, K);
    // sampled interior nodes across levels and paths
    std::vector<std::pair<int, NodeId>> picks = {{1, 0}, {1, 1}, {2, 1}, {2, 3},
                                                 {3, 2}, {3, 5}, {4, 7}, {4, 11}};
    for (auto [level, path] : picks) {
        NodeId id = tree.id(level, path);
        double u0 = mf.eval0(tree.time_of_level(level), sol.major.X0[id], sol.minor.mu[id]);
        EXPECT_NEAR(sol.major.Y0[id], u0, 5e-3) << "level " << level << " path " << path;
    }
}

TEST(MasterEquationResidual, ZeroCostModelWithinSchemeTolerance) {
    PeriodicGrid g(16);
    ModelSpec m = make_model("zero");
    SolverConfig cfg = coupled_cfg();
    const int K = 4;
    MasterField mf(m, g, cfg, K);
    ResidualConfig rc;
    rc.eps_mu = 2e-2;
    rc.h_x0 = 2e-2;
    auto res = master_equation_residual(mf, 0.5 * m.T, 0.0, DensityField::uniform(g), rc);
    double tol = 10.0 * (m.T / K + g.h + rc.eps_mu);
    EXPECT_LE(std::abs(res.res_major), tol);
    EXPECT_LE(res.res_minor_sup, tol);
}

// First-order consistency on the second coupled model: the linearized
// x0-derivative matches re-solved finite differences for assumption-b too.
TEST(SolveLinearized, FiniteDifferenceMatchAssumptionB) {
    PeriodicGrid g(24);
    auto m = make_model("assumption-b", {{"T", 0.5}});
    NoiseTree tree(3, m.T);
    SolverConfig cfg = coupled_cfg();
    cfg.outer_tol = 1e-11;
    cfg.inner_tol = 1e-12;
    cfg.adaptive_cfl = false;
    cfg.substeps = 12;
    const double x0 = 0.3;
    DensityField mu0 = DensityField::uniform(g);

    EquilibriumSolution base = solve_equilibrium(m, x0, mu0, tree, cfg);
    ASSERT_TRUE(base.converged());
    LinearDirection dir;
    dir.dx0 = 1.0;
    dir.dmu = SignedMeasure(g);
    LinearizedSolution lin = solve_linearized(base, dir, m, tree, cfg);
    ASSERT_TRUE(lin.converged());

    std::vector<double> rem;
    for (double eps : {1e-2, 5e-3}) {
        EquilibriumSolution pert = solve_equilibrium(m, x0 + eps, mu0, tree, cfg);
        ASSERT_TRUE(pert.converged());
        rem.push_back(std::abs(pert.major.Y0[0] - base.major.Y0[0] - eps * lin.dY0[0]));
    }
    // second order: quartering tolerance with slack
    EXPECT_LE(rem[1], 0.4 * rem[0] + 1e-9);
}

// Uniqueness band across the good-regime noise levels.
TEST(SolveEquilibrium, MultiStartUniquenessAcrossSigma) {
    PeriodicGrid g(24);
    DensityField mu0 = DensityField::uniform(g);
    for (double s0 : {2.0, 4.0}) {
        auto m = make_model("monotone-conv", {{"sigma0", s0}});
        NoiseTree tree(4, m.T);
        SolverConfig cfg = coupled_cfg();
        cfg.outer_tol = 1e-6;
        std::vector<EquilibriumSolution> sols;
        for (InitStrategy init : {InitStrategy::ConstantX0, InitStrategy::DriftlessWalk,
                                  InitStrategy::WalkWithDrift}) {
            SolverConfig c = cfg;
            c.init = init;
            c.init_drift = 1.0;
            sols.push_back(solve_equilibrium(m, 0.0, mu0, tree, c));
            ASSERT_TRUE(sols.back().converged()) << "sigma0 " << s0;
        }
        for (std::size_t a = 0; a < sols.size(); ++a)
            for (std::size_t b = a + 1; b < sols.size(); ++b) {
                double d = 0.0;
                for (NodeId id = 0; id < tree.node_count(); ++id)
                    d = std::max(d, std::abs(sols[a].major.X0[id] - sols[b].major.X0[id]));
                EXPECT_LE(d, 10.0 * cfg.outer_tol) << "sigma0 " << s0;
            }
    }
}

// Measured Lipschitz table of U0 in the measure argument (the global
// Lipschitz bound): 20 random perturbation pairs, reported constant.
TEST(MasterField, LipschitzTableInMeasure) {
    PeriodicGrid g(24);
    ModelSpec m = make_model("monotone-conv");
    SolverConfig cfg = coupled_cfg();
    const int K = 4;
    MasterField mf(m, g, cfg, K);
    std::mt19937_64 rng(2024);
    DensityField mu = DensityField::uniform(g);
    double base = mf.eval0(0.0, 0.1, mu);

    double lip = 0.0;
    int measured = 0;
    for (int pair = 0; pair < 20; ++pair) {
        DensityField nu = random_smooth_density(g, rng);
        DensityField blend;
        blend.grid = g;
        blend.mass.resize(g.n);
        double a = 0.1 + 0.02 * pair;
        for (int j = 0; j < g.n; ++j)
            blend.mass[j] = (1.0 - a) * mu.mass[j] + a * nu.mass[j];
        double w1 = wasserstein1(mu, blend);
        if (w1 < 1e-10) continue;
        double v = mf.eval0(0.0, 0.1, blend);
        lip = std::max(lip, std::abs(v - base) / w1);
        ++measured;
    }
    RecordProperty("lipschitz_U0", lip);
    EXPECT_GE(measured, 15);
    EXPECT_GT(lip, 0.0);
    EXPECT_TRUE(std::isfinite(lip));
}

// Qualitative contrast: anti-monotone couplings at weak common noise lose
// the clean multi-start agreement that the monotone/strong-noise regime
// shows. The outcome is recorded; the hard assertion lives in the sweep's
// monotone trend.
TEST(SolveEquilibrium, DegradationContrastLogged) {
    PeriodicGrid g(24);
    auto anti = make_model("monotone-conv",
                           {{"rho1", -2.5}, {"rho2", -1.0}, {"sigma0", 0.2}, {"T", 2.0},
                            {"cf", 1.0}, {"c0", 1.0}});
    NoiseTree tree(4, anti.T);
    SolverConfig cfg = coupled_cfg();
    cfg.outer_tol = 1e-6;
    cfg.outer_max_iter = 25;
    DensityField mu0 = DensityField::point_mass(g, 5);

    int failures = 0;
    double spread = 0.0;
    std::vector<EquilibriumSolution> sols;
    for (InitStrategy init : {InitStrategy::ConstantX0, InitStrategy::DriftlessWalk,
                              InitStrategy::WalkWithDrift}) {
        SolverConfig c = cfg;
        c.init = init;
        c.init_drift = 1.0;
        try {
            sols.push_back(solve_equilibrium(anti, 0.0, mu0, tree, c));
            if (!sols.back().converged()) ++failures;
        } catch (const std::exception&) {
            ++failures;
        }
    }
    for (std::size_t a = 0; a < sols.size(); ++a)
        for (std::size_t b = a + 1; b < sols.size(); ++b)
            for (NodeId id = 0; id < tree.node_count(); ++id)
                spread = std::max(spread,
                                  std::abs(sols[a].major.X0[id] - sols[b].major.X0[id]));
    RecordProperty("anti_monotone_failures", failures);
    RecordProperty("anti_monotone_spread", spread);
    // logged outcome; the experiment itself must complete
    SUCCEED() << "failures " << failures << ", spread " << spread;
}

}  // namespace
}  // namespace mmfg
