#include "mmfg/coupled_solver.hpp"
#include "mmfg/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace mmfg {
namespace {

TEST(Legendre, QuadraticClosedForm) {
    LagrangianSpec L = make_model("lq").L;
    auto r = legendre(L, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(r.value, 0.5);
    EXPECT_DOUBLE_EQ(r.maximizer, -1.0);
    auto r0 = legendre(L, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(r0.value, 0.0);
    EXPECT_DOUBLE_EQ(r0.maximizer, 0.0);
}

// Quartic Lagrangian vs brute force over a 10^6-point alpha grid.
TEST(Legendre, QuarticMatchesBruteForce) {
    LagrangianSpec L;
    const double eps = 0.05;
    L.eval = [eps](double, double a) { return 0.25 * a * a * a * a + eps * a * a; };
    L.grad_alpha = [eps](double, double a) { return a * a * a + 2.0 * eps * a; };
    L.convexity = 2.0 * eps;

    const double p = 1.0;
    auto r = legendre(L, 0.0, p);

    double best = -1e300;
    const int N = 1000000;
    for (int i = 0; i <= N; ++i) {
        double a = -50.0 + 100.0 * i / N;
        best = std::max(best, -p * a - L.eval(0.0, a));
    }
    EXPECT_NEAR(r.value, best, 1e-6);
}

TEST(Legendre, BoundaryMaximizerRejected) {
    LagrangianSpec L;
    L.eval = [](double, double a) { return -a; };  // not coercive
    L.grad_alpha = [](double, double) { return -1.0; };
    L.convexity = 0.0;
    EXPECT_THROW(legendre(L, 0.0, 0.5), std::domain_error);
}

// Fenchel round trip: H(x,p) = p grad_p H - L(x, -grad_p H) at random points.
TEST(Legendre, FenchelRoundTrip) {
    ModelSpec m = make_model("lq");
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> un(-5, 5);
    for (int s = 0; s < 50; ++s) {
        double x = un(rng), p = un(rng);
        double gp = m.H.grad_p(x, p);
        double lhs = m.H.eval(x, p);
        double rhs = p * gp - m.L.eval(x, -gp);
        EXPECT_NEAR(lhs, rhs, 1e-10);
    }
}

// Declared derivatives must match central finite differences of eval.
TEST(Model, DerivativeFieldsConsistent) {
    for (const auto& name : builtin_model_names()) {
        ModelSpec m = make_model(name);
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> un(-10, 10);
        const double h = 1e-5;
        for (int s = 0; s < 40; ++s) {
            double x = un(rng) * 0.1, p = un(rng);
            double fd = (m.H.eval(x, p + h) - m.H.eval(x, p - h)) / (2 * h);
            EXPECT_NEAR(m.H.grad_p(x, p), fd, 1e-6 * std::max(1.0, std::abs(fd)));
            double fd0 = (m.H0.eval(x, p + h) - m.H0.eval(x, p - h)) / (2 * h);
            EXPECT_NEAR(m.H0.grad_p(x, p), fd0, 1e-6 * std::max(1.0, std::abs(fd0)));
            double fdx = (m.H.eval(x + h, p) - m.H.eval(x - h, p)) / (2 * h);
            EXPECT_NEAR(m.H.grad_x(x, p), fdx, 1e-6 * std::max(1.0, std::abs(fdx)));
            double fda = (m.L.eval(x, p + h) - m.L.eval(x, p - h)) / (2 * h);
            EXPECT_NEAR(m.L.grad_alpha(x, p), fda, 1e-6 * std::max(1.0, std::abs(fda)));
        }
    }
}

// Analytic cost derivatives (x0 gradient and flat derivative) match finite
// differences; the flat derivative also respects the zero-mean convention.
TEST(Model, CostDerivativesConsistent) {
    PeriodicGrid g(32);
    for (const auto& name : {"monotone-conv", "assumption-b"}) {
        ModelSpec m = make_model(name);
        std::mt19937_64 rng(31);
        DensityField mu = random_smooth_density(g, rng);
        const double t = 0.3, x0 = 0.4, h = 1e-6;
        double fd = (m.costs.f0(t, x0 + h, mu) - m.costs.f0(t, x0 - h, mu)) / (2 * h);
        EXPECT_NEAR(m.costs.grad_x0_f0(t, x0, mu), fd, 1e-6 * std::max(1.0, std::abs(fd)));

        ScalarField prof = m.costs.delta_mu_f0(t, x0, mu);
        EXPECT_NEAR(mu.pair(prof), 0.0, 1e-12);
        auto F = [&](const DensityField& q) { return m.costs.f0(t, x0, q); };
        ScalarField fd_prof = flat_derivative_profile(F, mu, 1e-4);
        for (int y = 0; y < g.n; ++y) EXPECT_NEAR(prof[y], fd_prof[y], 1e-3);

        MuKernel K = m.costs.delta_mu_f(t, x0, mu);
        ScalarField fx = m.costs.f(t, x0, mu);
        // kernel rows are recentered flat derivatives of the field
        for (int xi : {0, 7, 19}) {
            auto Fx = [&](const DensityField& q) { return m.costs.f(t, x0, q)[xi]; };
            ScalarField row_fd = flat_derivative_profile(Fx, mu, 1e-4);
            for (int y = 0; y < g.n; ++y) EXPECT_NEAR(K.at(xi, y), row_fd[y], 1e-3);
        }
        (void)fx;
    }
}

TEST(Model, LagrangianConvexitySampled) {
    ModelSpec m = make_model("lq");
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> un(-10, 10);
    const double h = 0.05;  // wide step: immune to cancellation, exact on quadratics
    for (int s = 0; s < 30; ++s) {
        double x = un(rng), a = un(rng);
        double dd = (m.L.eval(x, a + h) - 2 * m.L.eval(x, a) + m.L.eval(x, a - h)) / (h * h);
        EXPECT_GE(dd, m.L.convexity - 1e-8);
    }
}

TEST(Truncation, AgreesInsideRadius) {
    ModelSpec m = make_model("lq");
    HamiltonianSpec Hh = truncate_hamiltonian(m.H, 5.0);
    // H(x,p) = p^2/2, R = 5, p = 3 -> exactly 4.5
    EXPECT_DOUBLE_EQ(Hh.eval(0.0, 3.0), 4.5);
    // machine-precision agreement on a 1000-point grid of |p| <= R
    for (int i = 0; i <= 1000; ++i) {
        double p = -5.0 + 10.0 * i / 1000.0;
        EXPECT_NEAR(Hh.eval(0.3, p), 0.5 * p * p, 1e-14);
        EXPECT_NEAR(Hh.grad_p(0.3, p), p, 1e-12);
    }
    EXPECT_THROW(truncate_hamiltonian(m.H, 1.0), std::invalid_argument);
}

// Sampled sup of divided differences: the truncated gradient stays bounded
// far beyond the radius (sampled up to |p| = 10 R^2).
TEST(Truncation, GradientBoundedFarOut) {
    ModelSpec m = make_model("lq");
    const double R = 5.0;
    HamiltonianSpec Hh = truncate_hamiltonian(m.H, R);
    double sup_grad = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        double p = -10.0 * R * R + 20.0 * R * R * i / 4000.0;
        sup_grad = std::max(sup_grad, std::abs(Hh.grad_p(0.0, p)));
    }
    double bound = 4.0 * R * R * R;  // phi' is capped near 4R^3
    EXPECT_LE(sup_grad, bound);
}

TEST(Truncation, CurvaturePositiveSampled) {
    ModelSpec m = make_model("lq");
    const double R = 5.0;
    HamiltonianSpec Hh = truncate_hamiltonian(m.H, R);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> up(-10.0 * R * R, 10.0 * R * R);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    const double h = 1e-3;
    for (int s = 0; s < 1000; ++s) {
        double x = ux(rng), p = up(rng);
        double dd = (Hh.eval(x, p + h) - 2 * Hh.eval(x, p) + Hh.eval(x, p - h)) / (h * h);
        EXPECT_GE(dd, 1e-6) << "p = " << p;
        EXPECT_GE(Hh.hess_pp(x, p), 1e-6) << "p = " << p;
    }
}

// Plancherel oracle: convolution with a nonnegative-Fourier kernel is a
// nonnegative quadratic form in (mu' - mu); flipping the sign flips it.
TEST(LasryLions, ConvolutionCostsAreMonotone) {
    PeriodicGrid g(64);
    ModelSpec m = make_model("monotone-conv");
    auto rep = check_lasry_lions(m.costs, g, 40, m.T);
    EXPECT_GE(rep.min_f, -1e-10);
    EXPECT_GE(rep.min_g, -1e-10);
    EXPECT_TRUE(rep.monotone_sampled());
    EXPECT_EQ(rep.violations, 0);
}

TEST(LasryLions, ZeroCostGivesZeroMinimum) {
    PeriodicGrid g(32);
    ModelSpec m = make_model("zero");
    auto rep = check_lasry_lions(m.costs, g, 10);
    EXPECT_NEAR(rep.min_f, 0.0, 1e-15);
    EXPECT_NEAR(rep.min_g, 0.0, 1e-15);
}

TEST(LasryLions, AntiMonotoneDetected) {
    PeriodicGrid g(64);
    ModelSpec m = make_model("monotone-conv");
    CostSpec anti = m.costs;
    auto base_f = m.costs.f;
    anti.f = [base_f](double t, double x0, const DensityField& mu) {
        ScalarField out = base_f(t, x0, mu);
        out *= -1.0;
        return out;
    };
    anti.g = [](double, const DensityField& mu) { return ScalarField(mu.grid); };
    auto rep = check_lasry_lions(anti, g, 40);
    EXPECT_LT(rep.min_f, -1e-6);
    EXPECT_FALSE(rep.monotone_sampled());
}

TEST(BuiltinModels, CatalogAndInvariants) {
    auto names = builtin_model_names();
    ASSERT_GE(names.size(), 4u);
    for (const auto& n : names) {
        ModelSpec m = make_model(n);
        EXPECT_GT(m.sigma0, 0.0);
        EXPECT_GT(m.T, 0.0);
    }
    // lq passes the Lagrangian convexity check with lambda = 1
    EXPECT_DOUBLE_EQ(make_model("lq").L.convexity, 1.0);
}

// Assumption-B decay: int_0^inf sup |f_t - F| dt = pert_amp (analytic
// integral of exp(-t)); quadrature on a long horizon stays within the bound.
TEST(BuiltinModels, AssumptionBDecayIntegral) {
    ModelSpec m = make_model("assumption-b");
    PeriodicGrid g(64);
    DensityField mu = DensityField::uniform(g);
    ScalarField F = m.costs.F(mu);
    double integral = 0.0;
    const double dt = 1e-3;
    for (double t = 0.5 * dt; t < 40.0; t += dt) {
        double sup = 0.0;
        for (double x0 : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
            ScalarField f = m.costs.f(t, x0, mu);
            for (int j = 0; j < g.n; ++j) sup = std::max(sup, std::abs(f[j] - F[j]));
        }
        integral += sup * dt;
    }
    EXPECT_LE(integral, 1.0001);
    EXPECT_GE(integral, 0.9);  // the sup over x0 should be close to exp(-t)

    // the major-cost decay integral is finite as well
    double integral0 = 0.0;
    for (double t = 0.5 * dt; t < 40.0; t += dt) {
        double sup = 0.0;
        for (double x0 : {-2.0, -0.5, 0.0, 1.0, 3.0})
            sup = std::max(sup, std::abs(m.costs.f0(t, x0, mu) - m.costs.F0(x0)));
        integral0 += sup * dt;
    }
    EXPECT_LE(integral0, 1.5);
}

TEST(BuiltinModels, OverridesAreValidated) {
    EXPECT_THROW(make_model("lq", {{"bogus", 1.0}}), std::invalid_argument);
    EXPECT_THROW(make_model("nonexistent"), std::invalid_argument);
    ModelSpec m = make_model("lq", {{"sigma0", 2.5}, {"q", 2.0}});
    EXPECT_DOUBLE_EQ(m.sigma0, 2.5);
    EXPECT_DOUBLE_EQ(m.params.at("q"), 2.0);
    // Assumption-B experiments demand sigma0 >= 1
    EXPECT_THROW(make_model("assumption-b", {{"sigma0", 0.5}}), std::invalid_argument);
}

}  // namespace
}  // namespace mmfg
