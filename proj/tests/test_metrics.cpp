#include "mmfg/metrics.hpp"
#include "mmfg/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace mmfg {
namespace {

TEST(Wasserstein1, IdenticalDensitiesAreAtDistanceZero) {
    PeriodicGrid g(64);
    std::mt19937_64 rng(1);
    DensityField mu = random_smooth_density(g, rng);
    EXPECT_EQ(wasserstein1(mu, mu), 0.0);
}

TEST(Wasserstein1, PointMassesOnTheTorus) {
    PeriodicGrid g(100);  // cell centers at k/100 + 0.005
    DensityField a = DensityField::point_mass(g, 0);
    DensityField b = DensityField::point_mass(g, 25);
    EXPECT_NEAR(wasserstein1(a, b), 0.25, g.h);

    DensityField c = DensityField::point_mass(g, 70);
    // wrap-around geodesic: min(0.7, 0.3)
    EXPECT_NEAR(wasserstein1(a, c), 0.3, g.h);
}

TEST(Wasserstein1, MassMismatchRejected) {
    PeriodicGrid g(16);
    DensityField a = DensityField::uniform(g);
    DensityField b = a;
    b.mass[3] += 1e-6;
    EXPECT_THROW(wasserstein1(a, b), std::domain_error);
}

// Property: metric axioms on random density triples.
TEST(Wasserstein1, TriangleInequalityAndSymmetry) {
    PeriodicGrid g(48);
    std::mt19937_64 rng(42);
    for (int s = 0; s < 100; ++s) {
        DensityField a = random_smooth_density(g, rng);
        DensityField b = random_smooth_density(g, rng);
        DensityField c = random_smooth_density(g, rng);
        double ab = wasserstein1(a, b), ba = wasserstein1(b, a);
        double bc = wasserstein1(b, c), ac = wasserstein1(a, c);
        EXPECT_NEAR(ab, ba, 1e-14);
        EXPECT_LE(ac, ab + bc + 1e-14);
        EXPECT_GE(ab, 0.0);
    }
}

TEST(NegNorm, ZeroMeasure) {
    PeriodicGrid g(32);
    SignedMeasure q(g);
    EXPECT_EQ(neg_norm(q, 0), 0.0);
    EXPECT_EQ(neg_norm(q, 1), 0.0);
}

// Duality identity in 1-D: ||mu - nu||_{-1} = W1(mu, nu).
TEST(NegNorm, MatchesWassersteinOnDensityDifferences) {
    PeriodicGrid g(64);
    std::mt19937_64 rng(9);
    for (int s = 0; s < 20; ++s) {
        DensityField a = random_smooth_density(g, rng);
        DensityField b = random_smooth_density(g, rng);
        SignedMeasure d = SignedMeasure::difference(a, b);
        EXPECT_NEAR(neg_norm(d, 1), wasserstein1(a, b), 1e-12);
    }
}

// Direct evaluation of the dual sup for a +-1 dipole at adjacent cells: the
// optimal Lipschitz test function gains h.
TEST(NegNorm, AdjacentDipole) {
    PeriodicGrid g(32);
    SignedMeasure q(g);
    q[5] = 1.0;
    q[6] = -1.0;
    EXPECT_NEAR(neg_norm(q, 1), g.h, 1e-12);
}

TEST(NegNorm, UnsupportedOrderThrows) {
    PeriodicGrid g(16);
    SignedMeasure q(g);
    EXPECT_THROW(neg_norm(q, 2), std::invalid_argument);
    SignedMeasure nonzero(g);
    nonzero[0] = 1.0;
    EXPECT_THROW(neg_norm(nonzero, 1), std::domain_error);
}

TEST(NegNorm, TotalVariation) {
    PeriodicGrid g(16);
    SignedMeasure q(g);
    q[1] = 0.25;
    q[9] = -0.5;
    EXPECT_NEAR(neg_norm(q, 0), 0.75, 1e-15);
}

TEST(FirstMoment, TracksShiftAndContrast) {
    PeriodicGrid g(64);
    std::vector<double> w(g.n);
    for (int j = 0; j < g.n; ++j) w[j] = 1.0 + 0.8 * std::cos(2.0 * M_PI * g.x(j));
    DensityField base = DensityField::from_weights(g, w);
    double re0, im0;
    first_moment(base, re0, im0);
    double mag0 = std::hypot(re0, im0);

    // shifting by k cells rotates the phase by 2 pi k h and keeps magnitude
    std::vector<double> ws(g.n);
    int k = 7;
    for (int j = 0; j < g.n; ++j) ws[j] = w[(j - k + g.n) % g.n];
    DensityField shifted = DensityField::from_weights(g, ws);
    double re1, im1;
    first_moment(shifted, re1, im1);
    EXPECT_NEAR(std::hypot(re1, im1), mag0, 1e-12);
    double dphase = std::atan2(im1, re1) - std::atan2(im0, re0);
    while (dphase < 0) dphase += 2.0 * M_PI;
    EXPECT_NEAR(dphase, 2.0 * M_PI * k * g.h, 1e-9);

    // mixing with uniform scales magnitude by (1 - w)
    DensityField mixed;
    mixed.grid = g;
    mixed.mass.resize(g.n);
    for (int j = 0; j < g.n; ++j) mixed.mass[j] = 0.75 * base.mass[j] + 0.25 / g.n;
    double re2, im2;
    first_moment(mixed, re2, im2);
    EXPECT_NEAR(std::hypot(re2, im2), 0.75 * mag0, 1e-12);
}

}  // namespace
}  // namespace mmfg
