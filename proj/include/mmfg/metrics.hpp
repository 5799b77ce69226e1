#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmfg/grid.hpp"

namespace mmfg {

namespace detail {

/// min over c of h * sum_j |D_j - c| where D is the cumulative of the signed
/// masses. The optimum is attained at the median of the D values.
inline double cdf_transport_cost(const std::vector<double>& signed_mass, double h) {
    const int n = static_cast<int>(signed_mass.size());
    std::vector<double> cum(n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        acc += signed_mass[j];
        cum[j] = acc;
    }
    std::vector<double> sorted = cum;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    double c = sorted[n / 2];
    double s = 0.0;
    for (double v : cum) s += std::abs(v - c);
    return s * h;
}

}  // namespace detail

/// Exact 1-D periodic Wasserstein-1 distance via the CDF formula minimized
/// over the free constant.
inline double wasserstein1(const DensityField& mu, const DensityField& nu) {
    if (!(mu.grid == nu.grid)) throw std::invalid_argument("wasserstein1: grid mismatch");
    if (std::abs(mu.total_mass() - nu.total_mass()) > 1e-10)
        throw std::domain_error("wasserstein1: mass mismatch");
    std::vector<double> diff(mu.size());
    for (int j = 0; j < mu.size(); ++j) diff[j] = mu.mass[j] - nu.mass[j];
    return detail::cdf_transport_cost(diff, mu.grid.h);
}

/// Negative-order dual norm of a signed cell measure.
///  k = 0: total variation, sum |q_j|.
///  k = 1: W1-type dual norm; requires zero total mass.
inline double neg_norm(const SignedMeasure& q, int k) {
    if (k == 0) {
        double s = 0.0;
        for (double v : q.mass) s += std::abs(v);
        return s;
    }
    if (k == 1) {
        if (std::abs(q.total_mass()) > 1e-10)
            throw std::domain_error("neg_norm(k=1): measure must have zero total mass");
        return detail::cdf_transport_cost(q.mass, q.grid.h);
    }
    throw std::invalid_argument("neg_norm: k must be 0 or 1");
}

/// Mean position of a density on the torus (circular mean in [0,1)).
inline double circular_mean(const DensityField& mu) {
    double c = 0.0, s = 0.0;
    for (int j = 0; j < mu.size(); ++j) {
        double a = 2.0 * M_PI * mu.grid.x(j);
        c += mu.mass[j] * std::cos(a);
        s += mu.mass[j] * std::sin(a);
    }
    double phase = std::atan2(s, c) / (2.0 * M_PI);
    return phase < 0 ? phase + 1.0 : phase;
}

/// First Fourier moment sum_j mu_j exp(2 pi i x_j); magnitude is a
/// shift-invariant contrast measure, phase tracks translation.
inline void first_moment(const DensityField& mu, double& re, double& im) {
    re = 0.0;
    im = 0.0;
    for (int j = 0; j < mu.size(); ++j) {
        double a = 2.0 * M_PI * mu.grid.x(j);
        re += mu.mass[j] * std::cos(a);
        im += mu.mass[j] * std::sin(a);
    }
}

}  // namespace mmfg
