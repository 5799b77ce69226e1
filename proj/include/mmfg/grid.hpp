#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfg {

/// Uniform periodic grid on the unit torus. Cell centers x_j = (j + 1/2) h,
/// h = 1/n.
struct PeriodicGrid {
    int n = 0;
    double h = 0.0;

    PeriodicGrid() = default;
    explicit PeriodicGrid(int cells) : n(cells), h(1.0 / cells) {
        if (cells < 4) throw std::invalid_argument("PeriodicGrid: n must be >= 4");
    }

    double x(int j) const { return (j + 0.5) * h; }
    int wrap(int j) const {
        int m = j % n;
        return m < 0 ? m + n : m;
    }
    bool operator==(const PeriodicGrid& o) const { return n == o.n; }
};

/// Periodic grid for the major state box [-half_width, half_width).
struct X0Grid {
    int n = 0;
    double half_width = 0.0;
    double h = 0.0;

    X0Grid() = default;
    X0Grid(int cells, double hw)
        : n(cells), half_width(hw), h(2.0 * hw / cells) {
        if (cells < 4) throw std::invalid_argument("X0Grid: n must be >= 4");
        if (hw <= 0) throw std::invalid_argument("X0Grid: half_width must be > 0");
    }

    double x(int j) const { return -half_width + (j + 0.5) * h; }
    int wrap(int j) const {
        int m = j % n;
        return m < 0 ? m + n : m;
    }
    double length() const { return 2.0 * half_width; }
};

/// Real-valued function sampled at cell centers of a PeriodicGrid.
struct ScalarField {
    PeriodicGrid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const PeriodicGrid& g, double fill = 0.0)
        : grid(g), values(g.n, fill) {}
    ScalarField(const PeriodicGrid& g, std::vector<double> v)
        : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != g.n)
            throw std::invalid_argument("ScalarField: length mismatch");
    }

    double& operator[](int j) { return values[j]; }
    double operator[](int j) const { return values[j]; }
    double at_wrapped(int j) const { return values[grid.wrap(j)]; }
    int size() const { return grid.n; }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    /// Mean over the torus (= h * sum of values).
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.h;
    }
    ScalarField& operator+=(const ScalarField& o) {
        for (int j = 0; j < grid.n; ++j) values[j] += o.values[j];
        return *this;
    }
    ScalarField& operator*=(double a) {
        for (double& v : values) v *= a;
        return *this;
    }
};

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    ScalarField r = a;
    for (int j = 0; j < r.size(); ++j) r[j] -= b[j];
    return r;
}

inline ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    ScalarField r = a;
    for (int j = 0; j < r.size(); ++j) r[j] += b[j];
    return r;
}

inline ScalarField operator*(double a, const ScalarField& f) {
    ScalarField r = f;
    r *= a;
    return r;
}

inline double sup_distance(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (int j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

/// Probability mass per cell. Entries are nonnegative and sum to 1.
struct DensityField {
    PeriodicGrid grid;
    std::vector<double> mass;

    DensityField() = default;

    /// Uniform distribution.
    static DensityField uniform(const PeriodicGrid& g) {
        DensityField d;
        d.grid = g;
        d.mass.assign(g.n, 1.0 / g.n);
        return d;
    }

    /// All mass in one cell.
    static DensityField point_mass(const PeriodicGrid& g, int cell) {
        DensityField d;
        d.grid = g;
        d.mass.assign(g.n, 0.0);
        d.mass[g.wrap(cell)] = 1.0;
        return d;
    }

    /// Normalizes nonnegative weights into a density.
    static DensityField from_weights(const PeriodicGrid& g, const std::vector<double>& w) {
        if (static_cast<int>(w.size()) != g.n)
            throw std::invalid_argument("DensityField: length mismatch");
        double s = 0.0;
        for (double v : w) {
            if (v < 0) throw std::invalid_argument("DensityField: negative weight");
            s += v;
        }
        if (s <= 0) throw std::invalid_argument("DensityField: zero total weight");
        DensityField d;
        d.grid = g;
        d.mass.resize(g.n);
        for (int j = 0; j < g.n; ++j) d.mass[j] = w[j] / s;
        return d;
    }

    /// Adopts raw masses, enforcing the type invariants.
    static DensityField from_masses(const PeriodicGrid& g, std::vector<double> m) {
        DensityField d;
        d.grid = g;
        d.mass = std::move(m);
        d.validate();
        return d;
    }

    double operator[](int j) const { return mass[j]; }
    int size() const { return grid.n; }

    double total_mass() const {
        double s = 0.0;
        for (double v : mass) s += v;
        return s;
    }
    double min_mass() const {
        double m = mass.empty() ? 0.0 : mass[0];
        for (double v : mass) m = std::min(m, v);
        return m;
    }

    /// Pairing (phi, mu) = sum_j phi_j mu_j.
    double pair(const ScalarField& phi) const {
        double s = 0.0;
        for (int j = 0; j < grid.n; ++j) s += phi[j] * mass[j];
        return s;
    }

    void validate() const {
        if (static_cast<int>(mass.size()) != grid.n)
            throw std::invalid_argument("DensityField: length mismatch");
        double s = 0.0;
        for (double v : mass) {
            if (!std::isfinite(v)) throw std::domain_error("DensityField: non-finite mass");
            if (v < -1e-12)
                throw std::domain_error("DensityField: negative mass " + std::to_string(v));
            s += v;
        }
        if (std::abs(s - 1.0) > 2e-10)
            throw std::domain_error("DensityField: total mass " + std::to_string(s));
    }
};

/// Signed cell masses (difference of densities, linearization directions).
struct SignedMeasure {
    PeriodicGrid grid;
    std::vector<double> mass;

    SignedMeasure() = default;
    explicit SignedMeasure(const PeriodicGrid& g, double fill = 0.0)
        : grid(g), mass(g.n, fill) {}

    static SignedMeasure difference(const DensityField& a, const DensityField& b) {
        SignedMeasure q(a.grid);
        for (int j = 0; j < a.size(); ++j) q.mass[j] = a.mass[j] - b.mass[j];
        return q;
    }

    double& operator[](int j) { return mass[j]; }
    double operator[](int j) const { return mass[j]; }
    int size() const { return grid.n; }

    double total_mass() const {
        double s = 0.0;
        for (double v : mass) s += v;
        return s;
    }
    double pair(const ScalarField& phi) const {
        double s = 0.0;
        for (int j = 0; j < grid.n; ++j) s += phi[j] * mass[j];
        return s;
    }
    SignedMeasure& operator*=(double a) {
        for (double& v : mass) v *= a;
        return *this;
    }
};

inline double sup_distance(const SignedMeasure& a, const SignedMeasure& b) {
    double m = 0.0;
    for (int j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

}  // namespace mmfg
