#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmfg/grid.hpp"
#include "mmfg/parallel.hpp"

namespace mmfg {

using NodeId = std::int64_t;

/// Non-recombining binary scenario tree for the common noise on [t0, t0+K*dt].
/// Branch increments are +-sqrt(dt) with probability 1/2. Node (level k,
/// path 0..2^k-1) has id (2^k - 1) + path; child b of a node appends bit b
/// (b=1 is the up branch).
struct NoiseTree {
    int depth = 0;        // K macro steps
    double dt = 0.0;      // T / K
    double t0 = 0.0;      // absolute time of the root

    NoiseTree() = default;
    NoiseTree(int K, double horizon, double start_time = 0.0)
        : depth(K), dt(horizon / K), t0(start_time) {
        if (K < 1) throw std::invalid_argument("NoiseTree: K must be >= 1");
        if (horizon <= 0) throw std::invalid_argument("NoiseTree: horizon must be > 0");
    }

    NodeId node_count() const { return (NodeId(1) << (depth + 1)) - 1; }
    NodeId level_offset(int level) const { return (NodeId(1) << level) - 1; }
    NodeId level_count(int level) const { return NodeId(1) << level; }
    NodeId id(int level, NodeId path) const { return level_offset(level) + path; }
    NodeId child(NodeId node, int b) const { return 2 * node + 1 + b; }
    NodeId parent(NodeId node) const { return (node - 1) / 2; }
    bool is_leaf(NodeId node) const { return node >= level_offset(depth); }

    int level_of(NodeId node) const {
        int k = 0;
        while (node >= level_offset(k + 1)) ++k;
        return k;
    }
    NodeId path_of(NodeId node) const { return node - level_offset(level_of(node)); }

    double time_of_level(int level) const { return t0 + level * dt; }
    double increment() const { return std::sqrt(dt); }

    /// Brownian value at a node: sum of +-sqrt(dt) along its path bits.
    double brownian_at(NodeId node) const {
        int level = level_of(node);
        NodeId path = node - level_offset(level);
        double b = 0.0;
        for (int k = level - 1; k >= 0; --k) {
            int bit = static_cast<int>((path >> k) & 1);
            b += (2 * bit - 1) * increment();
        }
        return b;
    }
};

/// An adapted process on the tree: one payload per node. Adaptedness is
/// structural (a node's value can depend only on its path). The tree datum
/// is tiny and stored by value, so a process never outlives its indexing.
template <typename T>
struct TreeProcess {
    NoiseTree tree;
    std::vector<T> values;

    TreeProcess() = default;
    explicit TreeProcess(const NoiseTree& t) : tree(t), values(t.node_count()) {}
    TreeProcess(const NoiseTree& t, const T& fill)
        : tree(t), values(t.node_count(), fill) {}

    T& operator[](NodeId id) { return values[id]; }
    const T& operator[](NodeId id) const { return values[id]; }
    T& at(int level, NodeId path) { return values[tree.id(level, path)]; }
    const T& at(int level, NodeId path) const { return values[tree.id(level, path)]; }
};

/// Exact conditional expectation one step ahead: mean of the two children.
inline double cond_expect(const TreeProcess<double>& p, NodeId node) {
    const NoiseTree& t = p.tree;
    if (t.is_leaf(node)) throw std::invalid_argument("cond_expect: leaf node");
    return 0.5 * (p[t.child(node, 0)] + p[t.child(node, 1)]);
}

struct MartingaleRepr {
    double Z;
    double residual;
};

/// Discrete martingale representation across one step:
///   Y_child = E[Y | node] + sigma0 * Z * dB  with dB = +-sqrt(dt).
/// On a binary tree the representation is exact; the residual is the
/// (identically zero) defect Y_up + Y_down - 2 E[Y | node].
inline MartingaleRepr martingale_repr(const TreeProcess<double>& Y, NodeId node,
                                      double sigma0, double dt) {
    const NoiseTree& t = Y.tree;
    if (t.is_leaf(node)) throw std::invalid_argument("martingale_repr: leaf node");
    double up = Y[t.child(node, 1)], down = Y[t.child(node, 0)];
    double Z = (up - down) / (2.0 * sigma0 * std::sqrt(dt));
    double residual = up + down - 2.0 * cond_expect(Y, node);
    return {Z, residual};
}

/// Euler-Maruyama on the tree: X_child = X_node + drift_node*dt + sigma0*dB.
inline TreeProcess<double> simulate_major_forward(double x0, const TreeProcess<double>& drift,
                                                  double sigma0, const NoiseTree& tree) {
    TreeProcess<double> X(tree, 0.0);
    X[0] = x0;
    const double inc = tree.increment();
    for (int level = 0; level < tree.depth; ++level) {
        NodeId off = tree.level_offset(level);
        NodeId cnt = tree.level_count(level);
        for (NodeId p = 0; p < cnt; ++p) {
            NodeId id = off + p;
            double base = X[id] + drift[id] * tree.dt;
            X[tree.child(id, 0)] = base - sigma0 * inc;
            X[tree.child(id, 1)] = base + sigma0 * inc;
        }
    }
    return X;
}

/// Forward simulation with state-dependent drift b(node, x).
inline TreeProcess<double> simulate_forward_with(
    double x0, const std::function<double(NodeId, double)>& drift_fn, double sigma0,
    const NoiseTree& tree) {
    TreeProcess<double> X(tree, 0.0);
    X[0] = x0;
    const double inc = tree.increment();
    for (int level = 0; level < tree.depth; ++level) {
        NodeId off = tree.level_offset(level);
        NodeId cnt = tree.level_count(level);
        for (NodeId p = 0; p < cnt; ++p) {
            NodeId id = off + p;
            double base = X[id] + drift_fn(id, X[id]) * tree.dt;
            X[tree.child(id, 0)] = base - sigma0 * inc;
            X[tree.child(id, 1)] = base + sigma0 * inc;
        }
    }
    return X;
}

/// Backward accumulation of a conditional tail sum:
///   A(node) = local(node) + E[A(children)], A(leaf) = local(leaf).
/// Returns the tree of conditional sums.
inline TreeProcess<double> conditional_tail_sum(
    const NoiseTree& tree, const std::function<double(NodeId)>& local) {
    TreeProcess<double> A(tree, 0.0);
    for (int level = tree.depth; level >= 0; --level) {
        NodeId off = tree.level_offset(level);
        NodeId cnt = tree.level_count(level);
        for (NodeId p = 0; p < cnt; ++p) {
            NodeId id = off + p;
            double v = local(id);
            if (!tree.is_leaf(id))
                v += 0.5 * (A[tree.child(id, 0)] + A[tree.child(id, 1)]);
            A[id] = v;
        }
    }
    return A;
}

/// Probability-weighted average over the nodes of one level (all paths are
/// equally likely).
inline double level_average(const TreeProcess<double>& p, int level) {
    const NoiseTree& t = p.tree;
    NodeId off = t.level_offset(level);
    NodeId cnt = t.level_count(level);
    double s = 0.0;
    for (NodeId i = 0; i < cnt; ++i) s += p[off + i];
    return s / static_cast<double>(cnt);
}

}  // namespace mmfg
