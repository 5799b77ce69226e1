#pragma once

namespace mmfg {

/// How the outer Picard map is initialized.
enum class InitStrategy { ConstantX0, DriftlessWalk, WalkWithDrift };

/// Which terminal state a solve finished in.
enum class SolveStatus { Converged, MaxIterations, NoContraction, TruncationViolated };

struct SolverConfig {
    int substeps = 4;            // PDE substeps per tree macro step
    bool adaptive_cfl = true;    // raise substeps per edge when the drift demands it
    double inner_tol = 1e-8;     // minor/major fixed-point tolerance
    int inner_max_iter = 300;
    double outer_tol = 1e-6;     // coupled map tolerance on sup |X0 change|
    int outer_max_iter = 80;
    double damping = 1.0;        // relaxation weight for the minor u update
    int fixed_inner_iters = 0;   // > 0 pins the inner iteration count
    bool use_truncation = true;
    double trunc_radius = 0.0;   // 0 = calibrate from a pilot run
    InitStrategy init = InitStrategy::DriftlessWalk;
    double init_drift = 0.0;     // used by WalkWithDrift
};

}  // namespace mmfg
