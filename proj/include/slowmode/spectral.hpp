#pragma once
#include <vector>

#include "msm.hpp"

namespace slowmode {

// Leading eigenstructure of a reversible transition matrix. Eigenvalues are
// sorted descending with lambda_0 = 1; eigenfunctions are pi-orthonormal
// (sum_s pi_s psi_i psi_j = delta_ij). Sign convention: psi_i is flipped so
// its value is >= 0 at the highest-pi state where |psi_i| exceeds 1e-12
// (scanning states in decreasing pi, ties broken by lower state index).
struct SpectralModes {
    std::vector<double> eigenvalues;
    std::vector<double> timescales;               // -1/ln(lambda); +inf at 0, NaN if lambda<=0
    std::vector<std::vector<double>> eigenfunctions;  // [mode][state]
    int k = 0;
};

// Computes top-k modes via the pi-symmetrized operator S = Pi^1/2 P Pi^-1/2.
// Uses a dense symmetric eigendecomposition for n <= dense_threshold states
// and a deflated Lanczos iteration (full reorthogonalization, one eigenpair
// per restart) above it. Throws if the model is not reversible or if the
// iteration budget is exhausted (message carries the residual norm).
SpectralModes leading_modes(const TransitionModel& m, int k);
SpectralModes leading_modes_dense(const TransitionModel& m, int k);
SpectralModes leading_modes_lanczos(const TransitionModel& m, int k,
                                    int max_iter = 10000, double tol = 1e-11,
                                    uint64_t seed = 0x5eed5eedULL);

inline constexpr int kDenseThreshold = 512;

// t_i = -1/ln(lambda_i) for i >= 1; lambda_0 = 1 is excluded from the result.
// Throws if any lambda_i <= 0 (i >= 1) or lambda_0 deviates from 1.
std::vector<double> implied_timescales(const std::vector<double>& eigenvalues);

// Absolute Pearson correlation between a learned per-frame series and an
// oracle eigenfunction evaluated along the trajectory.
double mode_overlap(const std::vector<double>& learned,
                    const std::vector<double>& oracle_mode,
                    const std::vector<uint32_t>& traj);

} // namespace slowmode
