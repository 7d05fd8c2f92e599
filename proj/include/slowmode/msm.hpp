#pragma once
#include <cstdint>
#include <vector>

#include "grid.hpp"
#include "potential.hpp"
#include "rng.hpp"

namespace slowmode {

// Row-stochastic sparse transition matrix with Metropolis-like rates:
// unnormalized weight 1 for the self edge and e^{-(V_j - V_i)} for each
// neighbor edge, normalized per row. Detailed balance holds with
// pi_i proportional to Z_i e^{-2 V_i}, where Z_i is the row weight sum.
struct TransitionModel {
    int n_states = 0;
    int convention = 4;                 // 4- or 8-neighborhood
    std::vector<int> row_ptr;           // CSR offsets, size n_states+1
    std::vector<int> col;
    std::vector<double> prob;
    std::vector<double> cdf;            // per-row running sums of prob
    std::vector<double> row_weight;     // Z_i before normalization
    std::vector<double> pi;             // stationary distribution

    double row_sum(int i) const {
        double s = 0.0;
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += prob[k];
        return s;
    }
    // max_ij |pi_i p_ij - pi_j p_ji| over stored entries
    double detailed_balance_residual() const;
    // max_j |(pi P)_j - pi_j|
    double stationarity_residual() const;
};

TransitionModel build_beltway_model(const PotentialSpec& spec, const PolarGrid& grid,
                                    int convention);
TransitionModel build_torus_model(const PotentialSpec& spec, const TorusGrid& grid);

// Generic builder from explicit nonnegative edge weights (tests, toy chains).
// weights[i] lists (j, w); a self edge must be present in every row.
TransitionModel build_from_weights(const std::vector<std::vector<std::pair<int, double>>>& weights);

std::vector<uint32_t> sample_trajectory(const TransitionModel& m, uint64_t n_steps,
                                        uint64_t seed, uint32_t start);

// Total-variation distance between the empirical state histogram and pi.
double occupation_tv_distance(const TransitionModel& m, const std::vector<uint32_t>& traj);

} // namespace slowmode
