#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace slowmode {

// Two mean-free, mutually independent scalar components with known variances
// and lag-autocorrelations; the reconstruction target for a width-1 linear
// bottleneck over them.
struct LinearTaeProblem {
    double var1 = 1.0, var2 = 1.0;  // component variances
    double a1 = 0.0, a2 = 0.0;      // component autocorrelations at the lag

    void validate() const;
    double total_variance() const { return var1 + var2; }
};

struct LinearTaeSolution {
    double c0 = 0, c1 = 0;   // optimal affine reconstruction of the kept mode
    double b2 = 0;           // argmin mixing weight: 0 keeps mode 1, 1 keeps mode 2
    double loss = 0;         // minimal reconstruction loss
    double loss_mode1 = 0;   // pure-mode losses (b2 = 0 / b2 = 1)
    double loss_mode2 = 0;
};

// Reconstruction loss of the unit-norm mixture z ~ b1 x1 + b2 x2 with
// b1^2 = 1 - b2^2, as a three-branch expression continuous at the endpoints.
double linear_tae_mixed_loss(const LinearTaeProblem& p, double b2);

// Optimal mode selection: the loss is monotone in b2, so the optimum sits at
// an endpoint, picked by comparing var_i * a_i^2. Throws on an exact tie.
LinearTaeSolution linear_tae_closed_form(const LinearTaeProblem& p);

// Loss at n evenly spaced b2 values over [0, 1].
std::vector<double> linear_tae_loss_curve(const LinearTaeProblem& p, int n = 1001);

// Exact best rank-1 linear autoencoder on *empirical* second moments:
// caa/cba are 2x2 (caa symmetric positive definite), cbb_trace = E||x_b||^2.
// Returns the minimal loss and the encoder direction attaining it. This is
// the sampled-data analogue of the closed form, free of the independence
// assumption, used to judge trained linear nets.
struct RankOneOptimum {
    double loss = 0;
    std::array<double, 2> encoder{};  // direction in input space (unnormalized scale-free)
};
RankOneOptimum linear_rank_one_optimum(const std::array<double, 4>& caa,
                                       const std::array<double, 4>& cba,
                                       double cbb_trace);

}  // namespace slowmode
