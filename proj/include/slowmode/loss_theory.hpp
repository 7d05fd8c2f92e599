#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slowmode/grid.hpp"

namespace slowmode {

// Frame-wise assignment to a finite label set. Labels are dense: every value
// in [0, n_bins) occurs at least once (empty bins are dropped and the rest
// renumbered at construction).
struct DiscretizedEncoding {
    std::vector<std::uint32_t> labels;  // one per frame
    std::uint32_t n_bins = 0;
    std::string tag;

    void validate() const;
};

DiscretizedEncoding encode_by_state(const std::vector<std::uint32_t>& traj);
DiscretizedEncoding encode_by_radial_bin(const std::vector<std::uint32_t>& traj,
                                         const PolarGrid& grid);
DiscretizedEncoding encode_by_angular_bin(const std::vector<std::uint32_t>& traj,
                                          const PolarGrid& grid);
// Equal-occupancy bins of a scalar series (rank order, so any strictly
// monotone transform of z yields the identical encoding).
DiscretizedEncoding encode_by_quantile(const double* z, std::size_t n, int n_bins);

// Per-bin conditional means of the lagged features: row z holds the mean of
// x_{t+lag} over frames t < n-lag with label z, with that occupancy count.
struct ConditionalMeanTable {
    std::uint32_t n_bins = 0;
    int dim = 0;
    std::size_t lag = 0;
    std::vector<double> mean;          // n_bins x dim
    std::vector<std::uint64_t> count;  // head-frame occupancy

    const double* row(std::uint32_t z) const { return mean.data() + std::size_t(z) * dim; }
};

ConditionalMeanTable conditional_mean_lagged(const double* X, std::size_t n_frames,
                                             int dim, const DiscretizedEncoding& enc,
                                             std::size_t lag);

// Occupancy-weighted mean of ||bin mean||^2 over all frames.
double variance_explained(const double* X, std::size_t n_frames, int dim,
                          const DiscretizedEncoding& enc);

// sqrt(E_z[||cond.mean at lag||^2] / variance explained); throws when the
// variance explained is below 1e-10 (undefined direction).
double generalized_autocorrelation(const double* X, std::size_t n_frames, int dim,
                                   const DiscretizedEncoding& enc, std::size_t lag);

// Everything the bound decomposition produces in one sweep. sigma2 is taken
// over the pair tails and the variance explained over the tail frames, which
// makes bound == sigma2 - E_z[||cond.mean||^2] == exact-tabular-decoder loss
// an identity up to float roundoff, and variance_explained <= sigma2 exact.
struct EncodingEvaluation {
    std::size_t lag = 0;
    double sigma2 = 0;             // mean ||x_{t+lag}||^2 over the pair set
    double variance_explained = 0; // tail-frame bin means
    double g = 0;                  // generalized autocorrelation (0 when undefined)
    bool g_defined = false;
    double propagation = 0;        // variance_explained * (1 - g^2)
    double capacity = 0;           // sigma2 - variance_explained
    double bound = 0;              // propagation + capacity
};

EncodingEvaluation tae_loss_bound(const double* X, std::size_t n_frames, int dim,
                                  const DiscretizedEncoding& enc, std::size_t lag);

// Direct mean of ||x_{t+lag} - cond.mean(z_t)||^2 (the tabular decoder).
double empirical_optimal_decoder_loss(const double* X, std::size_t n_frames, int dim,
                                      const DiscretizedEncoding& enc, std::size_t lag);

// Minimal achievable reconstruction loss at this lag: the bound under the
// finest (one bin per visited state) encoding.
double optimal_encoding_loss(const double* X, std::size_t n_frames, int dim,
                             const std::vector<std::uint32_t>& traj, std::size_t lag);

}  // namespace slowmode
