#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slowmode/mlp.hpp"

namespace slowmode {

enum class Objective { Tae, Srv, Mtae, Vde };

Objective objective_from_name(const std::string& s);
std::string objective_name(Objective o);
bool objective_uses_decoder(Objective o);

// Symmetrized second-order statistics of a scalar latent pair batch: mean and
// variance are pooled over {z_t} u {z_{t+lag}}, so mtae == 2 - 2*autocorr
// holds as an exact identity.
struct LatentStats {
    double mean = 0, var = 0, cov = 0, autocorr = 0;
};
LatentStats latent_pair_stats(const double* za, const double* zb, std::size_t n);

// Reusable buffers so the training loop allocates nothing per minibatch.
// One scratch belongs to one network shape; don't share across specs.
struct ObjectiveScratch {
    BatchCache cache_a, cache_b;
    std::vector<double> dy, dza, dzb;
    MlpParams grad_b;
};

// Loss of one gathered pair batch (xa = frames at t, xb = frames at t+lag,
// both batch x in_width row-major). When grad is non-null it is overwritten
// with dLoss/dparams. lambda is only read by the mixture objective.
double objective_batch(Objective obj, const MlpSpec& spec, const MlpParams& p,
                       const double* xa, const double* xb, std::size_t batch,
                       double lambda, MlpParams* grad, ObjectiveScratch& ws);

// Full-data loss over an explicit list of pair start frames, streamed in
// fixed-size chunks so memory stays bounded. Statistics objectives pool their
// mean/variance over the entire pair set, not per chunk.
double objective_full_loss(Objective obj, const MlpSpec& spec, const MlpParams& p,
                           const double* frames, std::size_t n_frames, int dim,
                           const std::uint64_t* pair_start, std::size_t n_pairs,
                           std::size_t lag, double lambda,
                           std::size_t chunk = 65536);

}  // namespace slowmode
