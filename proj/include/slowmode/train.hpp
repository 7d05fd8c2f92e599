#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "slowmode/mlp.hpp"
#include "slowmode/objectives.hpp"

namespace slowmode {

struct TrainingConfig {
    std::size_t lag = 3000;      // pair offset, in trajectory steps
    std::size_t stride = 10;     // pair-start subsampling
    std::size_t batch = 4096;
    int max_epochs = 200;
    double lr = 1e-3;            // initial Adam rate
    std::uint64_t seed = 7;
    double val_fraction = 0.1;
    int patience = 20;           // early-stop epochs without improvement
    bool deterministic = true;
    double lambda = 0.5;         // mixture weight, read by vde only

    // plateau schedule: multiply the rate by lr_decay after decay_patience
    // epochs without validation improvement
    double lr_decay = 0.3;
    int decay_patience = 6;

    void validate(Objective obj) const;
};

struct TrainingRun {
    Objective objective = Objective::Tae;
    MlpSpec spec;
    TrainingConfig config;
    MlpParams final_params;
    MlpParams best_params;
    std::vector<double> train_history;  // mean minibatch loss per epoch
    std::vector<double> val_history;    // full validation loss per epoch
    double best_val = 0;
    int best_epoch = -1;
};

// Non-finite loss or gradient mid-training; carries the last finite state.
struct TrainingDivergence : std::runtime_error {
    TrainingRun state;
    TrainingDivergence(const std::string& msg, TrainingRun s)
        : std::runtime_error(msg), state(std::move(s)) {}
};

// Minibatch Adam with seeded shuffled epochs, a seeded random validation
// subset of the pairs, plateau learning-rate decay, and early stopping.
// frames is n_frames x dim row-major; pairs are (t, t+lag) with t on the
// stride grid. Returns best-validation parameters alongside the final ones.
TrainingRun train(Objective obj, const MlpSpec& spec, const double* frames,
                  std::size_t n_frames, int dim, const TrainingConfig& cfg);

}  // namespace slowmode
