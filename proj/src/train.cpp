#include "slowmode/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "slowmode/kahan.hpp"
#include "slowmode/optimizer.hpp"
#include "slowmode/rng.hpp"

namespace slowmode {

void TrainingConfig::validate(Objective obj) const {
    if (lag < 1) throw std::invalid_argument("training lag must be >= 1");
    if (stride < 1) throw std::invalid_argument("pair stride must be >= 1");
    const std::size_t min_batch = obj == Objective::Tae ? 2 : 1024;
    if (batch < min_batch)
        throw std::invalid_argument("batch too small: statistics objectives need >= 1024");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
    if (!(val_fraction > 0 && val_fraction < 1))
        throw std::invalid_argument("validation fraction must be in (0,1)");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (!(lambda >= 0 && lambda <= 1))
        throw std::invalid_argument("mixture weight must be in [0,1]");
    if (!(lr_decay > 0 && lr_decay <= 1))
        throw std::invalid_argument("lr decay factor must be in (0,1]");
    if (decay_patience < 1) throw std::invalid_argument("decay patience must be >= 1");
}

namespace {

// Fisher-Yates with Lemire-style bounded draws; deterministic given the rng.
void shuffle_indices(std::vector<std::uint64_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::uint64_t j = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(rng.next_u64()) * i) >> 64);
        std::swap(v[i - 1], v[j]);
    }
}

void gather(const double* frames, std::size_t d, const std::uint64_t* starts,
            std::size_t n, std::size_t lag, std::vector<double>& xa,
            std::vector<double>& xb) {
    xa.resize(n * d);
    xb.resize(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(&xa[i * d], frames + starts[i] * d, sizeof(double) * d);
        std::memcpy(&xb[i * d], frames + (starts[i] + lag) * d, sizeof(double) * d);
    }
}

}  // namespace

TrainingRun train(Objective obj, const MlpSpec& spec, const double* frames,
                  std::size_t n_frames, int dim, const TrainingConfig& cfg) {
    cfg.validate(obj);
    spec.validate();
    if (dim != spec.in_width()) throw std::invalid_argument("train: feature width mismatch");
    if (n_frames < cfg.lag + 2) throw std::invalid_argument("train: trajectory shorter than lag");

    const std::size_t n_pairs = (n_frames - cfg.lag - 1) / cfg.stride + 1;
    std::vector<std::uint64_t> starts(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) starts[i] = i * cfg.stride;

    // one seeded stream drives init, the validation split, and epoch order
    Rng rng(cfg.seed);

    TrainingRun run;
    run.objective = obj;
    run.spec = spec;
    run.config = cfg;
    run.final_params = MlpParams::init(spec, rng);

    shuffle_indices(starts, rng);
    std::size_t n_val = static_cast<std::size_t>(
        static_cast<double>(n_pairs) * cfg.val_fraction);
    n_val = std::max<std::size_t>(n_val, 1);
    if (n_pairs < n_val + cfg.batch)
        throw std::invalid_argument("train: too few pairs for one batch plus validation");
    std::vector<std::uint64_t> val_starts(starts.begin(), starts.begin() + n_val);
    std::vector<std::uint64_t> train_starts(starts.begin() + n_val, starts.end());
    // full-loss streaming walks pairs in index order; keep that order stable
    std::sort(val_starts.begin(), val_starts.end());

    MlpParams& params = run.final_params;
    run.best_params = params;
    run.best_val = std::numeric_limits<double>::infinity();

    OptimizerState opt = OptimizerState::adam(params.flat.size(), cfg.lr);
    ObjectiveScratch ws;
    MlpParams grad = MlpParams::zeros(spec);
    std::vector<double> xa, xb;

    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t n_batches = train_starts.size() / cfg.batch;
    double lr_scale = 1.0;
    double patience_ref = std::numeric_limits<double>::infinity();
    int since_improve = 0, since_decay = 0;
    constexpr double kImprove = 1e-6;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_indices(train_starts, rng);
        Kahan epoch_loss;
        for (std::size_t b = 0; b < n_batches; ++b) {
            gather(frames, d, train_starts.data() + b * cfg.batch, cfg.batch, cfg.lag,
                   xa, xb);
            double loss;
            try {
                loss = objective_batch(obj, spec, params, xa.data(), xb.data(),
                                       cfg.batch, cfg.lambda, &grad, ws);
            } catch (const std::runtime_error& e) {
                throw TrainingDivergence(e.what(), std::move(run));
            }
            if (!std::isfinite(loss))
                throw TrainingDivergence("training loss became non-finite",
                                         std::move(run));
            try {
                optimizer_step(opt, params, grad, lr_scale);
            } catch (const std::runtime_error& e) {
                throw TrainingDivergence(e.what(), std::move(run));
            }
            epoch_loss.add(loss);
        }
        run.train_history.push_back(epoch_loss.value() /
                                    static_cast<double>(n_batches));

        double val;
        try {
            val = objective_full_loss(obj, spec, params, frames, n_frames, dim,
                                      val_starts.data(), val_starts.size(), cfg.lag,
                                      cfg.lambda);
        } catch (const std::runtime_error& e) {
            throw TrainingDivergence(e.what(), std::move(run));
        }
        if (!std::isfinite(val))
            throw TrainingDivergence("validation loss became non-finite",
                                     std::move(run));
        run.val_history.push_back(val);

        // best-so-far is the strict running minimum; the patience counters
        // only reset on improvements that clear a small threshold, so noise
        // at the 1e-6 level cannot stall early stopping forever
        if (val < run.best_val) {
            run.best_val = val;
            run.best_epoch = epoch;
            run.best_params = params;
        }
        if (val < patience_ref - kImprove) {
            patience_ref = val;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        ++since_decay;
        if (since_improve >= cfg.patience) break;
        if (since_improve >= cfg.decay_patience && since_decay >= cfg.decay_patience) {
            lr_scale *= cfg.lr_decay;
            since_decay = 0;
        }
    }
    return run;
}

}  // namespace slowmode
