#include "slowmode/loss_theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "slowmode/kahan.hpp"

namespace slowmode {

void DiscretizedEncoding::validate() const {
    if (labels.empty()) throw std::invalid_argument("encoding has no frames");
    if (n_bins == 0) throw std::invalid_argument("encoding has no bins");
    std::vector<char> seen(n_bins, 0);
    for (std::uint32_t z : labels) {
        if (z >= n_bins) throw std::invalid_argument("encoding label out of range");
        seen[z] = 1;
    }
    for (std::uint32_t z = 0; z < n_bins; ++z)
        if (!seen[z]) throw std::invalid_argument("encoding has an unused bin");
}

namespace {

// dense-renumber arbitrary labels so every bin in [0, n_bins) is used
DiscretizedEncoding compact(std::vector<std::uint32_t> raw, std::uint32_t upper,
                            std::string tag) {
    std::vector<std::uint32_t> remap(upper, UINT32_MAX);
    std::uint32_t next = 0;
    DiscretizedEncoding enc;
    enc.labels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::uint32_t& m = remap[raw[i]];
        if (m == UINT32_MAX) m = next++;
        enc.labels[i] = m;
    }
    enc.n_bins = next;
    enc.tag = std::move(tag);
    return enc;
}

}  // namespace

DiscretizedEncoding encode_by_state(const std::vector<std::uint32_t>& traj) {
    if (traj.empty()) throw std::invalid_argument("empty trajectory");
    const std::uint32_t upper = *std::max_element(traj.begin(), traj.end()) + 1;
    return compact(traj, upper, "by-state");
}

DiscretizedEncoding encode_by_radial_bin(const std::vector<std::uint32_t>& traj,
                                         const PolarGrid& grid) {
    std::vector<std::uint32_t> raw(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj[i] >= static_cast<std::uint32_t>(grid.n_states()))
            throw std::invalid_argument("state outside grid");
        raw[i] = static_cast<std::uint32_t>(grid.radial_of(traj[i]));
    }
    return compact(std::move(raw), grid.n_r, "by-r-bin");
}

DiscretizedEncoding encode_by_angular_bin(const std::vector<std::uint32_t>& traj,
                                          const PolarGrid& grid) {
    std::vector<std::uint32_t> raw(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj[i] >= static_cast<std::uint32_t>(grid.n_states()))
            throw std::invalid_argument("state outside grid");
        raw[i] = static_cast<std::uint32_t>(grid.angular_of(traj[i]));
    }
    return compact(std::move(raw), grid.n_theta, "by-theta-bin");
}

DiscretizedEncoding encode_by_quantile(const double* z, std::size_t n, int n_bins) {
    if (n == 0) throw std::invalid_argument("empty series");
    if (n_bins < 1 || static_cast<std::size_t>(n_bins) > n)
        throw std::invalid_argument("bin count must be in [1, n]");
    std::vector<std::uint64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint64_t a, std::uint64_t b) { return z[a] < z[b]; });
    std::vector<std::uint32_t> raw(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        // rank -> bin so bin sizes differ by at most one
        const std::uint64_t bin =
            (static_cast<std::uint64_t>(rank) * static_cast<std::uint64_t>(n_bins)) / n;
        raw[order[rank]] = static_cast<std::uint32_t>(bin);
    }
    return compact(std::move(raw), static_cast<std::uint32_t>(n_bins),
                   "by-model-output-quantile");
}

namespace {

// per-bin Kahan accumulation of lagged features conditioned on head labels;
// shift selects what is averaged: x_{t+lag} over heads t in [0, n-lag)
struct BinAccum {
    std::vector<Kahan> sum;  // n_bins x dim
    std::vector<std::uint64_t> count;

    BinAccum(std::uint32_t n_bins, int dim)
        : sum(std::size_t(n_bins) * dim), count(n_bins, 0) {}
};

ConditionalMeanTable finish(BinAccum&& acc, std::uint32_t n_bins, int dim,
                            std::size_t lag) {
    ConditionalMeanTable tab;
    tab.n_bins = n_bins;
    tab.dim = dim;
    tab.lag = lag;
    tab.count = std::move(acc.count);
    tab.mean.assign(std::size_t(n_bins) * dim, 0.0);
    for (std::uint32_t z = 0; z < n_bins; ++z) {
        if (tab.count[z] == 0) continue;  // bin occupied only in the tail window
        const double inv = 1.0 / static_cast<double>(tab.count[z]);
        for (int k = 0; k < dim; ++k)
            tab.mean[std::size_t(z) * dim + k] =
                acc.sum[std::size_t(z) * dim + k].value() * inv;
    }
    return tab;
}

// occupancy-weighted mean of ||row||^2 of a table built on `total` frames
double weighted_mean_sq(const ConditionalMeanTable& tab, std::size_t total) {
    Kahan s;
    for (std::uint32_t z = 0; z < tab.n_bins; ++z) {
        double nrm2 = 0;
        for (int k = 0; k < tab.dim; ++k) {
            const double v = tab.mean[std::size_t(z) * tab.dim + k];
            nrm2 += v * v;
        }
        s.add(static_cast<double>(tab.count[z]) * nrm2);
    }
    return s.value() / static_cast<double>(total);
}

// bin means of x_s over s in [lo, n), labels taken at s itself
ConditionalMeanTable window_means(const double* X, std::size_t n, int dim,
                                  const DiscretizedEncoding& enc, std::size_t lo) {
    BinAccum acc(enc.n_bins, dim);
    for (std::size_t s = lo; s < n; ++s) {
        const std::uint32_t z = enc.labels[s];
        acc.count[z] += 1;
        for (int k = 0; k < dim; ++k) acc.sum[std::size_t(z) * dim + k].add(X[s * dim + k]);
    }
    return finish(std::move(acc), enc.n_bins, dim, 0);
}

void check_inputs(std::size_t n_frames, const DiscretizedEncoding& enc,
                  std::size_t lag) {
    if (enc.labels.size() != n_frames)
        throw std::invalid_argument("encoding/feature frame count mismatch");
    if (lag >= n_frames) throw std::invalid_argument("lag must be below the frame count");
}

}  // namespace

ConditionalMeanTable conditional_mean_lagged(const double* X, std::size_t n_frames,
                                             int dim, const DiscretizedEncoding& enc,
                                             std::size_t lag) {
    check_inputs(n_frames, enc, lag);
    const std::size_t m = n_frames - lag;
    BinAccum acc(enc.n_bins, dim);
    for (std::size_t t = 0; t < m; ++t) {
        const std::uint32_t z = enc.labels[t];
        acc.count[z] += 1;
        const double* x = X + (t + lag) * dim;
        for (int k = 0; k < dim; ++k) acc.sum[std::size_t(z) * dim + k].add(x[k]);
    }
    return finish(std::move(acc), enc.n_bins, dim, lag);
}

double variance_explained(const double* X, std::size_t n_frames, int dim,
                          const DiscretizedEncoding& enc) {
    check_inputs(n_frames, enc, 0);
    return weighted_mean_sq(window_means(X, n_frames, dim, enc, 0), n_frames);
}

double generalized_autocorrelation(const double* X, std::size_t n_frames, int dim,
                                   const DiscretizedEncoding& enc, std::size_t lag) {
    const EncodingEvaluation ev = tae_loss_bound(X, n_frames, dim, enc, lag);
    if (!ev.g_defined)
        throw std::runtime_error(
            "generalized autocorrelation undefined: variance explained below 1e-10");
    return ev.g;
}

EncodingEvaluation tae_loss_bound(const double* X, std::size_t n_frames, int dim,
                                  const DiscretizedEncoding& enc, std::size_t lag) {
    check_inputs(n_frames, enc, lag);
    const std::size_t m = n_frames - lag;

    EncodingEvaluation ev;
    ev.lag = lag;

    Kahan s2;
    for (std::size_t t = 0; t < m; ++t) {
        const double* x = X + (t + lag) * dim;
        double nrm2 = 0;
        for (int k = 0; k < dim; ++k) nrm2 += x[k] * x[k];
        s2.add(nrm2);
    }
    ev.sigma2 = s2.value() / static_cast<double>(m);

    const ConditionalMeanTable dt = conditional_mean_lagged(X, n_frames, dim, enc, lag);
    const double num = weighted_mean_sq(dt, m);  // E_z[||cond.mean||^2]

    // tail-frame variance explained: same frame window the means average
    // over, so Jensen gives variance_explained <= sigma2 without slack
    ev.variance_explained =
        weighted_mean_sq(window_means(X, n_frames, dim, enc, lag), m);

    if (ev.variance_explained > 1e-10) {
        ev.g = std::sqrt(num / ev.variance_explained);
        ev.g_defined = true;
        ev.propagation = ev.variance_explained * (1.0 - ev.g * ev.g);
    } else {
        ev.g = 0.0;
        ev.g_defined = false;
        ev.propagation = ev.variance_explained - num;
    }
    ev.capacity = ev.sigma2 - ev.variance_explained;
    ev.bound = ev.propagation + ev.capacity;
    return ev;
}

double empirical_optimal_decoder_loss(const double* X, std::size_t n_frames, int dim,
                                      const DiscretizedEncoding& enc, std::size_t lag) {
    check_inputs(n_frames, enc, lag);
    const std::size_t m = n_frames - lag;
    const ConditionalMeanTable dt = conditional_mean_lagged(X, n_frames, dim, enc, lag);
    Kahan s;
    for (std::size_t t = 0; t < m; ++t) {
        const double* x = X + (t + lag) * dim;
        const double* d = dt.row(enc.labels[t]);
        double nrm2 = 0;
        for (int k = 0; k < dim; ++k) {
            const double r = x[k] - d[k];
            nrm2 += r * r;
        }
        s.add(nrm2);
    }
    return s.value() / static_cast<double>(m);
}

double optimal_encoding_loss(const double* X, std::size_t n_frames, int dim,
                             const std::vector<std::uint32_t>& traj, std::size_t lag) {
    if (traj.size() != n_frames)
        throw std::invalid_argument("trajectory/feature frame count mismatch");
    const DiscretizedEncoding enc = encode_by_state(traj);
    const EncodingEvaluation ev = tae_loss_bound(X, n_frames, dim, enc, lag);
    return ev.bound;
}

}  // namespace slowmode
