#pragma once
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rng.hpp"

namespace slowmode {

enum class Act { Linear, Tanh };

// Dense feed-forward architecture. acts[l] is applied after affine layer l
// (widths[l] -> widths[l+1]). latent_index is the number of affine layers
// that make up the encoder; -1 means no encoder/decoder split is declared.
struct MlpSpec {
    std::vector<int> widths;
    std::vector<Act> acts;
    int latent_index = -1;

    int n_layers() const { return static_cast<int>(widths.size()) - 1; }
    int in_width() const { return widths.front(); }
    int out_width() const { return widths.back(); }
    int latent_width() const { return widths[latent_index]; }
    void validate() const;

    // encoder: tanh hidden layers, linear latent output
    static MlpSpec encoder(const std::vector<int>& widths);
    // symmetric autoencoder [in ... latent ... out] from an encoder shape
    static MlpSpec autoencoder(const std::vector<int>& enc_widths);
};

// All weights and biases in one flat 64-bit buffer; layer l's weight is a
// widths[l] x widths[l+1] row-major block (input-major so the output index
// is contiguous), followed by its bias.
struct MlpParams {
    std::vector<double> flat;
    std::vector<size_t> w_off, b_off;

    static MlpParams zeros(const MlpSpec& spec);
    // fan-in-scaled uniform init: W ~ U(+-sqrt(3/fan_in)), biases zero, so
    // layer outputs keep ~unit variance on unit-variance inputs
    static MlpParams init(const MlpSpec& spec, Rng& rng);

    std::span<double> w(int l) { return {flat.data() + w_off[l], b_off[l] - w_off[l]}; }
    std::span<double> b(int l, const MlpSpec& s) {
        return {flat.data() + b_off[l], static_cast<size_t>(s.widths[l + 1])};
    }
    std::span<const double> w(int l) const {
        return {flat.data() + w_off[l], b_off[l] - w_off[l]};
    }
    std::span<const double> b(int l, const MlpSpec& s) const {
        return {flat.data() + b_off[l], static_cast<size_t>(s.widths[l + 1])};
    }
    bool finite() const;
};

// Activations of one forward pass, kept for the matching backward pass.
struct BatchCache {
    const MlpSpec* spec = nullptr;
    size_t batch = 0;
    int layers_run = 0;                       // prefix length that was executed
    std::vector<std::vector<double>> acts;    // acts[l]: batch x widths[l], row-major

    const std::vector<double>& output() const { return acts[layers_run]; }
};

// Runs the first `layers` affine+activation stages (all when layers < 0).
// X is batch x in_width row-major.
void mlp_forward(const MlpSpec& spec, const MlpParams& p, const double* X, size_t batch,
                 BatchCache& cache, int layers = -1);

// Gradients of a scalar batch loss. dY is the loss gradient w.r.t. the output
// of the executed prefix (batch x width). d_latent, when non-null, is an
// additional gradient injected at the latent layer output (batch x latent
// width) — used by mixture objectives whose loss reads the latent directly.
// Throws if the cache does not match spec/params shapes.
void mlp_backward(const MlpSpec& spec, const MlpParams& p, const BatchCache& cache,
                  const double* dY, MlpParams& grad, const double* d_latent = nullptr);

// Encoder-only helper: latent series for a frame range, evaluated in fixed
// chunks to bound memory.
void mlp_encode(const MlpSpec& spec, const MlpParams& p, const double* X, size_t n,
                double* z_out);

std::string act_name(Act a);
Act act_from_name(const std::string& s);

} // namespace slowmode
