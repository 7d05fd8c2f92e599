#include "slowmode/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "slowmode/parallel.hpp"

namespace slowmode {

void MlpSpec::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("need at least 2 layers");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
    if (acts.size() != widths.size() - 1)
        throw std::invalid_argument("need one activation per affine layer");
    if (latent_index != -1 && (latent_index <= 0 || latent_index >= n_layers()))
        throw std::invalid_argument("latent index must be strictly interior");
}

MlpSpec MlpSpec::encoder(const std::vector<int>& w) {
    MlpSpec s;
    s.widths = w;
    s.acts.assign(w.size() - 1, Act::Tanh);
    s.acts.back() = Act::Linear;
    // used standalone: the latent is simply the network output, no split
    s.latent_index = -1;
    s.validate();
    return s;
}

MlpSpec MlpSpec::autoencoder(const std::vector<int>& enc) {
    MlpSpec s;
    s.widths = enc;
    for (size_t i = enc.size() - 1; i-- > 0;) s.widths.push_back(enc[i]);
    s.acts.assign(s.widths.size() - 1, Act::Tanh);
    const int L = static_cast<int>(enc.size()) - 1;  // encoder affine layers
    s.acts[L - 1] = Act::Linear;                     // latent output
    s.acts.back() = Act::Linear;                     // reconstruction output
    s.latent_index = L;
    s.validate();
    return s;
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
    spec.validate();
    MlpParams p;
    const int L = spec.n_layers();
    p.w_off.resize(L);
    p.b_off.resize(L);
    size_t off = 0;
    for (int l = 0; l < L; ++l) {
        p.w_off[l] = off;
        off += static_cast<size_t>(spec.widths[l]) * spec.widths[l + 1];
        p.b_off[l] = off;
        off += spec.widths[l + 1];
    }
    p.flat.assign(off, 0.0);
    return p;
}

MlpParams MlpParams::init(const MlpSpec& spec, Rng& rng) {
    MlpParams p = zeros(spec);
    for (int l = 0; l < spec.n_layers(); ++l) {
        const double lim = std::sqrt(3.0 / spec.widths[l]);
        for (double& v : p.w(l)) v = rng.uniform(-lim, lim);
    }
    return p;
}

bool MlpParams::finite() const {
    for (double v : flat)
        if (!std::isfinite(v)) return false;
    return true;
}

void mlp_forward(const MlpSpec& spec, const MlpParams& p, const double* X, size_t batch,
                 BatchCache& cache, int layers) {
    const int L = layers < 0 ? spec.n_layers() : layers;
    if (L > spec.n_layers()) throw std::invalid_argument("layer prefix too long");
    cache.spec = &spec;
    cache.batch = batch;
    cache.layers_run = L;
    cache.acts.resize(L + 1);
    cache.acts[0].assign(X, X + batch * spec.widths[0]);
    for (int l = 0; l < L; ++l) {
        const int in = spec.widths[l], out = spec.widths[l + 1];
        const double* W = p.flat.data() + p.w_off[l];
        const double* B = p.flat.data() + p.b_off[l];
        const auto& src = cache.acts[l];
        auto& dst = cache.acts[l + 1];
        dst.resize(batch * out);
        const bool tanh_act = spec.acts[l] == Act::Tanh;
        parallel_for(batch, [&](size_t i) {
            const double* x = src.data() + i * in;
            double* y = dst.data() + i * out;
            std::memcpy(y, B, sizeof(double) * out);
            for (int k = 0; k < in; ++k) {
                const double xv = x[k];
                const double* wrow = W + static_cast<size_t>(k) * out;
                for (int j = 0; j < out; ++j) y[j] += xv * wrow[j];
            }
            if (tanh_act)
                for (int j = 0; j < out; ++j) y[j] = std::tanh(y[j]);
        });
    }
}

void mlp_backward(const MlpSpec& spec, const MlpParams& p, const BatchCache& cache,
                  const double* dY, MlpParams& grad, const double* d_latent) {
    if (cache.spec != &spec || cache.acts.empty())
        throw std::invalid_argument("cache does not belong to this forward pass");
    const int L = cache.layers_run;
    const size_t batch = cache.batch;
    if (grad.flat.size() != p.flat.size()) grad = MlpParams::zeros(spec);
    std::fill(grad.flat.begin(), grad.flat.end(), 0.0);

    std::vector<double> delta(cache.acts[L].size());
    std::copy(dY, dY + delta.size(), delta.begin());

    // per-chunk partial weight gradients combined in chunk order keep the
    // reduction deterministic under any thread count
    const size_t chunk = 512;
    const size_t nchunks = chunk_count(batch, chunk);

    for (int l = L - 1; l >= 0; --l) {
        const int in = spec.widths[l], out = spec.widths[l + 1];
        if (d_latent && spec.latent_index == l + 1) {
            const size_t lw = static_cast<size_t>(spec.widths[l + 1]);
            for (size_t i = 0; i < batch * lw; ++i) delta[i] += d_latent[i];
        }
        const auto& y = cache.acts[l + 1];
        if (spec.acts[l] == Act::Tanh) {
            for (size_t i = 0; i < delta.size(); ++i) delta[i] *= (1.0 - y[i] * y[i]);
        }
        const auto& x = cache.acts[l];
        double* gW = grad.flat.data() + grad.w_off[l];
        double* gB = grad.flat.data() + grad.b_off[l];

        const size_t wsize = static_cast<size_t>(in) * out;
        std::vector<double> partW(nchunks * wsize, 0.0);
        std::vector<double> partB(nchunks * static_cast<size_t>(out), 0.0);
        parallel_for(nchunks, [&](size_t c) {
            const size_t lo = c * chunk, hi = std::min(batch, lo + chunk);
            double* pw = partW.data() + c * wsize;
            double* pb = partB.data() + c * out;
            for (size_t i = lo; i < hi; ++i) {
                const double* xi = x.data() + i * in;
                const double* di = delta.data() + i * out;
                for (int j = 0; j < out; ++j) pb[j] += di[j];
                for (int k = 0; k < in; ++k) {
                    const double xv = xi[k];
                    double* prow = pw + static_cast<size_t>(k) * out;
                    for (int j = 0; j < out; ++j) prow[j] += xv * di[j];
                }
            }
        });
        for (size_t c = 0; c < nchunks; ++c) {
            const double* pw = partW.data() + c * wsize;
            const double* pb = partB.data() + c * out;
            for (size_t i = 0; i < wsize; ++i) gW[i] += pw[i];
            for (int j = 0; j < out; ++j) gB[j] += pb[j];
        }

        if (l > 0) {
            const double* W = p.flat.data() + p.w_off[l];
            std::vector<double> dprev(batch * static_cast<size_t>(in));
            parallel_for(batch, [&](size_t i) {
                const double* di = delta.data() + i * out;
                double* dp = dprev.data() + i * in;
                for (int k = 0; k < in; ++k) {
                    const double* wrow = W + static_cast<size_t>(k) * out;
                    double acc = 0.0;
                    for (int j = 0; j < out; ++j) acc += wrow[j] * di[j];
                    dp[k] = acc;
                }
            });
            delta.swap(dprev);
        }
    }
}

void mlp_encode(const MlpSpec& spec, const MlpParams& p, const double* X, size_t n,
                double* z_out) {
    const int enc_layers = spec.latent_index > 0 ? spec.latent_index : spec.n_layers();
    const int lw = spec.widths[enc_layers];
    const size_t chunk = 65536;
    BatchCache cache;
    for (size_t lo = 0; lo < n; lo += chunk) {
        const size_t m = std::min(chunk, n - lo);
        mlp_forward(spec, p, X + lo * spec.widths[0], m, cache, enc_layers);
        const auto& z = cache.output();
        std::copy(z.begin(), z.end(), z_out + lo * lw);
    }
}

std::string act_name(Act a) { return a == Act::Tanh ? "tanh" : "linear"; }

Act act_from_name(const std::string& s) {
    if (s == "tanh") return Act::Tanh;
    if (s == "linear") return Act::Linear;
    throw std::invalid_argument("unknown activation: " + s);
}

} // namespace slowmode
