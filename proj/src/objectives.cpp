#include "slowmode/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "slowmode/kahan.hpp"

namespace slowmode {

Objective objective_from_name(const std::string& s) {
    if (s == "tae") return Objective::Tae;
    if (s == "srv") return Objective::Srv;
    if (s == "mtae") return Objective::Mtae;
    if (s == "vde") return Objective::Vde;
    throw std::invalid_argument("unknown objective: " + s);
}

std::string objective_name(Objective o) {
    switch (o) {
        case Objective::Tae: return "tae";
        case Objective::Srv: return "srv";
        case Objective::Mtae: return "mtae";
        case Objective::Vde: return "vde";
    }
    return "?";
}

bool objective_uses_decoder(Objective o) {
    return o == Objective::Tae || o == Objective::Vde;
}

LatentStats latent_pair_stats(const double* za, const double* zb, std::size_t n) {
    if (n < 2) throw std::invalid_argument("latent_pair_stats: need >= 2 pairs");
    Kahan mu;
    for (std::size_t i = 0; i < n; ++i) mu.add(za[i]);
    for (std::size_t i = 0; i < n; ++i) mu.add(zb[i]);
    LatentStats st;
    st.mean = mu.value() / (2.0 * static_cast<double>(n));
    Kahan sv, sc;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = za[i] - st.mean, b = zb[i] - st.mean;
        sv.add(a * a);
        sv.add(b * b);
        sc.add(a * b);
    }
    st.var = sv.value() / (2.0 * static_cast<double>(n));
    st.cov = sc.value() / static_cast<double>(n);
    st.autocorr = st.var > 0 ? st.cov / st.var : std::nan("");
    return st;
}

namespace {

constexpr double kVarFloor = 1e-12;

int encoder_layers(const MlpSpec& spec) {
    return spec.latent_index > 0 ? spec.latent_index : spec.n_layers();
}

void require_scalar_latent(const MlpSpec& spec) {
    if (spec.widths[encoder_layers(spec)] != 1)
        throw std::invalid_argument("statistics objectives need a width-1 latent");
}

// mean squared reconstruction error; dy (when wanted) gets 2*(yhat-xb)/batch
double tae_core(const std::vector<double>& yhat, const double* xb, std::size_t batch,
                int dim, std::vector<double>* dy) {
    const std::size_t n = batch * static_cast<std::size_t>(dim);
    if (dy) dy->resize(n);
    Kahan s;
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = yhat[i] - xb[i];
        s.add(r * r);
        if (dy) (*dy)[i] = 2.0 * r * inv;
    }
    return s.value() * inv;
}

// -autocorrelation of the pooled pair batch, plus z-gradients when wanted
double srv_core(const double* za, const double* zb, std::size_t batch,
                std::vector<double>* dza, std::vector<double>* dzb) {
    const LatentStats st = latent_pair_stats(za, zb, batch);
    if (st.var < kVarFloor)
        throw std::runtime_error("collapsed encoder: latent variance below 1e-12");
    if (dza) {
        dza->resize(batch);
        dzb->resize(batch);
        const double inv = 1.0 / (static_cast<double>(batch) * st.var);
        for (std::size_t i = 0; i < batch; ++i) {
            const double a = za[i] - st.mean, b = zb[i] - st.mean;
            (*dza)[i] = -(b - st.autocorr * a) * inv;
            (*dzb)[i] = -(a - st.autocorr * b) * inv;
        }
    }
    return -st.autocorr;
}

double mtae_core(const double* za, const double* zb, std::size_t batch,
                 std::vector<double>* dza, std::vector<double>* dzb) {
    const LatentStats st = latent_pair_stats(za, zb, batch);
    if (st.var < kVarFloor)
        throw std::runtime_error("collapsed encoder: latent variance below 1e-12");
    Kahan q;
    for (std::size_t i = 0; i < batch; ++i) {
        const double d = za[i] - zb[i];
        q.add(d * d);
    }
    const double loss = q.value() / (static_cast<double>(batch) * st.var);
    if (dza) {
        dza->resize(batch);
        dzb->resize(batch);
        const double inv = 1.0 / (static_cast<double>(batch) * st.var);
        for (std::size_t i = 0; i < batch; ++i) {
            const double d = za[i] - zb[i];
            (*dza)[i] = (2.0 * d - loss * (za[i] - st.mean)) * inv;
            (*dzb)[i] = (-2.0 * d - loss * (zb[i] - st.mean)) * inv;
        }
    }
    return loss;
}

void add_into(MlpParams& dst, const MlpParams& src) {
    for (std::size_t i = 0; i < dst.flat.size(); ++i) dst.flat[i] += src.flat[i];
}

}  // namespace

double objective_batch(Objective obj, const MlpSpec& spec, const MlpParams& p,
                       const double* xa, const double* xb, std::size_t batch,
                       double lambda, MlpParams* grad, ObjectiveScratch& ws) {
    if (batch < 2) throw std::invalid_argument("objective_batch: batch must be >= 2");
    const int dim = spec.in_width();
    switch (obj) {
        case Objective::Tae: {
            if (spec.out_width() != dim)
                throw std::invalid_argument("reconstruction needs out_width == in_width");
            mlp_forward(spec, p, xa, batch, ws.cache_a);
            const double loss =
                tae_core(ws.cache_a.output(), xb, batch, dim, grad ? &ws.dy : nullptr);
            if (grad) mlp_backward(spec, p, ws.cache_a, ws.dy.data(), *grad);
            return loss;
        }
        case Objective::Srv:
        case Objective::Mtae: {
            require_scalar_latent(spec);
            const int L = encoder_layers(spec);
            mlp_forward(spec, p, xa, batch, ws.cache_a, L);
            mlp_forward(spec, p, xb, batch, ws.cache_b, L);
            const double* za = ws.cache_a.output().data();
            const double* zb = ws.cache_b.output().data();
            double loss;
            if (obj == Objective::Srv)
                loss = srv_core(za, zb, batch, grad ? &ws.dza : nullptr,
                                grad ? &ws.dzb : nullptr);
            else
                loss = mtae_core(za, zb, batch, grad ? &ws.dza : nullptr,
                                 grad ? &ws.dzb : nullptr);
            if (grad) {
                mlp_backward(spec, p, ws.cache_a, ws.dza.data(), *grad);
                mlp_backward(spec, p, ws.cache_b, ws.dzb.data(), ws.grad_b);
                add_into(*grad, ws.grad_b);
            }
            return loss;
        }
        case Objective::Vde: {
            if (!(lambda >= 0.0 && lambda <= 1.0))
                throw std::invalid_argument("mixture weight must be in [0,1]");
            // endpoints reduce exactly (bitwise) to the pure objectives
            if (lambda == 1.0)
                return objective_batch(Objective::Tae, spec, p, xa, xb, batch, 0.0, grad, ws);
            if (lambda == 0.0)
                return objective_batch(Objective::Srv, spec, p, xa, xb, batch, 0.0, grad, ws);
            if (spec.latent_index <= 0)
                throw std::invalid_argument("mixture objective needs a declared latent layer");
            require_scalar_latent(spec);
            if (spec.out_width() != dim)
                throw std::invalid_argument("reconstruction needs out_width == in_width");
            const int L = spec.latent_index;
            mlp_forward(spec, p, xa, batch, ws.cache_a);      // full net
            mlp_forward(spec, p, xb, batch, ws.cache_b, L);   // encoder prefix
            const double* za = ws.cache_a.acts[L].data();
            const double* zb = ws.cache_b.output().data();
            const double tae =
                tae_core(ws.cache_a.output(), xb, batch, dim, grad ? &ws.dy : nullptr);
            const double srv = srv_core(za, zb, batch, grad ? &ws.dza : nullptr,
                                        grad ? &ws.dzb : nullptr);
            if (grad) {
                for (double& v : ws.dy) v *= lambda;
                for (double& v : ws.dza) v *= 1.0 - lambda;
                for (double& v : ws.dzb) v *= 1.0 - lambda;
                mlp_backward(spec, p, ws.cache_a, ws.dy.data(), *grad, ws.dza.data());
                mlp_backward(spec, p, ws.cache_b, ws.dzb.data(), ws.grad_b);
                add_into(*grad, ws.grad_b);
            }
            return lambda * tae + (1.0 - lambda) * srv;
        }
    }
    throw std::logic_error("unreachable");
}

double objective_full_loss(Objective obj, const MlpSpec& spec, const MlpParams& p,
                           const double* frames, std::size_t n_frames, int dim,
                           const std::uint64_t* pair_start, std::size_t n_pairs,
                           std::size_t lag, double lambda, std::size_t chunk) {
    if (dim != spec.in_width())
        throw std::invalid_argument("objective_full_loss: feature width mismatch");
    if (n_pairs < 2) throw std::invalid_argument("objective_full_loss: need >= 2 pairs");
    if (chunk == 0) chunk = 65536;
    if (obj == Objective::Vde) {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("mixture weight must be in [0,1]");
        if (lambda == 1.0) obj = Objective::Tae;
        else if (lambda == 0.0) obj = Objective::Srv;
    }
    const bool need_tae = obj == Objective::Tae || obj == Objective::Vde;
    const bool need_z = obj != Objective::Tae;
    if (need_tae && spec.out_width() != dim)
        throw std::invalid_argument("reconstruction needs out_width == in_width");
    if (need_z) require_scalar_latent(spec);
    if (need_tae && need_z && spec.latent_index <= 0)
        throw std::invalid_argument("mixture objective needs a declared latent layer");

    const int L = encoder_layers(spec);
    const std::size_t d = static_cast<std::size_t>(dim);
    std::vector<double> xa(chunk * d), xb(chunk * d);
    std::vector<double> za, zb;
    if (need_z) {
        za.resize(n_pairs);
        zb.resize(n_pairs);
    }
    Kahan tae_sum;
    BatchCache cache;
    for (std::size_t lo = 0; lo < n_pairs; lo += chunk) {
        const std::size_t m = std::min(chunk, n_pairs - lo);
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint64_t t = pair_start[lo + i];
            if (t + lag >= n_frames)
                throw std::out_of_range("pair start beyond trajectory end");
            std::memcpy(&xa[i * d], frames + t * d, sizeof(double) * d);
            std::memcpy(&xb[i * d], frames + (t + lag) * d, sizeof(double) * d);
        }
        if (need_tae) {
            mlp_forward(spec, p, xa.data(), m, cache);
            const auto& yh = cache.output();
            for (std::size_t i = 0; i < m * d; ++i) {
                const double r = yh[i] - xb[i];
                tae_sum.add(r * r);
            }
            if (need_z) {
                const auto& z = cache.acts[L];
                std::copy(z.begin(), z.begin() + m, za.begin() + lo);
            }
        } else if (need_z) {
            mlp_forward(spec, p, xa.data(), m, cache, L);
            const auto& z = cache.output();
            std::copy(z.begin(), z.begin() + m, za.begin() + lo);
        }
        if (need_z) {
            mlp_forward(spec, p, xb.data(), m, cache, L);
            const auto& z = cache.output();
            std::copy(z.begin(), z.begin() + m, zb.begin() + lo);
        }
    }
    const double tae = need_tae ? tae_sum.value() / static_cast<double>(n_pairs) : 0.0;
    double stat = 0.0;
    if (need_z) {
        if (obj == Objective::Mtae)
            stat = mtae_core(za.data(), zb.data(), n_pairs, nullptr, nullptr);
        else
            stat = srv_core(za.data(), zb.data(), n_pairs, nullptr, nullptr);
    }
    switch (obj) {
        case Objective::Tae: return tae;
        case Objective::Srv:
        case Objective::Mtae: return stat;
        case Objective::Vde: return lambda * tae + (1.0 - lambda) * stat;
    }
    throw std::logic_error("unreachable");
}

}  // namespace slowmode
