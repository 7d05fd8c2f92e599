#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "slowmode/mlp.hpp"

namespace slowmode {

// Adam with bias correction. State is flat and indexed identically to
// MlpParams::flat, so serialization round-trips are trivial.
struct OptimizerState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;

    static OptimizerState adam(std::size_t n_params, double lr = 1e-3) {
        OptimizerState s;
        s.lr = lr;
        s.m.assign(n_params, 0.0);
        s.v.assign(n_params, 0.0);
        return s;
    }
};

// One Adam update in place. `lr_scale` multiplies the configured learning
// rate for this step only (plateau decay), leaving state.lr untouched.
inline void optimizer_step(OptimizerState& st, MlpParams& p,
                           const MlpParams& grad, double lr_scale = 1.0) {
    const std::size_t n = p.flat.size();
    if (grad.flat.size() != n || st.m.size() != n || st.v.size() != n)
        throw std::invalid_argument("optimizer_step: size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grad.flat[i]))
            throw std::runtime_error("optimizer_step: non-finite gradient");
    st.step += 1;
    const double b1t = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double b2t = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    const double lr = st.lr * lr_scale;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad.flat[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m[i] / b1t;
        const double vhat = st.v[i] / b2t;
        p.flat[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

}  // namespace slowmode
