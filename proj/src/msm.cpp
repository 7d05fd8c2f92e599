#include "slowmode/msm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slowmode {

namespace {

struct EdgeList {
    std::vector<std::vector<std::pair<int, double>>> rows;
};

// Neighbor offsets in a fixed order so that row layout (and therefore the
// sampling stream for a given seed) is stable: self, r-/phi- axis, theta-/psi-
// axis, then diagonals for the 8-neighborhood.
void finish_model(TransitionModel& m, EdgeList& e, const std::vector<double>& energy) {
    const int n = m.n_states;
    m.row_ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + static_cast<int>(e.rows[i].size());
    m.col.resize(m.row_ptr[n]);
    m.prob.resize(m.row_ptr[n]);
    m.cdf.resize(m.row_ptr[n]);
    m.row_weight.resize(n);
    m.pi.resize(n);

    for (int i = 0; i < n; ++i) {
        double z = 0.0;
        for (auto& [j, w] : e.rows[i]) z += w;
        m.row_weight[i] = z;
        double run = 0.0;
        int k = m.row_ptr[i];
        for (auto& [j, w] : e.rows[i]) {
            m.col[k] = j;
            m.prob[k] = w / z;
            run += w / z;
            m.cdf[k] = run;
            ++k;
        }
    }
    // stationary distribution: pi_i ~ Z_i e^{-2 V_i}
    double tot = 0.0;
    for (int i = 0; i < n; ++i) {
        m.pi[i] = m.row_weight[i] * std::exp(-2.0 * energy[i]);
        tot += m.pi[i];
    }
    for (int i = 0; i < n; ++i) m.pi[i] /= tot;
}

} // namespace

TransitionModel build_beltway_model(const PotentialSpec& spec, const PolarGrid& grid,
                                    int convention) {
    spec.validate();
    if (convention != 4 && convention != 8)
        throw std::invalid_argument("neighbor convention must be 4 or 8");
    const int n = grid.n_states();
    std::vector<double> V(n);
    for (int ir = 0; ir < grid.n_r; ++ir)
        for (int it = 0; it < grid.n_theta; ++it)
            V[grid.state_of(ir, it)] = beltway_potential(spec, grid.radial_coord(ir));

    TransitionModel m;
    m.n_states = n;
    m.convention = convention;
    EdgeList e;
    e.rows.resize(n);
    const int nt = grid.n_theta;
    for (int ir = 0; ir < grid.n_r; ++ir) {
        for (int it = 0; it < grid.n_theta; ++it) {
            const int s = grid.state_of(ir, it);
            auto& row = e.rows[s];
            row.emplace_back(s, 1.0);
            auto add = [&](int jr, int jt) {
                if (jr < 0 || jr >= grid.n_r) return;  // r-axis is bounded
                jt = (jt % nt + nt) % nt;              // theta wraps
                const int j = grid.state_of(jr, jt);
                row.emplace_back(j, std::exp(-(V[j] - V[s])));
            };
            add(ir - 1, it);
            add(ir + 1, it);
            add(ir, it - 1);
            add(ir, it + 1);
            if (convention == 8) {
                add(ir - 1, it - 1);
                add(ir - 1, it + 1);
                add(ir + 1, it - 1);
                add(ir + 1, it + 1);
            }
        }
    }
    finish_model(m, e, V);
    return m;
}

TransitionModel build_torus_model(const PotentialSpec& spec, const TorusGrid& grid) {
    spec.validate();
    const int n = grid.n_states();
    std::vector<double> V(n);
    for (int i = 0; i < grid.n_phi; ++i)
        for (int j = 0; j < grid.n_psi; ++j)
            V[grid.state_of(i, j)] =
                torus_potential(spec, grid.phi_coord(i), grid.psi_coord(j));

    TransitionModel m;
    m.n_states = n;
    m.convention = 4;
    EdgeList e;
    e.rows.resize(n);
    const int np = grid.n_phi, ns = grid.n_psi;
    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < ns; ++j) {
            const int s = grid.state_of(i, j);
            auto& row = e.rows[s];
            row.emplace_back(s, 1.0);
            auto add = [&](int a, int b) {
                a = (a % np + np) % np;
                b = (b % ns + ns) % ns;
                const int t = grid.state_of(a, b);
                row.emplace_back(t, std::exp(-(V[t] - V[s])));
            };
            add(i - 1, j);
            add(i + 1, j);
            add(i, j - 1);
            add(i, j + 1);
        }
    }
    finish_model(m, e, V);
    return m;
}

TransitionModel build_from_weights(
    const std::vector<std::vector<std::pair<int, double>>>& weights) {
    const int n = static_cast<int>(weights.size());
    TransitionModel m;
    m.n_states = n;
    EdgeList e;
    e.rows = weights;
    for (int i = 0; i < n; ++i) {
        bool has_self = false;
        for (auto& [j, w] : e.rows[i]) {
            if (w < 0) throw std::invalid_argument("negative edge weight");
            if (j == i) has_self = true;
        }
        if (!has_self) throw std::invalid_argument("row missing self edge");
    }
    std::vector<double> zero(n, 0.0);
    finish_model(m, e, zero);
    // generic weights need not satisfy detailed balance against Z e^{-2V};
    // recover pi by power iteration instead.
    std::vector<double> p(n, 1.0 / n), q(n);
    for (int iter = 0; iter < 200000; ++iter) {
        std::fill(q.begin(), q.end(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                q[m.col[k]] += p[i] * m.prob[k];
        double diff = 0.0;
        for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(q[i] - p[i]));
        p.swap(q);
        if (diff < 1e-15) break;
    }
    m.pi = p;
    return m;
}

double TransitionModel::detailed_balance_residual() const {
    // build a lookup for reverse probabilities
    double worst = 0.0;
    for (int i = 0; i < n_states; ++i) {
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            const int j = col[k];
            double pji = 0.0;
            for (int k2 = row_ptr[j]; k2 < row_ptr[j + 1]; ++k2)
                if (col[k2] == i) { pji = prob[k2]; break; }
            worst = std::max(worst, std::abs(pi[i] * prob[k] - pi[j] * pji));
        }
    }
    return worst;
}

double TransitionModel::stationarity_residual() const {
    std::vector<double> q(n_states, 0.0);
    for (int i = 0; i < n_states; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            q[col[k]] += pi[i] * prob[k];
    double worst = 0.0;
    for (int i = 0; i < n_states; ++i) worst = std::max(worst, std::abs(q[i] - pi[i]));
    return worst;
}

std::vector<uint32_t> sample_trajectory(const TransitionModel& m, uint64_t n_steps,
                                        uint64_t seed, uint32_t start) {
    if (start >= static_cast<uint32_t>(m.n_states))
        throw std::invalid_argument("start state out of range");
    if (n_steps < 1) throw std::invalid_argument("need n_steps >= 1");
    std::vector<uint32_t> out(n_steps);
    Rng rng(seed);
    uint32_t s = start;
    for (uint64_t t = 0; t < n_steps; ++t) {
        out[t] = s;
        const int lo = m.row_ptr[s];
        const int len = m.row_ptr[s + 1] - lo;
        const size_t pick = rng.categorical(&m.cdf[lo], static_cast<size_t>(len));
        s = static_cast<uint32_t>(m.col[lo + static_cast<int>(pick)]);
    }
    return out;
}

double occupation_tv_distance(const TransitionModel& m, const std::vector<uint32_t>& traj) {
    std::vector<double> h(m.n_states, 0.0);
    for (uint32_t s : traj) h[s] += 1.0;
    const double inv = 1.0 / static_cast<double>(traj.size());
    double tv = 0.0;
    for (int i = 0; i < m.n_states; ++i) tv += std::abs(h[i] * inv - m.pi[i]);
    return 0.5 * tv;
}

} // namespace slowmode
