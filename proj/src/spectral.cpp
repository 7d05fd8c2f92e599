#include "slowmode/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "slowmode/kahan.hpp"
#include "slowmode/parallel.hpp"
#include "slowmode/rng.hpp"

namespace slowmode {

namespace {

// Symmetrized operator S_ij = sqrt(pi_i) p_ij / sqrt(pi_j), stored CSR.
struct SymOp {
    int n;
    const TransitionModel* m;
    std::vector<double> sval;

    explicit SymOp(const TransitionModel& model) : n(model.n_states), m(&model) {
        sval.resize(model.prob.size());
        for (int i = 0; i < n; ++i) {
            const double sp = std::sqrt(model.pi[i]);
            for (int k = model.row_ptr[i]; k < model.row_ptr[i + 1]; ++k)
                sval[k] = sp * model.prob[k] / std::sqrt(model.pi[model.col[k]]);
        }
    }

    void apply(const double* x, double* y) const {
        parallel_for(static_cast<size_t>(n), [&](size_t i) {
            double acc = 0.0;
            for (int k = m->row_ptr[i]; k < m->row_ptr[i + 1]; ++k)
                acc += sval[k] * x[m->col[k]];
            y[i] = acc;
        });
    }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    Kahan s;
    for (size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

void axpy(std::vector<double>& y, double alpha, const std::vector<double>& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void check_reversible(const TransitionModel& m) {
    if (m.detailed_balance_residual() > 1e-10)
        throw std::runtime_error("transition model is not reversible (detailed balance violated)");
}

// Map symmetric-operator eigenvectors back to transition-matrix
// eigenfunctions and apply the documented sign convention.
SpectralModes assemble(const TransitionModel& m, std::vector<double> evals,
                       std::vector<std::vector<double>> evecs) {
    const int n = m.n_states;
    const int k = static_cast<int>(evals.size());
    // order states by decreasing pi for the sign reference scan
    std::vector<int> by_pi(n);
    std::iota(by_pi.begin(), by_pi.end(), 0);
    std::stable_sort(by_pi.begin(), by_pi.end(),
                     [&](int a, int b) { return m.pi[a] > m.pi[b]; });

    SpectralModes out;
    out.k = k;
    out.eigenvalues = std::move(evals);
    out.eigenfunctions.resize(k);
    out.timescales.resize(k);
    for (int i = 0; i < k; ++i) {
        auto& psi = out.eigenfunctions[i];
        psi.resize(n);
        for (int s = 0; s < n; ++s) psi[s] = evecs[i][s] / std::sqrt(m.pi[s]);
        // l2-normalized evec gives pi-normalized psi already; renormalize to
        // absorb rounding
        Kahan q;
        for (int s = 0; s < n; ++s) q.add(m.pi[s] * psi[s] * psi[s]);
        const double scale = 1.0 / std::sqrt(q.value());
        for (auto& v : psi) v *= scale;
        for (int idx : by_pi) {
            if (std::abs(psi[idx]) > 1e-12) {
                if (psi[idx] < 0)
                    for (auto& v : psi) v = -v;
                break;
            }
        }
        const double lam = out.eigenvalues[i];
        if (lam >= 1.0 - 1e-12)
            out.timescales[i] = std::numeric_limits<double>::infinity();
        else if (lam <= 0.0)
            out.timescales[i] = std::numeric_limits<double>::quiet_NaN();
        else
            out.timescales[i] = -1.0 / std::log(lam);
    }
    return out;
}

} // namespace

SpectralModes leading_modes_dense(const TransitionModel& m, int k) {
    check_reversible(m);
    if (k > m.n_states) throw std::invalid_argument("k exceeds state count");
    const int n = m.n_states;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double sp = std::sqrt(m.pi[i]);
        for (int kk = m.row_ptr[i]; kk < m.row_ptr[i + 1]; ++kk)
            S(i, m.col[kk]) = sp * m.prob[kk] / std::sqrt(m.pi[m.col[kk]]);
    }
    // enforce exact symmetry against rounding in the sqrt scaling
    Eigen::MatrixXd Ssym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ssym);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    std::vector<double> evals(k);
    std::vector<std::vector<double>> evecs(k, std::vector<double>(n));
    for (int i = 0; i < k; ++i) {
        const int src = n - 1 - i;  // Eigen sorts ascending
        evals[i] = es.eigenvalues()(src);
        for (int s = 0; s < n; ++s) evecs[i][s] = es.eigenvectors()(s, src);
    }
    return assemble(m, std::move(evals), std::move(evecs));
}

SpectralModes leading_modes_lanczos(const TransitionModel& m, int k, int max_iter,
                                    double tol, uint64_t seed) {
    check_reversible(m);
    if (k > m.n_states) throw std::invalid_argument("k exceeds state count");
    const int n = m.n_states;
    SymOp op(m);
    Rng rng(seed);

    std::vector<std::vector<double>> found;      // deflation set (evecs of S)
    std::vector<double> found_vals;

    auto project_out = [&](std::vector<double>& v) {
        for (const auto& u : found) axpy(v, -dot(u, v), u);
    };

    while (static_cast<int>(found.size()) < k) {
        // fresh start vector orthogonal to everything found so far
        std::vector<double> q(n);
        for (auto& x : q) x = rng.uniform(-1.0, 1.0);
        project_out(q);
        double nq = norm2(q);
        if (nq < 1e-12) throw std::runtime_error("lanczos start vector degenerate");
        for (auto& x : q) x /= nq;

        std::vector<std::vector<double>> basis{q};
        std::vector<double> alpha, beta;
        std::vector<double> w(n);
        double prev_ritz = std::numeric_limits<double>::quiet_NaN();
        double residual = std::numeric_limits<double>::infinity();
        bool converged = false;

        for (int it = 0; it < max_iter && !converged; ++it) {
            op.apply(basis.back().data(), w.data());
            std::vector<double> wv(w.begin(), w.end());
            const double a = dot(basis.back(), wv);
            alpha.push_back(a);
            axpy(wv, -a, basis.back());
            if (basis.size() > 1) axpy(wv, -beta.back(), basis[basis.size() - 2]);
            // full reorthogonalization: Krylov basis plus deflation set
            for (const auto& u : basis) axpy(wv, -dot(u, wv), u);
            project_out(wv);
            const double b = norm2(wv);

            const int mdim = static_cast<int>(alpha.size());
            const bool check_now = (it % 10 == 9) || b < 1e-14 || it == max_iter - 1 ||
                                   mdim >= n;
            if (check_now) {
                Eigen::MatrixXd T = Eigen::MatrixXd::Zero(mdim, mdim);
                for (int i = 0; i < mdim; ++i) {
                    T(i, i) = alpha[i];
                    if (i + 1 < mdim) T(i, i + 1) = T(i + 1, i) = beta[i];
                }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
                const double ritz = es.eigenvalues()(mdim - 1);
                const double last = es.eigenvectors()(mdim - 1, mdim - 1);
                residual = std::abs(b * last);
                const bool value_settled =
                    !std::isnan(prev_ritz) &&
                    std::abs(ritz - prev_ritz) <= 1e-12 * std::max(1.0, std::abs(ritz));
                if (residual < tol || value_settled || b < 1e-14 || mdim >= n) {
                    std::vector<double> v(n, 0.0);
                    for (int j = 0; j < mdim; ++j)
                        axpy(v, es.eigenvectors()(j, mdim - 1), basis[j]);
                    project_out(v);
                    const double nv = norm2(v);
                    for (auto& x : v) x /= nv;
                    found.push_back(std::move(v));
                    found_vals.push_back(ritz);
                    converged = true;
                    break;
                }
                prev_ritz = ritz;
            }
            if (b < 1e-14) break;  // invariant subspace exhausted without acceptance
            beta.push_back(b);
            for (auto& x : wv) x /= b;
            basis.push_back(std::move(wv));
        }
        if (!converged)
            throw std::runtime_error("lanczos failed to converge; residual " +
                                     std::to_string(residual));
    }

    // deflation finds one top eigenpair per restart, so values arrive sorted;
    // sort anyway to absorb near-degenerate ordering noise
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return found_vals[a] > found_vals[b]; });
    std::vector<double> evals(k);
    std::vector<std::vector<double>> evecs(k);
    for (int i = 0; i < k; ++i) {
        evals[i] = found_vals[order[i]];
        evecs[i] = std::move(found[order[i]]);
    }
    return assemble(m, std::move(evals), std::move(evecs));
}

SpectralModes leading_modes(const TransitionModel& m, int k) {
    if (m.n_states <= kDenseThreshold) return leading_modes_dense(m, k);
    return leading_modes_lanczos(m, k);
}

std::vector<double> implied_timescales(const std::vector<double>& eigenvalues) {
    if (eigenvalues.empty()) return {};
    if (std::abs(eigenvalues[0] - 1.0) > 1e-10)
        throw std::invalid_argument("leading eigenvalue must be 1");
    std::vector<double> t;
    for (size_t i = 1; i < eigenvalues.size(); ++i) {
        const double lam = eigenvalues[i];
        if (lam <= 0.0) throw std::invalid_argument("eigenvalue <= 0 has no implied timescale");
        if (lam >= 1.0) throw std::invalid_argument("non-leading eigenvalue >= 1");
        t.push_back(-1.0 / std::log(lam));
    }
    return t;
}

double mode_overlap(const std::vector<double>& learned,
                    const std::vector<double>& oracle_mode,
                    const std::vector<uint32_t>& traj) {
    if (learned.size() != traj.size())
        throw std::invalid_argument("learned series must align with trajectory frames");
    const size_t n = traj.size();
    Kahan sl, so;
    for (size_t i = 0; i < n; ++i) {
        sl.add(learned[i]);
        so.add(oracle_mode[traj[i]]);
    }
    const double ml = sl.value() / n, mo = so.value() / n;
    Kahan cll, coo, clo;
    for (size_t i = 0; i < n; ++i) {
        const double a = learned[i] - ml;
        const double b = oracle_mode[traj[i]] - mo;
        cll.add(a * a);
        coo.add(b * b);
        clo.add(a * b);
    }
    const double vl = cll.value(), vo = coo.value();
    if (vl <= 0.0 || vo <= 0.0) throw std::invalid_argument("zero-variance series in overlap");
    return std::abs(clo.value() / std::sqrt(vl * vo));
}

} // namespace slowmode
