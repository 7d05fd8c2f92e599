#include "slowmode/features.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slowmode/kahan.hpp"
#include "slowmode/parallel.hpp"

namespace slowmode {

FeatureTrajectory featurize_polar(const std::vector<uint32_t>& traj, const PolarGrid& grid) {
    // bin coordinates are reused constantly; precompute per state
    const int n = grid.n_states();
    std::vector<double> cx(n), cy(n);
    for (int ir = 0; ir < grid.n_r; ++ir) {
        const double r = grid.radial_coord(ir);
        for (int it = 0; it < grid.n_theta; ++it) {
            const double th = grid.angular_coord(it);
            cx[grid.state_of(ir, it)] = r * std::cos(th);
            cy[grid.state_of(ir, it)] = r * std::sin(th);
        }
    }
    FeatureTrajectory f;
    f.provenance = "beltway-cartesian";
    f.xy.resize(2 * traj.size());
    parallel_for(traj.size(), [&](size_t t) {
        f.xy[2 * t] = cx[traj[t]];
        f.xy[2 * t + 1] = cy[traj[t]];
    });
    return f;
}

FeatureTrajectory engineer_ring_features(const std::vector<double>& phi_series,
                                         const std::vector<double>& psi_series,
                                         const RingFeatureSpec& spec) {
    if (phi_series.size() != psi_series.size())
        throw std::invalid_argument("angle series lengths differ");
    constexpr double tau2pi = 2.0 * std::numbers::pi;
    auto wrap = [&](double a) {
        double w = std::fmod(a, tau2pi);
        if (w < 0) w += tau2pi;
        return w;
    };
    FeatureTrajectory f;
    f.provenance = "ring-engineered";
    f.xy.resize(2 * phi_series.size());
    const bool slow = spec.mode == RingFeatureSpec::Mode::SlowOnRadius;
    parallel_for(phi_series.size(), [&](size_t t) {
        double r, ang;
        if (slow) {
            r = spec.r0 + spec.dr * wrap(phi_series[t] - spec.anchor);
            ang = psi_series[t];
        } else {
            r = spec.r0 + spec.dr * wrap(psi_series[t] + spec.anchor);
            ang = phi_series[t];
        }
        f.xy[2 * t] = r * std::cos(ang);
        f.xy[2 * t + 1] = r * std::sin(ang);
    });
    return f;
}

void torus_angles(const std::vector<uint32_t>& traj, const TorusGrid& grid,
                  std::vector<double>& phi_out, std::vector<double>& psi_out) {
    phi_out.resize(traj.size());
    psi_out.resize(traj.size());
    parallel_for(traj.size(), [&](size_t t) {
        const uint32_t s = traj[t];
        phi_out[t] = grid.phi_coord(grid.phi_of(static_cast<int>(s)));
        psi_out[t] = grid.psi_coord(grid.psi_of(static_cast<int>(s)));
    });
}

void center_and_whiten(FeatureTrajectory& f, bool whiten) {
    const size_t n = f.n_frames();
    if (n == 0) throw std::invalid_argument("empty feature trajectory");
    const double m1 = chunked_sum(n, [&](size_t t) { return f.xy[2 * t]; }) / n;
    const double m2 = chunked_sum(n, [&](size_t t) { return f.xy[2 * t + 1]; }) / n;
    parallel_for(n, [&](size_t t) {
        f.xy[2 * t] -= m1;
        f.xy[2 * t + 1] -= m2;
    });
    f.mean = {m1, m2};
    f.centered = true;
    if (!whiten) return;

    const double c11 = chunked_sum(n, [&](size_t t) { return f.xy[2 * t] * f.xy[2 * t]; }) / n;
    const double c22 = chunked_sum(n, [&](size_t t) { return f.xy[2 * t + 1] * f.xy[2 * t + 1]; }) / n;
    const double c12 = chunked_sum(n, [&](size_t t) { return f.xy[2 * t] * f.xy[2 * t + 1]; }) / n;
    Eigen::Matrix2d C;
    C << c11, c12, c12, c22;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
    if (es.eigenvalues()(0) <= 0)
        throw std::runtime_error("covariance not positive definite; cannot whiten");
    // ZCA: W = C^{-1/2}, symmetric, closest whitening to the identity
    Eigen::Matrix2d W = es.eigenvectors() *
                        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
    parallel_for(n, [&](size_t t) {
        const double a = f.xy[2 * t], b = f.xy[2 * t + 1];
        f.xy[2 * t] = W(0, 0) * a + W(0, 1) * b;
        f.xy[2 * t + 1] = W(1, 0) * a + W(1, 1) * b;
    });
    f.whiten = {W(0, 0), W(0, 1), W(1, 0), W(1, 1)};
    f.whitened = true;
}

LaggedPairSet lagged_pairs(const FeatureTrajectory& f, uint64_t lag, uint64_t stride) {
    const uint64_t n = f.n_frames();
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (lag >= n) throw std::invalid_argument("lag must be below trajectory length");
    LaggedPairSet p;
    p.lag = lag;
    p.stride = stride;
    p.n_frames = n;
    p.count = (n - lag - 1) / stride + 1;
    return p;
}

} // namespace slowmode
