#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"

namespace slowmode {

// 2D feature time series, interleaved (x1,x2) per frame. Centering and
// whitening are recorded so downstream consumers know what was applied:
// `mean` is the subtracted mean, `whiten` the row-major 2x2 transform
// (identity until center_and_whiten runs with whitening enabled).
struct FeatureTrajectory {
    std::vector<double> xy;
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 4> whiten{1.0, 0.0, 0.0, 1.0};
    bool centered = false;
    bool whitened = false;
    std::string provenance = "raw";

    size_t n_frames() const { return xy.size() / 2; }
    double x1(size_t t) const { return xy[2 * t]; }
    double x2(size_t t) const { return xy[2 * t + 1]; }
};

// Ring-engineered features: one angle is wound onto a slowly varying radius
// and the other spans the ring. slow-on-radius winds the first (slow) angle:
//   r = r0 + dr*((phi - anchor) mod 2pi),  x = (r cos psi, r sin psi)
// fast-on-radius winds the second (fast) angle:
//   r = r0 + dr*((psi + anchor) mod 2pi),  x = (r cos phi, r sin phi)
struct RingFeatureSpec {
    double r0 = 1.0;
    double dr = 0.02;
    double anchor = 2.0;
    enum class Mode { SlowOnRadius, FastOnRadius } mode = Mode::SlowOnRadius;
};

// Pairs (t, t+lag) for t = 0, stride, 2*stride, ...; count floor((N-lag-1)/stride)+1.
// lag 0 is the plain autoencoder limit (pairs (t,t)).
struct LaggedPairSet {
    uint64_t lag = 0;
    uint64_t stride = 1;
    uint64_t count = 0;
    uint64_t n_frames = 0;

    uint64_t t_of(uint64_t k) const { return k * stride; }
    uint64_t u_of(uint64_t k) const { return k * stride + lag; }
};

FeatureTrajectory featurize_polar(const std::vector<uint32_t>& traj, const PolarGrid& grid);

FeatureTrajectory engineer_ring_features(const std::vector<double>& phi_series,
                                         const std::vector<double>& psi_series,
                                         const RingFeatureSpec& spec);

// Convenience: torus trajectory -> (phi, psi) angle series at bin coordinates.
void torus_angles(const std::vector<uint32_t>& traj, const TorusGrid& grid,
                  std::vector<double>& phi_out, std::vector<double>& psi_out);

// Removes the empirical mean; when whiten is set also applies the symmetric
// inverse-square-root of the covariance (ZCA) so the result has identity
// covariance. Records both transforms in the trajectory.
void center_and_whiten(FeatureTrajectory& f, bool whiten);

LaggedPairSet lagged_pairs(const FeatureTrajectory& f, uint64_t lag, uint64_t stride);

} // namespace slowmode
