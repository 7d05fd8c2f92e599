#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "slowmode/features.hpp"
#include "slowmode/grid.hpp"
#include "slowmode/rng.hpp"

using namespace slowmode;

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;

double wrap2pi(double a) {
    double w = std::fmod(a, kTau);
    return w < 0 ? w + kTau : w;
}
}  // namespace

TEST_CASE("polar featurization emits bin-center cartesian coordinates") {
    const PolarGrid g(3, 4, 0.6, 1.0);
    std::vector<uint32_t> traj;
    for (int s = 0; s < g.n_states(); ++s) traj.push_back(static_cast<uint32_t>(s));
    const auto f = featurize_polar(traj, g);
    REQUIRE(f.n_frames() == traj.size());
    CHECK(f.provenance == "beltway-cartesian");
    CHECK_FALSE(f.centered);
    for (size_t t = 0; t < traj.size(); ++t) {
        const int s = static_cast<int>(traj[t]);
        const double r = g.radial_coord(g.radial_of(s));
        const double th = g.angular_coord(g.angular_of(s));
        CHECK(f.x1(t) == doctest::Approx(r * std::cos(th)).epsilon(1e-15));
        CHECK(f.x2(t) == doctest::Approx(r * std::sin(th)).epsilon(1e-15));
    }
    // radial nodes include both endpoints; angular bins are centered
    CHECK(g.radial_coord(0) == 0.6);
    CHECK(g.radial_coord(2) == 1.0);
    CHECK(g.angular_coord(0) == doctest::Approx(0.5 * kTau / 4).epsilon(1e-15));
}

TEST_CASE("ring features wind the chosen angle onto the radius") {
    const std::vector<double> phi = {0.1, 2.5, 5.9, 4.0};
    const std::vector<double> psi = {1.0, 0.2, 3.3, 6.1};
    RingFeatureSpec spec;  // r0=1, dr=0.02, anchor=2
    spec.mode = RingFeatureSpec::Mode::SlowOnRadius;
    const auto fs = engineer_ring_features(phi, psi, spec);
    for (size_t t = 0; t < phi.size(); ++t) {
        const double r = spec.r0 + spec.dr * wrap2pi(phi[t] - spec.anchor);
        CHECK(fs.x1(t) == doctest::Approx(r * std::cos(psi[t])).epsilon(1e-15));
        CHECK(fs.x2(t) == doctest::Approx(r * std::sin(psi[t])).epsilon(1e-15));
    }
    spec.mode = RingFeatureSpec::Mode::FastOnRadius;
    const auto ff = engineer_ring_features(phi, psi, spec);
    for (size_t t = 0; t < phi.size(); ++t) {
        const double r = spec.r0 + spec.dr * wrap2pi(psi[t] + spec.anchor);
        CHECK(ff.x1(t) == doctest::Approx(r * std::cos(phi[t])).epsilon(1e-15));
        CHECK(ff.x2(t) == doctest::Approx(r * std::sin(phi[t])).epsilon(1e-15));
    }
    CHECK_THROWS(engineer_ring_features(phi, {1.0}, spec));
}

TEST_CASE("ring radius stays within one dr-turn of the base") {
    // the wound radius is confined to [r0, r0 + dr*2pi); a full revolution
    // of the wound angle sweeps the band exactly once
    RingFeatureSpec spec;
    std::vector<double> phi, psi;
    for (int i = 0; i < 200; ++i) {
        phi.push_back(i * 0.37);
        psi.push_back(i * 0.73);
    }
    const auto f = engineer_ring_features(phi, psi, spec);
    for (size_t t = 0; t < phi.size(); ++t) {
        const double r = std::hypot(f.x1(t), f.x2(t));
        CHECK(r >= spec.r0 - 1e-12);
        CHECK(r < spec.r0 + spec.dr * kTau + 1e-12);
    }
}

TEST_CASE("torus angle extraction returns bin coordinates") {
    const TorusGrid g(5, 7);
    std::vector<uint32_t> traj;
    for (int s = 0; s < g.n_states(); ++s) traj.push_back(static_cast<uint32_t>(s));
    std::vector<double> phi, psi;
    torus_angles(traj, g, phi, psi);
    REQUIRE(phi.size() == traj.size());
    for (size_t t = 0; t < traj.size(); ++t) {
        const int s = static_cast<int>(traj[t]);
        CHECK(phi[t] == g.phi_coord(g.phi_of(s)));
        CHECK(psi[t] == g.psi_coord(g.psi_of(s)));
    }
}

TEST_CASE("centering removes the mean and records it") {
    FeatureTrajectory f;
    f.xy = {1.0, 10.0, 3.0, 14.0, 5.0, 18.0};  // means (3, 14)
    center_and_whiten(f, false);
    CHECK(f.centered);
    CHECK_FALSE(f.whitened);
    CHECK(f.mean[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(f.mean[1] == doctest::Approx(14.0).epsilon(1e-15));
    CHECK(f.whiten[0] == 1.0);  // transform untouched without whitening
    CHECK(f.whiten[1] == 0.0);
    double s1 = 0, s2 = 0;
    for (size_t t = 0; t < f.n_frames(); ++t) {
        s1 += f.x1(t);
        s2 += f.x2(t);
    }
    CHECK(std::abs(s1) < 1e-12);
    CHECK(std::abs(s2) < 1e-12);
}

TEST_CASE("whitening produces identity covariance via a symmetric transform") {
    Rng rng(99);
    FeatureTrajectory f;
    const size_t n = 20000;
    f.xy.resize(2 * n);
    for (size_t t = 0; t < n; ++t) {
        const double a = rng.uniform(-1.0, 1.0);
        const double b = 0.8 * a + 0.3 * rng.uniform(-1.0, 1.0) + 0.5;
        f.xy[2 * t] = 2.0 * a + 1.0;
        f.xy[2 * t + 1] = b;
    }
    FeatureTrajectory raw = f;
    center_and_whiten(f, true);
    CHECK(f.centered);
    CHECK(f.whitened);
    CHECK(f.whiten[1] == doctest::Approx(f.whiten[2]).epsilon(1e-14));  // ZCA is symmetric
    double c11 = 0, c22 = 0, c12 = 0, m1 = 0, m2 = 0;
    for (size_t t = 0; t < n; ++t) {
        m1 += f.x1(t);
        m2 += f.x2(t);
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::abs(m1) < 1e-12);
    CHECK(std::abs(m2) < 1e-12);
    for (size_t t = 0; t < n; ++t) {
        c11 += f.x1(t) * f.x1(t);
        c22 += f.x2(t) * f.x2(t);
        c12 += f.x1(t) * f.x2(t);
    }
    CHECK(c11 / n == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(c22 / n == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(c12 / n) < 1e-10);
    // the stored mean and matrix reproduce the transformation
    for (size_t t = 0; t < 50; ++t) {
        const double a = raw.x1(t) - f.mean[0];
        const double b = raw.x2(t) - f.mean[1];
        CHECK(f.x1(t) == doctest::Approx(f.whiten[0] * a + f.whiten[1] * b).epsilon(1e-12));
        CHECK(f.x2(t) == doctest::Approx(f.whiten[2] * a + f.whiten[3] * b).epsilon(1e-12));
    }
}

TEST_CASE("degenerate covariance cannot be whitened") {
    FeatureTrajectory f;
    f.xy = {1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0};  // x2 = 2 x1 exactly
    CHECK_THROWS(center_and_whiten(f, true));
    FeatureTrajectory empty;
    CHECK_THROWS(center_and_whiten(empty, false));
}

TEST_CASE("lagged pair count follows the stride formula") {
    FeatureTrajectory f;
    f.xy.resize(2 * 100);
    auto p = lagged_pairs(f, 10, 7);
    CHECK(p.count == 13);  // floor((100-10-1)/7)+1
    CHECK(p.t_of(0) == 0);
    CHECK(p.u_of(0) == 10);
    CHECK(p.u_of(p.count - 1) == 94);   // last pair still inside the series
    CHECK(12 * 7 + 7 + 10 > 99);        // one more stride would overflow

    // lag 0 degenerates to (t, t) pairs over most of the series
    auto p0 = lagged_pairs(f, 0, 1);
    CHECK(p0.count == 100);
    CHECK(p0.u_of(41) == 41);

    CHECK_THROWS(lagged_pairs(f, 100, 1));  // lag must leave at least one pair
    CHECK_THROWS(lagged_pairs(f, 10, 0));

    // the production-scale count used throughout the beltway runs
    FeatureTrajectory big;
    big.xy.resize(2 * 5000000);
    CHECK(lagged_pairs(big, 3000, 1).count == 4997000);
    CHECK(lagged_pairs(big, 3000, 10).count == 499700);
}
