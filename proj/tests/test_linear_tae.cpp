#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "slowmode/chains.hpp"
#include "slowmode/linear_tae.hpp"
#include "slowmode/rng.hpp"

using namespace slowmode;

namespace {

// loss of a fixed encoder direction with its optimal linear decoder
double direction_loss(const std::array<double, 4>& caa, const std::array<double, 4>& cba,
                      double cbb_trace, double ex, double ey) {
    const double quad = ex * (caa[0] * ex + caa[1] * ey) + ey * (caa[2] * ex + caa[3] * ey);
    const double p0 = cba[0] * ex + cba[1] * ey;
    const double p1 = cba[2] * ex + cba[3] * ey;
    return cbb_trace - (p0 * p0 + p1 * p1) / quad;
}

}  // namespace

TEST_CASE("mixed loss: hand values, endpoint continuity, input validation") {
    const LinearTaeProblem p{2.0, 1.0, 0.8, 0.3};
    const double total = 3.0, m1 = 2.0 * 0.64, m2 = 0.09;
    CHECK(linear_tae_mixed_loss(p, 0.0) == doctest::Approx(total - m1).epsilon(1e-15));
    CHECK(linear_tae_mixed_loss(p, 1.0) == doctest::Approx(total - m2).epsilon(1e-15));
    // interior formula at b2 = 1/sqrt(2): both modes weighted equally
    const double denom = (2.0 - 1.0) * 2.0 + 1.0;
    const double mid = total - m1 - 1.0 * (m2 - m1) / denom;
    CHECK(linear_tae_mixed_loss(p, 1.0 / std::sqrt(2.0)) ==
          doctest::Approx(mid).epsilon(1e-14));
    // the closed branches meet the interior branch at both ends
    CHECK(std::abs(linear_tae_mixed_loss(p, 1e-8) - linear_tae_mixed_loss(p, 0.0)) <
          1e-10);
    CHECK(std::abs(linear_tae_mixed_loss(p, 1.0 - 1e-8) - linear_tae_mixed_loss(p, 1.0)) <
          1e-6);

    CHECK_THROWS(linear_tae_mixed_loss(p, -0.1));
    CHECK_THROWS(linear_tae_mixed_loss(p, 1.1));
    CHECK_THROWS(linear_tae_mixed_loss({0.0, 1.0, 0.5, 0.5}, 0.5));
    CHECK_THROWS(linear_tae_mixed_loss({1.0, 1.0, 1.2, 0.5}, 0.5));
    CHECK_THROWS(linear_tae_loss_curve(p, 1));
}

TEST_CASE("closed form picks the variance-weighted endpoint") {
    const LinearTaeProblem p{2.0, 1.0, 0.8, 0.3};  // var1*a1^2 = 1.28 wins
    const auto s = linear_tae_closed_form(p);
    CHECK(s.b2 == 0.0);
    CHECK(s.c1 == 0.8);
    CHECK(s.c0 == 0.0);
    CHECK(s.loss == doctest::Approx(3.0 - 1.28).epsilon(1e-15));
    CHECK(s.loss_mode1 == doctest::Approx(3.0 - 1.28).epsilon(1e-15));
    CHECK(s.loss_mode2 == doctest::Approx(3.0 - 0.09).epsilon(1e-15));

    // high-variance fast mode out-competes the slow one
    const LinearTaeProblem q{1.0, 16.0, 0.9, 0.5};
    const auto sq = linear_tae_closed_form(q);
    CHECK(sq.b2 == 1.0);
    CHECK(sq.c1 == 0.5);
    CHECK(sq.loss == doctest::Approx(17.0 - 4.0).epsilon(1e-15));

    // exact tie between var_i * a_i^2 is refused
    CHECK_THROWS(linear_tae_closed_form({4.0, 1.0, 0.5, 1.0}));
    CHECK_THROWS(linear_tae_closed_form({1.0, 1.0, 0.7, 0.7}));
    CHECK_THROWS(linear_tae_closed_form({1.0, 1.0, 0.7, -0.7}));
}

TEST_CASE("closed form matches a dense scan of the mixing curve") {
    Rng rng(2024);
    int done = 0;
    while (done < 1000) {
        LinearTaeProblem p;
        p.var1 = rng.uniform(0.1, 5.0);
        p.var2 = rng.uniform(0.1, 5.0);
        p.a1 = rng.uniform(-0.99, 0.99);
        p.a2 = rng.uniform(-0.99, 0.99);
        const double m1 = p.var1 * p.a1 * p.a1, m2 = p.var2 * p.a2 * p.a2;
        if (m1 == m2) continue;  // tie is covered elsewhere
        const auto s = linear_tae_closed_form(p);
        const auto curve = linear_tae_loss_curve(p);
        REQUIRE(curve.size() == 1001);
        const auto it = std::min_element(curve.begin(), curve.end());
        CHECK(std::abs(*it - s.loss) < 1e-10);
        // optimum sits at an endpoint of the grid
        const auto idx = static_cast<size_t>(it - curve.begin());
        CHECK((idx == 0 || idx == 1000));
        // the curve is monotone toward the winning endpoint
        const double dir = (m2 > m1) ? -1.0 : 1.0;
        for (size_t i = 0; i + 1 < curve.size(); ++i)
            CHECK(dir * (curve[i + 1] - curve[i]) >= -1e-12);
        ++done;
    }
}

TEST_CASE("rank-one optimum: attained by its own encoder and by no direction") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        // random SPD input covariance and random cross covariance
        const double g11 = rng.uniform(-1.5, 1.5), g12 = rng.uniform(-1.5, 1.5);
        const double g21 = rng.uniform(-1.5, 1.5), g22 = rng.uniform(-1.5, 1.5);
        const std::array<double, 4> caa{g11 * g11 + g12 * g12 + 0.05,
                                        g11 * g21 + g12 * g22,
                                        g11 * g21 + g12 * g22,
                                        g21 * g21 + g22 * g22 + 0.05};
        const std::array<double, 4> cba{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                        rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double cbb = rng.uniform(2.0, 6.0);
        const auto r = linear_rank_one_optimum(caa, cba, cbb);
        // its own encoder achieves the reported loss
        CHECK(std::abs(direction_loss(caa, cba, cbb, r.encoder[0], r.encoder[1]) -
                       r.loss) < 1e-9);
        // no sampled direction beats it
        double best = 1e300;
        for (int k = 0; k < 2000; ++k) {
            const double th = std::numbers::pi * k / 2000.0;
            best = std::min(best,
                            direction_loss(caa, cba, cbb, std::cos(th), std::sin(th)));
        }
        CHECK(best >= r.loss - 1e-7);
        CHECK(std::abs(best - r.loss) < 1e-3);  // angle grid brackets the optimum
    }
    CHECK_THROWS(linear_rank_one_optimum({1.0, 1.0, 1.0, 1.0}, {0, 0, 0, 0}, 1.0));
}

TEST_CASE("rank-one optimum agrees with the independent-component closed form") {
    const LinearTaeProblem p{1.0, 16.0, 0.9, 0.5};
    const std::array<double, 4> caa{p.var1, 0.0, 0.0, p.var2};
    const std::array<double, 4> cba{p.a1 * p.var1, 0.0, 0.0, p.a2 * p.var2};
    const auto r = linear_rank_one_optimum(caa, cba, p.total_variance());
    const auto s = linear_tae_closed_form(p);
    CHECK(std::abs(r.loss - s.loss) < 1e-12);
    // encoder points along the kept component (mode 2 here)
    const double norm = std::hypot(r.encoder[0], r.encoder[1]);
    CHECK(std::abs(r.encoder[0]) / norm < 1e-8);
    CHECK(std::abs(std::abs(r.encoder[1]) / norm - 1.0) < 1e-12);

    // rotating the input basis leaves the optimal loss unchanged
    const double c = std::cos(0.7), sn = std::sin(0.7);
    const std::array<double, 4> caa_r{
        c * c * caa[0] + sn * sn * caa[3], c * sn * (caa[0] - caa[3]),
        c * sn * (caa[0] - caa[3]), sn * sn * caa[0] + c * c * caa[3]};
    const std::array<double, 4> cba_rot{cba[0] * c, cba[0] * sn, -cba[3] * sn,
                                        cba[3] * c};
    const auto rr = linear_rank_one_optimum(caa_r, cba_rot, p.total_variance());
    CHECK(std::abs(rr.loss - s.loss) < 1e-10);
}

TEST_CASE("sampled binary chains land near the analytic mode competition") {
    BinaryChainSpec spec;  // variances 1 and 16, autocorrelations 0.9 and 0.5
    spec.validate();
    const size_t n = 400000;
    std::vector<double> X(2 * n);
    sample_binary_chains(spec, n, 11, X.data());
    // empirical second moments at the configured lag
    const size_t lag = spec.lag, m = n - lag;
    std::array<double, 4> caa{}, cba{};
    double cbb = 0;
    for (size_t t = 0; t < m; ++t) {
        const double x0 = X[2 * t], x1 = X[2 * t + 1];
        const double y0 = X[2 * (t + lag)], y1 = X[2 * (t + lag) + 1];
        caa[0] += x0 * x0;
        caa[1] += x0 * x1;
        caa[3] += x1 * x1;
        cba[0] += y0 * x0;
        cba[1] += y0 * x1;
        cba[2] += y1 * x0;
        cba[3] += y1 * x1;
        cbb += y0 * y0 + y1 * y1;
    }
    for (auto& v : caa) v /= static_cast<double>(m);
    for (auto& v : cba) v /= static_cast<double>(m);
    caa[2] = caa[1];
    cbb /= static_cast<double>(m);
    const auto r = linear_rank_one_optimum(caa, cba, cbb);
    const auto s = linear_tae_closed_form(
        {spec.sigma1 * spec.sigma1, spec.sigma2 * spec.sigma2, spec.a1, spec.a2});
    // the empirical optimum tracks the population one and keeps the fast mode
    CHECK(std::abs(r.loss - s.loss) / s.loss < 0.02);
    const double norm = std::hypot(r.encoder[0], r.encoder[1]);
    CHECK(std::abs(r.encoder[1]) / norm > 0.999);
}
