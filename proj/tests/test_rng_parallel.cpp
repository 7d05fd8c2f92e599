#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "slowmode/kahan.hpp"
#include "slowmode/parallel.hpp"
#include "slowmode/rng.hpp"

using namespace slowmode;

TEST_CASE("rng streams are reproducible and seed-sensitive") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const uint64_t x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng doubles stay in [0,1) and fill the range") {
    Rng r(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("categorical draws follow the cumulative weights") {
    Rng r(123);
    const double cdf[3] = {0.2, 0.5, 1.0};  // probabilities 0.2 / 0.3 / 0.5
    std::vector<int> counts(3, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const size_t v = r.categorical(cdf, 3);
        REQUIRE(v < 3);
        ++counts[v];
    }
    CHECK(counts[0] == doctest::Approx(0.2 * n).epsilon(0.03));
    CHECK(counts[1] == doctest::Approx(0.3 * n).epsilon(0.03));
    CHECK(counts[2] == doctest::Approx(0.5 * n).epsilon(0.03));
}

TEST_CASE("kahan sum recovers a catastrophic cancellation") {
    // 1 + 1e16 - 1e16 repeated: naive double accumulation drops the ones
    Kahan k;
    double naive = 0.0;
    for (int i = 0; i < 1000; ++i) {
        k.add(1.0);
        k.add(1e16);
        k.add(-1e16);
        naive += 1.0;
        naive += 1e16;
        naive += -1e16;
    }
    CHECK(k.value() == doctest::Approx(1000.0).epsilon(1e-15));
    CHECK(naive != 1000.0);  // the point of compensation
}

TEST_CASE("chunked_sum is bitwise equal to its serial reference") {
    Rng r(99);
    for (const size_t n : {size_t(0), size_t(1), size_t(1000), kDefaultChunk - 1,
                           kDefaultChunk, kDefaultChunk + 1, 5 * kDefaultChunk + 17}) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = 2.0 * r.next_double() - 1.0;
        auto body = [&](size_t i) { return xs[i] * xs[i] - 0.3 * xs[i]; };
        const double s = chunked_sum_serial(n, body);
        const double p = chunked_sum(n, body);
        CHECK(s == p);  // bitwise, not approximate
    }
}

TEST_CASE("chunked_sum value does not depend on the chunk partials layout") {
    // same data summed with different chunk sizes agrees to tight tolerance
    Rng r(5);
    const size_t n = 100000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = 2.0 * r.next_double() - 1.0;
    auto body = [&](size_t i) { return xs[i]; };
    const double a = chunked_sum(n, body, 1 << 8);
    const double b = chunked_sum(n, body, 1 << 14);
    CHECK(a == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("parallel_for covers every index exactly once") {
    const size_t n = 100000;
    std::vector<int> hits(n, 0);
    parallel_for(n, [&](size_t i) { ++hits[i]; });
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) == static_cast<int>(n));
    CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
    CHECK(*std::max_element(hits.begin(), hits.end()) == 1);
}
