// Timings for the deterministic parallel kernels against their serial
// references, plus the dense forward/backward path they feed. Run with
// OMP_NUM_THREADS set to taste; the point of the scheme is that the numbers
// below are bitwise identical at any thread count.
#include <chrono>
#include <cstdio>
#include <vector>

#include "slowmode/mlp.hpp"
#include "slowmode/objectives.hpp"
#include "slowmode/parallel.hpp"
#include "slowmode/rng.hpp"

using namespace slowmode;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
        .count();
}

template <typename F>
double timed(const char* label, int reps, F&& fn) {
    fn();  // warm up
    const double t0 = now_ms();
    double sink = 0;
    for (int r = 0; r < reps; ++r) sink += fn();
    const double dt = (now_ms() - t0) / reps;
    std::printf("%-36s %10.3f ms   (checksum %.17g)\n", label, dt, sink);
    return dt;
}

}  // namespace

int main() {
    std::printf("threads: %d\n", max_threads());

    const size_t n = 1 << 22;
    std::vector<double> xs(n);
    Rng rng(12345);
    for (auto& x : xs) x = 2.0 * rng.next_double() - 1.0;

    timed("chunked_sum_serial (4M doubles)", 5, [&] {
        return chunked_sum_serial(n, [&](size_t i) { return xs[i] * xs[i]; });
    });
    timed("chunked_sum (4M doubles)", 5, [&] {
        return chunked_sum(n, [&](size_t i) { return xs[i] * xs[i]; });
    });

    const double serial =
        chunked_sum_serial(n, [&](size_t i) { return xs[i] * xs[i]; });
    const double parallel = chunked_sum(n, [&](size_t i) { return xs[i] * xs[i]; });
    std::printf("serial == parallel bitwise: %s\n",
                serial == parallel ? "yes" : "NO - BROKEN");

    // batched autoencoder pass, the training hot loop
    const MlpSpec spec = MlpSpec::autoencoder({2, 50, 50, 1});
    Rng prng(7);
    MlpParams p = MlpParams::init(spec, prng);
    const size_t batch = 4096;
    std::vector<double> xa(2 * batch), xb(2 * batch);
    for (auto& v : xa) v = 2.0 * rng.next_double() - 1.0;
    for (auto& v : xb) v = 2.0 * rng.next_double() - 1.0;
    MlpParams grad = MlpParams::zeros(spec);
    ObjectiveScratch ws;

    timed("tae batch fwd+bwd (4096 x [2-50-50-1])", 20, [&] {
        return objective_batch(Objective::Tae, spec, p, xa.data(), xb.data(), batch,
                               0.5, &grad, ws);
    });

    const MlpSpec enc = MlpSpec::encoder({2, 50, 50, 1});
    Rng erng(9);
    MlpParams pe = MlpParams::init(enc, erng);
    MlpParams ge = MlpParams::zeros(enc);
    ObjectiveScratch ws2;
    timed("srv batch fwd+bwd (4096 x [2-50-50-1])", 20, [&] {
        return objective_batch(Objective::Srv, enc, pe, xa.data(), xb.data(), batch,
                               0.5, &ge, ws2);
    });

    return 0;
}
