#pragma once
#include <algorithm>
#include <cstddef>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "kahan.hpp"

namespace slowmode {

// Deterministic parallelism scheme: work over [0,n) is cut into fixed-size
// chunks whose boundaries do not depend on the number of threads. Each chunk
// produces a partial result; partials are combined serially in chunk order.
// Result is therefore bitwise identical for 1 thread and for k threads.

inline constexpr size_t kDefaultChunk = 1 << 14;

inline size_t chunk_count(size_t n, size_t chunk) {
    return n == 0 ? 0 : (n + chunk - 1) / chunk;
}

// Sum body(i) over i in [0,n) with per-chunk Neumaier partials, combined in
// chunk-index order. Serial reference implementation.
template <typename F>
double chunked_sum_serial(size_t n, F&& body, size_t chunk = kDefaultChunk) {
    const size_t nc = chunk_count(n, chunk);
    Kahan total;
    for (size_t c = 0; c < nc; ++c) {
        const size_t lo = c * chunk, hi = std::min(n, lo + chunk);
        Kahan part;
        for (size_t i = lo; i < hi; ++i) part.add(body(i));
        total.add(part.value());
    }
    return total.value();
}

// Parallel version: same chunk boundaries, same per-chunk arithmetic, same
// combination order, so the value is bitwise equal to chunked_sum_serial.
template <typename F>
double chunked_sum(size_t n, F&& body, size_t chunk = kDefaultChunk) {
    const size_t nc = chunk_count(n, chunk);
    if (nc <= 1) return chunked_sum_serial(n, body, chunk);
    std::vector<double> parts(nc);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(nc); ++c) {
        const size_t lo = static_cast<size_t>(c) * chunk;
        const size_t hi = std::min(n, lo + chunk);
        Kahan part;
        for (size_t i = lo; i < hi; ++i) part.add(body(i));
        parts[static_cast<size_t>(c)] = part.value();
    }
    Kahan total;
    for (size_t c = 0; c < nc; ++c) total.add(parts[c]);
    return total.value();
}

// Elementwise parallel loop (no reduction); deterministic because iterations
// are independent writes to disjoint locations.
template <typename F>
void parallel_for(size_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(static_cast<size_t>(i));
#else
    for (size_t i = 0; i < n; ++i) body(i);
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace slowmode
