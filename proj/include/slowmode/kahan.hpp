#pragma once
#include <cmath>
#include <cstddef>

namespace slowmode {

// Neumaier-compensated accumulator: keeps ~1e-16 relative error over
// millions of terms, which the exact-identity checks rely on.
struct Kahan {
    double sum = 0.0;
    double c = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }

    double value() const { return sum + c; }
};

} // namespace slowmode
