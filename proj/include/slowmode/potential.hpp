#pragma once
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace slowmode {

enum class PotentialKind { Beltway, TorusSurrogate };

// Analytic lattice potentials, energies in kBT.
//
// Beltway: two concentric circular valleys at radii r1 and r2 (each of
// half-width dr) separated by a flat ring barrier, steep walls elsewhere.
// Torus surrogate: independent two-well cosine potentials in each angle,
// with barrier heights b_phi and b_psi.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::Beltway;
    // beltway
    double r1 = 0.7, r2 = 0.9, dr = 0.05;
    double barrier = 4.0;          // ring barrier height
    double wall_base = 1.25;       // wall offset
    double wall_slope = 7.5;       // wall steepness
    // torus surrogate
    double b_phi = 5.0, b_psi = 2.5;

    void validate() const {
        if (kind == PotentialKind::Beltway) {
            if (!(r1 < r2)) throw std::invalid_argument("need r1 < r2");
            if (!(dr > 0)) throw std::invalid_argument("need dr > 0");
            if (!(r1 + dr < r2 - dr))
                throw std::invalid_argument("valley bands must be separated");
            if (barrier < 0) throw std::invalid_argument("barrier height must be >= 0");
        } else {
            if (b_phi < 0 || b_psi < 0)
                throw std::invalid_argument("barrier heights must be >= 0");
        }
    }
};

// V(r, theta) for the beltway branch structure; theta enters only through
// the domain (the potential is rotationally symmetric).
inline double beltway_potential(const PotentialSpec& p, double r) {
    if (r > p.r1 - p.dr && r < p.r1 + p.dr) return 0.0;
    if (r > p.r2 - p.dr && r < p.r2 + p.dr) return 0.0;
    if (r > p.r1 + p.dr && r < p.r2 - p.dr) return p.barrier;
    return p.wall_base + p.wall_slope * (std::abs(r - p.r1) + std::abs(r - p.r2));
}

inline double torus_potential(const PotentialSpec& p, double phi, double psi) {
    return p.b_phi * (1.0 - std::cos(2.0 * phi)) / 2.0 +
           p.b_psi * (1.0 - std::cos(2.0 * psi)) / 2.0;
}

// Dispatcher used by the CLI; wraps theta/phi/psi to [0,2pi), checks the
// radial domain for the beltway.
inline double evaluate_potential(const PotentialSpec& p, double a, double b,
                                 double r_min = 0.6, double r_max = 1.0) {
    p.validate();
    if (p.kind == PotentialKind::Beltway) {
        if (a < r_min || a > r_max) throw std::domain_error("radius outside domain");
        return beltway_potential(p, a);
    }
    return torus_potential(p, a, b);
}

} // namespace slowmode
