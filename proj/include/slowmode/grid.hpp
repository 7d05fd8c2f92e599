#pragma once
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace slowmode {

// Discretization of the annulus [r_min,r_max] x [0,2pi). Radial coordinates
// are the n_r evenly spaced values including both endpoints (the spacing that
// reproduces the reference timescales); angular coordinates are bin centers
// on the periodic axis. State index = ir * n_theta + it.
struct PolarGrid {
    int n_r = 0;
    int n_theta = 0;
    double r_min = 0.0, r_max = 0.0;

    PolarGrid(int nr, int nt, double rmin, double rmax)
        : n_r(nr), n_theta(nt), r_min(rmin), r_max(rmax) {
        if (nr < 2 || nt < 2) throw std::invalid_argument("grid needs >=2 bins per axis");
        if (!(rmax > rmin)) throw std::invalid_argument("r_max must exceed r_min");
    }

    int n_states() const { return n_r * n_theta; }
    double radial_coord(int ir) const {
        return r_min + (r_max - r_min) * ir / (n_r - 1);
    }
    double angular_coord(int it) const {
        return (it + 0.5) * 2.0 * std::numbers::pi / n_theta;
    }
    int state_of(int ir, int it) const { return ir * n_theta + it; }
    int radial_of(int s) const { return s / n_theta; }
    int angular_of(int s) const { return s % n_theta; }
};

// Periodic n_phi x n_psi grid on the 2-torus; both axes wrap.
struct TorusGrid {
    int n_phi = 0;
    int n_psi = 0;

    TorusGrid(int np_, int ns_) : n_phi(np_), n_psi(ns_) {
        if (np_ < 2 || ns_ < 2) throw std::invalid_argument("grid needs >=2 bins per axis");
    }

    int n_states() const { return n_phi * n_psi; }
    double phi_coord(int i) const { return (i + 0.5) * 2.0 * std::numbers::pi / n_phi; }
    double psi_coord(int j) const { return (j + 0.5) * 2.0 * std::numbers::pi / n_psi; }
    int state_of(int i, int j) const { return i * n_psi + j; }
    int phi_of(int s) const { return s / n_psi; }
    int psi_of(int s) const { return s % n_psi; }
};

} // namespace slowmode
