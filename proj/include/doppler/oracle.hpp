#pragma once

// Velocity-sampling baseline: solve the steady state at every velocity of a
// grid and sum with Maxwell-Boltzmann weights. Used as the independent
// correctness oracle for the spectral average and as the benchmark comparator.

#include <cstddef>
#include <vector>

#include "doppler/atomsys.hpp"
#include "doppler/spectral.hpp"

namespace doppler {

enum class GridKind { Uniform, GaussHermite };

struct VelocityPoint {
    double velocity = 0.0;  // um/us
    double weight = 0.0;
};

struct VelocityGrid {
    GridKind kind = GridKind::Uniform;
    std::vector<VelocityPoint> points;  // ascending velocity
    double v_th = 0.0;
    double span = 0.0;  // half-width in units of v_th (uniform grids)
};

/// Uniform: n equispaced points on [-span v_th, span v_th], weights P(v) dv
/// renormalized to 1 (n >= 3). Gauss-Hermite: n-point rule for the
/// standard-normal measure scaled by v_th (n >= 1).
VelocityGrid make_grid(GridKind kind, std::size_t n_points, double v_th, double span = 5.0);

/// Nodes and weights of the n-point Gauss rule for the standard normal
/// density (probabilists' Hermite), weights summing to 1. Golub-Welsch.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussHermiteRule gauss_hermite_rule(std::size_t n_points);

/// Steady state of g by a bordered linear solve: the equation for rho(0,0)
/// is replaced by the trace condition. Throws DegeneracyError (with the
/// zero-mode count of g) when the bordered system is singular.
DensityMatrix direct_null_state(const CMatrix& g, const SpectralOptions& options = {});

struct SampleStats {
    std::size_t solve_count = 0;
    double wall_time_us = 0.0;
    std::size_t peak_storage_bytes = 0;
    double max_residual = 0.0;  // max_j ||(G0 + v_j Gv) rho_j|| / ||G0 + v_j Gv||
    std::vector<double> excluded_velocities;
};

struct SampleResult {
    DensityMatrix rho;
    SampleStats stats;
};

struct SampleOptions {
    std::size_t threads = 1;
    /// Drop grid points with a degenerate steady state (and renormalize the
    /// remaining weights) instead of failing.
    bool exclude_degenerate = false;
    SpectralOptions spectral;
};

/// sum_j w_j rho(v_j), summed in ascending velocity order with compensated
/// summation, so the result does not depend on the thread count.
SampleResult sample_average(const LiouvillianPair& pair, const VelocityGrid& grid,
                            const SampleOptions& options = {});

/// Gauss-Hermite estimate of E[1 / (1 + lam u)], u ~ N(0, 1).
///
/// The integration line is moved to Im u = -2 sign(Im u0), away from the pole
/// u0 = -1/lam (Cauchy: no pole is crossed), where the integrand is
/// phi(t) exp(i a t + a^2/2) / (1 + lam (t - i a)). The pole then sits at
/// least 2 away from the nodes and the rule converges geometrically in n; at
/// n = 200 the error is at roundoff for every non-real lam. Throws
/// PoleOnAxisError for real nonzero lam.
Complex quadrature_weight(Complex lam, std::size_t n_points);
Complex quadrature_weight(Complex lam, const GaussHermiteRule& rule);

}  // namespace doppler
