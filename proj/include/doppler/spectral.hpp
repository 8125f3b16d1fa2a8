#pragma once

// Exact Maxwell-Boltzmann averaging of the steady state of (G0 + v Gv) rho = 0.
//
// The zero-velocity state rho0 spans the null space of G0. With the spectral
// pseudo-inverse G0^- (G0 inverted on everything but its null mode), the
// velocity-dependent state is
//
//     rho_v = (1 + v G0^- Gv)^-1 rho0 = sum_k r_k (l_k^T rho0) / (1 + lam_k v / v_th),
//
// where r_k, l_k are the biorthonormal right/left eigenvectors of G0^- Gv with
// eigenvalues lam_k / v_th. Averaging over v ~ N(0, v_th^2) only touches the
// scalar factors, which integrate in closed form (doppler_weight).

#include <cstddef>
#include <vector>

#include "doppler/atomsys.hpp"

namespace doppler {

struct SpectralOptions {
    /// Eigenvalues with |mu| < zero_mode_threshold * max|mu| count as zero modes.
    double zero_mode_threshold = 1e-10;
    /// Below this |lambda| the weight is evaluated from its Taylor series.
    double small_lambda_cutoff = 1e-4;
};

/// Eigendecomposition g = R diag(mu) L with L = R^-1, so that rows of L are
/// the left eigenvectors and L R = I.
struct Eigensystem {
    CVector values;
    CMatrix right;  // columns r_k
    CMatrix left;   // rows l_k^T
    double reconstruction_residual = 0.0;  // ||g - R diag(mu) L|| / ||g||
    double basis_rcond = 1.0;              // reciprocal condition estimate of R
};

/// Eigendecomposition without the defectiveness checks.
Eigensystem eigensystem_unchecked(const CMatrix& g);

/// Throws DefectiveMatrixError when the eigenvector basis is numerically
/// singular or the reconstruction residual exceeds 1e-6.
Eigensystem biorthogonal_eigensystem(const CMatrix& g);

/// Number of eigenvalues with |mu| < threshold * max|mu| (all of them if g has no nonzero eigenvalue).
std::size_t count_zero_modes(const CVector& eigenvalues, double threshold);

/// Unique steady state of a trace-annihilating generator: null vector,
/// trace-normalized and Hermitized. Throws DegeneracyError (with the zero-mode
/// count) when the null space is not one-dimensional.
DensityMatrix null_state(const CMatrix& g0, const SpectralOptions& options = {});

struct PseudoInverse {
    CMatrix pinv;            // sum over nonzero modes of r_k l_k^T / mu_k
    CMatrix null_projector;  // r_0 l_0^T
    CVector null_vector;     // r_0
    CVector eigenvalues;     // spectrum of g0
};

PseudoInverse pseudo_inverse(const CMatrix& g0, const SpectralOptions& options = {});

struct SpectralMode {
    Complex lam;  // dimensionless: v_th times the eigenvalue of G0^- Gv
    CVector right;
    CVector left;
};

/// Everything needed to evaluate the propagator and the Doppler average.
struct SpectralModel {
    DensityMatrix rho0;
    CMatrix g0_pinv;
    CMatrix null_projector;
    CMatrix generator;  // G0^- Gv, us/um
    std::vector<SpectralMode> modes;
    double v_th = 0.0;
    double generator_residual = 0.0;  // reconstruction residual of the eigensystem of G0^- Gv
    SpectralOptions options;
};

SpectralModel build_spectral_model(const LiouvillianPair& pair, double v_th,
                                   const SpectralOptions& options = {});

/// rho_v from the matrix inverse (1 + v G0^- Gv)^-1 rho0. Throws
/// SingularPropagatorError when the reciprocal condition estimate drops below 1e-12.
DensityMatrix propagate(const SpectralModel& model, const CMatrix& gv, double v);

/// rho_v from the eigen-expansion sum_k r_k (l_k^T rho0) / (1 + lam_k v / v_th).
DensityMatrix propagate_modes(const SpectralModel& model, double v);

/// g(lam) = E[1 / (1 + lam u)] for u ~ N(0, 1).
///
/// Evaluated through the Faddeeva function: with zeta = -1/lam,
/// g = -F(zeta)/lam where F(zeta) = int phi(u)/(zeta - u) du equals
/// -i sqrt(pi/2) w(zeta/sqrt(2)) for Im zeta > 0 and its mirror image below.
/// Throws PoleOnAxisError for real nonzero lam.
Complex doppler_weight(Complex lam, double small_lambda_cutoff = 1e-4);

/// Doppler-averaged state sum_k g(lam_k) r_k (l_k^T rho0). The raw trace must
/// be 1 within 1e-6, otherwise NumericFailureError.
DensityMatrix doppler_average(const SpectralModel& model);

}  // namespace doppler
