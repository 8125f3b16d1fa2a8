#pragma once

// N-level atom in the rotating frame and its Liouville-space generators.
//
// Units throughout: angular frequencies in rad/us, wavenumbers in rad/um,
// velocities in um/us. Density matrices are vectorized by column stacking,
// vec(rho)[i + N*j] = rho(i, j), so that vec(A X B) = (B^T kron A) vec(X).

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace doppler {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Laser coupling between two levels. `wavenumber` is signed by propagation direction.
struct Coupling {
    std::size_t lower = 0;
    std::size_t upper = 0;
    double rabi = 0.0;        // rad/us
    double detuning = 0.0;    // rad/us
    double wavenumber = 0.0;  // rad/um
};

/// Incoherent population transfer `from` -> `to` (jump operator sqrt(rate) |to><from|).
struct Decay {
    std::size_t from = 0;
    std::size_t to = 0;
    double rate = 0.0;  // rad/us
};

/// Pure dephasing of one level (jump operator sqrt(rate) |level><level|).
/// Coherences involving the level decay at rate/2.
struct Dephasing {
    std::size_t level = 0;
    double rate = 0.0;  // rad/us
};

struct AtomicSystem {
    std::size_t n_levels = 0;
    std::vector<Coupling> couplings;
    std::vector<Decay> decays;
    std::vector<Dephasing> dephasings;

    /// Throws ConfigError for out-of-range indices, self-couplings, negative
    /// rates and non-finite parameters. Frame consistency is checked separately
    /// (see frame_offsets) and raises FrameError.
    void validate() const;
};

/// Per-level cumulative detuning and wavenumber from a breadth-first walk of
/// the coupling graph. Each connected component is anchored at its lowest level.
struct FrameOffsets {
    RVector detuning;
    RVector wavenumber;
};

FrameOffsets frame_offsets(const AtomicSystem& system);

/// Rotating-wave Hamiltonian: Omega/2 on coupled pairs, -(cumulative detuning) on the diagonal.
CMatrix build_hamiltonian(const AtomicSystem& system);

/// Diagonal Doppler operator K (rad/um): -(cumulative wavenumber). H(v) = H + v K.
RVector build_doppler_operator(const AtomicSystem& system);

/// The pair (G0, Gv) with (G0 + v Gv) vec(rho_v) = 0 at steady state.
struct LiouvillianPair {
    CMatrix g0;  // rad/us
    CMatrix gv;  // rad/um
    std::size_t dim = 0;
};

LiouvillianPair build_liouvillian_pair(const AtomicSystem& system);

/// Superoperator of X -> -i [H, X].
CMatrix commutator_superoperator(const CMatrix& hamiltonian);

/// Superoperator of the Lindblad dissipator D[L] X = L X L^+ - {L^+ L, X}/2.
CMatrix dissipator_superoperator(const CMatrix& jump);

CVector vectorize(const CMatrix& m);
CMatrix unvectorize(const CVector& x, std::size_t n);
CMatrix unvectorize(const CVector& x);

/// Linear functional t with t^T vec(X) = trace(X); equals vec(identity).
CVector trace_functional(std::size_t n);

/// Hermitian, unit-trace N x N state. Construction from raw data Hermitizes
/// and normalizes, keeping the pre-normalization trace and the Hermiticity
/// defect as diagnostics.
class DensityMatrix {
public:
    DensityMatrix() = default;

    /// Throws NonNormalizableError when |trace| < 1e-12 * max|entry| (or the matrix is zero).
    static DensityMatrix from_raw(const CMatrix& raw);
    static DensityMatrix from_vector(const CVector& raw, std::size_t n);
    static DensityMatrix from_vector(const CVector& raw);

    const CMatrix& matrix() const noexcept { return data_; }
    CVector vectorized() const { return vectorize(data_); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.rows()); }
    Complex operator()(std::size_t i, std::size_t j) const {
        return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    /// Trace of the raw input, before normalization.
    Complex raw_trace() const noexcept { return raw_trace_; }
    /// max_ij |s_ij - conj(s_ji)| for s = raw / trace(raw), i.e. before Hermitization.
    double hermiticity_defect() const noexcept { return hermiticity_defect_; }

private:
    CMatrix data_;
    Complex raw_trace_{1.0, 0.0};
    double hermiticity_defect_ = 0.0;
};

/// max_ij |a_ij - b_ij|
double max_abs_diff(const CMatrix& a, const CMatrix& b);

}  // namespace doppler
