#include "doppler/spectral.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "doppler/errors.hpp"
#include "doppler/faddeeva.hpp"

namespace doppler {

namespace {

constexpr double kDefectiveResidual = 1e-6;
constexpr double kBasisRcondFloor = 1e-12;
constexpr double kPropagatorRcondFloor = 1e-12;
constexpr double kTraceTolerance = 1e-6;
constexpr double kKernelTolerance = 1e-8;

std::string format_complex(Complex z) {
    std::ostringstream os;
    os.precision(17);
    os << "(" << z.real() << ", " << z.imag() << ")";
    return os.str();
}

void check_square(const CMatrix& g, const char* what) {
    if (g.rows() != g.cols() || g.rows() == 0) {
        throw DimensionError(std::string(what) + " must be a non-empty square matrix");
    }
}

std::size_t liouville_dim(const CMatrix& g) {
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(g.rows()))));
    if (static_cast<Eigen::Index>(n * n) != g.rows()) {
        throw DimensionError("generator dimension " + std::to_string(g.rows()) + " is not a square number");
    }
    return n;
}

Eigen::Index smallest_mode(const CVector& values) {
    Eigen::Index idx = 0;
    values.cwiseAbs().minCoeff(&idx);
    return idx;
}

void throw_if_defective(const Eigensystem& es, const char* what) {
    if (es.basis_rcond < kBasisRcondFloor || !(es.reconstruction_residual <= kDefectiveResidual)) {
        std::ostringstream msg;
        msg << what << " is not diagonalizable to working precision (reconstruction residual "
            << es.reconstruction_residual << ", eigenbasis rcond " << es.basis_rcond
            << "); use the sampled method instead";
        throw DefectiveMatrixError(es.reconstruction_residual, msg.str());
    }
}

DegeneracyError degeneracy(std::size_t zero_modes) {
    std::ostringstream msg;
    msg << "degenerate steady state: G0 has " << zero_modes
        << " zero eigenvalues, expected exactly one";
    return DegeneracyError(zero_modes, msg.str());
}

// Eigensystem whose zero cluster is spanned by an orthonormal kernel basis from
// the SVD. The eigensolver's vectors for a repeated zero are nearly parallel.
Eigensystem clustered_eigensystem(const CMatrix& g, double threshold, std::vector<char>& is_zero) {
    Eigen::ComplexEigenSolver<CMatrix> solver(g, true);
    if (solver.info() != Eigen::Success) {
        throw NumericFailureError("complex eigensolver did not converge");
    }
    Eigensystem es;
    es.values = solver.eigenvalues();
    es.right = solver.eigenvectors();
    const Eigen::Index dim = g.rows();
    const double scale = es.values.cwiseAbs().maxCoeff();
    is_zero.assign(static_cast<std::size_t>(dim), 0);
    std::vector<Eigen::Index> zeros;
    for (Eigen::Index k = 0; k < dim; ++k) {
        if (std::abs(es.values(k)) < threshold * scale) {
            is_zero[static_cast<std::size_t>(k)] = 1;
            zeros.push_back(k);
        }
    }
    if (!zeros.empty() && scale > 0.0) {
        Eigen::JacobiSVD<CMatrix> svd(g, Eigen::ComputeFullV);
        const Eigen::VectorXd& sigma = svd.singularValues();
        const auto m = static_cast<Eigen::Index>(zeros.size());
        if (sigma(dim - m) > kKernelTolerance * sigma(0)) {
            std::ostringstream msg;
            msg << "G0^- Gv has a zero eigenvalue of multiplicity " << m
                << " but a smaller null space (singular value " << sigma(dim - m) / sigma(0)
                << " relative); it is not diagonalizable, use the sampled method instead";
            throw DefectiveMatrixError(sigma(dim - m) / sigma(0), msg.str());
        }
        for (Eigen::Index j = 0; j < m; ++j) es.right.col(zeros[static_cast<std::size_t>(j)]) = svd.matrixV().col(dim - m + j);
    }
    Eigen::PartialPivLU<CMatrix> lu(es.right);
    es.basis_rcond = lu.rcond();
    es.left = lu.inverse();
    const double norm = g.norm();
    const CMatrix rebuilt = es.right * es.values.asDiagonal() * es.left;
    es.reconstruction_residual = norm > 0.0 ? (g - rebuilt).norm() / norm : rebuilt.norm();
    return es;
}

}  // namespace

Eigensystem eigensystem_unchecked(const CMatrix& g) {
    check_square(g, "eigensystem input");
    Eigen::ComplexEigenSolver<CMatrix> solver(g, true);
    if (solver.info() != Eigen::Success) {
        throw NumericFailureError("complex eigensolver did not converge");
    }
    Eigensystem es;
    es.values = solver.eigenvalues();
    es.right = solver.eigenvectors();
    Eigen::PartialPivLU<CMatrix> lu(es.right);
    es.basis_rcond = lu.rcond();
    es.left = lu.inverse();
    const double norm = g.norm();
    const CMatrix rebuilt = es.right * es.values.asDiagonal() * es.left;
    es.reconstruction_residual = norm > 0.0 ? (g - rebuilt).norm() / norm : rebuilt.norm();
    return es;
}

Eigensystem biorthogonal_eigensystem(const CMatrix& g) {
    Eigensystem es = eigensystem_unchecked(g);
    throw_if_defective(es, "matrix");
    return es;
}

std::size_t count_zero_modes(const CVector& eigenvalues, double threshold) {
    const double scale = eigenvalues.size() > 0 ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    if (scale == 0.0) return static_cast<std::size_t>(eigenvalues.size());
    std::size_t count = 0;
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
        if (std::abs(eigenvalues(k)) < threshold * scale) ++count;
    }
    return count;
}

DensityMatrix null_state(const CMatrix& g0, const SpectralOptions& options) {
    check_square(g0, "G0");
    const std::size_t n = liouville_dim(g0);
    Eigen::ComplexEigenSolver<CMatrix> solver(g0, true);
    if (solver.info() != Eigen::Success) {
        throw NumericFailureError("complex eigensolver did not converge on G0");
    }
    const std::size_t zeros = count_zero_modes(solver.eigenvalues(), options.zero_mode_threshold);
    if (zeros != 1) throw degeneracy(zeros);
    const Eigen::Index k = smallest_mode(solver.eigenvalues());
    return DensityMatrix::from_vector(solver.eigenvectors().col(k), n);
}

PseudoInverse pseudo_inverse(const CMatrix& g0, const SpectralOptions& options) {
    check_square(g0, "G0");
    const Eigensystem es = eigensystem_unchecked(g0);
    const std::size_t zeros = count_zero_modes(es.values, options.zero_mode_threshold);
    if (zeros != 1) throw degeneracy(zeros);
    throw_if_defective(es, "G0");

    const Eigen::Index null_index = smallest_mode(es.values);
    CVector inverse_values(es.values.size());
    for (Eigen::Index k = 0; k < es.values.size(); ++k) {
        inverse_values(k) = k == null_index ? Complex(0.0) : 1.0 / es.values(k);
    }

    PseudoInverse out;
    out.pinv = es.right * inverse_values.asDiagonal() * es.left;
    out.null_vector = es.right.col(null_index);
    out.null_projector = out.null_vector * es.left.row(null_index);
    out.eigenvalues = es.values;
    return out;
}

SpectralModel build_spectral_model(const LiouvillianPair& pair, double v_th,
                                   const SpectralOptions& options) {
    if (!(v_th > 0.0) || !std::isfinite(v_th)) {
        throw ConfigError("thermal velocity must be positive and finite");
    }
    check_square(pair.g0, "G0");
    if (pair.gv.rows() != pair.g0.rows() || pair.gv.cols() != pair.g0.cols()) {
        throw DimensionError("G0 and Gv have different shapes");
    }
    const std::size_t n = liouville_dim(pair.g0);

    PseudoInverse pi = pseudo_inverse(pair.g0, options);

    SpectralModel model;
    model.rho0 = DensityMatrix::from_vector(pi.null_vector, n);
    model.g0_pinv = std::move(pi.pinv);
    model.null_projector = std::move(pi.null_projector);
    model.generator = model.g0_pinv * pair.gv;
    model.v_th = v_th;
    model.options = options;

    std::vector<char> is_zero;
    Eigensystem es = clustered_eigensystem(model.generator, options.zero_mode_threshold, is_zero);
    throw_if_defective(es, "G0^- Gv");
    model.generator_residual = es.reconstruction_residual;

    // Modes of G0^- Gv that are zero up to roundoff (populations, the excluded
    // null mode) carry weight exactly 1; pin them to 0 so that roundoff does
    // not masquerade as a real nonzero eigenvalue.
    model.modes.reserve(static_cast<std::size_t>(es.values.size()));
    for (Eigen::Index k = 0; k < es.values.size(); ++k) {
        Complex raw = es.values(k);
        if (is_zero[static_cast<std::size_t>(k)]) raw = 0.0;
        model.modes.push_back({v_th * raw, es.right.col(k), es.left.row(k).transpose()});
    }
    return model;
}

DensityMatrix propagate(const SpectralModel& model, const CMatrix& gv, double v) {
    const CMatrix generator = model.g0_pinv * gv;
    const CMatrix m = CMatrix::Identity(generator.rows(), generator.cols()) + v * generator;
    Eigen::PartialPivLU<CMatrix> lu(m);
    if (!(lu.rcond() >= kPropagatorRcondFloor)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "propagator 1 + v G0^- Gv is singular at v = " << v << " um/us (rcond " << lu.rcond() << ")";
        throw SingularPropagatorError(v, msg.str());
    }
    const CVector rho = lu.solve(model.rho0.vectorized());
    return DensityMatrix::from_vector(rho, model.rho0.dim());
}

DensityMatrix propagate_modes(const SpectralModel& model, double v) {
    const CVector rho0 = model.rho0.vectorized();
    CVector rho = CVector::Zero(rho0.size());
    for (const auto& mode : model.modes) {
        const Complex coeff = (mode.left.transpose() * rho0)(0);
        rho += coeff / (1.0 + mode.lam * (v / model.v_th)) * mode.right;
    }
    return DensityMatrix::from_vector(rho, model.rho0.dim());
}

Complex doppler_weight(Complex lam, double small_lambda_cutoff) {
    const double mag = std::abs(lam);
    if (!std::isfinite(lam.real()) || !std::isfinite(lam.imag())) {
        throw NumericFailureError("non-finite eigenvalue " + format_complex(lam));
    }
    if (mag > 1e-12 && std::abs(lam.imag()) <= 1e-12 * mag) {
        throw PoleOnAxisError(lam, "real eigenvalue " + format_complex(lam) +
                                       " puts a pole of 1/(1 + lam u) on the velocity axis");
    }
    if (mag < small_lambda_cutoff) {
        const Complex l2 = lam * lam;
        return 1.0 + l2 * (1.0 + l2 * (3.0 + 15.0 * l2));
    }
    constexpr double sqrt_half_pi = 1.2533141373155002512;  // sqrt(pi/2)
    const Complex zeta = -1.0 / lam;
    Complex f;
    if (zeta.imag() > 0.0) {
        f = Complex(0.0, -sqrt_half_pi) * faddeeva_w(zeta / std::numbers::sqrt2);
    } else {
        f = Complex(0.0, sqrt_half_pi) * std::conj(faddeeva_w(std::conj(zeta) / std::numbers::sqrt2));
    }
    return -f / lam;
}

DensityMatrix doppler_average(const SpectralModel& model) {
    const CVector rho0 = model.rho0.vectorized();
    CVector rho = CVector::Zero(rho0.size());
    for (const auto& mode : model.modes) {
        const Complex weight = doppler_weight(mode.lam, model.options.small_lambda_cutoff);
        if (!std::isfinite(weight.real()) || !std::isfinite(weight.imag())) {
            throw NumericFailureError("Doppler weight overflowed for lambda = " + format_complex(mode.lam));
        }
        const Complex coeff = (mode.left.transpose() * rho0)(0);
        rho += (weight * coeff) * mode.right;
    }
    DensityMatrix avg = DensityMatrix::from_vector(rho, model.rho0.dim());
    if (std::abs(avg.raw_trace() - 1.0) > kTraceTolerance) {
        throw NumericFailureError("averaged state has trace " + format_complex(avg.raw_trace()) +
                                  " before normalization, expected 1");
    }
    return avg;
}

}  // namespace doppler
