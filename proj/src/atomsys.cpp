#include "doppler/atomsys.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "doppler/errors.hpp"

namespace doppler {

namespace {

constexpr double kFrameTolerance = 1e-9;

bool finite(double x) { return std::isfinite(x); }

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void AtomicSystem::validate() const {
    require(n_levels > 0, "atomic system needs at least one level");
    for (std::size_t c = 0; c < couplings.size(); ++c) {
        const auto& cp = couplings[c];
        const std::string tag = "coupling " + std::to_string(c);
        require(cp.lower < n_levels && cp.upper < n_levels, tag + ": level index out of range");
        require(cp.lower != cp.upper, tag + ": couples a level to itself");
        require(finite(cp.rabi) && finite(cp.detuning) && finite(cp.wavenumber),
                tag + ": non-finite parameter");
    }
    for (std::size_t d = 0; d < decays.size(); ++d) {
        const auto& dc = decays[d];
        const std::string tag = "decay " + std::to_string(d);
        require(dc.from < n_levels && dc.to < n_levels, tag + ": level index out of range");
        require(dc.from != dc.to, tag + ": decays into itself");
        require(finite(dc.rate) && dc.rate >= 0.0, tag + ": rate must be finite and >= 0");
    }
    for (std::size_t d = 0; d < dephasings.size(); ++d) {
        const auto& dp = dephasings[d];
        const std::string tag = "dephasing " + std::to_string(d);
        require(dp.level < n_levels, tag + ": level index out of range");
        require(finite(dp.rate) && dp.rate >= 0.0, tag + ": rate must be finite and >= 0");
    }
}

FrameOffsets frame_offsets(const AtomicSystem& system) {
    system.validate();
    const std::size_t n = system.n_levels;

    struct Edge {
        std::size_t to;
        double detuning;
        double wavenumber;
    };
    std::vector<std::vector<Edge>> adjacency(n);
    for (const auto& cp : system.couplings) {
        adjacency[cp.lower].push_back({cp.upper, cp.detuning, cp.wavenumber});
        adjacency[cp.upper].push_back({cp.lower, -cp.detuning, -cp.wavenumber});
    }

    FrameOffsets offsets{RVector::Zero(static_cast<Eigen::Index>(n)),
                         RVector::Zero(static_cast<Eigen::Index>(n))};
    std::vector<bool> seen(n, false);
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root]) continue;
        seen[root] = true;
        std::queue<std::size_t> pending;
        pending.push(root);
        while (!pending.empty()) {
            const std::size_t at = pending.front();
            pending.pop();
            const auto ai = static_cast<Eigen::Index>(at);
            for (const auto& e : adjacency[at]) {
                const auto ti = static_cast<Eigen::Index>(e.to);
                const double det = offsets.detuning(ai) + e.detuning;
                const double kw = offsets.wavenumber(ai) + e.wavenumber;
                if (!seen[e.to]) {
                    seen[e.to] = true;
                    offsets.detuning(ti) = det;
                    offsets.wavenumber(ti) = kw;
                    pending.push(e.to);
                    continue;
                }
                const double det_scale = std::max({1.0, std::abs(det), std::abs(offsets.detuning(ti))});
                const double kw_scale = std::max({1.0, std::abs(kw), std::abs(offsets.wavenumber(ti))});
                if (std::abs(det - offsets.detuning(ti)) > kFrameTolerance * det_scale ||
                    std::abs(kw - offsets.wavenumber(ti)) > kFrameTolerance * kw_scale) {
                    std::ostringstream msg;
                    msg << "no consistent rotating frame: coupling loop through levels " << at
                        << " and " << e.to << " has conflicting cumulative detuning or wavenumber";
                    throw FrameError(msg.str());
                }
            }
        }
    }
    return offsets;
}

CMatrix build_hamiltonian(const AtomicSystem& system) {
    const FrameOffsets offsets = frame_offsets(system);
    const auto n = static_cast<Eigen::Index>(system.n_levels);
    CMatrix h = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) = -offsets.detuning(i);
    for (const auto& cp : system.couplings) {
        const auto a = static_cast<Eigen::Index>(cp.lower);
        const auto b = static_cast<Eigen::Index>(cp.upper);
        h(a, b) += 0.5 * cp.rabi;
        h(b, a) += 0.5 * cp.rabi;
    }
    return h;
}

RVector build_doppler_operator(const AtomicSystem& system) {
    return -frame_offsets(system).wavenumber;
}

CMatrix commutator_superoperator(const CMatrix& hamiltonian) {
    const auto n = hamiltonian.rows();
    const CMatrix id = CMatrix::Identity(n, n);
    const Complex minus_i(0.0, -1.0);
    return minus_i * (Eigen::kroneckerProduct(id, hamiltonian).eval() -
                      Eigen::kroneckerProduct(hamiltonian.transpose(), id).eval());
}

CMatrix dissipator_superoperator(const CMatrix& jump) {
    const auto n = jump.rows();
    const CMatrix id = CMatrix::Identity(n, n);
    const CMatrix ldl = jump.adjoint() * jump;
    return Eigen::kroneckerProduct(jump.conjugate(), jump).eval() -
           0.5 * Eigen::kroneckerProduct(id, ldl).eval() -
           0.5 * Eigen::kroneckerProduct(ldl.transpose(), id).eval();
}

LiouvillianPair build_liouvillian_pair(const AtomicSystem& system) {
    const CMatrix h = build_hamiltonian(system);
    const RVector k = build_doppler_operator(system);
    const auto n = static_cast<Eigen::Index>(system.n_levels);

    LiouvillianPair pair;
    pair.dim = system.n_levels;
    pair.g0 = commutator_superoperator(h);
    for (const auto& dc : system.decays) {
        if (dc.rate == 0.0) continue;
        CMatrix jump = CMatrix::Zero(n, n);
        jump(static_cast<Eigen::Index>(dc.to), static_cast<Eigen::Index>(dc.from)) = std::sqrt(dc.rate);
        pair.g0 += dissipator_superoperator(jump);
    }
    for (const auto& dp : system.dephasings) {
        if (dp.rate == 0.0) continue;
        CMatrix jump = CMatrix::Zero(n, n);
        const auto l = static_cast<Eigen::Index>(dp.level);
        jump(l, l) = std::sqrt(dp.rate);
        pair.g0 += dissipator_superoperator(jump);
    }

    // -i [K, X] with K diagonal only couples each coherence to itself.
    pair.gv = CMatrix::Zero(n * n, n * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            pair.gv(i + n * j, i + n * j) = Complex(0.0, -(k(i) - k(j)));
        }
    }
    return pair;
}

CVector vectorize(const CMatrix& m) {
    return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvectorize(const CVector& x, std::size_t n) {
    const auto ni = static_cast<Eigen::Index>(n);
    if (x.size() != ni * ni) {
        throw DimensionError("cannot unvectorize a length-" + std::to_string(x.size()) +
                             " vector into a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    }
    return Eigen::Map<const CMatrix>(x.data(), ni, ni);
}

CMatrix unvectorize(const CVector& x) {
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(x.size()))));
    return unvectorize(x, n);
}

CVector trace_functional(std::size_t n) {
    return vectorize(CMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

DensityMatrix DensityMatrix::from_raw(const CMatrix& raw) {
    if (raw.rows() != raw.cols() || raw.rows() == 0) {
        throw DimensionError("density matrix must be square and non-empty");
    }
    if (!raw.allFinite()) throw NumericFailureError("density matrix has non-finite entries");
    const Complex tr = raw.trace();
    const double scale = raw.cwiseAbs().maxCoeff();
    if (scale == 0.0 || std::abs(tr) < 1e-12 * scale) {
        throw NonNormalizableError("state has vanishing trace and cannot be normalized");
    }
    // Normalize first so an arbitrary global phase of a null vector is removed
    // before the Hermitian part is taken.
    const CMatrix scaled = raw / tr;
    DensityMatrix rho;
    rho.raw_trace_ = tr;
    rho.hermiticity_defect_ = (scaled - scaled.adjoint()).cwiseAbs().maxCoeff();
    rho.data_ = 0.5 * (scaled + scaled.adjoint());
    rho.data_ /= rho.data_.trace().real();
    return rho;
}

DensityMatrix DensityMatrix::from_vector(const CVector& raw, std::size_t n) {
    return from_raw(unvectorize(raw, n));
}

DensityMatrix DensityMatrix::from_vector(const CVector& raw) {
    return from_raw(unvectorize(raw));
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("max_abs_diff: shape mismatch");
    }
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace doppler
