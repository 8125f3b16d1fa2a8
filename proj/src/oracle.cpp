#include "doppler/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doppler/errors.hpp"
#include "doppler/parallel.hpp"

namespace doppler {

namespace {

constexpr double kBorderedRcondFloor = 1e-13;

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void normalize_weights(std::vector<VelocityPoint>& points) {
    double total = 0.0;
    for (const auto& p : points) total += p.weight;
    for (auto& p : points) p.weight /= total;
}

}  // namespace

VelocityGrid make_grid(GridKind kind, std::size_t n_points, double v_th, double span) {
    require(v_th > 0.0 && std::isfinite(v_th), "grid: thermal velocity must be positive");
    VelocityGrid grid;
    grid.kind = kind;
    grid.v_th = v_th;

    if (kind == GridKind::Uniform) {
        require(n_points >= 3, "uniform grid needs at least 3 points");
        require(span > 0.0 && std::isfinite(span), "uniform grid span must be positive");
        grid.span = span;
        grid.points.resize(n_points);
        const double half = 0.5 * static_cast<double>(n_points - 1);
        for (std::size_t j = 0; j < n_points; ++j) {
            // Symmetric by construction: u_j = -u_{n-1-j} exactly.
            const double offset = static_cast<double>(j) - half;
            const double u = span * offset / half;
            grid.points[j] = {u * v_th, std::exp(-0.5 * u * u)};
        }
        normalize_weights(grid.points);
        return grid;
    }

    require(n_points >= 1, "Gauss-Hermite grid needs at least 1 point");
    const GaussHermiteRule rule = gauss_hermite_rule(n_points);
    grid.points.resize(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
        grid.points[j] = {rule.nodes[j] * v_th, rule.weights[j]};
    }
    normalize_weights(grid.points);
    return grid;
}

GaussHermiteRule gauss_hermite_rule(std::size_t n_points) {
    require(n_points >= 1, "Gauss-Hermite rule needs at least 1 node");
    const auto n = static_cast<Eigen::Index>(n_points);
    // Jacobi matrix of the monic probabilists' Hermite recurrence.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(n_points);
    rule.weights.resize(n_points);
    for (Eigen::Index k = 0; k < n; ++k) {
        rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
        const double v0 = solver.eigenvectors()(0, k);
        rule.weights[static_cast<std::size_t>(k)] = v0 * v0;
    }
    // Exact symmetry of the rule; removes eigensolver asymmetry at roundoff level.
    for (std::size_t k = 0; k < n_points / 2; ++k) {
        const std::size_t m = n_points - 1 - k;
        const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
        const double w = 0.5 * (rule.weights[m] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[m] = x;
        rule.weights[k] = rule.weights[m] = w;
    }
    if (n_points % 2 == 1) rule.nodes[n_points / 2] = 0.0;
    const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    for (auto& w : rule.weights) w /= total;
    return rule;
}

DensityMatrix direct_null_state(const CMatrix& g, const SpectralOptions& options) {
    if (g.rows() != g.cols() || g.rows() == 0) {
        throw DimensionError("generator must be a non-empty square matrix");
    }
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(g.rows()))));
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1.0);

    CMatrix bordered = g;
    bordered.row(0) = scale * trace_functional(n).transpose();
    CVector rhs = CVector::Zero(g.rows());
    rhs(0) = scale;

    Eigen::PartialPivLU<CMatrix> lu(bordered);
    // The rcond estimate can miss an exactly singular bordered matrix; the pivots do not.
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    const double pivot_ratio = pivots.minCoeff() / pivots.maxCoeff();
    if (!(lu.rcond() >= kBorderedRcondFloor) || !(pivot_ratio >= kBorderedRcondFloor)) {
        Eigen::ComplexEigenSolver<CMatrix> solver(g, false);
        const std::size_t zeros = count_zero_modes(solver.eigenvalues(), options.zero_mode_threshold);
        if (zeros == 1) return null_state(g, options);
        std::ostringstream msg;
        msg << "degenerate steady state: generator has " << zeros
            << " zero eigenvalues, expected exactly one (bordered rcond " << lu.rcond() << ")";
        throw DegeneracyError(zeros, msg.str());
    }
    return DensityMatrix::from_vector(lu.solve(rhs), n);
}

SampleResult sample_average(const LiouvillianPair& pair, const VelocityGrid& grid,
                            const SampleOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t count = grid.points.size();
    require(count > 0, "velocity grid is empty");

    std::vector<CVector> states(count);
    std::vector<double> residuals(count, 0.0);
    std::vector<char> excluded(count, 0);
    const std::size_t threads = std::max<std::size_t>(1, options.threads);

    parallel_for(count, threads, [&](std::size_t j) {
        const double v = grid.points[j].velocity;
        const CMatrix g = pair.g0 + v * pair.gv;
        try {
            const DensityMatrix rho = direct_null_state(g, options.spectral);
            states[j] = rho.vectorized();
            const double norm = g.norm();
            residuals[j] = norm > 0.0 ? (g * states[j]).norm() / norm : 0.0;
        } catch (Error& e) {
            if (e.kind() == ErrorKind::Degeneracy && options.exclude_degenerate) {
                excluded[j] = 1;
                return;
            }
            std::ostringstream ctx;
            ctx.precision(17);
            ctx << "velocity " << v << " um/us";
            e.add_context(ctx.str());
            throw;
        }
    });

    // Neumaier-compensated sum in ascending velocity order, whatever the storage order.
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grid.points[a].velocity < grid.points[b].velocity;
    });
    const Eigen::Index dim = pair.g0.rows();
    CVector sum = CVector::Zero(dim);
    CVector comp = CVector::Zero(dim);
    double weight_total = 0.0;
    SampleResult result;
    for (const std::size_t j : order) {
        if (excluded[j]) {
            result.stats.excluded_velocities.push_back(grid.points[j].velocity);
            continue;
        }
        weight_total += grid.points[j].weight;
        const CVector term = grid.points[j].weight * states[j];
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double parts[2] = {term(i).real(), term(i).imag()};
            double s[2] = {sum(i).real(), sum(i).imag()};
            double c[2] = {comp(i).real(), comp(i).imag()};
            for (int p = 0; p < 2; ++p) {
                const double t = s[p] + parts[p];
                c[p] += std::abs(s[p]) >= std::abs(parts[p]) ? (s[p] - t) + parts[p] : (parts[p] - t) + s[p];
                s[p] = t;
            }
            sum(i) = Complex(s[0], s[1]);
            comp(i) = Complex(c[0], c[1]);
        }
        result.stats.max_residual = std::max(result.stats.max_residual, residuals[j]);
    }
    if (weight_total <= 0.0) {
        throw DegeneracyError(0, "every grid point was excluded as degenerate");
    }
    result.rho = DensityMatrix::from_vector((sum + comp) / weight_total, pair.dim);

    const auto stop = std::chrono::steady_clock::now();
    result.stats.solve_count = count - result.stats.excluded_velocities.size();
    result.stats.wall_time_us = std::chrono::duration<double, std::micro>(stop - start).count();
    // Every sampled state is held until the ordered reduction, plus one
    // bordered system and its LU factors per worker.
    const std::size_t cbytes = sizeof(Complex);
    const auto d = static_cast<std::size_t>(dim);
    result.stats.peak_storage_bytes = count * d * cbytes + threads * 3 * d * d * cbytes;
    return result;
}

Complex quadrature_weight(Complex lam, const GaussHermiteRule& rule) {
    const double mag = std::abs(lam);
    if (mag == 0.0) return 1.0;
    if (std::abs(lam.imag()) <= 1e-12 * mag) {
        throw PoleOnAxisError(lam, "quadrature weight: real eigenvalue puts a pole on the velocity axis");
    }
    // Pole u0 = -1/lam lies on the side sign(Im lam); shift the contour the other way.
    const double a = lam.imag() > 0.0 ? 2.0 : -2.0;
    const Complex shift(0.0, -a);
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double t = rule.nodes[k];
        const Complex phase = std::exp(Complex(0.5 * a * a, a * t));
        const Complex term = rule.weights[k] * phase / (1.0 + lam * (t + shift));
        re += term.real();
        im += term.imag();
    }
    return {re, im};
}

Complex quadrature_weight(Complex lam, std::size_t n_points) {
    return quadrature_weight(lam, gauss_hermite_rule(n_points));
}

}  // namespace doppler
