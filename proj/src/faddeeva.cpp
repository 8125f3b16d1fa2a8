#include "doppler/faddeeva.hpp"

#include <cmath>

namespace doppler {

namespace {

constexpr double kTwoOverSqrtPi = 1.12837916709551257390;

// First quadrant, x >= 0 and y >= 0.
std::complex<double> faddeeva_first_quadrant(double x, double y) {
    const double xs = x / 6.3;
    const double ys = y / 4.4;
    double qrho = xs * xs + ys * ys;
    const double xquad = x * x - y * y;
    const double yquad = 2.0 * x * y;

    if (qrho < 0.085264) {
        // Taylor series of erfc around the origin, then w = exp(-z^2) erfc(-iz).
        qrho = (1.0 - 0.85 * ys) * std::sqrt(qrho);
        const int n = static_cast<int>(std::lround(6.0 + 72.0 * qrho));
        int j = 2 * n + 1;
        double xsum = 1.0 / j;
        double ysum = 0.0;
        for (int i = n; i >= 1; --i) {
            j -= 2;
            const double xaux = (xsum * xquad - ysum * yquad) / i;
            ysum = (xsum * yquad + ysum * xquad) / i;
            xsum = xaux + 1.0 / j;
        }
        const double u1 = -kTwoOverSqrtPi * (xsum * y + ysum * x) + 1.0;
        const double v1 = kTwoOverSqrtPi * (xsum * x - ysum * y);
        const double daux = std::exp(-xquad);
        const double u2 = daux * std::cos(yquad);
        const double v2 = -daux * std::sin(yquad);
        return {u1 * u2 - v1 * v2, u1 * v2 + v1 * u2};
    }

    // Laplace continued fraction, shifted by h into the upper half-plane close
    // to the origin and combined with a truncated Taylor series there.
    double h = 0.0;
    int kapn = 0;
    int nu = 0;
    if (qrho > 1.0) {
        qrho = std::sqrt(qrho);
        nu = static_cast<int>(3.0 + 1442.0 / (26.0 * qrho + 77.0));
    } else {
        qrho = (1.0 - ys) * std::sqrt(1.0 - qrho);
        h = 1.88 * qrho;
        kapn = static_cast<int>(std::lround(7.0 + 34.0 * qrho));
        nu = static_cast<int>(std::lround(16.0 + 26.0 * qrho));
    }
    const double h2 = 2.0 * h;
    const bool shifted = h > 0.0;
    double qlambda = shifted ? std::pow(h2, kapn) : 0.0;

    double rx = 0.0, ry = 0.0, sx = 0.0, sy = 0.0;
    for (int n = nu; n >= 0; --n) {
        const double np1 = n + 1.0;
        double tx = y + h + np1 * rx;
        double ty = x - np1 * ry;
        const double c = 0.5 / (tx * tx + ty * ty);
        rx = c * tx;
        ry = c * ty;
        if (shifted && n <= kapn) {
            tx = qlambda + sx;
            sx = rx * tx - ry * sy;
            sy = ry * tx + rx * sy;
            qlambda /= h2;
        }
    }
    double u = kTwoOverSqrtPi * (shifted ? sx : rx);
    const double v = kTwoOverSqrtPi * (shifted ? sy : ry);
    if (y == 0.0) u = std::exp(-x * x);
    return {u, v};
}

std::complex<double> faddeeva_upper(double x, double y) {
    const std::complex<double> w = faddeeva_first_quadrant(std::abs(x), y);
    return x < 0.0 ? std::conj(w) : w;
}

}  // namespace

std::complex<double> faddeeva_w(std::complex<double> z) {
    if (z.imag() >= 0.0) return faddeeva_upper(z.real(), z.imag());
    return 2.0 * std::exp(-z * z) - faddeeva_upper(-z.real(), -z.imag());
}

}  // namespace doppler
