#include "fqr/loss.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fqr {

const char* kernel_name(Kernel k) {
    switch (k) {
        case Kernel::Gaussian: return "gaussian";
        case Kernel::Uniform: return "uniform";
        case Kernel::Epanechnikov: return "epanechnikov";
    }
    return "?";
}

Kernel kernel_from_name(const char* name) {
    if (std::strcmp(name, "gaussian") == 0) return Kernel::Gaussian;
    if (std::strcmp(name, "uniform") == 0) return Kernel::Uniform;
    if (std::strcmp(name, "epanechnikov") == 0) return Kernel::Epanechnikov;
    throw std::invalid_argument(std::string("unknown kernel: ") + name);
}

SmoothedLossSpec::SmoothedLossSpec(double tau_, double bandwidth_, Kernel kernel_)
    : tau(tau_), bandwidth(bandwidth_), kernel(kernel_) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0,1)");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("probability must be in (0,1)");
    // Acklam's rational approximation, then one Halley step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, x;
    if (prob < plow) {
        q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= 1.0 - plow) {
        q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - prob;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double check_loss(double tau, double u) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

namespace {

// Kernel CDF G(x) = int_{-inf}^x K.
double kernel_cdf(Kernel k, double x) {
    switch (k) {
        case Kernel::Gaussian:
            return normal_cdf(x);
        case Kernel::Uniform:
            if (x <= -1.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return 0.5 * (x + 1.0);
        case Kernel::Epanechnikov:
            if (x <= -1.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return 0.75 * (x - x * x * x / 3.0) + 0.5;
    }
    return 0.0;
}

double kernel_pdf(Kernel k, double x) {
    switch (k) {
        case Kernel::Gaussian:
            return normal_pdf(x);
        case Kernel::Uniform:
            return std::abs(x) <= 1.0 ? 0.5 : 0.0;
        case Kernel::Epanechnikov:
            return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
    }
    return 0.0;
}

// Partial first moment M(x) = int_{-inf}^x s K(s) ds; M(+inf) = 0 for the
// symmetric kernels here.
double kernel_partial_moment(Kernel k, double x) {
    switch (k) {
        case Kernel::Gaussian:
            return -normal_pdf(x);
        case Kernel::Uniform:
            if (x <= -1.0) return 0.0;
            if (x >= 1.0) return 0.0;
            return 0.25 * (x * x - 1.0);
        case Kernel::Epanechnikov:
            if (x <= -1.0) return 0.0;
            if (x >= 1.0) return 0.0;
            return 0.75 * (0.5 * x * x - 0.25 * x * x * x * x - 0.25);
    }
    return 0.0;
}

// Half-width beyond which the kernel mass is negligible for quadrature.
double kernel_reach(Kernel k) { return k == Kernel::Gaussian ? 10.0 : 1.0; }

}  // namespace

// (rho_tau * K_h)(u) = tau u - u G(-u/h) - h M(-u/h); for the Gaussian kernel
// this equals (h/2) l_G(u/h) + (tau - 1/2) u with
// l_G(x) = sqrt(2/pi) e^{-x^2/2} + x(1 - 2 Phi(-x)).
double smoothed_check(const SmoothedLossSpec& spec, double u) {
    const double h = spec.bandwidth;
    const double x = -u / h;
    return spec.tau * u - u * kernel_cdf(spec.kernel, x) -
           h * kernel_partial_moment(spec.kernel, x);
}

double smoothed_grad_scalar(const SmoothedLossSpec& spec, double r) {
    return kernel_cdf(spec.kernel, r / spec.bandwidth) - spec.tau;
}

double smoothed_hess_scalar(const SmoothedLossSpec& spec, double r) {
    return kernel_pdf(spec.kernel, r / spec.bandwidth) / spec.bandwidth;
}

double default_bandwidth(int K, int p, int d, int n) {
    if (n <= 0) throw std::invalid_argument("default_bandwidth: n must be positive");
    if (K <= 0 || p < 0 || d <= 0) {
        throw std::invalid_argument("default_bandwidth: K, d must be positive and p >= 0");
    }
    return std::pow(static_cast<double>(K + p + d) / n, 0.4);
}

namespace {

double simpson(const SmoothedLossSpec& spec, double u, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    auto f = [&](double v) {
        return check_loss(spec.tau, v) *
               kernel_pdf(spec.kernel, (v - u) / spec.bandwidth) / spec.bandwidth;
    };
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
}

double adaptive_simpson(const SmoothedLossSpec& spec, double u, double lo, double hi,
                        double whole, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double left = simpson(spec, u, lo, mid);
    const double right = simpson(spec, u, mid, hi);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(spec, u, lo, mid, left, tol * 0.5, depth - 1) +
           adaptive_simpson(spec, u, mid, hi, right, tol * 0.5, depth - 1);
}

}  // namespace

double smoothed_check_numeric(const SmoothedLossSpec& spec, double u) {
    const double h = spec.bandwidth;
    const double reach = kernel_reach(spec.kernel) * h;
    // split at the check-loss kink (v = 0) so the integrand is smooth per piece
    double points[4] = {u - reach, 0.0, u, u + reach};
    if (points[1] > points[2]) std::swap(points[1], points[2]);
    points[1] = std::min(std::max(points[1], points[0]), points[3]);
    points[2] = std::min(std::max(points[2], points[0]), points[3]);
    double total = 0.0;
    for (int seg = 0; seg < 3; ++seg) {
        const double lo = points[seg], hi = points[seg + 1];
        if (hi <= lo) continue;
        total += adaptive_simpson(spec, u, lo, hi, simpson(spec, u, lo, hi), 1e-12, 40);
    }
    return total;
}

}  // namespace fqr
