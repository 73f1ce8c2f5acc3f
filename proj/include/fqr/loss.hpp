#pragma once

namespace fqr {

enum class Kernel {
    Gaussian,
    Uniform,
    Epanechnikov,
};

const char* kernel_name(Kernel k);
Kernel kernel_from_name(const char* name);  // throws on unknown name

// Quantile level, smoothing bandwidth, and kernel of the convolution-smoothed
// check loss.  Validated on construction: 0 < tau < 1, bandwidth > 0.
struct SmoothedLossSpec {
    double tau;
    double bandwidth;
    Kernel kernel = Kernel::Gaussian;

    SmoothedLossSpec(double tau_, double bandwidth_, Kernel kernel_ = Kernel::Gaussian);
};

// Standard normal CDF / pdf via erfc; relative error near machine precision.
double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double prob);  // Acklam/Newton refined inverse CDF

// Plain check loss rho_tau(u) = u (tau - 1{u<0}).
double check_loss(double tau, double u);

// Smoothed check loss (rho_tau * K_h)(u); argument u = observed - fitted.
// Convex, twice differentiable, and >= rho_tau(u) for the symmetric kernels
// implemented here.
double smoothed_check(const SmoothedLossSpec& spec, double u);

// First derivative factor of the smoothed loss as it enters the estimating
// equation: G_h(r) - tau with r = fitted - observed (note the sign flip
// relative to smoothed_check's argument).  Monotone in r with range
// (-tau, 1-tau).
double smoothed_grad_scalar(const SmoothedLossSpec& spec, double r);

// Second derivative factor K_h(r) = K(r/h)/h >= 0, symmetric in r.
double smoothed_hess_scalar(const SmoothedLossSpec& spec, double r);

// Plug-in bandwidth ((K+p+d)/n)^{2/5}.
double default_bandwidth(int K, int p, int d, int n);

// Direct numeric convolution of rho_tau with the scaled kernel, by adaptive
// Simpson quadrature over the kernel's effective support.  Slow; serves as
// the kernel-agnostic reference for the closed forms above.
double smoothed_check_numeric(const SmoothedLossSpec& spec, double u);

}  // namespace fqr
