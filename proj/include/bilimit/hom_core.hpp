#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace bilimit {

using Point = std::vector<double>;

/// Scalar function on R^n.
using ScalarFn = std::function<double(std::span<const double>)>;

/// Vector field on R^n; writes dim(x) components into the output span.
using FieldFn = std::function<void(std::span<const double>, std::span<double>)>;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// sign(w)|w|^r, with the convention signed_pow(0, r) = 0 for every r.
double signed_pow(double w, double r);

/// Derivative r|w|^(r-1) of signed_pow with respect to w (w != 0 when r < 1).
double signed_pow_derivative(double w, double r);

/// Strictly positive exponents attached to each coordinate.
class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(std::vector<double> entries);

    static WeightVector uniform(std::size_t n, double value = 1.0);

    std::size_t size() const { return entries_.size(); }
    double operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<double>& entries() const { return entries_; }
    double max() const;

    bool operator==(const WeightVector&) const = default;

private:
    std::vector<double> entries_;
};

/// lambda^r <> x, componentwise lambda^{r_i} x_i.
Point dilate(double lambda, const WeightVector& r, std::span<const double> x);
void dilate_into(double lambda, const WeightVector& r, std::span<const double> x,
                 std::span<double> out);

/// |x|_r = sum_i |x_i|^{1/r_i}.
double hom_norm(std::span<const double> x, const WeightVector& r);

struct PolarDecomposition {
    double lambda = 0.0;
    Point theta;
};

PolarDecomposition polar_decompose(std::span<const double> x, const WeightVector& r);

/// a(1+b)/(1+a): behaves like a when both arguments are small and like b when both are large.
double interp_H(double a, double b);

struct BiLimitSignature {
    WeightVector r0;
    double d0 = 0.0;
    WeightVector r_inf;
    double d_inf = 0.0;

    std::size_t dim() const { return r0.size(); }
    /// Single-weight, single-degree signature (standard homogeneity).
    static BiLimitSignature standard(const WeightVector& r, double d);
};

void validate_signature(const BiLimitSignature& sig);

/// Evaluatable scalar function with its bi-limit signature and limit approximations.
struct HomFunction {
    ScalarFn eval;
    BiLimitSignature sig;
    ScalarFn approx0;
    ScalarFn approx_inf;

    double operator()(std::span<const double> x) const { return eval(x); }
    bool has_approx0() const { return static_cast<bool>(approx0); }
    bool has_approx_inf() const { return static_cast<bool>(approx_inf); }

    /// f with both approximations equal to f itself (standard homogeneity with one weight).
    static HomFunction standard(ScalarFn f, const WeightVector& r, double d);
};

/// Vector field whose component i carries degrees d0 + r0[i] and d_inf + r_inf[i].
struct HomVectorField {
    FieldFn eval;
    BiLimitSignature sig;
    FieldFn approx0;
    FieldFn approx_inf;

    std::size_t dim() const { return sig.dim(); }
    Point operator()(std::span<const double> x) const;
    /// Component i as a scalar HomFunction with the shifted degrees.
    HomFunction component(std::size_t i) const;
};

/// Product phi*zeta. Each limit needs a k > 0 with k r_phi = r_zeta; the product then has
/// weight r_zeta and degree k d_phi + d_zeta at that limit.
HomFunction product(const HomFunction& phi, const HomFunction& zeta);

/// Sum phi+zeta. At each limit one term must dominate through the degree/weight ratios, or
/// the ratios must coincide, in which case the approximations add.
HomFunction sum(const HomFunction& phi, const HomFunction& zeta);

/// zeta o phi for scalar zeta with unit weight; degree d_zeta d_phi / r_zeta at each limit.
HomFunction compose(const HomFunction& zeta, const HomFunction& phi);

/// x -> integral_0^{x_i} phi(x_1..s..x_n) ds, evaluated by Gauss-Kronrod quadrature.
/// The result has degrees d + r_i at both limits.
HomFunction integral_along(const HomFunction& phi, std::size_t i);

/// x -> interp_H(phi0(x), phi_inf(x)) for positive definite standard-homogeneous phi0, phi_inf.
HomFunction blend_positive_definite(const HomFunction& phi0, const HomFunction& phi_inf,
                                    std::size_t sphere_points = 256, unsigned seed = 7);

}  // namespace bilimit
