#include "bilimit/hom_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bilimit/sampling.hpp"

namespace bilimit {

double signed_pow(double w, double r) {
    if (w == 0.0) return 0.0;
    const double m = std::pow(std::fabs(w), r);
    return w > 0.0 ? m : -m;
}

double signed_pow_derivative(double w, double r) {
    if (r == 0.0) return 0.0;
    if (r == 1.0) return 1.0;
    return r * std::pow(std::fabs(w), r - 1.0);
}

WeightVector::WeightVector(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw PreconditionError("weight vector must have at least one entry");
    for (double e : entries_) {
        if (!(e > 0.0) || !std::isfinite(e))
            throw PreconditionError("weight entries must be finite and strictly positive");
    }
}

WeightVector WeightVector::uniform(std::size_t n, double value) {
    return WeightVector(std::vector<double>(n, value));
}

double WeightVector::max() const { return *std::max_element(entries_.begin(), entries_.end()); }

static void check_dim(const WeightVector& r, std::size_t n) {
    if (r.size() != n)
        throw PreconditionError("dimension mismatch: point has " + std::to_string(n) +
                                " coordinates, weight has " + std::to_string(r.size()));
}

void dilate_into(double lambda, const WeightVector& r, std::span<const double> x,
                 std::span<double> out) {
    if (!(lambda > 0.0)) throw PreconditionError("dilation factor must be positive");
    check_dim(r, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::pow(lambda, r[i]) * x[i];
}

Point dilate(double lambda, const WeightVector& r, std::span<const double> x) {
    Point out(x.size());
    dilate_into(lambda, r, x, out);
    return out;
}

double hom_norm(std::span<const double> x, const WeightVector& r) {
    check_dim(r, x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) s += std::pow(std::fabs(x[i]), 1.0 / r[i]);
    }
    return s;
}

PolarDecomposition polar_decompose(std::span<const double> x, const WeightVector& r) {
    const double lambda = hom_norm(x, r);
    if (lambda == 0.0) throw DomainError("polar decomposition undefined at origin");
    return {lambda, dilate(1.0 / lambda, r, x)};
}

double interp_H(double a, double b) {
    if (a < 0.0 || b < 0.0) throw DomainError("interp_H requires nonnegative arguments");
    return a * (1.0 + b) / (1.0 + a);
}

BiLimitSignature BiLimitSignature::standard(const WeightVector& r, double d) {
    return {r, d, r, d};
}

void validate_signature(const BiLimitSignature& sig) {
    if (sig.r0.size() != sig.r_inf.size())
        throw PreconditionError("signature weights r0 and r_inf differ in length");
}

HomFunction HomFunction::standard(ScalarFn f, const WeightVector& r, double d) {
    HomFunction h{f, BiLimitSignature::standard(r, d), f, f};
    return h;
}

Point HomVectorField::operator()(std::span<const double> x) const {
    Point out(x.size());
    eval(x, out);
    return out;
}

static ScalarFn pick_component(const FieldFn& f, std::size_t i) {
    if (!f) return {};
    return [f, i](std::span<const double> x) {
        Point out(x.size());
        f(x, out);
        return out[i];
    };
}

HomFunction HomVectorField::component(std::size_t i) const {
    if (i >= dim()) throw PreconditionError("vector field component out of range");
    HomFunction h;
    h.eval = pick_component(eval, i);
    h.approx0 = pick_component(approx0, i);
    h.approx_inf = pick_component(approx_inf, i);
    h.sig = {sig.r0, sig.d0 + sig.r0[i], sig.r_inf, sig.d_inf + sig.r_inf[i]};
    return h;
}

namespace {

constexpr double kCompatTol = 1e-9;

// k with k*a = b componentwise, or a negative value if none exists.
double proportionality(const WeightVector& a, const WeightVector& b) {
    if (a.size() != b.size()) return -1.0;
    const double k = b[0] / a[0];
    for (std::size_t j = 1; j < a.size(); ++j) {
        if (std::fabs(k * a[j] - b[j]) > kCompatTol * std::max(1.0, std::fabs(b[j]))) return -1.0;
    }
    return k;
}

ScalarFn multiply(const ScalarFn& f, const ScalarFn& g) {
    if (!f || !g) return {};
    return [f, g](std::span<const double> x) { return f(x) * g(x); };
}

ScalarFn add(const ScalarFn& f, const ScalarFn& g) {
    if (!f || !g) return {};
    return [f, g](std::span<const double> x) { return f(x) + g(x); };
}

enum class Dominance { First, Second, Equal, None };

// Compares degree/weight ratios; at the 0-limit the smaller ratio dominates, at infinity the larger.
Dominance compare_ratios(double d_phi, const WeightVector& r_phi, double d_zeta,
                         const WeightVector& r_zeta, bool at_zero) {
    bool all_first = true, all_second = true, all_equal = true;
    for (std::size_t j = 0; j < r_phi.size(); ++j) {
        const double a = d_phi / r_phi[j];
        const double b = d_zeta / r_zeta[j];
        const double tol = kCompatTol * std::max({1.0, std::fabs(a), std::fabs(b)});
        if (std::fabs(a - b) > tol) all_equal = false;
        const bool first = at_zero ? (a < b - tol) : (a > b + tol);
        const bool second = at_zero ? (b < a - tol) : (b > a + tol);
        all_first = all_first && first;
        all_second = all_second && second;
    }
    if (all_equal) return Dominance::Equal;
    if (all_first) return Dominance::First;
    if (all_second) return Dominance::Second;
    return Dominance::None;
}

}  // namespace

HomFunction product(const HomFunction& phi, const HomFunction& zeta) {
    if (phi.sig.dim() != zeta.sig.dim()) throw PreconditionError("product: dimension mismatch");
    const double k0 = proportionality(phi.sig.r0, zeta.sig.r0);
    const double kinf = proportionality(phi.sig.r_inf, zeta.sig.r_inf);
    if (k0 <= 0.0 || kinf <= 0.0)
        throw PreconditionError("product: weights are not proportional (k r_phi = r_zeta fails)");
    HomFunction out;
    out.eval = multiply(phi.eval, zeta.eval);
    out.approx0 = multiply(phi.approx0, zeta.approx0);
    out.approx_inf = multiply(phi.approx_inf, zeta.approx_inf);
    out.sig = {zeta.sig.r0, k0 * phi.sig.d0 + zeta.sig.d0, zeta.sig.r_inf,
               kinf * phi.sig.d_inf + zeta.sig.d_inf};
    return out;
}

HomFunction sum(const HomFunction& phi, const HomFunction& zeta) {
    if (phi.sig.dim() != zeta.sig.dim()) throw PreconditionError("sum: dimension mismatch");
    HomFunction out;
    out.eval = add(phi.eval, zeta.eval);

    switch (compare_ratios(phi.sig.d0, phi.sig.r0, zeta.sig.d0, zeta.sig.r0, true)) {
        case Dominance::First:
            out.sig.r0 = phi.sig.r0, out.sig.d0 = phi.sig.d0, out.approx0 = phi.approx0;
            break;
        case Dominance::Second:
            out.sig.r0 = zeta.sig.r0, out.sig.d0 = zeta.sig.d0, out.approx0 = zeta.approx0;
            break;
        case Dominance::Equal:
            out.sig.r0 = phi.sig.r0, out.sig.d0 = phi.sig.d0;
            out.approx0 = add(phi.approx0, zeta.approx0);
            break;
        case Dominance::None:
            throw PreconditionError("sum: no term dominates at the 0-limit and ratios differ");
    }
    switch (compare_ratios(phi.sig.d_inf, phi.sig.r_inf, zeta.sig.d_inf, zeta.sig.r_inf, false)) {
        case Dominance::First:
            out.sig.r_inf = phi.sig.r_inf, out.sig.d_inf = phi.sig.d_inf;
            out.approx_inf = phi.approx_inf;
            break;
        case Dominance::Second:
            out.sig.r_inf = zeta.sig.r_inf, out.sig.d_inf = zeta.sig.d_inf;
            out.approx_inf = zeta.approx_inf;
            break;
        case Dominance::Equal:
            out.sig.r_inf = phi.sig.r_inf, out.sig.d_inf = phi.sig.d_inf;
            out.approx_inf = add(phi.approx_inf, zeta.approx_inf);
            break;
        case Dominance::None:
            throw PreconditionError("sum: no term dominates at the infinity-limit and ratios differ");
    }
    return out;
}

HomFunction compose(const HomFunction& zeta, const HomFunction& phi) {
    if (zeta.sig.dim() != 1) throw PreconditionError("compose: outer function must be scalar");
    if (!(phi.sig.d0 > 0.0) || !(phi.sig.d_inf > 0.0))
        throw PreconditionError("compose: inner degrees must be positive");
    if (zeta.sig.d0 < 0.0 || zeta.sig.d_inf < 0.0)
        throw PreconditionError("compose: outer degrees must be nonnegative");
    auto chain = [](const ScalarFn& outer, const ScalarFn& inner) -> ScalarFn {
        if (!outer || !inner) return {};
        return [outer, inner](std::span<const double> x) {
            const double v = inner(x);
            return outer(std::span<const double>(&v, 1));
        };
    };
    HomFunction out;
    out.eval = chain(zeta.eval, phi.eval);
    out.approx0 = chain(zeta.approx0, phi.approx0);
    out.approx_inf = chain(zeta.approx_inf, phi.approx_inf);
    out.sig = {phi.sig.r0, zeta.sig.d0 * phi.sig.d0 / zeta.sig.r0[0], phi.sig.r_inf,
               zeta.sig.d_inf * phi.sig.d_inf / zeta.sig.r_inf[0]};
    return out;
}

HomFunction integral_along(const HomFunction& phi, std::size_t i) {
    if (i >= phi.sig.dim()) throw PreconditionError("integral_along: coordinate out of range");
    auto integrate = [i](const ScalarFn& f) -> ScalarFn {
        if (!f) return {};
        return [f, i](std::span<const double> x) {
            Point y(x.begin(), x.end());
            auto g = [&](double s) {
                y[i] = s;
                return f(y);
            };
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, x[i], 15,
                                                                                  1e-13);
        };
    };
    HomFunction out;
    out.eval = integrate(phi.eval);
    out.approx0 = integrate(phi.approx0);
    out.approx_inf = integrate(phi.approx_inf);
    out.sig = {phi.sig.r0, phi.sig.d0 + phi.sig.r0[i], phi.sig.r_inf,
               phi.sig.d_inf + phi.sig.r_inf[i]};
    return out;
}

HomFunction blend_positive_definite(const HomFunction& phi0, const HomFunction& phi_inf,
                                    std::size_t sphere_points, unsigned seed) {
    if (phi0.sig.dim() != phi_inf.sig.dim())
        throw PreconditionError("blend: dimension mismatch");
    if (!(phi0.sig.d0 > 0.0) || !(phi_inf.sig.d_inf > 0.0))
        throw PreconditionError("blend: degrees must be positive");
    auto check_pd = [&](const ScalarFn& f, const WeightVector& r, const char* name) {
        for (const Point& theta : sphere_samples(r, sphere_points, seed)) {
            if (!(f(theta) > 0.0))
                throw PreconditionError(std::string("blend: ") + name +
                                        " is not positive definite on sphere samples");
        }
    };
    check_pd(phi0.eval, phi0.sig.r0, "phi0");
    check_pd(phi_inf.eval, phi_inf.sig.r_inf, "phi_inf");

    const ScalarFn f0 = phi0.eval;
    const ScalarFn finf = phi_inf.eval;
    HomFunction out;
    out.eval = [f0, finf](std::span<const double> x) { return interp_H(f0(x), finf(x)); };
    out.approx0 = f0;
    out.approx_inf = finf;
    out.sig = {phi0.sig.r0, phi0.sig.d0, phi_inf.sig.r_inf, phi_inf.sig.d_inf};
    return out;
}

}  // namespace bilimit
