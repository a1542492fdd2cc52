#include "bilimit/power_terms.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bilimit/hom_core.hpp"

namespace bilimit {

namespace {

double snap_zero(double v) { return std::fabs(v) < 1e-12 ? 0.0 : v; }

double blend_integrand(double A, double B, double s) {
    const double a = std::pow(s, A);
    return a * (1.0 + std::pow(s, B)) / (1.0 + a);
}

}  // namespace

PowerPair::PowerPair(double a, double b) : a_(a), b_(b) {
    if (std::fabs(a_ - b_) < 1e-12) b_ = a_;
    if (a_ < 0.0 || b_ < 0.0) throw PreconditionError("power pair exponents must be nonnegative");
    if (a_ > b_) blend_ = std::make_shared<const RateIntegral>(a_, b_, RateIntegral::Form::Blend);
}

double PowerPair::rate(double h, Branch br) const {
    if (blend_) return h < 0.0 ? -blend_->derivative(h, br) : blend_->derivative(h, br);
    double v = 0.0;
    if (use_a(br)) v += signed_pow(h, a_);
    if (use_b(br)) v += signed_pow(h, b_);
    return v;
}

double PowerPair::potential(double h, Branch br) const {
    const double m = std::fabs(h);
    if (blend_) return blend_->value(m, br);
    double v = 0.0;
    if (use_a(br)) v += std::pow(m, a_ + 1.0) / (a_ + 1.0);
    if (use_b(br)) v += std::pow(m, b_ + 1.0) / (b_ + 1.0);
    return v;
}

double PowerPair::rate_derivative(double h, Branch br) const {
    if (blend_) {
        const double x = std::fabs(h);
        switch (br) {
            case Branch::Zero:
                return blend_->zero_coefficient() * (a_ + 1.0) * signed_pow_derivative(x, a_);
            case Branch::Infinity:
                return blend_->infinity_coefficient() * (b_ + 1.0) * signed_pow_derivative(x, b_);
            case Branch::Full: break;
        }
        if (x == 0.0) return blend_->zero_coefficient() * (a_ + 1.0) * signed_pow_derivative(0.0, a_);
        const double xa = std::pow(x, a_), xb = std::pow(x, b_);
        return blend_->derivative(x, Branch::Full) * (a_ / (1.0 + xa) + b_ * xb / (1.0 + xb)) / x;
    }
    double v = 0.0;
    if (use_a(br)) v += signed_pow_derivative(h, a_);
    if (use_b(br)) v += signed_pow_derivative(h, b_);
    return v;
}

double PowerPair::bregman(double s, double q, Branch br) const {
    return potential(s, br) - potential(q, br) - rate(q, br) * (s - q);
}

struct RateIntegral::Table {
    static constexpr double vmin = -60.0;
    static constexpr double vmax = 60.0;
    static constexpr double h = 0.02;
    std::vector<double> y, d1, d2;  // log F and its first two derivatives in v = log x

    double eval(double x) const {
        const double v = std::log(x);
        if (v <= vmin) return std::exp(y.front() + d1.front() * (v - vmin));
        if (v >= vmax) return std::exp(y.back() + d1.back() * (v - vmax));
        const double u = (v - vmin) / h;
        std::size_t k = static_cast<std::size_t>(u);
        if (k + 1 >= y.size()) k = y.size() - 2;
        const double t = u - static_cast<double>(k);
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
        const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
        const double H2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
        const double H3 = 0.5 * (t3 - 2 * t4 + t5);
        const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
        const double H5 = 10 * t3 - 15 * t4 + 6 * t5;
        const double lf = y[k] * H0 + h * d1[k] * H1 + h * h * d2[k] * H2 + h * h * d2[k + 1] * H3 +
                          h * d1[k + 1] * H4 + y[k + 1] * H5;
        return std::exp(lf);
    }
};

RateIntegral::RateIntegral(double A, double B, Form form)
    : A_(snap_zero(A)), B_(snap_zero(B)), form_(form) {
    if (A_ < 0.0 || B_ < 0.0) throw PreconditionError("rate integral exponents must be >= 0");
    if (std::fabs(A_ - B_) < 1e-12) B_ = A_;
    if (form_ == Form::PowerSum) {
        if (A_ > B_) throw PreconditionError("power-sum form requires A <= B");
        c0_ = A_ == B_ ? 2.0 : 1.0;
        cinf_ = c0_;
        return;
    }
    // interp_H(s^A, s^B) ~ c s^A near 0 and ~ c' s^B near infinity; the constants pick up a
    // factor when an exponent vanishes (s^0 = 1 does not tend to 0 or infinity).
    const double near0 = (B_ > 0.0 ? 1.0 : 2.0) / (A_ > 0.0 ? 1.0 : 2.0);
    const double nearinf = (A_ > 0.0 ? 1.0 : 0.5) * (B_ > 0.0 ? 1.0 : 2.0);
    c0_ = near0 / (A_ + 1.0);
    cinf_ = nearinf / (B_ + 1.0);
    if (A_ == 0.0 || A_ == B_) return;

    auto tab = std::make_shared<Table>();
    const std::size_t nodes =
        static_cast<std::size_t>(std::lround((Table::vmax - Table::vmin) / Table::h)) + 1;
    tab->y.resize(nodes);
    tab->d1.resize(nodes);
    tab->d2.resize(nodes);
    const double a = A_, b = B_;
    auto in_log = [a, b](double v) {
        const double x = std::exp(v);
        return blend_integrand(a, b, x) * x;
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    double F = ts.integrate([a, b](double s) { return blend_integrand(a, b, s); }, 0.0,
                            std::exp(Table::vmin));
    for (std::size_t k = 0; k < nodes; ++k) {
        const double v = Table::vmin + Table::h * static_cast<double>(k);
        if (k > 0)
            F += boost::math::quadrature::gauss<double, 20>::integrate(in_log, v - Table::h, v);
        const double x = std::exp(v);
        const double g = blend_integrand(a, b, x);
        const double d1 = g * x / F;
        const double ta = std::pow(x, a) / (1.0 + std::pow(x, a));
        const double tb = std::pow(x, b) / (1.0 + std::pow(x, b));
        tab->y[k] = std::log(F);
        tab->d1[k] = d1;
        tab->d2[k] = d1 * (1.0 + a + b * tb - a * ta - d1);
    }
    table_ = std::move(tab);
}

double RateIntegral::magnitude(double x) const {
    if (x == 0.0) return 0.0;
    if (form_ == Form::PowerSum) return std::pow(x, A_ + 1.0) + std::pow(x, B_ + 1.0);
    if (A_ == B_) return std::pow(x, A_ + 1.0) / (A_ + 1.0);
    if (A_ == 0.0) return 0.5 * x + 0.5 * std::pow(x, B_ + 1.0) / (B_ + 1.0);
    return table_->eval(x);
}

double RateIntegral::value(double w, Branch br) const {
    const double x = std::fabs(w);
    double m = 0.0;
    switch (br) {
        case Branch::Full: m = magnitude(x); break;
        case Branch::Zero: m = c0_ * std::pow(x, A_ + 1.0); break;
        case Branch::Infinity: m = cinf_ * std::pow(x, B_ + 1.0); break;
    }
    return w < 0.0 ? -m : m;
}

double RateIntegral::derivative(double w, Branch br) const {
    const double x = std::fabs(w);
    switch (br) {
        case Branch::Full:
            if (form_ == Form::PowerSum)
                return (A_ + 1.0) * std::pow(x, A_) + (B_ + 1.0) * std::pow(x, B_);
            return interp_H(std::pow(x, A_), std::pow(x, B_));
        case Branch::Zero: return c0_ * (A_ + 1.0) * std::pow(x, A_);
        case Branch::Infinity: return cinf_ * (B_ + 1.0) * std::pow(x, B_);
    }
    return 0.0;
}

double RateIntegral::blend_integral_reference(double A, double B, double x) {
    if (x == 0.0) return 0.0;
    auto g = [A, B](double s) { return blend_integrand(A, B, s); };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double head = ts.integrate(g, 0.0, std::min(x, 1.0), 1e-14);
    if (x <= 1.0) return head;
    auto in_log = [A, B](double v) {
        const double s = std::exp(v);
        return blend_integrand(A, B, s) * s;
    };
    const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        in_log, 0.0, std::log(x), 25, 1e-14);
    return head + tail;
}

}  // namespace bilimit
