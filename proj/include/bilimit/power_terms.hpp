#pragma once

#include <memory>
#include <vector>

namespace bilimit {

/// Which object to evaluate: the function itself or one of its limit approximations.
enum class Branch { Full, Zero, Infinity };

class RateIntegral;

/// Odd rate with exponent a at the origin and b at infinity. For a <= b it is the sum
/// h^a + h^b; for a > b it is the blend sign(h) interp_H(|h|^a, |h|^b), whose potential is
/// tabulated. The 0-approximation keeps the h^a term, the infinity-approximation the h^b term;
/// when a == b both approximations are the full sum.
class PowerPair {
public:
    PowerPair() = default;
    PowerPair(double a, double b);

    double a() const { return a_; }
    double b() const { return b_; }
    bool blended() const { return static_cast<bool>(blend_); }

    double rate(double h, Branch br) const;
    /// Even antiderivative of rate, zero at the origin.
    double potential(double h, Branch br) const;
    double rate_derivative(double h, Branch br) const;
    /// potential(s) - potential(q) - rate(q)(s - q): integral of rate(h) - rate(q) over [q, s].
    double bregman(double s, double q, Branch br) const;

private:
    bool use_a(Branch br) const { return br != Branch::Infinity || a_ == b_; }
    bool use_b(Branch br) const { return br != Branch::Zero || a_ == b_; }
    double a_ = 1.0;
    double b_ = 1.0;
    std::shared_ptr<const RateIntegral> blend_;
};

/// Odd function w -> sign(w) F(|w|) used by the backstepping laws, in one of two forms:
///  blend:      F(x) = integral_0^x interp_H(s^A, s^B) ds
///  power sum:  F(x) = x^{A+1} + x^{B+1}
/// A, B >= 0. The blend form is tabulated on a log grid (quintic Hermite on log F with exact
/// derivatives) after adaptive quadrature, and uses closed forms when A == 0 or A == B.
class RateIntegral {
public:
    enum class Form { Blend, PowerSum };

    RateIntegral() = default;
    RateIntegral(double A, double B, Form form);

    double A() const { return A_; }
    double B() const { return B_; }
    Form form() const { return form_; }

    double value(double w, Branch br) const;
    double derivative(double w, Branch br) const;

    /// Leading coefficients of the limit approximations, F ~ coeff * x^{A+1} or x^{B+1}.
    double zero_coefficient() const { return c0_; }
    double infinity_coefficient() const { return cinf_; }

    /// Reference value of the blend integral by adaptive quadrature, for verification.
    static double blend_integral_reference(double A, double B, double x);

private:
    double magnitude(double x) const;  // F(x) for x >= 0, full branch

    struct Table;
    double A_ = 0.0;
    double B_ = 0.0;
    Form form_ = Form::PowerSum;
    double c0_ = 1.0;
    double cinf_ = 1.0;
    std::shared_ptr<const Table> table_;
};

}  // namespace bilimit
