#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bilimit/gain_lemma.hpp"
#include "bilimit/hom_core.hpp"
#include "bilimit/power_terms.hpp"

namespace bilimit {

class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ModeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector field degrees at the origin and at infinity, each in (-1, 1/(n-1)).
struct DegreePair {
    double d0 = 0.0;
    double d_inf = 0.0;
};

struct ChainWeights {
    std::size_t n = 0;
    WeightVector r0;
    WeightVector r_inf;
};

/// Open interval of admissible degrees for a chain of length n: (-1, 1/(n-1)), or (-1, inf) when n == 1.
bool degree_in_range(std::size_t n, double d);
void require_degrees(std::size_t n, const DegreePair& d);

/// r_{0,i} = 1 - d0 (n - i), r_{inf,i} = 1 - d_inf (n - i), i = 1..n.
ChainWeights weights_from_degrees(std::size_t n, const DegreePair& d);

enum class SaturationMode { Paper, Simplified };

const char* to_string(SaturationMode m);
SaturationMode saturation_mode_from_string(const std::string& s);

/// Odd, strictly increasing, onto saturation-like map used by the observer recursion.
/// Paper form: (r0/(r0+d0)) s^{(r0+d0)/r0} for |s| <= 1, and the infinity power plus the
/// constant making the branches meet at |s| = 1. Simplified form: s^{e0} + s^{e_inf}.
class SaturationFn {
public:
    SaturationFn() = default;
    SaturationFn(std::size_t level, double r0, double d0, double r_inf, double d_inf,
                 SaturationMode mode);

    double operator()(double s, Branch br = Branch::Full) const;
    double derivative(double s, Branch br = Branch::Full) const;
    double inverse(double y, Branch br = Branch::Full) const;

    std::size_t level() const { return level_; }
    SaturationMode mode() const { return mode_; }
    double exponent0() const { return e0_; }
    double exponent_inf() const { return einf_; }
    double r0() const { return r0_; }
    double r_inf() const { return rinf_; }
    bool single_branch() const { return e0_ == einf_; }

private:
    std::size_t level_ = 0;
    SaturationMode mode_ = SaturationMode::Paper;
    double r0_ = 1.0, d0_ = 0.0, rinf_ = 1.0, dinf_ = 0.0;
    double e0_ = 1.0, einf_ = 1.0;  // exponents (r+d)/r
    double c0_ = 1.0, cinf_ = 1.0;  // paper-form coefficients r/(r+d)
};

/// q_i for level i (1-based) of a chain.
SaturationFn make_saturation(std::size_t i, const ChainWeights& w, const DegreePair& d,
                             SaturationMode mode);

/// K_n(e) = -q_n(ell_n e), scalar, with weights 1 and degrees 1 + d0, 1 + d_inf.
HomFunction terminal_injection(double ell_n, const DegreePair& d);

struct ObserverTuning {
    LemmaSampling lemma;
    double ell_n = 1.0;
    double degree_margin = 0.1;
    SaturationMode mode = SaturationMode::Paper;
};

struct ObserverLevel {
    SaturationFn q;
    double ell = 1.0;
    PowerPair lyap;  ///< exponents (dW0 - r0_i)/r0_i and (dW_inf - r_inf_i)/r_inf_i
    std::optional<DominationResult> certificate;
};

/// Recursive output injection K_1 for the chain with its Lyapunov function W_1.
class ObserverDesign {
public:
    ObserverDesign() = default;
    ObserverDesign(std::size_t n, DegreePair d, SaturationMode mode, double dW0, double dW_inf,
                   std::vector<double> gains);

    std::size_t n() const { return n_; }
    const DegreePair& degrees() const { return d_; }
    const ChainWeights& weights() const { return w_; }
    SaturationMode mode() const { return mode_; }
    double dW0() const { return dW0_; }
    double dW_inf() const { return dWinf_; }
    std::vector<double> gains() const;
    const std::vector<ObserverLevel>& levels() const { return levels_; }
    std::vector<ObserverLevel>& levels_mut() { return levels_; }

    /// K_k(y) for the level k (0-based) chain: writes n - k components.
    void injection_from(std::size_t k, double y, std::span<double> out, Branch br = Branch::Full) const;
    /// K_1(e1).
    void injection(double e1, std::span<double> out, Branch br = Branch::Full) const;
    /// S E + K_1(e_1).
    void error_field(std::span<const double> E, std::span<double> out, Branch br = Branch::Full) const;

    /// W_k(E_k) for the level k (0-based) subsystem; E_k has n - k components.
    double lyapunov(std::size_t k, std::span<const double> Ek, Branch br = Branch::Full,
                    std::span<double> grad = {}) const;

    /// Tuning terms of level k < n-1 over (theta, e_{k+1}, ..., e_n): the derivative of the
    /// extended Lyapunov function along the level-k system is T1 - ell * T2 at theta = ell e_k.
    double tuning_T1(std::size_t k, std::span<const double> x, Branch br) const;
    double tuning_T2(std::size_t k, std::span<const double> x, Branch br) const;
    DominationProblem tuning_problem(std::size_t k) const;

    HomVectorField injection_field() const;
    HomVectorField error_vector_field() const;
    HomFunction lyapunov_function() const;

private:
    std::size_t n_ = 0;
    DegreePair d_;
    ChainWeights w_;
    SaturationMode mode_ = SaturationMode::Paper;
    double dW0_ = 0.0, dWinf_ = 0.0;
    std::vector<ObserverLevel> levels_;
};

/// Smallest degrees satisfying the exponent conditions of the observer Lyapunov recursion,
/// plus the given margin.
std::pair<double, double> observer_lyapunov_degrees(const ChainWeights& w, const DegreePair& d,
                                                   double margin);

/// Builds K_n, then K_{n-1}, ..., K_1, tuning each ell_i with the domination lemma.
ObserverDesign build_observer(std::size_t n, const DegreePair& d, const ObserverTuning& tuning = {});

HomVectorField observer_error_field(const ObserverDesign& design);

}  // namespace bilimit
