#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bilimit/gain_lemma.hpp"
#include "bilimit/hom_core.hpp"
#include "bilimit/observer.hpp"
#include "bilimit/power_terms.hpp"

namespace bilimit {

/// alpha_1..alpha_n (stored 0-based), each >= 1.
struct AlphaSchedule {
    std::vector<double> alpha;

    std::size_t size() const { return alpha.size(); }
    /// alpha_i for 1-based i; alpha_0 = 1 by convention.
    double at(std::size_t i) const { return i == 0 ? 1.0 : alpha[i - 1]; }
};

/// alpha_i = 1 when both degrees are nonnegative; r0_1/r0_{i+1} when d0 <= 0 and d0 <= d_inf;
/// r_inf_1/r_inf_{i+1} when d_inf <= 0 and d_inf <= d0. Weights are extended by r_{n+1} = 1 + d.
/// Falls back to the lower-bound recursion if none applies.
AlphaSchedule alpha_schedule(std::size_t n, const DegreePair& d, const ChainWeights& w);

/// The lower bound max{alpha_i r0/(d0 + r0), alpha_i r_inf/(d_inf + r_inf), 1} at level i+1.
double alpha_lower_bound(double alpha_prev, double r0_next, double d0, double rinf_next, double d_inf);

/// Simplified (power sum) when d0 <= d_inf, otherwise the blend integral.
SaturationMode default_controller_mode(const DegreePair& d);

struct ControllerTuning {
    LemmaSampling lemma;
    double k1 = 1.0;
    double degree_margin = 0.1;
    std::optional<SaturationMode> mode;
};

struct ControllerLevel {
    RateIntegral integral;  ///< psi_i = -k_i integral(w_i)
    double k = 1.0;
    PowerPair lyap;         ///< exponents dV0/r0_i - 1 and dV_inf/r_inf_i - 1
    std::optional<DominationResult> certificate;
};

/// Backstepping state feedback u = phi_n(X) for the chain, with its Lyapunov function V_n.
/// Level i (1-based): w_i = chi_i^{alpha_{i-1}} - psi_{i-1}, psi_i = -k_i F_i(w_i),
/// phi_i = psi_i^{1/alpha_i}.
class ControllerDesign {
public:
    ControllerDesign() = default;
    ControllerDesign(std::size_t n, DegreePair d, SaturationMode mode, AlphaSchedule alpha, double dV0,
                     double dV_inf, std::vector<double> gains);

    std::size_t n() const { return n_; }
    const DegreePair& degrees() const { return d_; }
    const ChainWeights& weights() const { return w_; }
    SaturationMode mode() const { return mode_; }
    const AlphaSchedule& alpha() const { return alpha_; }
    double dV0() const { return dV0_; }
    double dV_inf() const { return dVinf_; }
    std::vector<double> gains() const;
    const std::vector<ControllerLevel>& levels() const { return levels_; }
    std::vector<ControllerLevel>& levels_mut() { return levels_; }

    /// psi_i(X_i), reading the first i coordinates of X; optional gradient (i entries).
    double psi(std::size_t i, std::span<const double> X, Branch br = Branch::Full,
               std::span<double> grad = {}) const;
    double phi(std::size_t i, std::span<const double> X, Branch br = Branch::Full) const;
    double control(std::span<const double> X, Branch br = Branch::Full) const {
        return phi(n_, X, br);
    }

    /// V_i(X_i) with optional gradient (i entries).
    double lyapunov(std::size_t i, std::span<const double> X, Branch br = Branch::Full,
                    std::span<double> grad = {}) const;

    /// S X + B phi_n(X).
    void closed_loop(std::span<const double> X, std::span<double> out, Branch br = Branch::Full) const;

    /// Tuning terms for level i in 2..n over X_i: dV_i/dt = T1 - k_i^{1/alpha_i} T2 when u = phi_i.
    double tuning_T1(std::size_t i, std::span<const double> X, Branch br) const;
    double tuning_T2(std::size_t i, std::span<const double> X, Branch br) const;
    DominationProblem tuning_problem(std::size_t i) const;

    HomFunction phi_function(std::size_t i) const;
    HomFunction psi_function(std::size_t i) const;
    HomFunction lyapunov_function(std::size_t i) const;
    HomVectorField closed_loop_field() const;

private:
    std::size_t n_ = 0;
    DegreePair d_;
    ChainWeights w_;
    SaturationMode mode_ = SaturationMode::Simplified;
    AlphaSchedule alpha_;
    double dV0_ = 0.0, dVinf_ = 0.0;
    std::vector<ControllerLevel> levels_;
};

/// Smallest Lyapunov degrees meeting the exponent conditions of the recursion, plus margin.
std::pair<double, double> controller_lyapunov_degrees(const ChainWeights& w, const AlphaSchedule& a,
                                                     double margin);

/// phi_1 alone, for a given k1: the scalar law at the bottom of the recursion.
HomFunction phi_1(double k1, std::size_t n, const DegreePair& d, SaturationMode mode);

ControllerDesign build_controller(std::size_t n, const DegreePair& d,
                                  const ControllerTuning& tuning = {});

}  // namespace bilimit
