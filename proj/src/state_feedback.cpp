#include "bilimit/state_feedback.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace bilimit {

namespace {

// r_{i} for 1-based i in 1..n+1, with r_{n+1} = 1 + d.
double extended_weight(const WeightVector& r, double d, std::size_t i) {
    return i <= r.size() ? r[i - 1] : 1.0 + d;
}

RateIntegral::Form form_of(SaturationMode m) {
    return m == SaturationMode::Paper ? RateIntegral::Form::Blend : RateIntegral::Form::PowerSum;
}

// d/dpsi of rate(psi^{1/alpha}), finite because every Lyapunov exponent exceeds alpha.
double rate_of_root_derivative(const PowerPair& pair, double psi, double alpha, Branch br) {
    if (psi == 0.0) return 0.0;
    const double phi = signed_pow(psi, 1.0 / alpha);
    return pair.rate_derivative(phi, br) * std::pow(std::fabs(psi), 1.0 / alpha - 1.0) / alpha;
}

}  // namespace

double alpha_lower_bound(double alpha_prev, double r0_next, double d0, double rinf_next, double d_inf) {
    return std::max({alpha_prev * r0_next / (d0 + r0_next), alpha_prev * rinf_next / (d_inf + rinf_next),
                     1.0});
}

AlphaSchedule alpha_schedule(std::size_t n, const DegreePair& d, const ChainWeights& w) {
    require_degrees(n, d);
    AlphaSchedule s;
    s.alpha.resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double r0_next = extended_weight(w.r0, d.d0, i + 1);
        const double rinf_next = extended_weight(w.r_inf, d.d_inf, i + 1);
        double a = 0.0;
        if (d.d0 >= 0.0 && d.d_inf >= 0.0) a = 1.0;
        else if (d.d0 <= 0.0 && d.d_inf >= d.d0) a = w.r0[0] / r0_next;
        else if (d.d_inf <= 0.0 && d.d0 >= d.d_inf) a = w.r_inf[0] / rinf_next;
        else a = alpha_lower_bound(s.at(i - 1), r0_next, d.d0, rinf_next, d.d_inf);
        s.alpha[i - 1] = a;
    }
    return s;
}

SaturationMode default_controller_mode(const DegreePair& d) {
    return d.d0 <= d.d_inf ? SaturationMode::Simplified : SaturationMode::Paper;
}

std::pair<double, double> controller_lyapunov_degrees(const ChainWeights& w, const AlphaSchedule& a,
                                                     double margin) {
    double dV0 = w.r0.max();
    for (std::size_t i = 1; i < w.n; ++i) dV0 = std::max(dV0, (1.0 + a.at(i)) * w.r0[i]);
    dV0 += margin;
    double dVinf = w.r_inf.max();
    for (std::size_t i = 1; i < w.n; ++i) dVinf = std::max(dVinf, (1.0 + a.at(i)) * w.r_inf[i]);
    return {dV0, dVinf + margin};
}

ControllerDesign::ControllerDesign(std::size_t n, DegreePair d, SaturationMode mode, AlphaSchedule alpha,
                                   double dV0, double dV_inf, std::vector<double> gains)
    : n_(n), d_(d), w_(weights_from_degrees(n, d)), mode_(mode), alpha_(std::move(alpha)), dV0_(dV0),
      dVinf_(dV_inf) {
    if (gains.size() != n || alpha_.size() != n)
        throw PreconditionError("controller needs one gain and one alpha per level");
    if (mode == SaturationMode::Simplified && d.d0 > d.d_inf)
        throw ModeError("simplified feedback requires d0 <= d_inf");
    for (std::size_t i = 1; i <= n; ++i) {
        if (!(gains[i - 1] > 0.0)) throw PreconditionError("controller gains must be positive");
        const double ap = alpha_.at(i - 1), ai = alpha_.at(i);
        if (ai < 1.0 - 1e-12) throw PreconditionError("alpha must be >= 1");
        const double r0 = w_.r0[i - 1], rinf = w_.r_inf[i - 1];
        const double A = ai * (d.d0 + r0) / (ap * r0) - 1.0;
        const double B = ai * (d.d_inf + rinf) / (ap * rinf) - 1.0;
        if (A < -1e-12 || B < -1e-12)
            throw PreconditionError("alpha schedule below its lower bound at level " + std::to_string(i));
        const double a = dV0 / r0 - 1.0, b = dV_inf / rinf - 1.0;
        if (!(a > 0.0) || !(b > 0.0)) throw PreconditionError("Lyapunov degrees must exceed the weights");
        if (i >= 2 && !(a > ap && b > ap))
            throw PreconditionError("Lyapunov degree dV0 too small for alpha at level " + std::to_string(i));
        levels_.push_back({RateIntegral(std::max(A, 0.0), std::max(B, 0.0), form_of(mode)), gains[i - 1],
                           PowerPair(a, b), std::nullopt});
    }
}

std::vector<double> ControllerDesign::gains() const {
    std::vector<double> g;
    for (const auto& l : levels_) g.push_back(l.k);
    return g;
}

double ControllerDesign::psi(std::size_t i, std::span<const double> X, Branch br,
                             std::span<double> grad) const {
    const bool want = !grad.empty();
    double psi_prev = 0.0;
    for (std::size_t j = 1; j <= i; ++j) {
        const auto& lvl = levels_[j - 1];
        const double ap = alpha_.at(j - 1);
        const double chi = X[j - 1];
        const double w = signed_pow(chi, ap) - psi_prev;
        const double psi_j = -lvl.k * lvl.integral.value(w, br);
        if (want) {
            // grad w_j = (-grad psi_{j-1}, alpha_{j-1} |chi_j|^{alpha_{j-1}-1}); grad psi_j = -k F'(w) grad w_j
            const double s = -lvl.k * lvl.integral.derivative(w, br);
            for (std::size_t m = 0; m + 1 < j; ++m) grad[m] = -grad[m] * s;
            grad[j - 1] = s * (ap == 1.0 ? 1.0 : signed_pow_derivative(chi, ap));
        }
        psi_prev = psi_j;
    }
    return psi_prev;
}

double ControllerDesign::phi(std::size_t i, std::span<const double> X, Branch br) const {
    return signed_pow(psi(i, X, br), 1.0 / alpha_.at(i));
}

double ControllerDesign::lyapunov(std::size_t i, std::span<const double> X, Branch br,
                                  std::span<double> grad) const {
    const bool want = !grad.empty();
    std::vector<double> gpsi(want ? i : 0, 0.0);
    if (want) std::fill(grad.begin(), grad.begin() + static_cast<long>(i), 0.0);
    double value = 0.0;
    double psi_prev = 0.0;
    for (std::size_t j = 1; j <= i; ++j) {
        const auto& lvl = levels_[j - 1];
        const double ap = alpha_.at(j - 1);
        const double chi = X[j - 1];
        const double phi_prev = signed_pow(psi_prev, 1.0 / ap);
        value += lvl.lyap.bregman(chi, phi_prev, br);
        if (want) {
            const double coupling = -(chi - phi_prev) * rate_of_root_derivative(lvl.lyap, psi_prev, ap, br);
            for (std::size_t m = 0; m + 1 < j; ++m) grad[m] += coupling * gpsi[m];
            grad[j - 1] += lvl.lyap.rate(chi, br) - lvl.lyap.rate(phi_prev, br);
        }
        if (j < i) psi_prev = want ? psi(j, X, br, std::span<double>(gpsi).first(j)) : psi(j, X, br);
    }
    return value;
}

void ControllerDesign::closed_loop(std::span<const double> X, std::span<double> out, Branch br) const {
    for (std::size_t j = 0; j + 1 < n_; ++j) out[j] = X[j + 1];
    out[n_ - 1] = control(X, br);
}

double ControllerDesign::tuning_T1(std::size_t i, std::span<const double> X, Branch br) const {
    std::vector<double> grad(i);
    lyapunov(i, X, br, grad);
    double t1 = 0.0;
    for (std::size_t j = 0; j + 1 < i; ++j) t1 += grad[j] * X[j + 1];
    return t1;
}

double ControllerDesign::tuning_T2(std::size_t i, std::span<const double> X, Branch br) const {
    const auto& lvl = levels_[i - 1];
    const double ap = alpha_.at(i - 1);
    const double psi_prev = psi(i - 1, X, br);
    const double phi_prev = signed_pow(psi_prev, 1.0 / ap);
    const double w = signed_pow(X[i - 1], ap) - psi_prev;
    return (lvl.lyap.rate(X[i - 1], br) - lvl.lyap.rate(phi_prev, br)) *
           signed_pow(lvl.integral.value(w, br), 1.0 / alpha_.at(i));
}

namespace {

std::vector<double> head(const WeightVector& r, std::size_t i) {
    return std::vector<double>(r.entries().begin(), r.entries().begin() + static_cast<long>(i));
}

template <class Make>
HomFunction make_function(Make make, BiLimitSignature sig) {
    return {make(Branch::Full), std::move(sig), make(Branch::Zero), make(Branch::Infinity)};
}

}  // namespace

DominationProblem ControllerDesign::tuning_problem(std::size_t i) const {
    if (i < 2 || i > n_) throw PreconditionError("controller tuning exists for levels 2..n");
    auto self = std::make_shared<const ControllerDesign>(*this);
    const BiLimitSignature sig{WeightVector(head(w_.r0, i)), dV0_ + d_.d0, WeightVector(head(w_.r_inf, i)),
                               dVinf_ + d_.d_inf};
    DominationProblem p;
    p.eta = make_function(
        [self, i](Branch br) -> ScalarFn {
            return [self, i, br](std::span<const double> x) { return self->tuning_T1(i, x, br); };
        },
        sig);
    p.gamma = make_function(
        [self, i](Branch br) -> ScalarFn {
            return [self, i, br](std::span<const double> x) { return self->tuning_T2(i, x, br); };
        },
        sig);
    return p;
}

HomFunction ControllerDesign::phi_function(std::size_t i) const {
    auto self = std::make_shared<const ControllerDesign>(*this);
    return make_function(
        [self, i](Branch br) -> ScalarFn {
            return [self, i, br](std::span<const double> x) { return self->phi(i, x, br); };
        },
        {WeightVector(head(w_.r0, i)), d_.d0 + w_.r0[i - 1], WeightVector(head(w_.r_inf, i)),
         d_.d_inf + w_.r_inf[i - 1]});
}

HomFunction ControllerDesign::psi_function(std::size_t i) const {
    auto self = std::make_shared<const ControllerDesign>(*this);
    const double a = alpha_.at(i);
    return make_function(
        [self, i](Branch br) -> ScalarFn {
            return [self, i, br](std::span<const double> x) { return self->psi(i, x, br); };
        },
        {WeightVector(head(w_.r0, i)), a * (d_.d0 + w_.r0[i - 1]), WeightVector(head(w_.r_inf, i)),
         a * (d_.d_inf + w_.r_inf[i - 1])});
}

HomFunction ControllerDesign::lyapunov_function(std::size_t i) const {
    auto self = std::make_shared<const ControllerDesign>(*this);
    return make_function(
        [self, i](Branch br) -> ScalarFn {
            return [self, i, br](std::span<const double> x) { return self->lyapunov(i, x, br); };
        },
        {WeightVector(head(w_.r0, i)), dV0_, WeightVector(head(w_.r_inf, i)), dVinf_});
}

HomVectorField ControllerDesign::closed_loop_field() const {
    auto self = std::make_shared<const ControllerDesign>(*this);
    auto make = [self](Branch br) -> FieldFn {
        return [self, br](std::span<const double> x, std::span<double> out) { self->closed_loop(x, out, br); };
    };
    return {make(Branch::Full), {w_.r0, d_.d0, w_.r_inf, d_.d_inf}, make(Branch::Zero),
            make(Branch::Infinity)};
}

HomFunction phi_1(double k1, std::size_t n, const DegreePair& d, SaturationMode mode) {
    const ChainWeights w = weights_from_degrees(n, d);
    const AlphaSchedule a = alpha_schedule(n, d, w);
    const auto [dV0, dVinf] = controller_lyapunov_degrees(w, a, 0.1);
    std::vector<double> gains(n, 1.0);
    gains[0] = k1;
    return ControllerDesign(n, d, mode, a, dV0, dVinf, gains).phi_function(1);
}

ControllerDesign build_controller(std::size_t n, const DegreePair& d, const ControllerTuning& tuning) {
    const ChainWeights w = weights_from_degrees(n, d);
    const AlphaSchedule a = alpha_schedule(n, d, w);
    const auto [dV0, dVinf] = controller_lyapunov_degrees(w, a, tuning.degree_margin);
    const SaturationMode mode = tuning.mode.value_or(default_controller_mode(d));
    std::vector<double> gains(n, 1.0);
    gains[0] = tuning.k1;
    ControllerDesign design(n, d, mode, a, dV0, dVinf, gains);
    for (std::size_t i = 2; i <= n; ++i) {
        try {
            DominationResult res = find_domination_constant(design.tuning_problem(i), tuning.lemma);
            design.levels_mut()[i - 1].k = std::pow(res.c, a.at(i));
            design.levels_mut()[i - 1].certificate = std::move(res);
        } catch (const std::exception& e) {
            throw SynthesisError("controller synthesis failed at level " + std::to_string(i) + ": " +
                                 e.what());
        }
    }
    return design;
}

}  // namespace bilimit
