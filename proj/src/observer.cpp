#include "bilimit/observer.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <boost/math/tools/roots.hpp>

namespace bilimit {

bool degree_in_range(std::size_t n, double d) {
    if (!(d > -1.0) || !std::isfinite(d)) return false;
    if (n <= 1) return true;
    return d < 1.0 / static_cast<double>(n - 1);
}

void require_degrees(std::size_t n, const DegreePair& d) {
    if (n == 0) throw RangeError("chain length must be at least 1");
    for (double v : {d.d0, d.d_inf}) {
        if (!degree_in_range(n, v)) {
            const std::string hi = n <= 1 ? "inf" : std::to_string(1.0 / static_cast<double>(n - 1));
            throw RangeError("degree " + std::to_string(v) + " outside the admissible interval (-1, " +
                             hi + ") for n = " + std::to_string(n));
        }
    }
}

ChainWeights weights_from_degrees(std::size_t n, const DegreePair& d) {
    require_degrees(n, d);
    std::vector<double> r0(n), rinf(n);
    for (std::size_t i = 1; i <= n; ++i) {
        r0[i - 1] = 1.0 - d.d0 * static_cast<double>(n - i);
        rinf[i - 1] = 1.0 - d.d_inf * static_cast<double>(n - i);
    }
    return {n, WeightVector(r0), WeightVector(rinf)};
}

const char* to_string(SaturationMode m) { return m == SaturationMode::Paper ? "paper" : "simplified"; }

SaturationMode saturation_mode_from_string(const std::string& s) {
    if (s == "paper") return SaturationMode::Paper;
    if (s == "simplified") return SaturationMode::Simplified;
    throw ModeError("unknown mode '" + s + "' (expected paper or simplified)");
}

SaturationFn::SaturationFn(std::size_t level, double r0, double d0, double r_inf, double d_inf,
                           SaturationMode mode)
    : level_(level), mode_(mode), r0_(r0), d0_(d0), rinf_(r_inf), dinf_(d_inf) {
    if (!(r0 + d0 > 0.0) || !(r_inf + d_inf > 0.0))
        throw PreconditionError("saturation requires r + d > 0 at both limits");
    if (mode == SaturationMode::Simplified && !(0.0 <= d0 && d0 <= d_inf))
        throw ModeError("simplified saturation requires 0 <= d0 <= d_inf");
    e0_ = (r0 + d0) / r0;
    einf_ = (r_inf + d_inf) / r_inf;
    if (std::fabs(e0_ - einf_) < 1e-12) einf_ = e0_;
    c0_ = 1.0 / e0_;
    cinf_ = 1.0 / einf_;
}

double SaturationFn::operator()(double s, Branch br) const {
    const double m = std::fabs(s);
    double v = 0.0;
    if (mode_ == SaturationMode::Paper) {
        switch (br) {
            case Branch::Zero: v = c0_ * std::pow(m, e0_); break;
            case Branch::Infinity: v = cinf_ * std::pow(m, einf_); break;
            case Branch::Full:
                v = m <= 1.0 ? c0_ * std::pow(m, e0_) : cinf_ * std::pow(m, einf_) + (c0_ - cinf_);
                break;
        }
    } else {
        const bool both = single_branch() || br == Branch::Full;
        if (both || br == Branch::Zero) v += std::pow(m, e0_);
        if (both || br == Branch::Infinity) v += std::pow(m, einf_);
    }
    return s < 0.0 ? -v : v;
}

double SaturationFn::derivative(double s, Branch br) const {
    const double m = std::fabs(s);
    if (mode_ == SaturationMode::Paper) {
        switch (br) {
            case Branch::Zero: return std::pow(m, e0_ - 1.0);
            case Branch::Infinity: return std::pow(m, einf_ - 1.0);
            case Branch::Full: return std::pow(m, (m <= 1.0 ? e0_ : einf_) - 1.0);
        }
    }
    const bool both = single_branch() || br == Branch::Full;
    double v = 0.0;
    if (both || br == Branch::Zero) v += e0_ * std::pow(m, e0_ - 1.0);
    if (both || br == Branch::Infinity) v += einf_ * std::pow(m, einf_ - 1.0);
    return v;
}

double SaturationFn::inverse(double y, Branch br) const {
    const double m = std::fabs(y);
    double s = 0.0;
    if (m == 0.0) return 0.0;
    if (mode_ == SaturationMode::Paper) {
        switch (br) {
            case Branch::Zero: s = std::pow(m / c0_, 1.0 / e0_); break;
            case Branch::Infinity: s = std::pow(m / cinf_, 1.0 / einf_); break;
            case Branch::Full:
                // The lower branch covers |y| <= q(1) = c0.
                s = m <= c0_ ? std::pow(m / c0_, 1.0 / e0_)
                             : std::pow((m - c0_ + cinf_) / cinf_, 1.0 / einf_);
                break;
        }
    } else {
        const bool both = single_branch() || br == Branch::Full;
        if (!both) {
            s = std::pow(m, 1.0 / (br == Branch::Zero ? e0_ : einf_));
        } else if (single_branch()) {
            s = std::pow(m / 2.0, 1.0 / e0_);
        } else {
            const double hi = std::max(std::pow(m, 1.0 / e0_), std::pow(m, 1.0 / einf_));
            auto f = [&](double x) {
                return std::make_pair(std::pow(x, e0_) + std::pow(x, einf_) - m,
                                      e0_ * std::pow(x, e0_ - 1.0) + einf_ * std::pow(x, einf_ - 1.0));
            };
            std::uintmax_t iters = 200;
            s = boost::math::tools::newton_raphson_iterate(f, 0.5 * hi, 0.0, hi,
                                                           std::numeric_limits<double>::digits - 2,
                                                           iters);
        }
    }
    return y < 0.0 ? -s : s;
}

SaturationFn make_saturation(std::size_t i, const ChainWeights& w, const DegreePair& d,
                             SaturationMode mode) {
    if (i < 1 || i > w.n) throw PreconditionError("saturation level out of range");
    return SaturationFn(i, w.r0[i - 1], d.d0, w.r_inf[i - 1], d.d_inf, mode);
}

HomFunction terminal_injection(double ell_n, const DegreePair& d) {
    if (!(ell_n > 0.0)) throw PreconditionError("terminal gain must be positive");
    const SaturationFn q(1, 1.0, d.d0, 1.0, d.d_inf, SaturationMode::Paper);
    auto make = [q, ell_n](Branch br) -> ScalarFn {
        return [q, ell_n, br](std::span<const double> x) { return -q(ell_n * x[0], br); };
    };
    HomFunction f;
    f.eval = make(Branch::Full);
    f.approx0 = make(Branch::Zero);
    f.approx_inf = make(Branch::Infinity);
    f.sig = {WeightVector::uniform(1), 1.0 + d.d0, WeightVector::uniform(1), 1.0 + d.d_inf};
    return f;
}

std::pair<double, double> observer_lyapunov_degrees(const ChainWeights& w, const DegreePair& d,
                                                   double margin) {
    const double dW0 = 2.0 * w.r0.max() + d.d0 + margin;
    const double dWinf = 2.0 * w.r_inf.max() + d.d_inf + margin;
    return {dW0, dWinf};
}

ObserverDesign::ObserverDesign(std::size_t n, DegreePair d, SaturationMode mode, double dW0,
                               double dW_inf, std::vector<double> gains)
    : n_(n), d_(d), w_(weights_from_degrees(n, d)), mode_(mode), dW0_(dW0), dWinf_(dW_inf) {
    if (gains.size() != n) throw PreconditionError("observer needs one gain per level");
    for (std::size_t j = 0; j < n; ++j) {
        if (!(gains[j] > 0.0)) throw PreconditionError("observer gains must be positive");
        if (!(dW0 > 2.0 * w_.r0.max() + d.d0) || !(dW_inf > 2.0 * w_.r_inf.max() + d.d_inf))
            throw PreconditionError("observer Lyapunov degrees too small");
        const double a = dW0 / w_.r0[j] - 1.0;
        const double b = dW_inf / w_.r_inf[j] - 1.0;
        levels_.push_back({make_saturation(j + 1, w_, d, mode), gains[j], PowerPair(a, b),
                           std::nullopt});
    }
}

std::vector<double> ObserverDesign::gains() const {
    std::vector<double> g;
    for (const auto& l : levels_) g.push_back(l.ell);
    return g;
}

void ObserverDesign::injection_from(std::size_t k, double y, std::span<double> out, Branch br) const {
    double s = y;
    for (std::size_t j = k; j < n_; ++j) {
        s = levels_[j].q(levels_[j].ell * s, br);
        out[j - k] = -s;
    }
}

void ObserverDesign::injection(double e1, std::span<double> out, Branch br) const {
    injection_from(0, e1, out, br);
}

void ObserverDesign::error_field(std::span<const double> E, std::span<double> out, Branch br) const {
    injection(E[0], out, br);
    for (std::size_t j = 0; j + 1 < n_; ++j) out[j] += E[j + 1];
}

double ObserverDesign::lyapunov(std::size_t k, std::span<const double> Ek, Branch br,
                                std::span<double> grad) const {
    const bool want_grad = !grad.empty();
    if (want_grad)
        for (double& g : grad) g = 0.0;
    double value = 0.0;
    for (std::size_t j = n_; j-- > k;) {
        const auto& lvl = levels_[j];
        const double theta = lvl.ell * Ek[j - k];
        const double next = j + 1 < n_ ? Ek[j + 1 - k] : 0.0;
        const double Q = lvl.q.inverse(next, br);
        value += lvl.lyap.bregman(theta, Q, br);
        if (want_grad) {
            grad[j - k] += lvl.ell * (lvl.lyap.rate(theta, br) - lvl.lyap.rate(Q, br));
            if (j + 1 < n_ && Q != 0.0)
                grad[j + 1 - k] -= (theta - Q) * lvl.lyap.rate_derivative(Q, br) / lvl.q.derivative(Q, br);
        }
    }
    return value;
}

double ObserverDesign::tuning_T1(std::size_t k, std::span<const double> x, Branch br) const {
    const std::size_t m = n_ - k;
    const auto& lvl = levels_[k];
    const double theta = x[0];
    std::span<const double> E = x.subspan(1, m - 1);
    std::vector<double> f(m - 1), grad(m - 1);
    injection_from(k + 1, lvl.q(theta, br), f, br);
    for (std::size_t j = 0; j + 1 < m - 1; ++j) f[j] += E[j + 1];
    lyapunov(k + 1, E, br, grad);
    const double Q = lvl.q.inverse(E[0], br);
    if (Q != 0.0) grad[0] -= (theta - Q) * lvl.lyap.rate_derivative(Q, br) / lvl.q.derivative(Q, br);
    double t1 = 0.0;
    for (std::size_t j = 0; j < m - 1; ++j) t1 += grad[j] * f[j];
    return t1;
}

double ObserverDesign::tuning_T2(std::size_t k, std::span<const double> x, Branch br) const {
    const auto& lvl = levels_[k];
    const double theta = x[0];
    const double Q = lvl.q.inverse(x[1], br);
    return (lvl.lyap.rate(theta, br) - lvl.lyap.rate(Q, br)) * (lvl.q(theta, br) - x[1]);
}

namespace {

std::vector<double> tail(const WeightVector& r, std::size_t k) {
    return std::vector<double>(r.entries().begin() + static_cast<long>(k), r.entries().end());
}

}  // namespace

DominationProblem ObserverDesign::tuning_problem(std::size_t k) const {
    if (k + 1 >= n_) throw PreconditionError("tuning problem exists only for levels below n");
    auto self = std::make_shared<const ObserverDesign>(*this);
    auto t1 = [self, k](Branch br) -> ScalarFn {
        return [self, k, br](std::span<const double> x) { return self->tuning_T1(k, x, br); };
    };
    auto t2 = [self, k](Branch br) -> ScalarFn {
        return [self, k, br](std::span<const double> x) { return self->tuning_T2(k, x, br); };
    };
    const BiLimitSignature sig{WeightVector(tail(w_.r0, k)), d_.d0 + dW0_,
                               WeightVector(tail(w_.r_inf, k)), d_.d_inf + dWinf_};
    DominationProblem p;
    p.eta = {t1(Branch::Full), sig, t1(Branch::Zero), t1(Branch::Infinity)};
    p.gamma = {t2(Branch::Full), sig, t2(Branch::Zero), t2(Branch::Infinity)};
    return p;
}

HomVectorField ObserverDesign::injection_field() const {
    auto self = std::make_shared<const ObserverDesign>(*this);
    auto make = [self](Branch br) -> FieldFn {
        return [self, br](std::span<const double> E, std::span<double> out) {
            self->injection(E[0], out, br);
        };
    };
    return {make(Branch::Full), {w_.r0, d_.d0, w_.r_inf, d_.d_inf}, make(Branch::Zero),
            make(Branch::Infinity)};
}

HomVectorField ObserverDesign::error_vector_field() const {
    auto self = std::make_shared<const ObserverDesign>(*this);
    auto make = [self](Branch br) -> FieldFn {
        return [self, br](std::span<const double> E, std::span<double> out) {
            self->error_field(E, out, br);
        };
    };
    return {make(Branch::Full), {w_.r0, d_.d0, w_.r_inf, d_.d_inf}, make(Branch::Zero),
            make(Branch::Infinity)};
}

HomFunction ObserverDesign::lyapunov_function() const {
    auto self = std::make_shared<const ObserverDesign>(*this);
    auto make = [self](Branch br) -> ScalarFn {
        return [self, br](std::span<const double> E) { return self->lyapunov(0, E, br); };
    };
    return {make(Branch::Full), {w_.r0, dW0_, w_.r_inf, dWinf_}, make(Branch::Zero),
            make(Branch::Infinity)};
}

ObserverDesign build_observer(std::size_t n, const DegreePair& d, const ObserverTuning& tuning) {
    const ChainWeights w = weights_from_degrees(n, d);
    const auto [dW0, dWinf] = observer_lyapunov_degrees(w, d, tuning.degree_margin);
    ObserverDesign design(n, d, tuning.mode, dW0, dWinf, std::vector<double>(n, tuning.ell_n));
    for (std::size_t k = n - 1; k-- > 0;) {
        try {
            DominationResult res = find_domination_constant(design.tuning_problem(k), tuning.lemma);
            design.levels_mut()[k].ell = res.c;
            design.levels_mut()[k].certificate = std::move(res);
        } catch (const std::exception& e) {
            throw SynthesisError("observer synthesis failed at level " + std::to_string(k + 1) + ": " +
                                 e.what());
        }
    }
    return design;
}

HomVectorField observer_error_field(const ObserverDesign& design) { return design.error_vector_field(); }

}  // namespace bilimit
