#include "verification.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bilimit/sampling.hpp"

namespace bilimit::cli {

namespace {

Check homogeneity_check(const std::string& name, const BiLimitReport& r) {
    Check c{name, r.pass(), "", to_json(r)};
    std::ostringstream os;
    os << "deviation at extreme rung: zero " << r.zero.final_deviation() << ", infinity "
       << r.infinity.final_deviation();
    c.detail = os.str();
    return c;
}

Check field_check(const std::string& name, const FieldReport& r) {
    Check c{name, r.pass(), "", to_json(r)};
    std::ostringstream os;
    os << "worst component deviation: zero " << r.worst_deviation(LimitSide::Zero) << ", infinity "
       << r.worst_deviation(LimitSide::Infinity);
    c.detail = os.str();
    return c;
}

LemmaSampling sampling_for(const VerifyOptions& opt, const std::optional<DominationResult>& cert) {
    LemmaSampling s = opt.sampling;
    if (cert) s.seed = cert->seed;
    return s;
}

Check decrease_check(const std::string& name, const DominationProblem& p, double c, const LemmaSampling& s,
                     const std::optional<DominationResult>& cert) {
    Check out{name, false, "", nlohmann::json::object()};
    try {
        const auto margins = domination_margins(p, c, s);
        double worst = std::numeric_limits<double>::infinity();
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : margins) {
            worst = std::min(worst, m.margin);
            arr.push_back({{"region", m.region}, {"margin", m.margin}, {"samples", m.samples}});
        }
        out.pass = worst > 0.0;
        out.data = {{"constant", c}, {"margins", arr}, {"min_margin", worst}};
        if (cert) out.data["certified_min_margin"] = cert->min_margin();
        std::ostringstream os;
        os << "c = " << c << ", min margin " << worst;
        if (cert) os << " (certificate " << cert->min_margin() << ")";
        out.detail = os.str();
    } catch (const std::exception& e) {
        out.detail = e.what();
    }
    return out;
}

// Continuity at |s| = 1, strict increase on a log grid, and inverse round trip.
Check saturation_check(const std::string& name, const SaturationFn& q) {
    Check c{name, true, "", nlohmann::json::object()};
    double jump = 0.0, inverse_err = 0.0;
    bool monotone = true;
    for (double sgn : {-1.0, 1.0}) {
        jump = std::max(jump, std::fabs(q(sgn * (1.0 + 1e-10)) - q(sgn * (1.0 - 1e-10))));
        double prev = 0.0;
        for (double s : log_ladder(1e-6, 1e6, 121)) {
            const double v = sgn * q(sgn * s);
            if (!(v > prev) || !(q.derivative(sgn * s) > 0.0)) monotone = false;
            prev = v;
            const double back = q.inverse(q(sgn * s));
            inverse_err = std::max(inverse_err, std::fabs(back - sgn * s) / (1.0 + s));
        }
    }
    c.pass = jump < 1e-6 && monotone && inverse_err < 1e-8;
    c.data = {{"seam_jump", jump}, {"monotone", monotone}, {"inverse_error", inverse_err}};
    std::ostringstream os;
    os << "seam jump " << jump << ", inverse error " << inverse_err << (monotone ? "" : ", not monotone");
    c.detail = os.str();
    return c;
}

Check integral_check(const std::string& name, const RateIntegral& F) {
    Check c{name, true, "", nlohmann::json::object()};
    double jump = 0.0;
    bool monotone = true, odd = true;
    double prev = 0.0;
    for (double w : log_ladder(1e-6, 1e6, 121)) {
        const double v = F.value(w, Branch::Full);
        if (!(v > prev) || !(F.derivative(w, Branch::Full) > 0.0)) monotone = false;
        if (std::fabs(F.value(-w, Branch::Full) + v) > 1e-12 * (1.0 + std::fabs(v))) odd = false;
        prev = v;
    }
    jump = std::fabs(F.value(1.0 + 1e-10, Branch::Full) - F.value(1.0 - 1e-10, Branch::Full));
    c.pass = jump < 1e-6 && monotone && odd;
    c.data = {{"seam_jump", jump}, {"monotone", monotone}, {"odd", odd}};
    std::ostringstream os;
    os << "seam jump " << jump << (monotone ? "" : ", not monotone") << (odd ? "" : ", not odd");
    c.detail = os.str();
    return c;
}

}  // namespace

bool VerificationReport::pass() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* VerificationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

void append(VerificationReport& into, const VerificationReport& from) {
    into.checks.insert(into.checks.end(), from.checks.begin(), from.checks.end());
    into.notes.insert(into.notes.end(), from.notes.begin(), from.notes.end());
}

VerificationReport verify_observer(const ObserverDesign& d, const VerifyOptions& opt) {
    VerificationReport r;
    const std::size_t n = d.n();
    r.checks.push_back(field_check("observer.injection.homogeneity", check_field_bilimit(d.injection_field(), opt.grid)));
    r.checks.push_back(
        field_check("observer.error_field.homogeneity", check_field_bilimit(d.error_vector_field(), opt.grid)));
    for (std::size_t k = 0; k < n; ++k) {
        const auto& level = d.levels()[k];
        r.checks.push_back(saturation_check("observer.q" + std::to_string(k + 1) + ".seam", level.q));
        if (level.q.single_branch())
            r.notes.push_back("observer.q" + std::to_string(k + 1) + ": single branch (equal exponents)");
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto& level = d.levels()[k];
        r.checks.push_back(decrease_check("observer.level" + std::to_string(k + 1) + ".decrease",
                                          d.tuning_problem(k), level.ell, sampling_for(opt, level.certificate),
                                          level.certificate));
    }
    if (n == 1) r.notes.push_back("observer: scalar chain, no tuned levels");
    return r;
}

VerificationReport verify_controller(const ControllerDesign& d, const VerifyOptions& opt) {
    VerificationReport r;
    const std::size_t n = d.n();
    r.checks.push_back(homogeneity_check("controller.phi_n.homogeneity", check_bilimit(d.phi_function(n), opt.grid)));
    r.checks.push_back(
        field_check("controller.closed_loop.homogeneity", check_field_bilimit(d.closed_loop_field(), opt.grid)));
    for (std::size_t i = 1; i <= n; ++i) {
        const auto& level = d.levels()[i - 1];
        r.checks.push_back(integral_check("controller.psi" + std::to_string(i) + ".seam", level.integral));
        if (level.integral.A() == level.integral.B())
            r.notes.push_back("controller.psi" + std::to_string(i) + ": single branch (equal exponents)");
    }
    for (std::size_t i = 2; i <= n; ++i) {
        const auto& level = d.levels()[i - 1];
        const double c = std::pow(level.k, 1.0 / d.alpha().at(i));
        r.checks.push_back(decrease_check("controller.level" + std::to_string(i) + ".decrease", d.tuning_problem(i),
                                          c, sampling_for(opt, level.certificate), level.certificate));
    }
    if (n == 1) r.notes.push_back("controller: scalar chain, no tuned levels");
    return r;
}

nlohmann::json to_json(const VerificationReport& r) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}, {"data", c.data}});
    return {{"pass", r.pass()}, {"checks", checks}, {"notes", r.notes}};
}

}  // namespace bilimit::cli
