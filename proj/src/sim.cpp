#include "bilimit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace bilimit {

void IntegratorConfig::validate() const {
    if (!(step > 0.0)) throw PreconditionError("integrator step must be positive");
    if (!(t_end > step)) throw PreconditionError("integrator horizon must exceed the step");
    if (!(origin_guard >= 0.0)) throw PreconditionError("origin guard must be nonnegative");
    if (!(threshold > 0.0)) throw PreconditionError("convergence threshold must be positive");
    if (record_stride == 0) throw PreconditionError("record stride must be at least 1");
}

bool Trace::has_event(const std::string& kind) const {
    return std::any_of(events.begin(), events.end(), [&](const TraceEvent& e) { return e.kind == kind; });
}

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

bool all_finite(std::span<const double> v, double bound) {
    return std::all_of(v.begin(), v.end(), [bound](double x) { return std::isfinite(x) && std::fabs(x) <= bound; });
}

class Stepper {
public:
    Stepper(const TimeField& f, const IntegratorConfig& cfg, const WeightVector& w, std::size_t dim)
        : f_(f), cfg_(cfg), w_(w), dim_(dim) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_, &zero_, &fz_}) v->assign(dim * (cfg.max_refinement + 1), 0.0);
    }

    // Advances x from t by h. Returns false on a non-finite value.
    bool advance(double t, std::span<double> x, double h, unsigned level) {
        std::span<double> k1 = slice(k1_, level);
        f_(t, x, k1);
        if (!all_finite(k1, std::numeric_limits<double>::infinity())) return false;
        if (max_abs(k1) == 0.0 && max_abs(x) == 0.0) return true;
        // Near the origin the step is split once; deeper splits follow the local time scale.
        const bool near_origin = level == 0 && hom_norm(x, w_) < 10.0 * cfg_.origin_guard;
        const bool fast = max_abs(x) < 2.0 * h * max_abs(k1);
        if (level < cfg_.max_refinement && (near_origin || fast)) {
            const double hs = h / 16.0;
            for (int s = 0; s < 16; ++s) {
                if (!advance(t + hs * s, x, hs, level + 1)) return false;
                clamp(t + hs * (s + 1), x);
            }
            return true;
        }
        std::span<double> k2 = slice(k2_, level), k3 = slice(k3_, level), k4 = slice(k4_, level);
        std::span<double> y = slice(tmp_, level);
        for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] + 0.5 * h * k1[i];
        f_(t + 0.5 * h, y, k2);
        for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] + 0.5 * h * k2[i];
        f_(t + 0.5 * h, y, k3);
        for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] + h * k3[i];
        f_(t + h, y, k4);
        for (std::size_t i = 0; i < dim_; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return all_finite(x, std::numeric_limits<double>::infinity());
    }

    // Sets x to 0 below the guard if the origin is an equilibrium at time t.
    bool clamp(double t, std::span<double> x) {
        if (cfg_.origin_guard <= 0.0 || max_abs(x) == 0.0) return false;
        if (!(hom_norm(x, w_) < cfg_.origin_guard)) return false;
        std::span<double> z = slice(zero_, 0), fz = slice(fz_, 0);
        f_(t, z, fz);
        if (max_abs(fz) != 0.0) return false;
        std::fill(x.begin(), x.end(), 0.0);
        clamped_ = true;
        return true;
    }

    bool take_clamped() {
        const bool c = clamped_;
        clamped_ = false;
        return c;
    }

private:
    std::span<double> slice(std::vector<double>& v, unsigned level) {
        return std::span<double>(v).subspan(level * dim_, dim_);
    }

    const TimeField& f_;
    const IntegratorConfig& cfg_;
    const WeightVector& w_;
    std::size_t dim_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_, zero_, fz_;
    bool clamped_ = false;
};

}  // namespace

Trace integrate(const TimeField& f, const Point& x0, const IntegratorConfig& cfg, const WeightVector& weights,
                double t0) {
    cfg.validate();
    if (weights.size() != x0.size()) throw PreconditionError("integrate: weight and state dimensions differ");
    Trace tr;
    tr.origin_guard = cfg.origin_guard;
    Point x = x0;
    Stepper stepper(f, cfg, weights, x.size());
    auto record = [&](double t) {
        tr.times.push_back(t);
        tr.states.push_back(x);
    };
    if (stepper.clamp(t0, x)) tr.events.push_back({t0, "clamped"});
    stepper.take_clamped();
    record(t0);
    const auto steps = static_cast<std::size_t>(std::llround((cfg.t_end - t0) / cfg.step));
    bool was_zero = max_abs(x) == 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + cfg.step * static_cast<double>(k);
        const double t_next = t0 + cfg.step * static_cast<double>(k + 1);
        if (!stepper.advance(t, x, cfg.step, 0) || !all_finite(x, cfg.blowup_bound)) {
            tr.events.push_back({t, "blowup"});
            return tr;
        }
        stepper.clamp(t_next, x);
        const bool is_zero = max_abs(x) == 0.0;
        if ((stepper.take_clamped() || is_zero) && !was_zero) tr.events.push_back({t_next, "clamped"});
        was_zero = is_zero;
        const bool last = k + 1 == steps;
        if (last || (k + 1) % cfg.record_stride == 0) record(t_next);
        if (is_zero && cfg.stop_when_clamped) {
            if (!last && (k + 1) % cfg.record_stride != 0) record(t_next);
            break;
        }
    }
    return tr;
}

Trace integrate(const FieldFn& f, const Point& x0, const IntegratorConfig& cfg, const WeightVector& weights) {
    const TimeField tf = [&f](double, std::span<const double> x, std::span<double> out) { f(x, out); };
    return integrate(tf, x0, cfg, weights);
}

Trace integrate_orbit(const FieldFn& f, double degree, const WeightVector& r, const Point& x0,
                      const IntegratorConfig& cfg) {
    cfg.validate();
    if (r.size() != x0.size()) throw PreconditionError("integrate_orbit: weight and state dimensions differ");
    const std::size_t n = x0.size();
    // Augmented state (x, t) in the time s.
    auto g = [&](std::span<const double> y, std::span<double> out) {
        std::span<const double> x = y.first(n);
        const double N = hom_norm(x, r);
        if (N == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        f(x, out.first(n));
        const double scale = std::pow(N, -degree);
        for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
        out[n] = scale;
    };
    Trace tr;
    tr.origin_guard = cfg.origin_guard;
    Point y(x0);
    y.push_back(0.0);
    Point k1(n + 1), k2(n + 1), k3(n + 1), k4(n + 1), tmp(n + 1);
    auto record = [&] {
        tr.times.push_back(y[n]);
        tr.states.emplace_back(y.begin(), y.begin() + static_cast<long>(n));
    };
    record();
    const double h = cfg.step;
    const auto max_steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.step));
    for (std::size_t k = 0; k < max_steps; ++k) {
        if (hom_norm(std::span<const double>(y).first(n), r) < cfg.origin_guard) {
            std::fill(y.begin(), y.begin() + static_cast<long>(n), 0.0);
            tr.events.push_back({y[n], "clamped"});
            if (tr.times.back() == y[n]) tr.states.back().assign(n, 0.0);
            else record();
            break;
        }
        g(y, k1);
        for (std::size_t i = 0; i <= n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        g(tmp, k2);
        for (std::size_t i = 0; i <= n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        g(tmp, k3);
        for (std::size_t i = 0; i <= n; ++i) tmp[i] = y[i] + h * k3[i];
        g(tmp, k4);
        for (std::size_t i = 0; i <= n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!all_finite(y, cfg.blowup_bound)) {
            tr.events.push_back({tr.times.back(), "blowup"});
            return tr;
        }
        if (y[n] > cfg.t_end) break;
        if ((k + 1) % cfg.record_stride == 0) record();
    }
    if (tr.times.back() != y[n]) record();
    return tr;
}

std::optional<double> convergence_time(std::span<const double> times, std::span<const double> norms,
                                       double threshold) {
    if (times.empty() || !(norms.back() < threshold)) return std::nullopt;
    std::size_t k = norms.size();
    while (k > 0 && norms[k - 1] < threshold) --k;
    return times[k];
}

std::vector<double> state_norms(const Trace& trace, const WeightVector& weights) {
    std::vector<double> out;
    out.reserve(trace.size());
    for (const auto& s : trace.states) out.push_back(hom_norm(s, weights));
    return out;
}

std::optional<double> convergence_time(const Trace& trace, double threshold, const WeightVector& weights) {
    if (trace.blew_up()) return std::nullopt;
    const std::vector<double> norms = state_norms(trace, weights);
    return convergence_time(trace.times, norms, threshold);
}

void write_trace_csv(const Trace& trace, std::ostream& os) {
    const std::size_t n = trace.states.empty() ? 0 : trace.states.front().size();
    const bool est = !trace.estimates.empty();
    const bool dist = !trace.disturbances.empty();
    const bool aux = !trace.aux.empty();
    os << "time";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    if (est)
        for (std::size_t i = 1; i <= trace.estimates.front().size(); ++i) os << ",xhat" << i;
    if (dist)
        for (std::size_t i = 1; i <= trace.disturbances.front().size(); ++i) os << ",d" << i;
    if (aux)
        for (std::size_t i = 1; i <= trace.aux.front().size(); ++i) os << ",z" << i;
    os << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t k = 0; k < trace.size(); ++k) {
        put(trace.times[k]);
        auto row = [&](const std::vector<Point>& rows) {
            for (double v : rows[k]) {
                os << ",";
                put(v);
            }
        };
        row(trace.states);
        if (est) row(trace.estimates);
        if (dist) row(trace.disturbances);
        if (aux) row(trace.aux);
        os << "\n";
    }
}

nlohmann::json to_json(const Trace& trace) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : trace.events) events.push_back({{"time", e.time}, {"kind", e.kind}});
    nlohmann::json j = {{"times", trace.times}, {"states", trace.states}, {"events", events},
                        {"origin_guard", trace.origin_guard}};
    if (!trace.estimates.empty()) j["estimates"] = trace.estimates;
    if (!trace.disturbances.empty()) j["disturbances"] = trace.disturbances;
    if (!trace.aux.empty()) j["aux"] = trace.aux;
    return j;
}

nlohmann::json to_json(const IssReport& r) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points)
        pts.push_back({{"amplitude", p.amplitude},
                       {"steady_sup", p.steady_sup},
                       {"sign", p.sign},
                       {"diverged", p.diverged}});
    return {{"points", pts}, {"monotone", r.monotone}, {"vanishes_at_zero", r.vanishes_at_zero},
            {"pass", r.pass()}};
}

}  // namespace bilimit
