#include "bilimit/output_feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "bilimit/parallel.hpp"
#include "bilimit/sampling.hpp"

namespace bilimit {

const char* to_string(FeedbackForm f) { return f == FeedbackForm::Feedback ? "feedback" : "feedforward"; }

FeedbackForm feedback_form_from_string(const std::string& s) {
    if (s == "feedback") return FeedbackForm::Feedback;
    if (s == "feedforward") return FeedbackForm::Feedforward;
    throw PreconditionError("unknown form '" + s + "' (expected feedback or feedforward)");
}

bool form_admissible(FeedbackForm f, const DegreePair& d) {
    return f == FeedbackForm::Feedback ? d.d0 <= d.d_inf : d.d_inf <= d.d0;
}

DisturbanceScenario no_disturbance(std::size_t n) {
    DisturbanceScenario s;
    s.kind = "chain";
    s.n = n;
    return s;
}

DisturbanceScenario feedback_example(const GrowthParameters& g) {
    if (!(0.0 < g.q && g.q < g.p && g.p < 2.0))
        throw PreconditionError("feedback example requires 0 < q < p < 2");
    DisturbanceScenario s;
    s.kind = "feedback_example";
    s.n = 2;
    s.growth = g;
    s.delta = [g](double, std::span<const double> x, std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
        out[1] = g.c0 * signed_pow(x[1], g.q) + g.c_inf * signed_pow(x[1], g.p);
    };
    return s;
}

DisturbanceScenario feedforward_example(double z0) {
    DisturbanceScenario s;
    s.kind = "feedforward_example";
    s.n = 3;
    s.aux_dim = 1;
    s.aux0 = {z0};
    s.growth = {1.0, 1.0, 0.75, 1.5};
    s.delta = [](double, std::span<const double> x, std::span<const double> z, std::span<double> out) {
        out[0] = signed_pow(x[2], 1.5) + signed_pow(z[0], 3.0);
        out[1] = 0.0;
        out[2] = 0.0;
    };
    s.aux_field = [](double, std::span<const double> x, std::span<const double> z, std::span<double> out) {
        out[0] = -signed_pow(z[0], 4.0) + x[2];
    };
    return s;
}

namespace {

double extended(const WeightVector& r, double d, std::size_t i) { return i <= r.size() ? r[i - 1] : 1.0 + d; }

// Index range j (1-based, inclusive) entering the bound on delta_i.
std::pair<std::size_t, std::size_t> envelope_range(std::size_t i, std::size_t n, FeedbackForm form) {
    return form == FeedbackForm::Feedback ? std::pair<std::size_t, std::size_t>{1, i}
                                          : std::pair<std::size_t, std::size_t>{i + 2, n};
}

double power_sum(std::size_t i, std::span<const double> x, const ChainWeights& w, const DegreePair& d,
                 double c0, double c_inf, FeedbackForm form, bool signed_terms) {
    const auto [lo, hi] = envelope_range(i, w.n, form);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double e0 = extended(w.r0, d.d0, i + 1) / w.r0[j - 1];
        const double einf = extended(w.r_inf, d.d_inf, i + 1) / w.r_inf[j - 1];
        const double v = x[j - 1];
        s += signed_terms ? c0 * signed_pow(v, e0) + c_inf * signed_pow(v, einf)
                          : c0 * std::pow(std::fabs(v), e0) + c_inf * std::pow(std::fabs(v), einf);
    }
    return s;
}

}  // namespace

DisturbanceScenario power_sum_disturbance(std::size_t n, const DegreePair& d, double c0, double c_inf,
                                          FeedbackForm form) {
    const ChainWeights w = weights_from_degrees(n, d);
    DisturbanceScenario s;
    s.kind = "power_sum";
    s.n = n;
    s.growth = {c0, c_inf, 1.0, 1.0};
    s.delta = [w, d, c0, c_inf, form](double, std::span<const double> x, std::span<const double>,
                                      std::span<double> out) {
        for (std::size_t i = 1; i <= w.n; ++i) out[i - 1] = power_sum(i, x, w, d, c0, c_inf, form, true);
    };
    return s;
}

DisturbanceScenario constant_disturbance(std::size_t n, double amplitude) {
    DisturbanceScenario s;
    s.kind = "constant";
    s.n = n;
    s.growth = {amplitude, 0.0, 0.0, 0.0};
    s.delta = [n, amplitude](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[n - 1] = amplitude;
    };
    return s;
}

double disturbance_envelope(std::size_t i, std::span<const double> x, const DegreePair& d, double c0,
                            double c_inf, FeedbackForm form) {
    return power_sum(i, x, weights_from_degrees(x.size(), d), d, c0, c_inf, form, false);
}

OutputFeedbackDesign assemble(const ObserverDesign& obs, const ControllerDesign& ctrl, double L,
                              std::optional<FeedbackForm> form) {
    if (!(L > 0.0)) throw PreconditionError("L must be positive");
    if (obs.n() != ctrl.n() || obs.degrees().d0 != ctrl.degrees().d0 ||
        obs.degrees().d_inf != ctrl.degrees().d_inf)
        throw PreconditionError("observer and controller signatures differ");
    OutputFeedbackDesign d;
    d.observer = obs;
    d.controller = ctrl;
    d.L = L;
    d.form = form.value_or(ctrl.degrees().d0 <= ctrl.degrees().d_inf ? FeedbackForm::Feedback
                                                                     : FeedbackForm::Feedforward);
    return d;
}

Point plant_state(std::span<const double> xhat, std::span<const double> E, double L) {
    Point x(xhat.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i, scale *= L) x[i] = scale * (xhat[i] - E[i]);
    return x;
}

Point error_state(std::span<const double> x, std::span<const double> xhat, double L) {
    Point E(x.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < E.size(); ++i, scale *= L) E[i] = xhat[i] - x[i] / scale;
    return E;
}

namespace {

struct Scratch {
    std::vector<double> K, x, delta, g;
    void size(std::size_t n, std::size_t m) {
        K.resize(n);
        x.resize(n);
        delta.resize(n);
        g.resize(m);
    }
};

}  // namespace

TimeField rescaled_field(const OutputFeedbackDesign& d, const DisturbanceScenario& s, double t0) {
    if (s.n != d.n()) throw PreconditionError("scenario dimension differs from the design");
    auto D = std::make_shared<const OutputFeedbackDesign>(d);
    auto S = std::make_shared<const DisturbanceScenario>(s);
    return [D, S, t0](double tau, std::span<const double> y, std::span<double> out) {
        thread_local Scratch w;
        const std::size_t n = D->n(), m = S->aux_dim;
        const double L = D->L;
        w.size(n, m);
        auto xhat = y.first(n);
        auto E = y.subspan(n, n);
        auto z = y.subspan(2 * n, m);
        D->observer.injection(E[0], w.K);
        const double phi = D->controller.control(xhat);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = (i + 1 < n ? xhat[i + 1] : phi) + w.K[i];
            out[n + i] = (i + 1 < n ? E[i + 1] : 0.0) + w.K[i];
        }
        if (S->disturbed() || m > 0) {
            double scale = 1.0;
            for (std::size_t i = 0; i < n; ++i, scale *= L) w.x[i] = scale * (xhat[i] - E[i]);
            const double t = t0 + tau / L;
            if (S->disturbed()) {
                S->delta(t, w.x, z, w.delta);
                double Li = L;
                for (std::size_t i = 0; i < n; ++i, Li *= L) out[n + i] -= w.delta[i] / Li;
            }
            if (m > 0) {
                S->aux_field(t, w.x, z, w.g);
                for (std::size_t j = 0; j < m; ++j) out[2 * n + j] = w.g[j] / L;
            }
        }
    };
}

TimeField raw_field(const OutputFeedbackDesign& d, const DisturbanceScenario& s) {
    if (s.n != d.n()) throw PreconditionError("scenario dimension differs from the design");
    auto D = std::make_shared<const OutputFeedbackDesign>(d);
    auto S = std::make_shared<const DisturbanceScenario>(s);
    return [D, S](double t, std::span<const double> y, std::span<double> out) {
        thread_local Scratch w;
        const std::size_t n = D->n(), m = S->aux_dim;
        const double L = D->L;
        w.size(n, m);
        auto x = y.first(n);
        auto xhat = y.subspan(n, n);
        auto z = y.subspan(2 * n, m);
        const double phi = D->controller.control(xhat);
        const double u = std::pow(L, static_cast<double>(n)) * phi;
        D->observer.injection(xhat[0] - x[0], w.K);
        std::fill(w.delta.begin(), w.delta.end(), 0.0);
        if (S->disturbed()) S->delta(t, x, z, w.delta);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = (i + 1 < n ? x[i + 1] : u) + w.delta[i];
            out[n + i] = L * ((i + 1 < n ? xhat[i + 1] : phi) + w.K[i]);
        }
        if (m > 0) {
            S->aux_field(t, x, z, w.g);
            for (std::size_t j = 0; j < m; ++j) out[2 * n + j] = w.g[j];
        }
    };
}

HomVectorField rescaled_vector_field(const OutputFeedbackDesign& d) {
    auto D = std::make_shared<const OutputFeedbackDesign>(d);
    auto make = [D](Branch br) -> FieldFn {
        return [D, br](std::span<const double> y, std::span<double> out) {
            const std::size_t n = D->n();
            std::vector<double> K(n);
            auto xhat = y.first(n);
            auto E = y.subspan(n, n);
            D->observer.injection(E[0], K, br);
            const double phi = D->controller.control(xhat, br);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = (i + 1 < n ? xhat[i + 1] : phi) + K[i];
                out[n + i] = (i + 1 < n ? E[i + 1] : 0.0) + K[i];
            }
        };
    };
    const ChainWeights& w = d.controller.weights();
    auto twice = [](const WeightVector& r) {
        std::vector<double> v = r.entries();
        v.insert(v.end(), r.entries().begin(), r.entries().end());
        return WeightVector(v);
    };
    return {make(Branch::Full), {twice(w.r0), d.degrees().d0, twice(w.r_inf), d.degrees().d_inf},
            make(Branch::Zero), make(Branch::Infinity)};
}

namespace {

WeightVector internal_weights(const OutputFeedbackDesign& d, std::size_t aux_dim) {
    std::vector<double> v = d.controller.weights().r0.entries();
    v.insert(v.end(), d.controller.weights().r0.entries().begin(), d.controller.weights().r0.entries().end());
    for (std::size_t j = 0; j < aux_dim; ++j) v.push_back(1.0);
    return WeightVector(v);
}

}  // namespace

OutputFeedbackRun simulate_output_feedback(const OutputFeedbackDesign& d, const DisturbanceScenario& s,
                                           const Point& x0, const IntegratorConfig& cfg, SimulationFrame frame,
                                           std::optional<Point> xhat0, std::optional<Point> z0) {
    const std::size_t n = d.n(), m = s.aux_dim;
    if (x0.size() != n) throw PreconditionError("initial state dimension differs from the design");
    const Point xh = xhat0.value_or(Point(n, 0.0));
    const Point z = z0.value_or(s.aux0.size() == m ? s.aux0 : Point(m, 0.0));
    if (xh.size() != n || z.size() != m) throw PreconditionError("initial estimate or auxiliary state size");
    const double L = d.L;

    Point y;
    TimeField f;
    if (frame == SimulationFrame::Rescaled) {
        y = xh;
        const Point E = error_state(x0, xh, L);
        y.insert(y.end(), E.begin(), E.end());
        f = rescaled_field(d, s);
    } else {
        y = x0;
        y.insert(y.end(), xh.begin(), xh.end());
        f = raw_field(d, s);
    }
    y.insert(y.end(), z.begin(), z.end());

    const WeightVector wint = internal_weights(d, m);
    const Trace raw = integrate(f, y, cfg, wint);

    OutputFeedbackRun run;
    run.blowup = raw.blew_up();
    Trace& tr = run.trace;
    tr.origin_guard = raw.origin_guard;
    const WeightVector w2 = internal_weights(d, 0);
    const double time_scale = frame == SimulationFrame::Rescaled ? 1.0 / L : 1.0;
    for (const auto& e : raw.events) tr.events.push_back({e.time * time_scale, e.kind});
    std::vector<double> delta(n);
    for (std::size_t k = 0; k < raw.size(); ++k) {
        std::span<const double> row = raw.states[k];
        Point xk, xhk, Ek;
        if (frame == SimulationFrame::Rescaled) {
            xhk.assign(row.begin(), row.begin() + static_cast<long>(n));
            Ek.assign(row.begin() + static_cast<long>(n), row.begin() + static_cast<long>(2 * n));
            xk = plant_state(xhk, Ek, L);
        } else {
            xk.assign(row.begin(), row.begin() + static_cast<long>(n));
            xhk.assign(row.begin() + static_cast<long>(n), row.begin() + static_cast<long>(2 * n));
            Ek = error_state(xk, xhk, L);
        }
        Point zk(row.begin() + static_cast<long>(2 * n), row.end());
        const double t = raw.times[k] * time_scale;
        tr.times.push_back(t);
        if (s.disturbed()) {
            s.delta(t, xk, zk, delta);
            tr.disturbances.push_back(delta);
        }
        Point internal = xhk;
        internal.insert(internal.end(), Ek.begin(), Ek.end());
        run.internal_norms.push_back(hom_norm(internal, w2));
        tr.states.push_back(std::move(xk));
        tr.estimates.push_back(std::move(xhk));
        if (m > 0) tr.aux.push_back(std::move(zk));
    }
    run.final_norm = run.internal_norms.empty() ? std::numeric_limits<double>::infinity()
                                                : run.internal_norms.back();
    if (run.blowup) run.final_norm = std::numeric_limits<double>::infinity();
    else run.convergence_time = convergence_time(tr.times, run.internal_norms, cfg.threshold);
    return run;
}

double disturbance_audit(const Trace& trace, const DegreePair& d, double c0, double c_inf, FeedbackForm form) {
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.disturbances.size(); ++k) {
        const Point& x = trace.states[k];
        for (std::size_t i = 1; i <= x.size(); ++i) {
            const double env = disturbance_envelope(i, x, d, c0, c_inf, form);
            const double mag = std::fabs(trace.disturbances[k][i - 1]);
            if (env > 0.0) worst = std::max(worst, mag / env);
            else if (mag > 0.0) worst = std::numeric_limits<double>::infinity();
        }
    }
    return worst;
}

namespace {

double reparam(double v, double k0, double kinf, Branch br) {
    if (k0 == kinf) return std::pow(v, k0);
    switch (br) {
        case Branch::Zero: return std::pow(v, k0);
        case Branch::Infinity: return std::pow(v, kinf);
        case Branch::Full: break;
    }
    return std::pow(v, k0) + std::pow(v, kinf);
}

double reparam_derivative(double v, double k0, double kinf, Branch br) {
    if (k0 == kinf) return k0 * std::pow(v, k0 - 1.0);
    switch (br) {
        case Branch::Zero: return k0 * std::pow(v, k0 - 1.0);
        case Branch::Infinity: return kinf * std::pow(v, kinf - 1.0);
        case Branch::Full: break;
    }
    return k0 * std::pow(v, k0 - 1.0) + kinf * std::pow(v, kinf - 1.0);
}

CompositeLyapunov composite_shape(const OutputFeedbackDesign& d) {
    const ControllerDesign& c = d.controller;
    const ObserverDesign& o = d.observer;
    CompositeLyapunov U;
    U.dU0 = std::max(c.dV0(), o.dW0());
    U.kV0 = U.dU0 / c.dV0();
    U.kW0 = U.dU0 / o.dW0();
    U.dU_inf = std::max(c.dV_inf() * U.kV0, o.dW_inf() * U.kW0);
    U.kV_inf = U.dU_inf / c.dV_inf();
    U.kW_inf = U.dU_inf / o.dW_inf();
    return U;
}

// eta and gamma at z = (xhat, E).
std::pair<double, double> composite_terms(const OutputFeedbackDesign& d, const CompositeLyapunov& U,
                                          std::span<const double> z, Branch br) {
    const std::size_t n = d.n();
    auto xhat = z.first(n);
    auto E = z.subspan(n, n);
    std::vector<double> K(n), gV(n), gW(n);
    d.observer.injection(E[0], K, br);
    const double phi = d.controller.control(xhat, br);
    const double V = d.controller.lyapunov(n, xhat, br, gV);
    const double W = d.observer.lyapunov(0, E, br, gW);
    double dV = 0.0, dW = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dV += gV[i] * ((i + 1 < n ? xhat[i + 1] : phi) + K[i]);
        dW += gW[i] * ((i + 1 < n ? E[i + 1] : 0.0) + K[i]);
    }
    const double eta = V > 0.0 ? reparam_derivative(V, U.kV0, U.kV_inf, br) * dV : 0.0;
    const double gamma = W > 0.0 ? -reparam_derivative(W, U.kW0, U.kW_inf, br) * dW : 0.0;
    return {eta, gamma};
}

}  // namespace

DominationProblem composite_problem(const OutputFeedbackDesign& d, CompositeLyapunov& shape) {
    shape = composite_shape(d);
    auto D = std::make_shared<const OutputFeedbackDesign>(d);
    const CompositeLyapunov U = shape;
    auto make = [D, U](bool eta) {
        return [D, U, eta](Branch br) -> ScalarFn {
            return [D, U, eta, br](std::span<const double> z) {
                const auto t = composite_terms(*D, U, z, br);
                return eta ? t.first : t.second;
            };
        };
    };
    const ChainWeights& w = d.controller.weights();
    auto twice = [](const WeightVector& r) {
        std::vector<double> v = r.entries();
        v.insert(v.end(), r.entries().begin(), r.entries().end());
        return WeightVector(v);
    };
    const BiLimitSignature sig{twice(w.r0), U.dU0 + d.degrees().d0, twice(w.r_inf), U.dU_inf + d.degrees().d_inf};
    DominationProblem p;
    auto eta = make(true), gamma = make(false);
    p.eta = {eta(Branch::Full), sig, eta(Branch::Zero), eta(Branch::Infinity)};
    p.gamma = {gamma(Branch::Full), sig, gamma(Branch::Zero), gamma(Branch::Infinity)};
    return p;
}

CompositeLyapunov composite_lyapunov(const OutputFeedbackDesign& d, const LemmaSampling& s) {
    CompositeLyapunov U;
    const DominationProblem p = composite_problem(d, U);
    U.certificate = find_domination_constant(p, s);
    U.weight = U.certificate.c;
    return U;
}

double composite_value(const OutputFeedbackDesign& d, const CompositeLyapunov& U, std::span<const double> z,
                       Branch br) {
    const std::size_t n = d.n();
    const double V = d.controller.lyapunov(n, z.first(n), br);
    const double W = d.observer.lyapunov(0, z.subspan(n, n), br);
    return reparam(V, U.kV0, U.kV_inf, br) + U.weight * reparam(W, U.kW0, U.kW_inf, br);
}

double composite_derivative(const OutputFeedbackDesign& d, const CompositeLyapunov& U,
                            std::span<const double> z, Branch br) {
    const auto [eta, gamma] = composite_terms(d, U, z, br);
    return eta - U.weight * gamma;
}

RungResult evaluate_rung(const OutputFeedbackDesign& d, const DisturbanceScenario& s,
                         const std::vector<Point>& test_set, const SweepSpec& spec) {
    std::vector<OutputFeedbackRun> runs(test_set.size());
    parallel_for(test_set.size(), [&](std::size_t k) {
        runs[k] = simulate_output_feedback(d, s, test_set[k], spec.integrator);
    });
    RungResult r;
    r.L = d.L;
    for (const auto& run : runs) {
        r.worst_norm = std::max(r.worst_norm, run.final_norm);
        const bool ok = !run.blowup && run.final_norm < spec.pass_threshold;
        if (!ok) {
            ++r.failures;
            continue;
        }
        if (auto t = convergence_time(run.trace.times, run.internal_norms, spec.pass_threshold))
            r.worst_time = std::max(r.worst_time, *t);
    }
    r.pass = r.failures == 0;
    return r;
}

namespace {

OutputFeedbackDesign sweep(const ObserverDesign& obs, const ControllerDesign& ctrl, const DisturbanceScenario& s,
                           const SweepSpec& spec, FeedbackForm form, SweepReport* out) {
    if (!form_admissible(form, ctrl.degrees()))
        throw PreconditionError(std::string(to_string(form)) + " form requires " +
                                (form == FeedbackForm::Feedback ? "d0 <= d_inf" : "d_inf <= d0"));
    if (spec.max_rungs < 1) throw PreconditionError("sweep needs at least one rung");
    SweepReport rep;
    rep.form = form;
    rep.test_set = random_initial_conditions(ctrl.weights().r0, spec.test_count, spec.norm_lo, spec.norm_hi,
                                             spec.seed);
    const double factor = form == FeedbackForm::Feedback ? 2.0 : 0.5;
    OutputFeedbackDesign design = assemble(obs, ctrl, spec.L_start, form);
    std::optional<double> last_fail;
    int extras = 0;
    rep.interval_consistent = true;
    for (int k = 0; k < spec.max_rungs; ++k) {
        design.L = spec.L_start * std::pow(factor, k);
        const RungResult r = evaluate_rung(design, s, rep.test_set, spec);
        rep.rungs.push_back(r);
        if (!rep.selected_L) {
            if (r.pass) rep.selected_L = r.L;
            else last_fail = r.L;
            if (r.pass && spec.extra_rungs == 0) break;
        } else {
            rep.interval_consistent = rep.interval_consistent && r.pass;
            if (++extras >= spec.extra_rungs) break;
        }
    }
    if (!rep.selected_L) {
        rep.interval_consistent = false;
        if (out) *out = rep;
        throw SelectionFailure(std::string(to_string(form)) + "-form selection failed: no rung passed", rep);
    }
    double chosen = *rep.selected_L;
    if (spec.refine && last_fail) {
        double fail = *last_fail, pass = chosen;
        for (int k = 0; k < spec.refine_steps; ++k) {
            design.L = std::sqrt(fail * pass);
            if (evaluate_rung(design, s, rep.test_set, spec).pass) pass = design.L;
            else fail = design.L;
        }
        rep.refined = {fail, pass};
        chosen = pass;
    }
    design.L = chosen;
    if (out) *out = rep;
    return design;
}

}  // namespace

OutputFeedbackDesign select_L_feedback(const ObserverDesign& obs, const ControllerDesign& ctrl,
                                       const DisturbanceScenario& s, const SweepSpec& spec, SweepReport* report) {
    return sweep(obs, ctrl, s, spec, FeedbackForm::Feedback, report);
}

OutputFeedbackDesign select_L_feedforward(const ObserverDesign& obs, const ControllerDesign& ctrl,
                                          const DisturbanceScenario& s, const SweepSpec& spec,
                                          SweepReport* report) {
    return sweep(obs, ctrl, s, spec, FeedbackForm::Feedforward, report);
}

double finite_time_bound(double c, double dV0, double dV_inf, const DegreePair& d) {
    if (!(d.d0 < 0.0 && 0.0 < d.d_inf)) throw PreconditionError("finite-time bound requires d0 < 0 < d_inf");
    if (!(c > 0.0) || !(dV0 > 0.0) || !(dV_inf > 0.0))
        throw PreconditionError("finite-time bound requires positive c and Lyapunov degrees");
    return (dV_inf / d.d_inf + dV0 / std::fabs(d.d0)) / c;
}

FiniteTimeCertificate finite_time_certificate(const ControllerDesign& ctrl, const LemmaSampling& s) {
    const DegreePair& dg = ctrl.degrees();
    if (!(dg.d0 < 0.0 && 0.0 < dg.d_inf)) throw PreconditionError("finite-time certificate requires d0 < 0 < d_inf");
    auto C = std::make_shared<const ControllerDesign>(ctrl);
    const std::size_t n = ctrl.n();
    const double e0 = (ctrl.dV0() + dg.d0) / ctrl.dV0();
    const double einf = (ctrl.dV_inf() + dg.d_inf) / ctrl.dV_inf();
    auto rate = [C, n, e0, einf](Branch br) -> ScalarFn {
        return [C, n, e0, einf, br](std::span<const double> x) {
            const double V = C->lyapunov(n, x, br);
            if (br == Branch::Zero) return std::pow(V, e0);
            if (br == Branch::Infinity) return std::pow(V, einf);
            return std::pow(V, e0) + std::pow(V, einf);
        };
    };
    auto decrease = [C, n](Branch br) -> ScalarFn {
        return [C, n, br](std::span<const double> x) {
            std::vector<double> g(n), f(n);
            C->lyapunov(n, x, br, g);
            C->closed_loop(x, f, br);
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s -= g[i] * f[i];
            return s;
        };
    };
    const ChainWeights& w = ctrl.weights();
    const BiLimitSignature sig{w.r0, ctrl.dV0() + dg.d0, w.r_inf, ctrl.dV_inf() + dg.d_inf};
    const HomFunction phi{rate(Branch::Full), sig, rate(Branch::Zero), rate(Branch::Infinity)};
    const HomFunction zeta{decrease(Branch::Full), sig, decrease(Branch::Zero), decrease(Branch::Infinity)};
    FiniteTimeCertificate cert;
    cert.domination = domination_bound(phi, zeta, s);
    cert.c = 1.0 / cert.domination.c;
    cert.bound = finite_time_bound(cert.c, ctrl.dV0(), ctrl.dV_inf(), dg);
    return cert;
}

IssReport run_iss_experiment(const OutputFeedbackDesign& design, const std::vector<double>& amplitudes,
                             const Point& x0, const IntegratorConfig& cfg) {
    IssReport rep;
    std::vector<double> sorted = amplitudes;
    std::sort(sorted.begin(), sorted.end());
    const WeightVector& r0 = design.controller.weights().r0;
    for (double a : sorted) {
        IssPoint best;
        best.amplitude = a;
        best.steady_sup = -1.0;
        for (int sign : {1, -1}) {
            const OutputFeedbackRun run =
                simulate_output_feedback(design, constant_disturbance(design.n(), sign * a), x0, cfg);
            IssPoint pt;
            pt.amplitude = a;
            pt.sign = sign;
            if (run.blowup) {
                pt.diverged = true;
                pt.steady_sup = std::numeric_limits<double>::infinity();
            } else {
                const double t_from = run.trace.times.back() * 0.8;
                for (std::size_t k = 0; k < run.trace.size(); ++k)
                    if (run.trace.times[k] >= t_from)
                        pt.steady_sup = std::max(pt.steady_sup, hom_norm(run.trace.states[k], r0));
            }
            if (pt.steady_sup > best.steady_sup) best = pt;
            if (a == 0.0) break;
        }
        rep.points.push_back(best);
    }
    rep.monotone = std::none_of(rep.points.begin(), rep.points.end(), [](const IssPoint& p) { return p.diverged; });
    for (std::size_t k = 0; k + 1 < rep.points.size(); ++k)
        if (rep.points[k + 1].steady_sup < rep.points[k].steady_sup) rep.monotone = false;
    rep.vanishes_at_zero = false;
    for (const auto& p : rep.points)
        if (p.amplitude == 0.0) rep.vanishes_at_zero = !p.diverged && p.steady_sup < cfg.threshold;
    return rep;
}

nlohmann::json to_json(const SweepReport& r) {
    nlohmann::json rungs = nlohmann::json::array();
    for (const auto& g : r.rungs)
        rungs.push_back({{"L", g.L},
                         {"pass", g.pass},
                         {"failures", g.failures},
                         {"worst_time", g.worst_time},
                         {"worst_norm", std::isfinite(g.worst_norm) ? nlohmann::json(g.worst_norm)
                                                                   : nlohmann::json("inf")}});
    nlohmann::json j = {{"form", to_string(r.form)},
                        {"rungs", rungs},
                        {"test_set", r.test_set},
                        {"interval_consistent", r.interval_consistent}};
    j["selected_L"] = r.selected_L ? nlohmann::json(*r.selected_L) : nlohmann::json(nullptr);
    if (r.refined) j["refined"] = {{"failing", r.refined->first}, {"passing", r.refined->second}};
    return j;
}

nlohmann::json to_json(const CompositeLyapunov& c) {
    return {{"weight", c.weight}, {"dU0", c.dU0}, {"dU_inf", c.dU_inf}, {"kV0", c.kV0},
            {"kV_inf", c.kV_inf}, {"kW0", c.kW0}, {"kW_inf", c.kW_inf}, {"certificate", to_json(c.certificate)}};
}

}  // namespace bilimit
