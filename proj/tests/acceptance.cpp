// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "bilimit/gain_lemma.hpp"
#include "bilimit/hom_core.hpp"
#include "bilimit/homogeneity_check.hpp"
#include "bilimit/observer.hpp"
#include "bilimit/output_feedback.hpp"
#include "bilimit/sampling.hpp"
#include "bilimit/sim.hpp"
#include "bilimit/state_feedback.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace bilimit;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Homogeneous algebra, 10^4 random cases per identity, under 10 s.
Outcome algebra_suite() {
    auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + U(rng) * (std::log(hi) - std::log(lo))); };
    auto weights = [&](std::size_t n) {
        std::vector<double> r(n);
        for (auto& v : r) v = 0.2 + 2.8 * U(rng);
        return WeightVector(r);
    };
    auto point = [&](std::size_t n) {
        Point x(n);
        for (auto& v : x) v = (U(rng) < 0.5 ? -1.0 : 1.0) * log_uniform(1e-3, 1e3);
        return x;
    };
    auto rel = [](std::span<const double> a, std::span<const double> b) {
        double w = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double s = std::max(std::abs(a[i]), std::abs(b[i]));
            if (s > 0) w = std::max(w, std::abs(a[i] - b[i]) / s);
        }
        return w;
    };
    const int N = 10000;
    double group = 0, norm = 0, polar = 0, sphere = 0, deriv = 0;
    for (int k = 0; k < N; ++k) {
        std::size_t n = 1 + k % 4;
        auto r = weights(n);
        auto x = point(n);
        double l1 = log_uniform(1e-3, 1e3), l2 = log_uniform(1e-3, 1e3);
        group = std::max(group, rel(dilate(l1, r, dilate(l2, r, x)), dilate(l1 * l2, r, x)));
        double hn = hom_norm(x, r);
        norm = std::max(norm, std::abs(hom_norm(dilate(l1, r, x), r) - l1 * hn) / (l1 * hn));
        auto pd = polar_decompose(x, r);
        polar = std::max(polar, rel(dilate(pd.lambda, r, pd.theta), x));
        sphere = std::max(sphere, std::abs(hom_norm(pd.theta, r) - 1.0));
        double e = 0.05 + 3.95 * U(rng);
        double w = (U(rng) < 0.5 ? -1.0 : 1.0) * log_uniform(1e-2, 1e2);
        double h = 1e-5 * std::abs(w);
        double fd = (signed_pow(w + h, e) - signed_pow(w - h, e)) / (2 * h);
        double ex = signed_pow_derivative(w, e);
        deriv = std::max(deriv, std::abs(fd - ex) / std::abs(ex));
    }
    double elapsed = seconds_since(t0);
    bool pass = group < 1e-12 && norm < 1e-10 && polar < 1e-10 && sphere < 1e-12 && deriv < 1e-5 && elapsed < 10.0;
    return {pass, fmt("group %.1e (<1e-12), norm %.1e (<1e-10), polar %.1e (<1e-10), sphere %.1e (<1e-12), "
                      "derivative %.1e (<1e-5), %.2f s (<10 s)",
                      group, norm, polar, sphere, deriv, elapsed)};
}

// 2. Domination constant for x1 x2 - x1^2 against x2^2 with a dense grid oracle, under 5 s.
Outcome lemma_example() {
    auto t0 = Clock::now();
    WeightVector r({1.0, 1.0});
    DominationProblem p{
        HomFunction::standard([](std::span<const double> x) { return x[0] * x[1] - x[0] * x[0]; }, r, 2.0),
        HomFunction::standard([](std::span<const double> x) { return x[1] * x[1]; }, r, 2.0)};
    auto res = find_domination_constant(p);
    const int G = 400;
    double worst = -1e300;
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            Point x{-10.0 + 20.0 * (i + 0.5) / G, -10.0 + 20.0 * (j + 0.5) / G};
            worst = std::max(worst, (p.eta(x) - res.c * p.gamma(x)) / (x[0] * x[0] + x[1] * x[1]));
        }
    double elapsed = seconds_since(t0);
    bool pass = res.c >= 0.25 && res.min_margin() > 0.0 && worst < 0.0 && elapsed < 5.0;
    return {pass, fmt("c = %.6g (>= 0.25), min margin %.3g, grid max of (eta - c gamma)/|x|^2 = %.3g (< 0), %.2f s (<5 s)",
                      res.c, res.min_margin(), worst, elapsed)};
}

struct ChainCase {
    std::size_t n;
    DegreePair d;
};

// q = 1, p = 1.5 gives (0, 0.5); for three integrators 0.5 is outside the admissible interval,
// so the largest tested infinity degree there is 0.25.
const ChainCase kChains[] = {{2, {0.0, 0.5}}, {3, {0.0, 0.25}}};

// 3. The error of the coupled plant and observer under u = sin t equals the autonomous error.
Outcome observer_exactness() {
    std::ostringstream detail;
    bool pass = true;
    for (const auto& c : kChains) {
        auto obs = build_observer(c.n, c.d);
        const std::size_t n = c.n;
        TimeField coupled = [&obs, n](double t, std::span<const double> y, std::span<double> out) {
            std::vector<double> K(n);
            obs.injection(y[n] - y[0], K);
            const double u = std::sin(t);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = i + 1 < n ? y[i + 1] : u;
                out[n + i] = (i + 1 < n ? y[n + i + 1] : u) + K[i];
            }
        };
        IntegratorConfig cfg;
        cfg.t_end = 20.0;
        cfg.origin_guard = 0.0;
        double worst = 0.0;
        for (const auto& x0 : random_initial_conditions(obs.weights().r0, 5, 1e-1, 1e1, 11)) {
            Point y(x0), E0(n);
            y.resize(2 * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) E0[i] = -x0[i];
            auto a = integrate(coupled, y, cfg, WeightVector::uniform(2 * n));
            auto b = integrate(obs.error_vector_field().eval, E0, cfg, obs.weights().r0);
            if (a.size() != b.size()) {
                worst = INFINITY;
                break;
            }
            for (std::size_t k = 0; k < a.size(); ++k)
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::abs(a.states[k][n + i] - a.states[k][i] - b.states[k][i]));
        }
        pass = pass && worst < 1e-6;
        detail << fmt("n=%zu sup %.2e; ", n, worst);
    }
    detail << "tolerance 1e-6 over 20 s";
    return {pass, detail.str()};
}

// 4. Tuned observer and controller from 100 initial conditions, with both approximations.
Outcome convergence_battery() {
    auto t0 = Clock::now();
    std::ostringstream detail;
    bool pass = true;
    IntegratorConfig full;
    full.t_end = 50.0;
    full.record_stride = 100;
    // the approximations are homogeneous; their orbits are integrated in rescaled time
    IntegratorConfig orbit;
    orbit.step = 1e-3;
    orbit.t_end = 1e5;
    orbit.record_stride = 100;
    for (const auto& c : kChains) {
        auto obs = build_observer(c.n, c.d);
        auto ctrl = build_controller(c.n, c.d);
        auto ics = random_initial_conditions(ctrl.weights().r0, 100, 1e-2, 1e2, 1);
        const std::pair<const char*, HomVectorField> fields[] = {{"observer", obs.error_vector_field()},
                                                                 {"controller", ctrl.closed_loop_field()}};
        for (const auto& [who, F] : fields) {
            int failures[3] = {0, 0, 0};
            for (int b = 0; b < 3; ++b) {
                const FieldFn& f = b == 0 ? F.eval : b == 1 ? F.approx0 : F.approx_inf;
                const WeightVector& w = b == 2 ? F.sig.r_inf : F.sig.r0;
                double deg = b == 2 ? F.sig.d_inf : F.sig.d0;
                for (const auto& x0 : ics) {
                    auto tr = b == 0 ? integrate(f, x0, full, w) : integrate_orbit(f, deg, w, x0, orbit);
                    if (!convergence_time(tr, 1e-6, w)) ++failures[b];
                }
                pass = pass && failures[b] == 0;
            }
            detail << fmt("n=%zu %s failures full/zero/inf %d/%d/%d; ", c.n, who, failures[0], failures[1], failures[2]);
        }
    }
    double elapsed = seconds_since(t0);
    pass = pass && elapsed < 120.0;
    detail << fmt("%.1f s (<120 s)", elapsed);
    return {pass, detail.str()};
}

// 5. Disturbance-free output feedback for several L.
Outcome output_feedback_any_L() {
    ChainCase c = kChains[0];
    auto obs = build_observer(c.n, c.d);
    auto ctrl = build_controller(c.n, c.d);
    auto ics = random_initial_conditions(ctrl.weights().r0, 25, 1e-2, 1e2, 3);
    std::ostringstream detail;
    bool pass = true;
    for (double L : {0.25, 1.0, 4.0, 16.0}) {
        auto des = assemble(obs, ctrl, L);
        IntegratorConfig cfg;
        cfg.record_stride = 100;
        int failures = 0;
        double worst = 0.0;
        for (const auto& x0 : ics) {
            auto run = simulate_output_feedback(des, no_disturbance(c.n), x0, cfg);
            if (!run.convergence_time) ++failures;
            else worst = std::max(worst, *run.convergence_time);
        }
        pass = pass && failures == 0;
        detail << fmt("L=%g %d/25 fail, worst t %.3g; ", L, failures, worst);
    }
    return {pass, detail.str() + "threshold 1e-6"};
}

std::string rung_list(const SweepReport& r) {
    std::ostringstream os;
    for (const auto& g : r.rungs) os << fmt("%g:%s ", g.L, g.pass ? "pass" : "fail");
    return os.str();
}

// 6. Large-L selection for the second-channel power disturbance.
Outcome feedback_sweep() {
    DegreePair d{0.0, 0.5};
    auto obs = build_observer(2, d);
    auto ctrl = build_controller(2, d);
    SweepSpec spec;
    spec.integrator.record_stride = 100;
    SweepReport rep;
    try {
        auto des = select_L_feedback(obs, ctrl, feedback_example({0.5, 0.5, 1.0, 1.5}), spec, &rep);
        bool pass = rep.interval_consistent;
        return {pass, fmt("selected L = %g, rungs %s, larger rungs all pass: %s", des.L, rung_list(rep).c_str(),
                          rep.interval_consistent ? "yes" : "no")};
    } catch (const SelectionFailure& e) {
        return {false, std::string(e.what()) + ", rungs " + rung_list(e.report())};
    }
}

// 7. Small-L selection for the feedforward example with an auxiliary state.
Outcome feedforward_sweep() {
    // the bound exponents of the example fix d = 1/4 at the origin and d = -1/2 at infinity
    DegreePair d{0.25, -0.5};
    auto obs = build_observer(3, d);
    auto ctrl = build_controller(3, d);
    SweepSpec spec;
    // positive origin degree: the auxiliary state decays like t^(-1/3), leaving a polynomial tail
    spec.pass_threshold = 1e-3;
    spec.integrator.t_end = 200.0;
    spec.integrator.record_stride = 100;
    SweepReport rep;
    try {
        auto des = select_L_feedforward(obs, ctrl, feedforward_example(0.0), spec, &rep);
        bool pass = rep.interval_consistent;
        return {pass, fmt("selected L = %g, rungs %s, smaller rungs all pass: %s (threshold 1e-3, 200 tau)", des.L,
                          rung_list(rep).c_str(), rep.interval_consistent ? "yes" : "no")};
    } catch (const SelectionFailure& e) {
        return {false, std::string(e.what()) + ", rungs " + rung_list(e.report())};
    }
}

std::vector<double> convergence_times(const ControllerDesign& ctrl, const std::vector<double>& norms, double t_end) {
    std::vector<double> worst;
    auto f = ctrl.closed_loop_field();
    for (double N : norms) {
        double w = -1.0;
        for (const auto& x0 : random_initial_conditions(ctrl.weights().r0, 5, N, N, 7)) {
            IntegratorConfig cfg;
            cfg.t_end = t_end;
            cfg.record_stride = 10;
            cfg.stop_when_clamped = true;
            auto t = convergence_time(integrate(f.eval, x0, cfg, ctrl.weights().r0), 1e-6, ctrl.weights().r0);
            w = t ? std::max(w, *t) : INFINITY;
        }
        worst.push_back(w);
    }
    return worst;
}

// 8. Finite-time convergence uniform in the initial condition.
Outcome finite_time_uniformity() {
    auto ctrl = build_controller(2, {-0.1, 0.5});
    auto cert = finite_time_certificate(ctrl);
    const std::vector<double> norms{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
    auto ft = convergence_times(ctrl, norms, 1.2 * cert.bound);
    auto lin = convergence_times(build_controller(2, {0.0, 0.0}), norms, 500.0);

    bool below = std::all_of(ft.begin(), ft.end(), [&](double t) { return t >= 0 && t < cert.bound; });
    double ratio = *std::max_element(ft.begin(), ft.end()) / *std::min_element(ft.begin(), ft.end());
    bool lin_grows = std::isfinite(lin.back());
    for (std::size_t k = 1; k < lin.size(); ++k) lin_grows = lin_grows && lin[k] > lin[k - 1];
    // the linear time grows by a fixed amount per decade; the finite-time one flattens out
    double lin_step = lin.back() - lin[lin.size() - 2];
    double ft_step = ft.back() - ft[ft.size() - 2];
    bool pass = below && ratio < 10.0 && lin_grows && ft_step < 0.5 * lin_step;

    std::ostringstream os;
    os << fmt("bound %.3g (c = %.3g); finite-time times", cert.bound, cert.c);
    for (double t : ft) os << fmt(" %.3g", t);
    os << fmt(", ratio %.2f (<10); linear times", ratio);
    for (double t : lin) os << fmt(" %.3g", t);
    os << fmt(", last-decade increments %.3g vs %.3g", ft_step, lin_step);
    return {pass, os.str()};
}

// 9. ISS shape under constant disturbances.
Outcome iss_shape() {
    DegreePair d{0.0, 0.5};
    auto des = assemble(build_observer(2, d), build_controller(2, d), 1.0);
    IntegratorConfig cfg;
    cfg.record_stride = 10;
    auto rep = run_iss_experiment(des, {0.0, 0.1, 0.5, 1.0}, Point{0.5, 0.5}, cfg);
    std::ostringstream os;
    os << "steady sup";
    for (const auto& p : rep.points) os << fmt(" a=%g:%.3g", p.amplitude, p.steady_sup);
    os << fmt(", monotone %s, below 1e-6 at zero %s", rep.monotone ? "yes" : "no", rep.vanishes_at_zero ? "yes" : "no");
    return {rep.pass(), os.str()};
}

// 10. Homogeneity of the control law, the injection and the rescaled closed loop.
Outcome synthesized_homogeneity() {
    std::ostringstream os;
    bool pass = true;
    for (const ChainCase& c : {ChainCase{2, {-0.1, 0.5}}, ChainCase{3, {0.25, -0.5}}}) {
        auto des = assemble(build_observer(c.n, c.d), build_controller(c.n, c.d), 1.0);
        auto phi = check_bilimit(des.controller.phi_function(c.n));
        auto K = check_field_bilimit(des.observer.injection_field());
        auto F = check_field_bilimit(rescaled_vector_field(des));
        pass = pass && phi.pass() && K.pass() && F.pass();
        os << fmt("n=%zu d=(%g,%g): phi %.1e/%.1e, K1 %.1e/%.1e, loop %.1e/%.1e; ", c.n, c.d.d0, c.d.d_inf,
                  phi.zero.final_deviation(), phi.infinity.final_deviation(), K.worst_deviation(LimitSide::Zero),
                  K.worst_deviation(LimitSide::Infinity), F.worst_deviation(LimitSide::Zero),
                  F.worst_deviation(LimitSide::Infinity));
    }
    os << "deviation < 1e-3 at lambda = 1e-6 and 1e6";
    return {pass, os.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"homogeneous algebra", algebra_suite},
        {"domination constant example", lemma_example},
        {"observer exactness", observer_exactness},
        {"observer and controller convergence", convergence_battery},
        {"output feedback for any L", output_feedback_any_L},
        {"feedback-form L sweep", feedback_sweep},
        {"feedforward-form L sweep", feedforward_sweep},
        {"finite-time uniformity", finite_time_uniformity},
        {"ISS shape", iss_shape},
        {"homogeneity of synthesized objects", synthesized_homogeneity},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
