#include <catch_amalgamated.hpp>

#include "bilimit/output_feedback.hpp"
#include "bilimit/sampling.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace bilimit;
using Catch::Approx;

namespace {

struct Parts {
    ObserverDesign obs;
    ControllerDesign ctrl;
};

const Parts& parts(std::size_t n, DegreePair d) {
    static std::vector<std::tuple<std::size_t, double, double, Parts>> cache;
    for (const auto& [cn, c0, ci, p] : cache)
        if (cn == n && c0 == d.d0 && ci == d.d_inf) return p;
    cache.emplace_back(n, d.d0, d.d_inf, Parts{build_observer(n, d), build_controller(n, d)});
    return std::get<3>(cache.back());
}

}  // namespace

TEST_CASE("assembly and coordinates", "[output_feedback]") {
    const auto& p = parts(2, {0.0, 0.5});
    auto des = assemble(p.obs, p.ctrl, 1.0);
    CHECK(des.form == FeedbackForm::Feedback);
    CHECK(form_admissible(FeedbackForm::Feedback, {0.0, 0.5}));
    CHECK_FALSE(form_admissible(FeedbackForm::Feedforward, {0.0, 0.5}));
    CHECK_THROWS_AS(assemble(p.obs, p.ctrl, 0.0), PreconditionError);
    CHECK_THROWS_AS(assemble(p.obs, parts(3, {0.0, 0.25}).ctrl, 1.0), PreconditionError);

    Point x{0.3, -0.7}, xhat{1.0, 2.0};
    CHECK(error_state(x, xhat, 1.0) == Point{0.7, 2.7});
    auto E = error_state(x, xhat, 4.0);
    CHECK(E[1] == Approx(2.0 + 0.7 / 4.0));
    auto back = plant_state(xhat, E, 4.0);
    CHECK(back[0] == Approx(x[0]));
    CHECK(back[1] == Approx(x[1]));

    auto field = raw_field(des, no_disturbance(2));
    std::vector<double> zero(4, 0.0), out(4, 1.0);
    field(0.0, zero, out);
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("raw and rescaled frames describe the same trajectory", "[output_feedback][property]") {
    const auto& p = parts(2, {0.0, 0.5});
    Point x0{0.8, -0.3};
    for (double L : {0.5, 1.0, 4.0}) {
        auto des = assemble(p.obs, p.ctrl, L);
        IntegratorConfig tau;
        tau.t_end = 5.0;
        tau.origin_guard = 0.0;
        IntegratorConfig raw = tau;
        raw.step = tau.step / L;
        raw.t_end = tau.t_end / L;
        auto a = simulate_output_feedback(des, no_disturbance(2), x0, tau, SimulationFrame::Rescaled);
        auto b = simulate_output_feedback(des, no_disturbance(2), x0, raw, SimulationFrame::Raw);
        REQUIRE(a.trace.size() == b.trace.size());
        double worst = 0.0;
        for (std::size_t k = 0; k < a.trace.size(); ++k) {
            REQUIRE(a.trace.times[k] == Approx(b.trace.times[k]).margin(1e-12));
            for (std::size_t i = 0; i < 2; ++i) {
                worst = std::max(worst, std::abs(a.trace.states[k][i] - b.trace.states[k][i]));
                worst = std::max(worst, std::abs(a.trace.estimates[k][i] - b.trace.estimates[k][i]));
            }
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("disturbance-free loop converges for several L", "[output_feedback][convergence]") {
    const auto& p = parts(2, {0.0, 0.5});
    auto ics = random_initial_conditions(p.ctrl.weights().r0, 6, 1e-2, 1e2, 3);
    for (double L : {0.25, 4.0}) {
        auto des = assemble(p.obs, p.ctrl, L);
        IntegratorConfig cfg;
        cfg.record_stride = 100;
        for (const auto& x0 : ics) REQUIRE(simulate_output_feedback(des, no_disturbance(2), x0, cfg).convergence_time);
    }
}

TEST_CASE("finite-time bound formula", "[output_feedback]") {
    CHECK(finite_time_bound(1.0, 2.0, 2.0, {-0.5, 0.5}) == Approx(8.0));
    CHECK(finite_time_bound(4.0, 2.0, 2.0, {-0.5, 0.5}) == Approx(2.0));
    // the infinity term is dV_inf / d_inf = 4, doubling it adds 4
    CHECK(finite_time_bound(1.0, 2.0, 4.0, {-0.5, 0.5}) == Approx(12.0));
    CHECK_THROWS_AS(finite_time_bound(1.0, 2.0, 2.0, {0.0, 0.5}), PreconditionError);
    CHECK_THROWS_AS(finite_time_bound(1.0, 2.0, 2.0, {-0.5, -0.1}), PreconditionError);
}

TEST_CASE("finite-time certificate bounds simulated times", "[output_feedback][finite_time]") {
    const auto& p = parts(2, {-0.1, 0.5});
    auto cert = finite_time_certificate(p.ctrl);
    CHECK(cert.c > 0.0);
    CHECK(cert.bound == Approx(finite_time_bound(cert.c, p.ctrl.dV0(), p.ctrl.dV_inf(), p.ctrl.degrees())));
    IntegratorConfig cfg;
    cfg.t_end = 1.2 * cert.bound;
    cfg.record_stride = 10;
    cfg.stop_when_clamped = true;
    for (double N : {1e-3, 1.0, 1e3}) {
        for (const auto& x0 : random_initial_conditions(p.ctrl.weights().r0, 2, N, N, 7)) {
            auto tr = integrate(p.ctrl.closed_loop_field().eval, x0, cfg, p.ctrl.weights().r0);
            auto t = convergence_time(tr, 1e-6, p.ctrl.weights().r0);
            REQUIRE(t.has_value());
            CHECK(*t < cert.bound);
        }
    }
}

TEST_CASE("composite Lyapunov weight", "[output_feedback][composite]") {
    const auto& p = parts(2, {-0.1, 0.5});
    auto des = assemble(p.obs, p.ctrl, 1.0);
    auto U = composite_lyapunov(des);
    CHECK(U.weight > 0.0);
    CHECK(U.certificate.min_margin() > 0.0);

    CompositeLyapunov shape = U;
    auto prob = composite_problem(des, shape);
    for (const auto& m : domination_margins(prob, 2 * U.weight)) CHECK(m.margin > 0.0);

    // with E = 0 the decrease is that of the state feedback
    for (const auto& xh : random_initial_conditions(p.ctrl.weights().r0, 50, 1e-2, 1e2, 2)) {
        Point z = xh;
        z.insert(z.end(), {0.0, 0.0});
        REQUIRE(composite_derivative(des, U, z) < 0.0);
        REQUIRE(composite_value(des, U, z) > 0.0);
    }
    for (const auto& zz : random_initial_conditions(WeightVector({1.0, 1.0, 1.0, 1.0}), 200, 1e-2, 1e2, 3))
        REQUIRE(composite_derivative(des, U, zz) < 0.0);
}

TEST_CASE("linear output feedback is Hurwitz", "[output_feedback]") {
    const auto& p = parts(2, {0.0, 0.0});
    auto des = assemble(p.obs, p.ctrl, 1.0);
    auto f = rescaled_vector_field(des);
    Eigen::Matrix4d A;
    for (int j = 0; j < 4; ++j) {
        Point z(4, 0.0), out(4);
        z[j] = 1.0;
        f.eval(z, out);
        for (int i = 0; i < 4; ++i) A(i, j) = out[i];
    }
    CHECK(A.eigenvalues().real().maxCoeff() < 0.0);
    auto U = composite_lyapunov(des);
    CHECK(U.certificate.min_margin() > 0.0);
}

TEST_CASE("disturbance scenarios", "[output_feedback][scenario]") {
    auto fb = feedback_example({0.5, 0.5, 1.0, 1.5});
    REQUIRE(fb.n == 2);
    Point x{0.3, -4.0}, z{}, out(2);
    fb.delta(0.0, x, z, out);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == Approx(0.5 * -4.0 + 0.5 * signed_pow(-4.0, 1.5)));
    CHECK_THROWS(feedback_example({0.5, 0.5, 1.5, 1.0}));

    auto ff = feedforward_example(0.2);
    REQUIRE(ff.n == 3);
    REQUIRE(ff.aux_dim == 1);
    Point x3{0.1, 0.2, 4.0}, zz{0.5}, d3(3), g(1);
    ff.delta(0.0, x3, zz, d3);
    CHECK(d3[0] == Approx(8.0 + 0.125));
    CHECK(d3[1] == 0.0);
    CHECK(d3[2] == 0.0);
    ff.aux_field(0.0, x3, zz, g);
    CHECK(g[0] == Approx(-0.0625 + 4.0));
    CHECK(ff.aux0 == Point{0.2});

    auto c = constant_disturbance(3, -0.4);
    c.delta(0.0, x3, zz, d3);
    CHECK(d3 == Point{0.0, 0.0, -0.4});
}

TEST_CASE("feedback example stays inside its growth envelope", "[output_feedback][scenario]") {
    DegreePair d{0.0, 0.5};
    const auto& p = parts(2, d);
    auto des = assemble(p.obs, p.ctrl, 4.0);
    IntegratorConfig cfg;
    cfg.record_stride = 50;
    cfg.t_end = 20.0;
    auto run = simulate_output_feedback(des, feedback_example({0.5, 0.5, 1.0, 1.5}), Point{2.0, -1.0}, cfg);
    REQUIRE_FALSE(run.blowup);
    CHECK(disturbance_audit(run.trace, d, 0.5, 0.5, FeedbackForm::Feedback) <= 1.0 + 1e-12);

    auto ps = power_sum_disturbance(2, d, 0.5, 0.5, FeedbackForm::Feedback);
    // same-sign coordinates, so no term cancels
    Point x{0.7, 2.0}, z{}, out(2);
    ps.delta(0.0, x, z, out);
    CHECK(std::abs(out[1]) == Approx(disturbance_envelope(2, x, d, 0.5, 0.5, FeedbackForm::Feedback)));
}

TEST_CASE("sweeps without disturbance pick the first rung", "[output_feedback][sweep]") {
    SweepSpec spec;
    spec.test_count = 4;
    spec.integrator.record_stride = 100;
    SweepReport rep;
    const auto& fb = parts(2, {0.0, 0.5});
    auto a = select_L_feedback(fb.obs, fb.ctrl, no_disturbance(2), spec, &rep);
    CHECK(a.L == 1.0);
    CHECK(rep.rungs.size() == 1 + static_cast<std::size_t>(spec.extra_rungs));
    CHECK(rep.interval_consistent);
    CHECK(rep.test_set.size() == spec.test_count);

    // positive origin degree: the tail decays polynomially, so the threshold is looser
    const auto& ff = parts(2, {0.5, -0.5});
    spec.pass_threshold = 1e-2;
    auto b = select_L_feedforward(ff.obs, ff.ctrl, no_disturbance(2), spec, &rep);
    CHECK(b.L == 1.0);
    CHECK(b.form == FeedbackForm::Feedforward);
    for (std::size_t k = 1; k < rep.rungs.size(); ++k) CHECK(rep.rungs[k].L < rep.rungs[k - 1].L);

    CHECK_THROWS_AS(select_L_feedforward(fb.obs, fb.ctrl, no_disturbance(2), spec), PreconditionError);
}

TEST_CASE("sweep failure carries the frontier", "[output_feedback][sweep]") {
    SweepSpec spec;
    spec.test_count = 4;
    spec.max_rungs = 1;
    spec.integrator.t_end = 0.5;
    spec.integrator.record_stride = 100;
    const auto& fb = parts(2, {0.0, 0.5});
    try {
        select_L_feedback(fb.obs, fb.ctrl, no_disturbance(2), spec);
        FAIL("selection should fail on a short horizon");
    } catch (const SelectionFailure& e) {
        CHECK(e.report().rungs.size() == 1);
        CHECK_FALSE(e.report().selected_L.has_value());
        auto j = to_json(e.report());
        CHECK(j.at("selected_L").is_null());
    }
}
