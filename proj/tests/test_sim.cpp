#include <catch_amalgamated.hpp>

#include "bilimit/output_feedback.hpp"
#include "bilimit/sim.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

using namespace bilimit;
using Catch::Approx;

namespace {

const WeightVector kOne({1.0});

FieldFn scalar(std::function<double(double)> g) {
    return [g](std::span<const double> x, std::span<double> out) { out[0] = g(x[0]); };
}

}  // namespace

TEST_CASE("exponential decay reaches e^-10", "[sim]") {
    IntegratorConfig cfg;
    cfg.step = 1e-2;
    cfg.t_end = 10.0;
    auto tr = integrate(scalar([](double x) { return -x; }), Point{1.0}, cfg, kOne);
    REQUIRE(tr.times.back() == Approx(10.0));
    CHECK(tr.states.back()[0] == Approx(std::exp(-10.0)).epsilon(1e-8));
}

TEST_CASE("cube-root decay reaches the origin in finite time", "[sim]") {
    // x' = -x^(1/3) from x0 = 1: x(t)^(2/3) = 1 - 2t/3, zero at t = 1.5
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.t_end = 3.0;
    cfg.origin_guard = 1e-12;
    cfg.threshold = 1e-9;
    auto tr = integrate(scalar([](double x) { return -signed_pow(x, 1.0 / 3.0); }), Point{1.0}, cfg, kOne);
    auto t = convergence_time(tr, 1e-9, kOne);
    REQUIRE(t.has_value());
    CHECK(*t == Approx(1.5).epsilon(0.02));
    CHECK(tr.has_event("clamped"));
    CHECK(tr.states.back()[0] == 0.0);
    for (std::size_t k = 0; k < tr.size(); k += 50) {
        double tk = tr.times[k];
        if (tk < 1.4) REQUIRE(tr.states[k][0] == Approx(std::pow(1 - 2 * tk / 3, 1.5)).epsilon(1e-4));
    }
}

TEST_CASE("zero field keeps the state constant", "[sim]") {
    IntegratorConfig cfg;
    cfg.t_end = 1.0;
    auto tr = integrate(scalar([](double) { return 0.0; }), Point{0.3}, cfg, kOne);
    for (const auto& s : tr.states) REQUIRE(s[0] == 0.3);
    CHECK_FALSE(convergence_time(tr, 1e-6, kOne).has_value());
}

TEST_CASE("convergence time on hand-built traces", "[sim]") {
    std::vector<double> times{0, 1, 2, 3, 4};
    CHECK(convergence_time(times, std::vector<double>{5, 1, 1e-7, 1e-8, 0}, 1e-6) == 2.0);
    CHECK(convergence_time(times, std::vector<double>{5, 1e-7, 1, 1e-8, 0}, 1e-6) == 3.0);
    CHECK_FALSE(convergence_time(times, std::vector<double>{5, 1e-7, 1e-7, 1e-7, 1}, 1e-6).has_value());
    CHECK(convergence_time(times, std::vector<double>{0, 0, 0, 0, 0}, 1e-6) == 0.0);

    // x' = -x from 1 drops below 1e-6 at t = ln(1e6)
    IntegratorConfig cfg;
    cfg.t_end = 20.0;
    auto tr = integrate(scalar([](double x) { return -x; }), Point{1.0}, cfg, kOne);
    CHECK(*convergence_time(tr, 1e-6, kOne) == Approx(std::log(1e6)).margin(2e-3));
}

TEST_CASE("halving the step changes little", "[sim][property]") {
    WeightVector r({1.0, 1.0});
    FieldFn vdp = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = -x[0] - (x[0] * x[0] - 1) * x[1];
    };
    IntegratorConfig coarse;
    coarse.step = 1e-2;
    coarse.t_end = 5.0;
    IntegratorConfig fine = coarse;
    fine.step = 5e-3;
    auto a = integrate(vdp, Point{1.0, 0.5}, coarse, r);
    auto b = integrate(vdp, Point{1.0, 0.5}, fine, r);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.states.back()[i] == Approx(b.states.back()[i]).margin(1e-7));
}

TEST_CASE("record stride and blowup detection", "[sim]") {
    IntegratorConfig cfg;
    cfg.step = 1e-2;
    cfg.t_end = 1.0;
    cfg.record_stride = 10;
    auto tr = integrate(scalar([](double x) { return -x; }), Point{1.0}, cfg, kOne);
    CHECK(tr.size() == 11);
    CHECK(tr.times.back() == Approx(1.0));

    cfg.blowup_bound = 1e6;
    cfg.t_end = 10.0;
    auto up = integrate(scalar([](double x) { return x * x; }), Point{1.0}, cfg, kOne);
    CHECK(up.blew_up());
    CHECK(up.times.back() < 1.01);
}

TEST_CASE("invalid configurations are rejected", "[sim]") {
    IntegratorConfig cfg;
    cfg.step = -1.0;
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
    cfg = {};
    cfg.t_end = 0.0;
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
    cfg = {};
    cfg.record_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
}

TEST_CASE("orbit integration of a positive-degree field", "[sim]") {
    // x' = -x^3 has degree 2 for the unit weight; x(t) = (1 + 2t)^(-1/2) from x0 = 1
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.t_end = 1e7;
    cfg.origin_guard = 1e-3;
    auto tr = integrate_orbit(scalar([](double x) { return -x * x * x; }), 2.0, kOne, Point{1.0}, cfg);
    auto t = convergence_time(tr, 2e-3, kOne);
    REQUIRE(t.has_value());
    CHECK(*t == Approx((1.0 / (2e-3 * 2e-3) - 1) / 2).epsilon(1e-3));
    CHECK(tr.has_event("clamped"));
    CHECK(tr.states.back()[0] == 0.0);
    for (std::size_t k = 1; k < tr.size(); ++k) REQUIRE(tr.times[k] > tr.times[k - 1]);
}

TEST_CASE("orbit integration of a negative-degree field matches finite time", "[sim]") {
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.origin_guard = 1e-10;
    // along orbits x = e^-s and t = 1.5 (1 - e^(-2s/3)); the step cap t_end / step bounds s
    cfg.t_end = 10.0;
    auto capped = integrate_orbit(scalar([](double x) { return -signed_pow(x, 1.0 / 3.0); }), -2.0 / 3.0, kOne,
                                  Point{1.0}, cfg);
    CHECK_FALSE(capped.has_event("clamped"));
    CHECK(capped.times.back() == Approx(1.5 * (1 - std::exp(-20.0 / 3.0))).epsilon(1e-9));

    cfg.t_end = 100.0;
    auto tr = integrate_orbit(scalar([](double x) { return -signed_pow(x, 1.0 / 3.0); }), -2.0 / 3.0, kOne,
                              Point{1.0}, cfg);
    CHECK(tr.has_event("clamped"));
    CHECK(tr.times.back() == Approx(1.5).epsilon(1e-6));
}

TEST_CASE("trace export", "[sim]") {
    IntegratorConfig cfg;
    cfg.step = 0.5;
    cfg.t_end = 1.0;
    auto tr = integrate(scalar([](double x) { return -x; }), Point{1.0}, cfg, kOne);
    std::ostringstream os;
    write_trace_csv(tr, os);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "time,x1");
    int rows = 0;
    while (std::getline(is, row)) ++rows;
    CHECK(rows == 3);
    auto j = to_json(tr);
    CHECK(j.at("times").size() == 3);
}

TEST_CASE("linear loop steady state under a constant disturbance", "[sim][iss]") {
    const std::size_t n = 2;
    auto des = assemble(build_observer(n, {0.0, 0.0}), build_controller(n, {0.0, 0.0}), 1.0);

    // oracle: the loop is linear, so its equilibrium under delta_n = a solves A y = -b a
    const std::size_t dim = 2 * n;
    auto field = raw_field(des, no_disturbance(n));
    Eigen::MatrixXd A(dim, dim);
    std::vector<double> zero(dim, 0.0), out(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> e(dim, 0.0);
        e[j] = 1.0;
        field(0.0, e, out);
        for (std::size_t i = 0; i < dim; ++i) A(i, j) = out[i];
    }
    REQUIRE(A.eigenvalues().real().maxCoeff() < 0.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    b(n - 1) = 1.0;
    Eigen::VectorXd eq = A.colPivHouseholderQr().solve(-b);
    const double gain = std::abs(eq(0)) + std::abs(eq(1));

    IntegratorConfig cfg;
    cfg.record_stride = 10;
    auto rep = run_iss_experiment(des, {0.0, 0.1, 0.5, 1.0}, Point{0.5, 0.5}, cfg);
    REQUIRE(rep.points.size() == 4);
    CHECK(rep.pass());
    CHECK(rep.points[0].steady_sup < 1e-6);
    for (std::size_t k = 1; k < 4; ++k)
        CHECK(rep.points[k].steady_sup == Approx(gain * rep.points[k].amplitude).epsilon(0.25));
}
