#include <catch_amalgamated.hpp>

#include "bilimit/homogeneity_check.hpp"
#include "bilimit/sampling.hpp"
#include "bilimit/serialization.hpp"
#include "bilimit/sim.hpp"
#include "bilimit/state_feedback.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace bilimit;
using Catch::Approx;

TEST_CASE("alpha schedule", "[state_feedback]") {
    for (std::size_t n : {1u, 2u, 3u}) {
        DegreePair lin{0.0, 0.0};
        auto a = alpha_schedule(n, lin, weights_from_degrees(n, lin));
        for (double v : a.alpha) CHECK(v == 1.0);
    }
    DegreePair d{-0.5, 0.0};
    auto w = weights_from_degrees(2, d);
    CHECK(w.r0[0] == Approx(1.5));
    auto a = alpha_schedule(2, d, w);
    CHECK(a.at(1) == Approx(1.5));
    // r_{0,3} = 1 + d0 extends the weights
    CHECK(a.at(2) == Approx(1.5 / 0.5));

    // every schedule respects the lower-bound recursion
    for (const auto& dd : {DegreePair{-0.3, 0.4}, DegreePair{0.25, -0.5}, DegreePair{0.3, 0.1}}) {
        auto ww = weights_from_degrees(3, dd);
        auto aa = alpha_schedule(3, dd, ww);
        for (std::size_t i = 1; i < 3; ++i) {
            double rn0 = ww.r0[i], rninf = ww.r_inf[i];
            CHECK(aa.at(i + 1) >= alpha_lower_bound(aa.at(i), rn0, dd.d0, rninf, dd.d_inf) - 1e-12);
        }
    }
}

TEST_CASE("linear laws", "[state_feedback]") {
    ControllerTuning t;
    t.mode = SaturationMode::Paper;
    auto ctrl = build_controller(2, {0.0, 0.0}, t);
    auto k = ctrl.gains();
    REQUIRE(k.size() == 2);
    for (double x1 : {-2.0, 0.0, 0.4}) {
        Point X{x1, 0.0};
        CHECK(ctrl.phi(1, X) == Approx(-k[0] * x1).margin(1e-12));
        for (double x2 : {-1.0, 0.3}) {
            Point Y{x1, x2};
            CHECK(ctrl.psi(2, Y) == Approx(-k[1] * (x2 + k[0] * x1)).margin(1e-12));
        }
    }

    Eigen::Matrix2d A;
    for (int j = 0; j < 2; ++j) {
        Point X(2, 0.0), out(2);
        X[j] = 1.0;
        ctrl.closed_loop(X, out);
        A(0, j) = out[0];
        A(1, j) = out[1];
    }
    Eigen::Matrix2d expected;
    expected << 0.0, 1.0, -k[0] * k[1], -k[1];
    CHECK((A - expected).norm() < 1e-10);
    CHECK(A.eigenvalues().real().maxCoeff() < 0.0);

    // the power sum form adds both unit powers, doubling each rate
    auto simple = build_controller(2, {0.0, 0.0});
    REQUIRE(simple.mode() == SaturationMode::Simplified);
    auto ks = simple.gains();
    CHECK(simple.phi(1, Point{0.4, 0.0}) == Approx(-2 * ks[0] * 0.4));
    CHECK(simple.psi(2, Point{0.4, -1.0}) == Approx(-2 * ks[1] * (-1.0 + 2 * ks[0] * 0.4)));
}

TEST_CASE("phi_1 is odd and decreasing", "[state_feedback]") {
    for (const auto& d : {DegreePair{-0.3, 0.4}, DegreePair{0.25, -0.5}}) {
        auto mode = default_controller_mode(d);
        auto p1 = phi_1(2.0, 3, d, mode);
        CHECK(p1(Point{0.0}) == 0.0);
        double prev = 1e300;
        for (double v : log_ladder(1e-5, 1e5, 150)) {
            double y = p1(Point{v});
            REQUIRE(y < 0.0);
            REQUIRE(y < prev);
            REQUIRE(p1(Point{-v}) == Approx(-y));
            prev = y;
        }
    }
}

TEST_CASE("psi vanishes on the manifold and has the opposite sign off it", "[state_feedback][property]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (const auto& d : {DegreePair{-0.1, 0.4}, DegreePair{0.25, -0.5}}) {
        auto ctrl = build_controller(3, d);
        for (int k = 0; k < 10000; ++k) {
            Point X{U(rng), U(rng), U(rng)};
            std::size_t i = 2 + static_cast<std::size_t>(k % 2);
            double gap = X[i - 1] - ctrl.phi(i - 1, X);
            double psi = ctrl.psi(i, X);
            if (std::abs(gap) > 1e-9) REQUIRE(psi * gap < 0.0);
        }
        Point X{0.7, -0.4, 0.0};
        X[1] = ctrl.phi(1, X);
        CHECK(ctrl.psi(2, X) == Approx(0.0).margin(1e-12));
        CHECK(ctrl.lyapunov(2, X) == Approx(ctrl.lyapunov(1, X)).epsilon(1e-12));
    }
}

TEST_CASE("psi gradients match finite differences", "[state_feedback][property]") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const auto& d : {DegreePair{-0.1, 0.4}, DegreePair{0.25, -0.5}}) {
        auto ctrl = build_controller(3, d);
        double worst = 0.0;
        for (int k = 0; k < 500; ++k) {
            Point X{U(rng), U(rng), U(rng)};
            for (std::size_t i = 1; i <= 3; ++i) {
                std::vector<double> grad(i);
                ctrl.psi(i, X, Branch::Full, grad);
                for (std::size_t j = 0; j < i; ++j) {
                    double h = 1e-6 * std::max(1.0, std::abs(X[j]));
                    Point a = X, b = X;
                    a[j] += h;
                    b[j] -= h;
                    double fd = (ctrl.psi(i, a) - ctrl.psi(i, b)) / (2 * h);
                    double scale = std::max(1.0, std::abs(grad[j]));
                    worst = std::max(worst, std::abs(fd - grad[j]) / scale);
                }
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("Lyapunov extension dominates the previous level", "[state_feedback]") {
    auto ctrl = build_controller(3, {-0.1, 0.3});
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for (int k = 0; k < 2000; ++k) {
        Point X{U(rng), U(rng), U(rng)};
        REQUIRE(ctrl.lyapunov(2, X) >= ctrl.lyapunov(1, X));
        REQUIRE(ctrl.lyapunov(3, X) >= ctrl.lyapunov(2, X));
    }
}

TEST_CASE("sampled Lyapunov decrease along the closed loop", "[state_feedback][property]") {
    for (auto [n, d] : {std::pair<std::size_t, DegreePair>{2, {0.0, 0.5}}, {3, {0.25, -0.5}}}) {
        auto ctrl = build_controller(n, d);
        const auto& w = ctrl.weights();
        for (Branch br : {Branch::Full, Branch::Zero, Branch::Infinity}) {
            const WeightVector& r = br == Branch::Infinity ? w.r_inf : w.r0;
            auto sphere = sphere_samples(r, 64 * n, 5);
            for (double lam : log_ladder(1e-3, 1e3, 13)) {
                for (const auto& theta : sphere) {
                    Point X = dilate(lam, r, theta), f(n), grad(n);
                    ctrl.closed_loop(X, f, br);
                    ctrl.lyapunov(n, X, br, grad);
                    double dV = 0.0;
                    for (std::size_t i = 0; i < n; ++i) dV += grad[i] * f[i];
                    REQUIRE(dV < 0.0);
                }
            }
        }
    }
}

TEST_CASE("control law homogeneity", "[state_feedback][homogeneity]") {
    for (auto [n, d] : {std::pair<std::size_t, DegreePair>{2, {-0.1, 0.5}}, {3, {0.25, -0.5}}}) {
        auto ctrl = build_controller(n, d);
        auto phi = ctrl.phi_function(n);
        CHECK(phi.sig.d0 == Approx(1 + d.d0));
        CHECK(phi.sig.d_inf == Approx(1 + d.d_inf));
        CHECK(check_bilimit(phi).pass());
        CHECK(check_field_bilimit(ctrl.closed_loop_field()).pass());
    }
}

TEST_CASE("scalar and two-dimensional loops converge", "[state_feedback][convergence]") {
    auto scalar = build_controller(1, {-0.4, 0.3});
    IntegratorConfig cfg;
    cfg.t_end = 20.0;
    for (double x0 : {-30.0, 0.05, 2.0}) {
        auto tr = integrate(scalar.closed_loop_field().eval, Point{x0}, cfg, scalar.weights().r0);
        CHECK(tr.states.back()[0] == 0.0);
    }

    auto ctrl = build_controller(2, {0.0, 0.5});
    cfg.t_end = 50.0;
    cfg.record_stride = 100;
    for (const auto& x0 : random_initial_conditions(ctrl.weights().r0, 20, 1e-2, 1e2, 8)) {
        auto tr = integrate(ctrl.closed_loop_field().eval, x0, cfg, ctrl.weights().r0);
        REQUIRE(convergence_time(tr, 1e-6, ctrl.weights().r0).has_value());
    }
}

TEST_CASE("mode and degree validation", "[state_feedback]") {
    ControllerTuning t;
    t.mode = SaturationMode::Simplified;
    CHECK_THROWS_AS(build_controller(2, {0.5, -0.5}, t), ModeError);
    CHECK_THROWS_AS(build_controller(3, {0.0, 0.6}), RangeError);
    CHECK(default_controller_mode({0.0, 0.5}) == SaturationMode::Simplified);
    CHECK(default_controller_mode({0.5, 0.0}) == SaturationMode::Paper);
}

TEST_CASE("controller design survives a JSON round trip", "[state_feedback][serialization]") {
    auto ctrl = build_controller(3, {0.25, -0.5});
    auto back = controller_from_json(to_json(ctrl));
    CHECK(back.gains() == ctrl.gains());
    CHECK(back.alpha().alpha == ctrl.alpha().alpha);
    CHECK(back.mode() == ctrl.mode());
    Point X{0.3, -0.2, 1.1};
    CHECK(back.control(X) == ctrl.control(X));
    CHECK(back.lyapunov(3, X) == ctrl.lyapunov(3, X));
}
