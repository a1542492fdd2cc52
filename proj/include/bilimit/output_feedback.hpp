#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bilimit/gain_lemma.hpp"
#include "bilimit/observer.hpp"
#include "bilimit/sim.hpp"
#include "bilimit/state_feedback.hpp"

namespace bilimit {

enum class FeedbackForm { Feedback, Feedforward };

const char* to_string(FeedbackForm f);
FeedbackForm feedback_form_from_string(const std::string& s);

/// Feedback form needs d0 <= d_inf, feedforward form needs d_inf <= d0.
bool form_admissible(FeedbackForm f, const DegreePair& d);

struct GrowthParameters {
    double c0 = 0.0;
    double c_inf = 0.0;
    double q = 1.0;
    double p = 1.5;
};

/// delta(t, x, z, out) or g(t, x, z, out).
using ScenarioFn =
    std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>;

/// Additive plant disturbance delta_i(t, x, z), i = 1..n, with optional auxiliary dynamics z' = g(t, x, z).
struct DisturbanceScenario {
    std::string kind = "chain";
    std::size_t n = 0;
    std::size_t aux_dim = 0;
    GrowthParameters growth;
    ScenarioFn delta;  ///< empty: no disturbance
    ScenarioFn aux_field;
    Point aux0;  ///< default z(0)

    bool disturbed() const { return static_cast<bool>(delta); }
};

DisturbanceScenario no_disturbance(std::size_t n);
/// n = 2 chain with delta_2 = c0 x2^q + c_inf x2^p (signed powers), 0 < q < p < 2.
DisturbanceScenario feedback_example(const GrowthParameters& g);
/// x1' = x2 + x3^{3/2} + z^3, x2' = x3, x3' = u, z' = -z^4 + x3.
DisturbanceScenario feedforward_example(double z0 = 0.0);
/// delta_i = c0 sum_j x_j^{r0_{i+1}/r0_j} + c_inf sum_j x_j^{r_inf_{i+1}/r_inf_j} (signed powers), with
/// j <= i in feedback form and j >= i+2 in feedforward form.
DisturbanceScenario power_sum_disturbance(std::size_t n, const DegreePair& d, double c0, double c_inf,
                                          FeedbackForm form);
/// delta_n = amplitude, all other channels zero.
DisturbanceScenario constant_disturbance(std::size_t n, double amplitude);

/// The power-sum bound on |delta_i| (i is 1-based) for the given form.
double disturbance_envelope(std::size_t i, std::span<const double> x, const DegreePair& d, double c0,
                            double c_inf, FeedbackForm form);

/// Controller, observer and scaling L of the dynamic output feedback
/// xhat' = L (S xhat + B phi_n(xhat) + K_1(xhat_1 - x_1)), u = L^n phi_n(xhat).
struct OutputFeedbackDesign {
    ObserverDesign observer;
    ControllerDesign controller;
    double L = 1.0;
    FeedbackForm form = FeedbackForm::Feedback;
    std::optional<double> composite_weight;

    std::size_t n() const { return controller.n(); }
    const DegreePair& degrees() const { return controller.degrees(); }
};

/// Form defaults to feedback when d0 <= d_inf.
OutputFeedbackDesign assemble(const ObserverDesign& obs, const ControllerDesign& ctrl, double L,
                              std::optional<FeedbackForm> form = std::nullopt);

/// Closed loop over (x, xhat, z) in original time.
TimeField raw_field(const OutputFeedbackDesign& d, const DisturbanceScenario& s);
/// Closed loop over (xhat, E, z) with e_i = xhat_i - x_i / L^{i-1} and tau = L t.
TimeField rescaled_field(const OutputFeedbackDesign& d, const DisturbanceScenario& s, double t0 = 0.0);
/// The undisturbed rescaled system over (xhat, E) with its limit approximations.
HomVectorField rescaled_vector_field(const OutputFeedbackDesign& d);

/// (xhat, E) -> x with x_i = L^{i-1} (xhat_i - e_i).
Point plant_state(std::span<const double> xhat, std::span<const double> E, double L);
/// (x, xhat) -> E.
Point error_state(std::span<const double> x, std::span<const double> xhat, double L);

enum class SimulationFrame { Rescaled, Raw };

struct OutputFeedbackRun {
    Trace trace;  ///< times in original time; states x, estimates xhat, disturbances, aux z
    std::vector<double> internal_norms;  ///< hom_norm of (xhat, E) with weights (r0, r0)
    bool blowup = false;
    std::optional<double> convergence_time;  ///< original time
    double final_norm = 0.0;
};

/// Simulates from plant state x0, estimate xhat0 (default 0) and z0 (default scenario aux0).
/// In the rescaled frame cfg.step and cfg.t_end are in tau units.
OutputFeedbackRun simulate_output_feedback(const OutputFeedbackDesign& d, const DisturbanceScenario& s,
                                           const Point& x0, const IntegratorConfig& cfg,
                                           SimulationFrame frame = SimulationFrame::Rescaled,
                                           std::optional<Point> xhat0 = std::nullopt,
                                           std::optional<Point> z0 = std::nullopt);

/// Largest |delta_i| / envelope_i over a trace (samples with vanishing envelope are skipped).
double disturbance_audit(const Trace& trace, const DegreePair& d, double c0, double c_inf, FeedbackForm form);

/// Reparametrizations bringing V and W to common degrees: rho(v) = v^k0 + v^kinf.
struct CompositeLyapunov {
    double weight = 0.0;  ///< c in U = rho_V(V) + c rho_W(W)
    double dU0 = 0.0, dU_inf = 0.0;
    double kV0 = 1.0, kV_inf = 1.0, kW0 = 1.0, kW_inf = 1.0;
    DominationResult certificate;
};

/// eta = dU_V/dt along the estimate dynamics, gamma = -dU_W/dt along the error dynamics.
DominationProblem composite_problem(const OutputFeedbackDesign& d, CompositeLyapunov& shape);
CompositeLyapunov composite_lyapunov(const OutputFeedbackDesign& d, const LemmaSampling& s = {});
/// U and its derivative along the undisturbed rescaled system at (xhat, E).
double composite_value(const OutputFeedbackDesign& d, const CompositeLyapunov& U, std::span<const double> z,
                       Branch br = Branch::Full);
double composite_derivative(const OutputFeedbackDesign& d, const CompositeLyapunov& U,
                            std::span<const double> z, Branch br = Branch::Full);

struct SweepSpec {
    double L_start = 1.0;
    int max_rungs = 21;
    /// Rungs tested past the first pass, to check the interval shape.
    int extra_rungs = 2;
    bool refine = false;
    int refine_steps = 8;
    std::size_t test_count = 25;
    double norm_lo = 1e-2;
    double norm_hi = 1e2;
    unsigned seed = 1;
    /// A run passes when hom_norm(xhat, E) ends below this value without blowup.
    double pass_threshold = 1e-6;
    IntegratorConfig integrator;
};

struct RungResult {
    double L = 0.0;
    bool pass = false;
    std::size_t failures = 0;
    double worst_time = 0.0;   ///< largest convergence time among passing runs (original time)
    double worst_norm = 0.0;   ///< largest final internal norm
};

struct SweepReport {
    FeedbackForm form = FeedbackForm::Feedback;
    std::vector<RungResult> rungs;  ///< in sweep order
    std::optional<double> selected_L;
    std::optional<std::pair<double, double>> refined;  ///< (failing, passing) after bisection
    std::vector<Point> test_set;
    bool interval_consistent = false;  ///< every rung tested past the first pass also passed
};

class SelectionFailure : public std::runtime_error {
public:
    SelectionFailure(const std::string& what, SweepReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const SweepReport& report() const { return report_; }

private:
    SweepReport report_;
};

RungResult evaluate_rung(const OutputFeedbackDesign& d, const DisturbanceScenario& s,
                         const std::vector<Point>& test_set, const SweepSpec& spec);

/// L over L_start * 2^k upward; throws SelectionFailure if no rung passes.
OutputFeedbackDesign select_L_feedback(const ObserverDesign& obs, const ControllerDesign& ctrl,
                                       const DisturbanceScenario& s, const SweepSpec& spec,
                                       SweepReport* report = nullptr);
/// L over L_start * 2^-k downward.
OutputFeedbackDesign select_L_feedforward(const ObserverDesign& obs, const ControllerDesign& ctrl,
                                          const DisturbanceScenario& s, const SweepSpec& spec,
                                          SweepReport* report = nullptr);

/// (1/c) (dV_inf / d_inf + dV0 / |d0|), requires d0 < 0 < d_inf.
double finite_time_bound(double c, double dV0, double dV_inf, const DegreePair& d);

struct FiniteTimeCertificate {
    double c = 0.0;  ///< dV/dt <= -c (V^{(dV0+d0)/dV0} + V^{(dV_inf+d_inf)/dV_inf})
    double bound = 0.0;
    DominationBound domination;
};

/// Decay-rate certificate for the state-feedback closed loop and its convergence-time bound.
FiniteTimeCertificate finite_time_certificate(const ControllerDesign& ctrl, const LemmaSampling& s = {});

nlohmann::json to_json(const SweepReport& r);
nlohmann::json to_json(const CompositeLyapunov& c);

}  // namespace bilimit
