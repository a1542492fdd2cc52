#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bilimit/hom_core.hpp"

namespace bilimit {

/// Time-dependent vector field: dx = f(t, x).
using TimeField = std::function<void(double, std::span<const double>, std::span<double>)>;

struct IntegratorConfig {
    double step = 1e-3;
    double t_end = 50.0;
    double origin_guard = 1e-9;
    double threshold = 1e-6;
    std::size_t record_stride = 1;
    /// Each refinement level divides the step by 16.
    unsigned max_refinement = 4;
    bool stop_when_clamped = false;
    /// States with a component beyond this magnitude count as a blowup.
    double blowup_bound = 1e100;

    void validate() const;
};

struct TraceEvent {
    double time = 0.0;
    std::string kind;
};

struct Trace {
    std::vector<double> times;
    std::vector<Point> states;
    std::vector<Point> estimates;
    std::vector<Point> disturbances;
    std::vector<Point> aux;
    std::vector<TraceEvent> events;
    double origin_guard = 0.0;

    std::size_t size() const { return times.size(); }
    bool has_event(const std::string& kind) const;
    bool blew_up() const { return has_event("blowup"); }
};

/// Classical RK4 on a fixed base step. A base step is split into 16 sub-steps when
/// hom_norm(x) < 10 * origin_guard, and recursively (up to max_refinement levels) while the
/// local time scale |x|_inf / |f|_inf is below two steps. Once hom_norm(x) < origin_guard and f(t, 0) = 0,
/// the state is set to exactly 0.
Trace integrate(const TimeField& f, const Point& x0, const IntegratorConfig& cfg, const WeightVector& weights,
                double t0 = 0.0);
Trace integrate(const FieldFn& f, const Point& x0, const IntegratorConfig& cfg, const WeightVector& weights);

/// Integrates a field homogeneous of degree `degree` for the weights r along its orbits: RK4 in
/// the time s with ds = hom_norm(x)^degree dt, where the rescaled field has degree 0 and a fixed
/// step resolves every scale. cfg.step is the s-step and cfg.t_end bounds the physical time t,
/// which is what the trace records. The run ends once hom_norm < cfg.origin_guard (the state is
/// then set to 0), when t passes cfg.t_end, or after t_end / step steps.
Trace integrate_orbit(const FieldFn& f, double degree, const WeightVector& r, const Point& x0,
                      const IntegratorConfig& cfg);

/// First time after which norms[k] stays below threshold; nullopt if the last sample is above it.
std::optional<double> convergence_time(std::span<const double> times, std::span<const double> norms,
                                       double threshold);
/// Same, with hom_norm of the state rows.
std::optional<double> convergence_time(const Trace& trace, double threshold, const WeightVector& weights);

std::vector<double> state_norms(const Trace& trace, const WeightVector& weights);

/// CSV with header time,x1..xn[,xhat1..xhatn][,d1..dn][,z1..]; numbers printed with %.17g.
void write_trace_csv(const Trace& trace, std::ostream& os);
nlohmann::json to_json(const Trace& trace);

struct OutputFeedbackDesign;

struct IssPoint {
    double amplitude = 0.0;
    double steady_sup = 0.0;  ///< sup of hom_norm(x) over the trailing 20% of the horizon
    int sign = 1;             ///< disturbance sign giving the larger steady_sup
    bool diverged = false;
};

struct IssReport {
    std::vector<IssPoint> points;
    bool monotone = false;
    bool vanishes_at_zero = false;
    bool pass() const { return monotone && vanishes_at_zero; }
};

/// Constant disturbance of each amplitude, both signs, on the last channel of the plant.
IssReport run_iss_experiment(const OutputFeedbackDesign& design, const std::vector<double>& amplitudes,
                             const Point& x0, const IntegratorConfig& cfg);

nlohmann::json to_json(const IssReport& r);

}  // namespace bilimit
