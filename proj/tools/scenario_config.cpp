#include "scenario_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace bilimit::cli {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be a table");
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& item : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const char* k) { return item.key() == k; });
        if (!ok) throw ConfigError("config: unknown key '" + (path.empty() ? "" : path + ".") + item.key() + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: '" + (path.empty() ? "" : path + ".") + key + "' has the wrong type");
    }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

}  // namespace

const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Chain: return "chain";
        case ScenarioKind::FeedbackExample: return "feedback_example";
        case ScenarioKind::FeedforwardExample: return "feedforward_example";
        case ScenarioKind::PowerSum: return "power_sum";
    }
    return "chain";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
    for (auto k : {ScenarioKind::Chain, ScenarioKind::FeedbackExample, ScenarioKind::FeedforwardExample,
                   ScenarioKind::PowerSum})
        if (s == to_string(k)) return k;
    throw ConfigError("config: unknown scenario kind '" + s +
                      "' (chain, feedback_example, feedforward_example, power_sum)");
}

ObserverTuning ScenarioConfig::observer_tuning() const {
    ObserverTuning t;
    t.lemma = lemma;
    t.lemma.seed = seed;
    t.ell_n = ell_n;
    t.degree_margin = degree_margin;
    t.mode = mode.value_or(SaturationMode::Paper);
    return t;
}

ControllerTuning ScenarioConfig::controller_tuning() const {
    ControllerTuning t;
    t.lemma = lemma;
    t.lemma.seed = seed;
    t.k1 = k1;
    t.degree_margin = degree_margin;
    t.mode = mode;
    return t;
}

FeedbackForm ScenarioConfig::effective_form() const {
    if (form) return *form;
    if (kind == ScenarioKind::FeedforwardExample) return FeedbackForm::Feedforward;
    return degrees.d0 <= degrees.d_inf ? FeedbackForm::Feedback : FeedbackForm::Feedforward;
}

DisturbanceScenario ScenarioConfig::scenario() const {
    switch (kind) {
        case ScenarioKind::Chain: return no_disturbance(n);
        case ScenarioKind::FeedbackExample:
            if (n != 2) throw ConfigError("config: feedback_example needs n = 2");
            return feedback_example(growth);
        case ScenarioKind::FeedforwardExample:
            if (n != 3) throw ConfigError("config: feedforward_example needs n = 3");
            return feedforward_example(z0);
        case ScenarioKind::PowerSum:
            return power_sum_disturbance(n, degrees, growth.c0, growth.c_inf, effective_form());
    }
    return no_disturbance(n);
}

Point ScenarioConfig::initial_state() const {
    if (x0) {
        if (x0->size() != n) throw ConfigError("config: simulation.x0 must have n entries");
        return *x0;
    }
    // hom_norm of (s, ..., s) with weights r0 equals 1 when sum s^{1/r0_i} = 1; a fixed point works.
    const ChainWeights w = weights_from_degrees(n, degrees);
    Point x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::pow(1.0 / static_cast<double>(n), w.r0[i]);
    return x;
}

nlohmann::json to_json(const LemmaSampling& s) {
    return {{"sphere_points_per_dim", s.sphere_points_per_dim},
            {"lambda_lo", s.lambda_lo},
            {"lambda_hi", s.lambda_hi},
            {"rungs", s.rungs},
            {"eps_zero", s.eps_zero},
            {"c_start", s.c_start},
            {"c_max", s.c_max},
            {"bisection_steps", s.bisection_steps},
            {"max_halvings", s.max_halvings},
            {"safety", s.safety},
            {"seed", s.seed}};
}

LemmaSampling lemma_sampling_from_json(const nlohmann::json& j) {
    reject_unknown(j, "sampling",
                   {"sphere_points_per_dim", "lambda_lo", "lambda_hi", "rungs", "eps_zero", "c_start", "c_max",
                    "bisection_steps", "max_halvings", "safety", "seed"});
    LemmaSampling s;
    read(j, "sphere_points_per_dim", s.sphere_points_per_dim, "sampling");
    read(j, "lambda_lo", s.lambda_lo, "sampling");
    read(j, "lambda_hi", s.lambda_hi, "sampling");
    read(j, "rungs", s.rungs, "sampling");
    read(j, "eps_zero", s.eps_zero, "sampling");
    read(j, "c_start", s.c_start, "sampling");
    read(j, "c_max", s.c_max, "sampling");
    read(j, "bisection_steps", s.bisection_steps, "sampling");
    read(j, "max_halvings", s.max_halvings, "sampling");
    read(j, "safety", s.safety, "sampling");
    read(j, "seed", s.seed, "sampling");
    return s;
}

ScenarioConfig parse_config(const nlohmann::json& j) {
    reject_unknown(j, "", {"n", "degrees", "mode", "scenario", "tuning", "simulation", "integrator", "sweep",
                           "output", "seed"});
    ScenarioConfig c;
    read(j, "n", c.n, "");
    read(j, "seed", c.seed, "");
    if (c.n == 0) throw ConfigError("config: n must be at least 1");
    if (j.contains("degrees")) {
        const auto& d = j.at("degrees");
        reject_unknown(d, "degrees", {"d0", "d_inf"});
        read(d, "d0", c.degrees.d0, "degrees");
        read(d, "d_inf", c.degrees.d_inf, "degrees");
    }
    if (j.contains("mode")) {
        std::string m;
        read(j, "mode", m, "");
        try {
            c.mode = saturation_mode_from_string(m);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: mode: ") + e.what());
        }
    }
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        const std::string p = "scenario";
        reject_unknown(s, p, {"kind", "q", "p", "c0", "c_inf", "form", "z0"});
        std::string kind = to_string(c.kind);
        read(s, "kind", kind, p);
        c.kind = scenario_kind_from_string(kind);
        read(s, "q", c.growth.q, p);
        read(s, "p", c.growth.p, p);
        read(s, "c0", c.growth.c0, p);
        read(s, "c_inf", c.growth.c_inf, p);
        read(s, "z0", c.z0, p);
        if (s.contains("form")) {
            std::string f;
            read(s, "form", f, p);
            try {
                c.form = feedback_form_from_string(f);
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config: scenario.form: ") + e.what());
            }
        }
    }
    if (j.contains("tuning")) {
        const auto& t = j.at("tuning");
        const std::string p = "tuning";
        reject_unknown(t, p, {"ell_n", "k1", "degree_margin", "sampling"});
        read(t, "ell_n", c.ell_n, p);
        read(t, "k1", c.k1, p);
        read(t, "degree_margin", c.degree_margin, p);
        if (t.contains("sampling")) c.lemma = lemma_sampling_from_json(t.at("sampling"));
    }
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        const std::string p = "simulation";
        reject_unknown(s, p, {"L", "x0", "xhat0", "frame"});
        read(s, "L", c.L, p);
        if (s.contains("x0")) {
            Point x;
            read(s, "x0", x, p);
            c.x0 = x;
        }
        if (s.contains("xhat0")) {
            Point x;
            read(s, "xhat0", x, p);
            c.xhat0 = x;
        }
        if (s.contains("frame")) {
            std::string f;
            read(s, "frame", f, p);
            if (f == "rescaled") c.frame = SimulationFrame::Rescaled;
            else if (f == "raw") c.frame = SimulationFrame::Raw;
            else throw ConfigError("config: simulation.frame must be 'rescaled' or 'raw'");
        }
    }
    auto read_integrator = [](const json& s, const std::string& p, IntegratorConfig& ic) {
        reject_unknown(s, p, {"step", "t_end", "origin_guard", "threshold", "record_stride", "max_refinement",
                              "blowup_bound"});
        read(s, "step", ic.step, p);
        read(s, "t_end", ic.t_end, p);
        read(s, "origin_guard", ic.origin_guard, p);
        read(s, "threshold", ic.threshold, p);
        read(s, "record_stride", ic.record_stride, p);
        read(s, "max_refinement", ic.max_refinement, p);
        read(s, "blowup_bound", ic.blowup_bound, p);
    };
    if (j.contains("integrator")) read_integrator(j.at("integrator"), "integrator", c.integrator);
    c.sweep.integrator = c.integrator;
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        const std::string p = "sweep";
        reject_unknown(s, p, {"L_start", "max_rungs", "extra_rungs", "refine", "refine_steps", "test_count",
                              "norm_lo", "norm_hi", "pass_threshold", "integrator"});
        read(s, "L_start", c.sweep.L_start, p);
        read(s, "max_rungs", c.sweep.max_rungs, p);
        read(s, "extra_rungs", c.sweep.extra_rungs, p);
        read(s, "refine", c.sweep.refine, p);
        read(s, "refine_steps", c.sweep.refine_steps, p);
        read(s, "test_count", c.sweep.test_count, p);
        read(s, "norm_lo", c.sweep.norm_lo, p);
        read(s, "norm_hi", c.sweep.norm_hi, p);
        read(s, "pass_threshold", c.sweep.pass_threshold, p);
        if (s.contains("integrator")) read_integrator(s.at("integrator"), join(p, "integrator"), c.sweep.integrator);
    }
    c.sweep.seed = static_cast<unsigned>(c.seed);
    if (j.contains("output")) {
        const auto& o = j.at("output");
        reject_unknown(o, "output", {"dir"});
        std::string dir = c.out_dir.string();
        read(o, "dir", dir, "output");
        c.out_dir = dir;
    }
    try {
        c.integrator.validate();
        c.sweep.integrator.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(c.L > 0.0)) throw ConfigError("config: simulation.L must be positive");
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::json to_json(const ScenarioConfig& c) {
    auto integrator = [](const IntegratorConfig& ic) {
        return nlohmann::json{{"step", ic.step},
                              {"t_end", ic.t_end},
                              {"origin_guard", ic.origin_guard},
                              {"threshold", ic.threshold},
                              {"record_stride", ic.record_stride},
                              {"max_refinement", ic.max_refinement},
                              {"blowup_bound", ic.blowup_bound}};
    };
    nlohmann::json scenario = {{"kind", to_string(c.kind)},
                               {"q", c.growth.q},
                               {"p", c.growth.p},
                               {"c0", c.growth.c0},
                               {"c_inf", c.growth.c_inf},
                               {"form", to_string(c.effective_form())},
                               {"z0", c.z0}};
    nlohmann::json sim = {{"L", c.L},
                          {"x0", c.initial_state()},
                          {"frame", c.frame == SimulationFrame::Raw ? "raw" : "rescaled"}};
    if (c.xhat0) sim["xhat0"] = *c.xhat0;
    nlohmann::json j = {
        {"n", c.n},
        {"degrees", {{"d0", c.degrees.d0}, {"d_inf", c.degrees.d_inf}}},
        {"scenario", scenario},
        {"tuning",
         {{"ell_n", c.ell_n}, {"k1", c.k1}, {"degree_margin", c.degree_margin}, {"sampling", to_json(c.lemma)}}},
        {"simulation", sim},
        {"integrator", integrator(c.integrator)},
        {"sweep",
         {{"L_start", c.sweep.L_start},
          {"max_rungs", c.sweep.max_rungs},
          {"extra_rungs", c.sweep.extra_rungs},
          {"refine", c.sweep.refine},
          {"refine_steps", c.sweep.refine_steps},
          {"test_count", c.sweep.test_count},
          {"norm_lo", c.sweep.norm_lo},
          {"norm_hi", c.sweep.norm_hi},
          {"pass_threshold", c.sweep.pass_threshold},
          {"integrator", integrator(c.sweep.integrator)}}},
        {"output", {{"dir", c.out_dir.string()}}},
        {"seed", c.seed}};
    if (c.mode) j["mode"] = to_string(*c.mode);
    return j;
}

std::string config_reference() {
    ScenarioConfig c;
    std::ostringstream os;
    os << "Config file: JSON (comments allowed), unknown keys rejected. Defaults:\n"
       << to_json(c).dump(2) << "\n"
       << "mode: paper | simplified (default: observer paper; controller simplified when d0 <= d_inf)\n"
       << "scenario.kind: chain | feedback_example | feedforward_example | power_sum\n"
       << "scenario.form: feedback | feedforward (default from the degree ordering)\n"
       << "simulation.frame: rescaled (step and t_end in tau = L t) | raw\n";
    return os.str();
}

}  // namespace bilimit::cli
