#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "bilimit/observer.hpp"
#include "bilimit/output_feedback.hpp"
#include "bilimit/state_feedback.hpp"

namespace bilimit::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Chain, FeedbackExample, FeedforwardExample, PowerSum };

const char* to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioConfig {
    std::size_t n = 2;
    DegreePair degrees{0.0, 0.5};
    std::optional<SaturationMode> mode;  ///< applies to observer and controller when set

    ScenarioKind kind = ScenarioKind::Chain;
    GrowthParameters growth;              ///< q, p, c0, c_inf
    std::optional<FeedbackForm> form;     ///< default from the degree ordering
    double z0 = 0.0;

    double ell_n = 1.0;
    double k1 = 1.0;
    double degree_margin = 0.1;
    LemmaSampling lemma;

    double L = 1.0;
    std::optional<Point> x0;
    std::optional<Point> xhat0;
    SimulationFrame frame = SimulationFrame::Rescaled;

    IntegratorConfig integrator;
    SweepSpec sweep;

    std::filesystem::path out_dir = "bilimit_out";
    std::uint64_t seed = 1;

    ObserverTuning observer_tuning() const;
    ControllerTuning controller_tuning() const;
    DisturbanceScenario scenario() const;
    FeedbackForm effective_form() const;
    /// Default x0: hom_norm 1 along (1, ..., 1) directions.
    Point initial_state() const;
};

/// Parses a JSON config. Unknown keys anywhere are rejected with their path.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);

/// The fully resolved config, every default spelled out.
nlohmann::json to_json(const ScenarioConfig& c);

/// Documented defaults, for --help.
std::string config_reference();

nlohmann::json to_json(const LemmaSampling& s);
LemmaSampling lemma_sampling_from_json(const nlohmann::json& j);

}  // namespace bilimit::cli
