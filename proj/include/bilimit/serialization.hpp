#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "bilimit/gain_lemma.hpp"
#include "bilimit/observer.hpp"
#include "bilimit/state_feedback.hpp"

namespace bilimit {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const ObserverDesign& d);
nlohmann::json to_json(const ControllerDesign& d);

/// Rebuilds a design from its JSON form without re-tuning; gains and certificates are kept.
ObserverDesign observer_from_json(const nlohmann::json& j);
ControllerDesign controller_from_json(const nlohmann::json& j);
DominationResult domination_result_from_json(const nlohmann::json& j);

/// Writes to a temporary sibling file, then renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace bilimit
