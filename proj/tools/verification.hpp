#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bilimit/gain_lemma.hpp"
#include "bilimit/homogeneity_check.hpp"
#include "bilimit/observer.hpp"
#include "bilimit/state_feedback.hpp"

namespace bilimit::cli {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
    nlohmann::json data;
};

struct VerificationReport {
    std::vector<Check> checks;
    std::vector<std::string> notes;

    bool pass() const;
    const Check* find(const std::string& name) const;
};

struct VerifyOptions {
    HomogeneityGrid grid;
    /// Lemma sampling for the decrease checks; the certificate seed is used when present.
    LemmaSampling sampling;
};

VerificationReport verify_observer(const ObserverDesign& d, const VerifyOptions& opt = {});
VerificationReport verify_controller(const ControllerDesign& d, const VerifyOptions& opt = {});
void append(VerificationReport& into, const VerificationReport& from);

nlohmann::json to_json(const VerificationReport& r);

}  // namespace bilimit::cli
