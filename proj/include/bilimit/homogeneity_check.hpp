#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bilimit/hom_core.hpp"

namespace bilimit {

enum class LimitSide { Zero, Infinity };

const char* to_string(LimitSide side);

struct HomogeneityGrid {
    int decades = 6;                 ///< ladder 10^0 .. 10^{-decades} (zero) or 10^{+decades}
    std::size_t points_per_dim = 64; ///< sphere samples = points_per_dim * n
    double tolerance = 1e-3;
    std::uint64_t seed = 1;
};

struct HomogeneityReport {
    LimitSide side = LimitSide::Zero;
    std::vector<double> lambdas;
    /// sup over the sphere of |f(lambda^r<>theta)/lambda^d - approx(theta)|, divided by
    /// sup |approx| on the sphere.
    std::vector<double> deviations;
    double approx_scale = 0.0;
    bool pass = false;
    std::string message;

    double final_deviation() const { return deviations.empty() ? 0.0 : deviations.back(); }
};

/// Numerical surrogate of the limit definitions: deviation of f from its approximation on a
/// ladder of dilated homogeneous spheres. PASS when the deviation at the extreme rung is below
/// tolerance and does not increase over the last three rungs.
HomogeneityReport check_homogeneity_limit(const ScalarFn& f, const WeightVector& r, double d,
                                          const ScalarFn& approx, LimitSide side,
                                          const HomogeneityGrid& grid = {});

/// Checks both limits of a HomFunction against its stored approximations.
struct BiLimitReport {
    HomogeneityReport zero;
    HomogeneityReport infinity;
    bool pass() const { return zero.pass && infinity.pass; }
};

BiLimitReport check_bilimit(const HomFunction& f, const HomogeneityGrid& grid = {});

/// Componentwise check of a vector field; the report per side is the worst component.
struct FieldReport {
    std::vector<BiLimitReport> components;
    bool pass() const;
    double worst_deviation(LimitSide side) const;
};

FieldReport check_field_bilimit(const HomVectorField& f, const HomogeneityGrid& grid = {});

nlohmann::json to_json(const HomogeneityReport& report);
nlohmann::json to_json(const BiLimitReport& report);
nlohmann::json to_json(const FieldReport& report);

}  // namespace bilimit
