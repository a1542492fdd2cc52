#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bilimit/hom_core.hpp"

namespace bilimit {

/// eta and gamma share the signature of eta; gamma must be nonnegative.
struct DominationProblem {
    HomFunction eta;
    HomFunction gamma;
};

struct LemmaSampling {
    std::size_t sphere_points_per_dim = 512;  ///< samples per sphere = this * n (at least 2)
    double lambda_lo = 1e-3;
    double lambda_hi = 1e3;
    std::size_t rungs = 40;
    double eps_zero = 1e-8;
    double c_start = 1.0;
    double c_max = 1e9;
    int bisection_steps = 20;
    int max_halvings = 20;
    double safety = 1.25;
    std::uint64_t seed = 1;

    /// Same sampling with sphere density multiplied by factor.
    LemmaSampling denser(std::size_t factor) const;
};

struct RegionMargin {
    std::string region;
    double margin = 0.0;  ///< min over samples of (c*gamma - eta), divided by the regime scale of each sample
    std::size_t samples = 0;
};

struct DominationResult {
    double c = 0.0;           ///< certified constant, safety factor included
    double c_frontier = 0.0;  ///< smallest schedule value that passed
    std::vector<RegionMargin> margins;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;

    double min_margin() const;
};

class HypothesisFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoFiniteConstant : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Three-regime search for c with eta - c*gamma < 0: the 0-approximation on S_r0, the
/// infinity-approximation on S_r_inf, and the function itself on an annulus of dilated sphere
/// points. Doubling from c_start until the check passes (or halving while it keeps passing),
/// then bisection; the frontier is multiplied by the safety factor.
DominationResult find_domination_constant(const DominationProblem& p, const LemmaSampling& s = {});

/// Margins of eta - c*gamma at a fixed c on the sampling of s; all positive iff c verifies.
std::vector<RegionMargin> domination_margins(const DominationProblem& p, double c,
                                             const LemmaSampling& s = {});

struct DominationBound {
    double c = 0.0;
    DominationResult lemma;
};

/// c with phi <= c*zeta, through the lemma applied to (phi + zeta, zeta). Requires the degree
/// ordering d_phi0 >= d_zeta0 and d_phi_inf <= d_zeta_inf, and zeta positive definite.
DominationBound domination_bound(const HomFunction& phi, const HomFunction& zeta,
                                 const LemmaSampling& s = {});

nlohmann::json to_json(const DominationResult& r);

}  // namespace bilimit
