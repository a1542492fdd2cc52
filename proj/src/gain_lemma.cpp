#include "bilimit/gain_lemma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bilimit/parallel.hpp"
#include "bilimit/sampling.hpp"

namespace bilimit {

LemmaSampling LemmaSampling::denser(std::size_t factor) const {
    LemmaSampling d = *this;
    d.sphere_points_per_dim *= factor;
    d.rungs = (rungs - 1) * factor + 1;
    return d;
}

double DominationResult::min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : margins) m = std::min(m, r.margin);
    return m;
}

namespace {

struct Sample {
    double eta;
    double gamma;
};

struct Region {
    std::string name;
    std::vector<Sample> samples;
    std::vector<Point> points;  // kept for diagnostics
};

std::string describe(std::span<const double> x) {
    std::ostringstream os;
    os.precision(6);
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

void validate(const DominationProblem& p) {
    const auto& a = p.eta.sig;
    const auto& b = p.gamma.sig;
    if (!p.eta.eval || !p.gamma.eval) throw PreconditionError("domination problem: missing function");
    if (!p.eta.approx0 || !p.eta.approx_inf || !p.gamma.approx0 || !p.gamma.approx_inf)
        throw PreconditionError("domination problem: both limit approximations are required");
    const double tol = 1e-12;
    if (!(a.r0 == b.r0) || !(a.r_inf == b.r_inf) || std::fabs(a.d0 - b.d0) > tol ||
        std::fabs(a.d_inf - b.d_inf) > tol)
        throw PreconditionError("domination problem: eta and gamma signatures differ");
}

Region sphere_region(const std::string& name, const ScalarFn& eta, const ScalarFn& gamma,
                     const WeightVector& r, const LemmaSampling& s) {
    Region reg{name, {}, sphere_samples(r, std::max<std::size_t>(2, s.sphere_points_per_dim * r.size()), s.seed)};
    reg.samples.resize(reg.points.size());
    parallel_for(reg.points.size(), [&](std::size_t k) {
        reg.samples[k] = {eta(reg.points[k]), gamma(reg.points[k])};
    });
    return reg;
}

Region annulus_region(const DominationProblem& p, const LemmaSampling& s) {
    const auto& sig = p.eta.sig;
    const std::size_t count = std::max<std::size_t>(2, s.sphere_points_per_dim * sig.dim());
    // Offset seed so the annulus does not reuse the exact sphere points of the limit regions.
    const std::vector<Point> s0 = sphere_samples(sig.r0, count, s.seed + 1);
    const std::vector<Point> sinf = sphere_samples(sig.r_inf, count, s.seed + 2);
    const std::vector<double> lambdas = log_ladder(s.lambda_lo, s.lambda_hi, s.rungs);

    Region reg{"annulus", {}, {}};
    const std::size_t per_rung = 2 * count;
    reg.points.resize(lambdas.size() * per_rung);
    reg.samples.resize(reg.points.size());
    // Each sample is divided by the magnitude scale of its own regime, so the zero test on
    // gamma means the same thing at both ends of the ladder whatever the degree ordering.
    auto scale = [&sig](std::span<const double> x) {
        const double rho0 = hom_norm(x, sig.r0);
        return rho0 <= 1.0 ? std::pow(rho0, sig.d0) : std::pow(hom_norm(x, sig.r_inf), sig.d_inf);
    };
    parallel_for(lambdas.size(), [&](std::size_t li) {
        const double lambda = lambdas[li];
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t a = li * per_rung + k;
            reg.points[a] = dilate(lambda, sig.r0, s0[k]);
            const double ma = scale(reg.points[a]);
            reg.samples[a] = {p.eta(reg.points[a]) / ma, p.gamma(reg.points[a]) / ma};
            const std::size_t b = a + count;
            reg.points[b] = dilate(lambda, sig.r_inf, sinf[k]);
            const double mb = scale(reg.points[b]);
            reg.samples[b] = {p.eta(reg.points[b]) / mb, p.gamma(reg.points[b]) / mb};
        }
    });
    return reg;
}

std::vector<Region> build_regions(const DominationProblem& p, const LemmaSampling& s) {
    std::vector<Region> regions;
    regions.push_back(sphere_region("sphere_r0", p.eta.approx0, p.gamma.approx0, p.eta.sig.r0, s));
    regions.push_back(
        sphere_region("sphere_r_inf", p.eta.approx_inf, p.gamma.approx_inf, p.eta.sig.r_inf, s));
    regions.push_back(annulus_region(p, s));
    return regions;
}

void check_samples(const std::vector<Region>& regions, double eps_zero) {
    for (const auto& reg : regions) {
        for (std::size_t k = 0; k < reg.samples.size(); ++k) {
            const auto& smp = reg.samples[k];
            if (!std::isfinite(smp.eta) || !std::isfinite(smp.gamma))
                throw HypothesisFailure("non-finite value in region " + reg.name + " at " +
                                        describe(reg.points[k]));
            if (smp.gamma < -eps_zero * std::max(1.0, std::fabs(smp.eta)))
                throw HypothesisFailure("gamma negative in region " + reg.name + " at " +
                                        describe(reg.points[k]));
            // Relative test: dominating this sample would take c > 1 / eps_zero.
            if (!(smp.eta < 0.0) && smp.gamma <= eps_zero * std::fabs(smp.eta))
                throw HypothesisFailure("hypothesis failure: gamma vanishes but eta >= 0 in region " +
                                        reg.name + " at " + describe(reg.points[k]));
        }
    }
}

bool passes(const std::vector<Region>& regions, double c) {
    for (const auto& reg : regions)
        for (const auto& smp : reg.samples)
            if (!(smp.eta - c * smp.gamma < 0.0)) return false;
    return true;
}

std::vector<RegionMargin> margins_of(const std::vector<Region>& regions, double c) {
    std::vector<RegionMargin> out;
    for (const auto& reg : regions) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& smp : reg.samples) m = std::min(m, c * smp.gamma - smp.eta);
        out.push_back({reg.name, m, reg.samples.size()});
    }
    return out;
}

}  // namespace

std::vector<RegionMargin> domination_margins(const DominationProblem& p, double c,
                                             const LemmaSampling& s) {
    validate(p);
    return margins_of(build_regions(p, s), c);
}

DominationResult find_domination_constant(const DominationProblem& p, const LemmaSampling& s) {
    validate(p);
    const std::vector<Region> regions = build_regions(p, s);
    check_samples(regions, s.eps_zero);

    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    if (passes(regions, s.c_start)) {
        hi = s.c_start;
        for (int k = 0; k < s.max_halvings; ++k) {
            const double c = hi / 2.0;
            if (!passes(regions, c)) {
                lo = c;
                bracketed = true;
                break;
            }
            hi = c;
        }
        // Every halving passed: the constraint is vacuous, keep the schedule start.
        if (!bracketed) hi = s.c_start;
    } else {
        lo = s.c_start;
        hi = 2.0 * s.c_start;
        while (!passes(regions, hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > s.c_max)
                throw NoFiniteConstant("no finite constant found at this resolution (c > " +
                                       std::to_string(s.c_max) + ")");
        }
        bracketed = true;
    }
    if (bracketed) {
        for (int k = 0; k < s.bisection_steps; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (passes(regions, mid)) hi = mid;
            else lo = mid;
        }
    }

    DominationResult res;
    res.c_frontier = hi;
    res.c = s.safety * hi;
    res.margins = margins_of(regions, res.c);
    res.seed = s.seed;
    for (const auto& reg : regions) res.sample_count += reg.samples.size();
    return res;
}

DominationBound domination_bound(const HomFunction& phi, const HomFunction& zeta,
                                 const LemmaSampling& s) {
    const auto& a = phi.sig;
    const auto& b = zeta.sig;
    if (!(a.r0 == b.r0) || !(a.r_inf == b.r_inf))
        throw PreconditionError("domination_bound: phi and zeta must share weights");
    const double tol = 1e-12;
    if (a.d0 < b.d0 - tol || a.d_inf > b.d_inf + tol)
        throw PreconditionError(
            "domination_bound: degree ordering d_phi0 >= d_zeta0 and d_phi_inf <= d_zeta_inf violated");
    if (!zeta.approx0 || !zeta.approx_inf || !phi.approx0 || !phi.approx_inf)
        throw PreconditionError("domination_bound: approximations required");

    for (const auto& [f, r, name] : {std::tuple{zeta.approx0, b.r0, "zeta_0"},
                                     std::tuple{zeta.approx_inf, b.r_inf, "zeta_inf"},
                                     std::tuple{zeta.eval, b.r0, "zeta"}}) {
        for (const Point& x : sphere_samples(r, std::max<std::size_t>(2, s.sphere_points_per_dim * r.size()), s.seed))
            if (!(f(x) > 0.0))
                throw PreconditionError(std::string("domination_bound: ") + name +
                                        " not positive definite at " + describe(x));
    }

    const bool phi_matches_0 = std::fabs(a.d0 - b.d0) <= tol;
    const bool phi_matches_inf = std::fabs(a.d_inf - b.d_inf) <= tol;
    const ScalarFn f = phi.eval, g = zeta.eval;
    const ScalarFn f0 = phi.approx0, g0 = zeta.approx0;
    const ScalarFn finf = phi.approx_inf, ginf = zeta.approx_inf;

    DominationProblem prob;
    prob.gamma = zeta;
    prob.eta.sig = zeta.sig;
    prob.eta.eval = [f, g](std::span<const double> x) { return f(x) + g(x); };
    prob.eta.approx0 = phi_matches_0 ? ScalarFn([f0, g0](std::span<const double> x) { return f0(x) + g0(x); })
                                     : g0;
    prob.eta.approx_inf =
        phi_matches_inf ? ScalarFn([finf, ginf](std::span<const double> x) { return finf(x) + ginf(x); })
                        : ginf;

    DominationBound out;
    out.lemma = find_domination_constant(prob, s);
    const double resolution = s.c_start * std::ldexp(1.0, -s.bisection_steps);
    out.c = std::max(out.lemma.c_frontier - 1.0, resolution);
    return out;
}

nlohmann::json to_json(const DominationResult& r) {
    nlohmann::json margins = nlohmann::json::array();
    for (const auto& m : r.margins)
        margins.push_back({{"region", m.region}, {"margin", m.margin}, {"samples", m.samples}});
    return {{"c", r.c},
            {"c_frontier", r.c_frontier},
            {"margins", margins},
            {"seed", r.seed},
            {"sample_count", r.sample_count}};
}

}  // namespace bilimit
