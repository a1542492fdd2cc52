#include "bilimit/homogeneity_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bilimit/sampling.hpp"

namespace bilimit {

const char* to_string(LimitSide side) { return side == LimitSide::Zero ? "zero" : "infinity"; }

namespace {

// Relative slack for comparisons at the tolerance boundary and for the monotonicity test.
constexpr double kRoundingSlack = 1e-9;

std::string describe_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(6);
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

HomogeneityReport check_homogeneity_limit(const ScalarFn& f, const WeightVector& r, double d,
                                          const ScalarFn& approx, LimitSide side,
                                          const HomogeneityGrid& grid) {
    HomogeneityReport rep;
    rep.side = side;
    if (!f || !approx) {
        rep.message = "missing function or approximation";
        return rep;
    }
    const std::size_t n = r.size();
    const std::vector<Point> sphere = sphere_samples(r, grid.points_per_dim * n, grid.seed);

    std::vector<double> approx_values(sphere.size());
    for (std::size_t k = 0; k < sphere.size(); ++k) {
        approx_values[k] = approx(sphere[k]);
        if (!std::isfinite(approx_values[k])) {
            rep.message = "non-finite approximation at " + describe_point(sphere[k]);
            return rep;
        }
        rep.approx_scale = std::max(rep.approx_scale, std::fabs(approx_values[k]));
    }
    if (rep.approx_scale == 0.0) {
        rep.message = "approximation vanishes identically on the sample sphere";
        return rep;
    }

    Point y(n);
    for (int k = 0; k <= grid.decades; ++k) {
        const double lambda = std::pow(10.0, side == LimitSide::Zero ? -k : k);
        const double scale = std::pow(lambda, d);
        double worst = 0.0;
        for (std::size_t s = 0; s < sphere.size(); ++s) {
            dilate_into(lambda, r, sphere[s], y);
            const double v = f(y);
            if (!std::isfinite(v)) {
                rep.lambdas.push_back(lambda);
                rep.deviations.push_back(INFINITY);
                rep.message = "non-finite evaluation at " + describe_point(y);
                return rep;
            }
            worst = std::max(worst, std::fabs(v / scale - approx_values[s]));
        }
        rep.lambdas.push_back(lambda);
        rep.deviations.push_back(worst / rep.approx_scale);
    }

    const std::size_t m = rep.deviations.size();
    bool decreasing = true;
    for (std::size_t k = m >= 3 ? m - 3 : 0; k + 1 < m; ++k) {
        if (rep.deviations[k + 1] > rep.deviations[k] * (1.0 + kRoundingSlack) + 1e-15)
            decreasing = false;
    }
    const bool small = rep.deviations.back() < grid.tolerance * (1.0 + kRoundingSlack);
    rep.pass = decreasing && small;
    if (!decreasing) rep.message = "deviation not decreasing over the last three rungs";
    else if (!small) rep.message = "deviation above tolerance at the extreme rung";
    else rep.message = "ok";
    return rep;
}

BiLimitReport check_bilimit(const HomFunction& f, const HomogeneityGrid& grid) {
    BiLimitReport rep;
    rep.zero = check_homogeneity_limit(f.eval, f.sig.r0, f.sig.d0, f.approx0, LimitSide::Zero, grid);
    rep.infinity = check_homogeneity_limit(f.eval, f.sig.r_inf, f.sig.d_inf, f.approx_inf,
                                           LimitSide::Infinity, grid);
    return rep;
}

bool FieldReport::pass() const {
    return std::all_of(components.begin(), components.end(),
                       [](const BiLimitReport& c) { return c.pass(); });
}

double FieldReport::worst_deviation(LimitSide side) const {
    double w = 0.0;
    for (const auto& c : components)
        w = std::max(w, (side == LimitSide::Zero ? c.zero : c.infinity).final_deviation());
    return w;
}

FieldReport check_field_bilimit(const HomVectorField& f, const HomogeneityGrid& grid) {
    FieldReport rep;
    for (std::size_t i = 0; i < f.dim(); ++i) rep.components.push_back(check_bilimit(f.component(i), grid));
    return rep;
}

nlohmann::json to_json(const HomogeneityReport& report) {
    nlohmann::json j;
    j["side"] = to_string(report.side);
    j["lambda_ladder"] = report.lambdas;
    nlohmann::json devs = nlohmann::json::array();
    for (double d : report.deviations) {
        if (std::isfinite(d)) devs.push_back(d);
        else devs.push_back(nullptr);
    }
    j["sup_deviation"] = devs;
    j["approx_scale"] = report.approx_scale;
    j["verdict"] = report.pass ? "PASS" : "FAIL";
    j["message"] = report.message;
    return j;
}

nlohmann::json to_json(const BiLimitReport& report) {
    return {{"zero", to_json(report.zero)},
            {"infinity", to_json(report.infinity)},
            {"verdict", report.pass() ? "PASS" : "FAIL"}};
}

nlohmann::json to_json(const FieldReport& report) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : report.components) comps.push_back(to_json(c));
    return {{"components", comps}, {"verdict", report.pass() ? "PASS" : "FAIL"}};
}

}  // namespace bilimit
