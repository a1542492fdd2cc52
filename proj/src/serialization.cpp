#include "bilimit/serialization.hpp"

#include <fstream>
#include <sstream>

#include <unistd.h>

namespace bilimit {

namespace {

nlohmann::json certificate_json(const std::optional<DominationResult>& c) {
    return c ? to_json(*c) : nlohmann::json(nullptr);
}

std::optional<DominationResult> certificate_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return domination_result_from_json(j);
}

template <class T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("design JSON: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("design JSON: field '") + key + "': " + e.what());
    }
}

void expect_kind(const nlohmann::json& j, const std::string& kind) {
    if (field<std::string>(j, "kind") != kind)
        throw FormatError("design JSON: expected kind '" + kind + "'");
}

}  // namespace

DominationResult domination_result_from_json(const nlohmann::json& j) {
    DominationResult r;
    r.c = field<double>(j, "c");
    r.c_frontier = field<double>(j, "c_frontier");
    r.seed = field<std::uint64_t>(j, "seed");
    r.sample_count = field<std::size_t>(j, "sample_count");
    for (const auto& m : field<nlohmann::json>(j, "margins"))
        r.margins.push_back({field<std::string>(m, "region"), field<double>(m, "margin"),
                             field<std::size_t>(m, "samples")});
    return r;
}

nlohmann::json to_json(const ObserverDesign& d) {
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t i = 0; i < d.levels().size(); ++i) {
        const auto& l = d.levels()[i];
        levels.push_back({{"level", i + 1},
                          {"gain", l.ell},
                          {"r0", l.q.r0()},
                          {"r_inf", l.q.r_inf()},
                          {"exponent0", l.q.exponent0()},
                          {"exponent_inf", l.q.exponent_inf()},
                          {"lyapunov_exponents", {l.lyap.a(), l.lyap.b()}},
                          {"certificate", certificate_json(l.certificate)}});
    }
    return {{"kind", "observer"},
            {"n", d.n()},
            {"degrees", {{"d0", d.degrees().d0}, {"d_inf", d.degrees().d_inf}}},
            {"weights", {{"r0", d.weights().r0.entries()}, {"r_inf", d.weights().r_inf.entries()}}},
            {"mode", to_string(d.mode())},
            {"dW0", d.dW0()},
            {"dW_inf", d.dW_inf()},
            {"gains", d.gains()},
            {"levels", levels}};
}

ObserverDesign observer_from_json(const nlohmann::json& j) {
    expect_kind(j, "observer");
    const auto deg = field<nlohmann::json>(j, "degrees");
    const DegreePair d{field<double>(deg, "d0"), field<double>(deg, "d_inf")};
    ObserverDesign out(field<std::size_t>(j, "n"), d, saturation_mode_from_string(field<std::string>(j, "mode")),
                       field<double>(j, "dW0"), field<double>(j, "dW_inf"),
                       field<std::vector<double>>(j, "gains"));
    if (j.contains("levels")) {
        const auto& lv = j.at("levels");
        for (std::size_t i = 0; i < lv.size() && i < out.n(); ++i)
            if (lv[i].contains("certificate")) out.levels_mut()[i].certificate = certificate_from(lv[i].at("certificate"));
    }
    return out;
}

nlohmann::json to_json(const ControllerDesign& d) {
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t i = 0; i < d.levels().size(); ++i) {
        const auto& l = d.levels()[i];
        levels.push_back({{"level", i + 1},
                          {"gain", l.k},
                          {"alpha", d.alpha().at(i + 1)},
                          {"integral_exponents", {l.integral.A(), l.integral.B()}},
                          {"lyapunov_exponents", {l.lyap.a(), l.lyap.b()}},
                          {"certificate", certificate_json(l.certificate)}});
    }
    return {{"kind", "controller"},
            {"n", d.n()},
            {"degrees", {{"d0", d.degrees().d0}, {"d_inf", d.degrees().d_inf}}},
            {"weights", {{"r0", d.weights().r0.entries()}, {"r_inf", d.weights().r_inf.entries()}}},
            {"mode", to_string(d.mode())},
            {"alpha", d.alpha().alpha},
            {"dV0", d.dV0()},
            {"dV_inf", d.dV_inf()},
            {"gains", d.gains()},
            {"levels", levels}};
}

ControllerDesign controller_from_json(const nlohmann::json& j) {
    expect_kind(j, "controller");
    const auto deg = field<nlohmann::json>(j, "degrees");
    const DegreePair d{field<double>(deg, "d0"), field<double>(deg, "d_inf")};
    ControllerDesign out(field<std::size_t>(j, "n"), d, saturation_mode_from_string(field<std::string>(j, "mode")),
                         AlphaSchedule{field<std::vector<double>>(j, "alpha")}, field<double>(j, "dV0"),
                         field<double>(j, "dV_inf"), field<std::vector<double>>(j, "gains"));
    if (j.contains("levels")) {
        const auto& lv = j.at("levels");
        for (std::size_t i = 0; i < lv.size() && i < out.n(); ++i)
            if (lv[i].contains("certificate")) out.levels_mut()[i].certificate = certificate_from(lv[i].at("certificate"));
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp =
        path.parent_path() / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace bilimit
