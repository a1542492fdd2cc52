#include "cli_app.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "bilimit/serialization.hpp"
#include "scenario_config.hpp"
#include "verification.hpp"

namespace bilimit::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string mode;
    bool refine = false;
    std::string observer_path;
    std::string controller_path;
};

ScenarioConfig resolve_config(const Options& o) {
    ScenarioConfig c = load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
        c.sweep.seed = static_cast<unsigned>(*o.seed);
    }
    if (!o.mode.empty()) {
        try {
            c.mode = saturation_mode_from_string(o.mode);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--mode: ") + e.what());
        }
    }
    if (!o.out.empty()) c.out_dir = o.out;
    if (o.refine) c.sweep.refine = true;
    return c;
}

fs::path prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("output directory not writable: " + dir.string());
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

nlohmann::json design_json(const ObserverDesign& d, const LemmaSampling& s) {
    nlohmann::json j = to_json(d);
    j["sampling"] = to_json(s);
    return j;
}

nlohmann::json design_json(const ControllerDesign& d, const LemmaSampling& s) {
    nlohmann::json j = to_json(d);
    j["sampling"] = to_json(s);
    return j;
}

nlohmann::json load_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

LemmaSampling stored_sampling(const nlohmann::json& j) {
    return j.contains("sampling") ? lemma_sampling_from_json(j.at("sampling")) : LemmaSampling{};
}

struct Designs {
    ObserverDesign observer;
    ControllerDesign controller;
};

Designs synthesize(const ScenarioConfig& c) {
    require_degrees(c.n, c.degrees);
    return {build_observer(c.n, c.degrees, c.observer_tuning()), build_controller(c.n, c.degrees, c.controller_tuning())};
}

bool same_degrees(const DegreePair& a, const DegreePair& b) {
    return std::fabs(a.d0 - b.d0) <= 1e-12 && std::fabs(a.d_inf - b.d_inf) <= 1e-12;
}

Designs designs_for(const ScenarioConfig& c, const Options& o) {
    if (o.observer_path.empty() != o.controller_path.empty())
        throw ConfigError("--observer and --controller must be given together");
    if (o.observer_path.empty()) return synthesize(c);
    Designs d{observer_from_json(load_json(o.observer_path)), controller_from_json(load_json(o.controller_path))};
    if (d.observer.n() != c.n || d.controller.n() != c.n)
        throw ConfigError("design dimension does not match config n = " + std::to_string(c.n));
    if (!same_degrees(d.observer.degrees(), c.degrees) || !same_degrees(d.controller.degrees(), c.degrees))
        throw ConfigError("design degrees do not match the config degrees");
    return d;
}

void print_gain_table(std::ostream& out, const ObserverDesign& obs, const ControllerDesign& ctrl) {
    out << "level  observer_gain       controller_gain     alpha\n";
    const auto ell = obs.gains();
    const auto k = ctrl.gains();
    for (std::size_t i = 0; i < obs.n(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%-6zu %-19.10g %-19.10g %.6g\n", i + 1, ell[i], k[i], ctrl.alpha().at(i + 1));
        out << line;
    }
}

void print_report(std::ostream& out, const VerificationReport& r) {
    for (const auto& c : r.checks) out << (c.pass ? "  ok   " : "  FAIL ") << c.name << ": " << c.detail << "\n";
    for (const auto& n : r.notes) out << "  note " << n << "\n";
    out << "verification: " << (r.pass() ? "PASS" : "FAIL") << " (" << r.checks.size() << " checks)\n";
}

int cmd_design(const Options& o, std::ostream& out) {
    const ScenarioConfig c = resolve_config(o);
    const Designs d = synthesize(c);
    const fs::path dir = prepare_dir(c.out_dir);
    write_json(dir / "observer.json", design_json(d.observer, c.observer_tuning().lemma));
    write_json(dir / "controller.json", design_json(d.controller, c.controller_tuning().lemma));
    print_gain_table(out, d.observer, d.controller);
    VerifyOptions vo;
    vo.sampling = c.observer_tuning().lemma;
    VerificationReport r = verify_observer(d.observer, vo);
    append(r, verify_controller(d.controller, vo));
    print_report(out, r);
    out << "wrote " << (dir / "observer.json").string() << " and " << (dir / "controller.json").string() << "\n";
    return Success;
}

int cmd_verify(const Options& o, std::ostream& out) {
    if (o.observer_path.empty() && o.controller_path.empty())
        throw ConfigError("verify needs --observer and/or --controller");
    VerificationReport r;
    if (!o.observer_path.empty()) {
        const auto j = load_json(o.observer_path);
        VerifyOptions vo;
        vo.sampling = stored_sampling(j);
        append(r, verify_observer(observer_from_json(j), vo));
    }
    if (!o.controller_path.empty()) {
        const auto j = load_json(o.controller_path);
        VerifyOptions vo;
        vo.sampling = stored_sampling(j);
        append(r, verify_controller(controller_from_json(j), vo));
    }
    print_report(out, r);
    if (!o.out.empty()) write_json(prepare_dir(o.out) / "verification.json", to_json(r));
    return Success;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    const ScenarioConfig c = resolve_config(o);
    const Designs d = designs_for(c, o);
    const DisturbanceScenario s = c.scenario();
    const OutputFeedbackDesign fb = assemble(d.observer, d.controller, c.L, c.effective_form());
    const OutputFeedbackRun run =
        simulate_output_feedback(fb, s, c.initial_state(), c.integrator, c.frame, c.xhat0, std::nullopt);
    const fs::path dir = prepare_dir(c.out_dir);
    {
        std::ostringstream csv;
        write_trace_csv(run.trace, csv);
        write_file_atomic(dir / "trace.csv", csv.str());
    }
    write_json(dir / "trace.json", to_json(run.trace));
    const DegreePair& dg = c.degrees;
    nlohmann::json summary = {
        {"L", c.L},
        {"frame", c.frame == SimulationFrame::Raw ? "raw" : "rescaled"},
        {"blowup", run.blowup},
        {"final_norm", run.final_norm},
        {"convergence_time", run.convergence_time ? nlohmann::json(*run.convergence_time) : nlohmann::json(nullptr)},
        {"finite_time_expected", dg.d0 < 0.0 && 0.0 < dg.d_inf && !s.disturbed()},
        {"clamped", run.trace.has_event("clamped")},
        {"events", to_json(run.trace)["events"]}};
    if (s.disturbed() && c.kind != ScenarioKind::FeedforwardExample) {
        summary["disturbance_audit"] =
            disturbance_audit(run.trace, dg, c.growth.c0, c.growth.c_inf, c.effective_form());
    } else {
        summary["disturbance_audit"] = nullptr;
    }
    write_json(dir / "summary.json", summary);
    out << "simulation: " << (run.blowup ? "truncated (blowup)" : "completed") << ", final norm " << run.final_norm;
    if (run.convergence_time) out << ", converged at t = " << *run.convergence_time;
    out << "\nwrote " << (dir / "trace.csv").string() << "\n";
    return Success;
}

void write_frontier(const fs::path& dir, const SweepReport& r) {
    write_json(dir / "frontier.json", to_json(r));
    std::ostringstream csv;
    csv << "L,pass,failures,worst_time\n";
    char line[128];
    for (const auto& rung : r.rungs) {
        std::snprintf(line, sizeof line, "%.17g,%d,%zu,%.17g\n", rung.L, rung.pass ? 1 : 0, rung.failures,
                      rung.worst_time);
        csv << line;
    }
    write_file_atomic(dir / "frontier.csv", csv.str());
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
    const ScenarioConfig c = resolve_config(o);
    const FeedbackForm form = c.effective_form();
    if (!form_admissible(form, c.degrees))
        throw PreconditionError(std::string(to_string(form)) + " form does not match the degree ordering");
    const Designs d = synthesize(c);
    const DisturbanceScenario s = c.scenario();
    const fs::path dir = prepare_dir(c.out_dir);
    SweepReport report;
    try {
        const OutputFeedbackDesign fb = form == FeedbackForm::Feedback
                                            ? select_L_feedback(d.observer, d.controller, s, c.sweep, &report)
                                            : select_L_feedforward(d.observer, d.controller, s, c.sweep, &report);
        write_frontier(dir, report);
        out << to_string(form) << " sweep: selected L = " << fb.L;
        if (report.refined) out << " (bisection bracket " << report.refined->first << ", " << report.refined->second << ")";
        out << ", interval " << (report.interval_consistent ? "consistent" : "NOT consistent") << "\n";
        return Success;
    } catch (const SelectionFailure& e) {
        write_frontier(dir, e.report());
        err << "sweep: " << e.what() << "\n";
        return SelectionError;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bi-limit homogeneous observer and controller synthesis for integrator chains"};
    app.require_subcommand(1);
    app.footer(config_reference());
    Options o;

    auto* design = app.add_subcommand("design", "synthesize observer and controller, write design JSON");
    auto* simulate = app.add_subcommand("simulate", "simulate the output feedback loop, write traces and a summary");
    auto* sweep = app.add_subcommand("sweep", "search the scaling L on a geometric grid, write the frontier");
    auto* verify = app.add_subcommand("verify", "re-check homogeneity, decrease and seam conditions of designs");

    for (auto* sub : {design, simulate, sweep}) {
        sub->add_option("--config", o.config, "config file (JSON)")->required();
        sub->add_option("--out", o.out, "output directory (overrides output.dir)");
        sub->add_option("--seed", o.seed, "sampling and initial-condition seed");
        sub->add_option("--mode", o.mode, "saturation form: paper or simplified");
    }
    sweep->add_flag("--refine-frontier", o.refine, "bisect between the last failing and first passing rung");
    for (auto* sub : {simulate, verify}) {
        sub->add_option("--observer", o.observer_path, "observer design JSON");
        sub->add_option("--controller", o.controller_path, "controller design JSON");
    }
    verify->add_option("--out", o.out, "directory for verification.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Success;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return ValidationError;
    }

    try {
        if (design->parsed()) return cmd_design(o, out);
        if (simulate->parsed()) return cmd_simulate(o, out);
        if (sweep->parsed()) return cmd_sweep(o, out, err);
        if (verify->parsed()) return cmd_verify(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ValidationError;
    }
    return ValidationError;
}

}  // namespace bilimit::cli
