#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snapbeam/analysis.hpp"
#include "snapbeam/errors.hpp"
#include "snapbeam/io.hpp"
#include "snapbeam/oracles.hpp"
#include "snapbeam/robot.hpp"
#include "snapbeam/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snapbeam;

namespace {

enum ExitCode { exit_ok = 0, exit_failure = 1, exit_partial = 2, exit_config = 3 };

struct Overrides {
    std::optional<double> stroke;
    std::optional<double> element_length;
    std::optional<double> youngs_modulus;
};

struct JobResult {
    int code{exit_ok};
    std::string text;
};

json read_json_file(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw SpecificationError(std::string("cannot read config: ") + e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw SpecificationError("cannot parse " + path.string() + ": " + e.what());
    }
}

// Fully resolved, reloadable config for a label or a config file.
json resolve_config(const std::string& label, const std::string& config_path, const Overrides& o) {
    json j;
    if (!config_path.empty()) j = read_json_file(config_path);
    else if (is_truss_label(label)) j = {{"label", "vonmises-truss"}, {"truss", VonMisesTruss{}}};
    else if (auto s = find_builtin(label)) j = *s;
    else resolve_model(label);  // throws with the list of known labels

    if (is_truss_label(j.value("label", std::string()))) {
        VonMisesTruss t = truss_from_json(j.value("truss", json::object()));
        if (o.stroke) t.stroke = *o.stroke;
        if (o.youngs_modulus) t.youngs_modulus = *o.youngs_modulus;
        if (o.element_length) throw SpecificationError("--elem-len does not apply to the truss benchmark");
        json out = {{"label", "vonmises-truss"}, {"truss", t}};
        if (j.contains("solver")) out["solver"] = j.at("solver");
        model_from_config(out);  // validates
        return out;
    }
    if (o.stroke) j["loading"]["stroke"] = *o.stroke;
    if (o.element_length) j["mesh"]["element_length"] = *o.element_length;
    if (o.youngs_modulus) j["mesh"]["youngs_modulus"] = *o.youngs_modulus;
    return json(scenario_from_json(j));
}

// File stem for a label: fixed-pinned(fix) -> fixed-pinned_fix, fixed-fixed(-4) -> fixed-fixed_m4.
std::string slug(const std::string& label) {
    std::string out;
    for (std::size_t i = 0; i < label.size(); ++i) {
        const char c = label[i];
        if (c == '(') {
            out += '_';
            if (i + 1 < label.size() && (label[i + 1] == '-' || label[i + 1] == '+')) {
                out += label[i + 1] == '-' ? 'm' : 'p';
                ++i;
            }
        } else if (c == ')') {
            continue;
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
            out += c;
        } else {
            out += '_';
        }
    }
    return out;
}

json header(const std::string& command, const json& config) {
    return {{"tool_version", std::string(tool_version)}, {"command", command}, {"config", config}};
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string num(double v, int precision = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

int worst(const std::vector<int>& codes) {
    for (int c : {exit_config, exit_failure, exit_partial})
        if (std::find(codes.begin(), codes.end(), c) != codes.end()) return c;
    return exit_ok;
}

// Run jobs concurrently, report in submission order.
int run_jobs(const std::vector<std::function<JobResult()>>& jobs) {
    std::vector<std::future<JobResult>> futures;
    for (const auto& job : jobs)
        futures.push_back(std::async(jobs.size() > 1 ? std::launch::async : std::launch::deferred, job));
    std::vector<int> codes;
    for (auto& f : futures) {
        const JobResult r = f.get();
        (r.code == exit_ok ? std::cout : std::cerr) << r.text;
        codes.push_back(r.code);
    }
    return worst(codes);
}

template <class F>
JobResult guarded(const std::string& label, F&& body) {
    try {
        return body();
    } catch (const SpecificationError& e) {
        return {exit_config, label + ": configuration error: " + e.what() + "\n"};
    } catch (const GeometryInfeasible& e) {
        return {exit_config, label + ": infeasible geometry: " + e.what() + "\n"};
    } catch (const Error& e) {
        return {exit_failure, label + ": " + e.what() + "\n"};
    }
}

struct Target {
    std::string label;
    json config;
};

std::vector<Target> targets(std::vector<std::string> labels, const std::string& config_path, const Overrides& o) {
    std::vector<Target> out;
    if (!config_path.empty()) {
        json c = resolve_config("", config_path, o);
        out.push_back({c.at("label").get<std::string>(), c});
    }
    if (std::find(labels.begin(), labels.end(), "all") != labels.end()) labels = builtin_labels();
    for (const auto& l : labels) {
        json c = resolve_config(l, "", o);
        out.push_back({c.at("label").get<std::string>(), c});
    }
    if (out.empty()) throw SpecificationError("no scenario given (use a label, --scenario or --config)");
    return out;
}

JobResult trace_job(const Target& t, const fs::path& out_dir) {
    const ScenarioModel model = model_from_config(t.config);
    const ReducedSystem system(model.mesh, model.constraints);
    TraceOptions options;
    options.stroke = model.stroke;
    options.probe_node = model.probe_node;
    const EquilibriumPath path = arc_length_trace(system, model.solver, options);
    const bool partial = path.status != TraceStatus::complete;

    const std::string stem = slug(t.label);
    json summary = header("trace", t.config);
    summary["label"] = t.label;
    summary["partial"] = partial;
    summary.update(path_summary_json(path));
    write_file_atomic(out_dir / (stem + ".path.csv"), path_csv(path));
    write_json(out_dir / (stem + ".path.json"), summary);

    double reach = 0.0;
    for (const auto& p : path.points) reach = std::max(reach, p.control);
    std::ostringstream s;
    s << t.label << ": " << to_string(path.status) << ", " << path.points.size() << " points, "
      << path.count(FoldKind::displacement_limit) << " displacement_limit and " << path.count(FoldKind::force_limit)
      << " force_limit folds, control reached " << num(reach) << " mm";
    if (partial) s << " (partial: " << path.message << ")";
    s << "\n";
    return {partial ? exit_partial : exit_ok, s.str()};
}

JobResult analyze_job(const std::string& label, const fs::path& out_dir) {
    const std::string stem = slug(label);
    const fs::path csv_file = out_dir / (stem + ".path.csv");
    const fs::path json_file = out_dir / (stem + ".path.json");
    for (const auto& f : {csv_file, json_file})
        if (!fs::exists(f)) throw IoError("missing artifact " + f.string() + " (run trace first)");
    json summary;
    try {
        summary = json::parse(read_file(json_file));
    } catch (const json::exception& e) {
        throw IoError("corrupt artifact " + json_file.string() + ": " + e.what());
    }
    EquilibriumPath path;
    try {
        path = read_path_artifacts(read_file(csv_file), summary);
    } catch (const IoError& e) {
        throw IoError("corrupt artifact " + csv_file.string() + ": " + e.what());
    }
    if (!summary.contains("config")) throw IoError("artifact " + json_file.string() + " has no config");
    const json config = summary.at("config");
    const ScenarioModel model = model_from_config(config);
    const ReducedSystem system(model.mesh, model.constraints);
    const auto equilibria = find_free_equilibria(system, path, model.solver);
    const StabilityClass stability = classify_stability(equilibria);

    bool full_cycle = true;
    if (!is_truss_label(label)) full_cycle = scenario_from_json(config).loading.direction != Direction::loading;

    json report = header("analyze", config);
    report["label"] = label;
    report["stability"] = to_string(stability);
    json eq = json::array();
    for (const auto& e : equilibria)
        eq.push_back({{"control_mm", e.control}, {"energy_Nmm", e.energy}, {"stable", e.stable}});
    report["free_equilibria"] = eq;
    report["displacement_limit_folds"] = path.count(FoldKind::displacement_limit);
    report["force_limit_folds"] = path.count(FoldKind::force_limit);

    EmulatedCurve curve;
    try {
        curve = emulate_displacement_control(path, model.stroke, full_cycle);
    } catch (const EmulationIncompleteCurve& e) {
        write_file_atomic(out_dir / (stem + ".curve.csv"), curve_csv(e.partial()));
        report["emulation_error"] = e.what();
        write_json(out_dir / (stem + ".analysis.json"), report);
        return {exit_failure, label + ": emulation incomplete: " + e.what() + "\n"};
    }
    const double fcr = critical_force(curve);
    report["critical_force_N"] = fcr;
    report["jumps"] = jumps_json(curve);
    write_file_atomic(out_dir / (stem + ".curve.csv"), curve_csv(curve));

    std::ostringstream s;
    s << label << ": " << to_string(stability) << ", critical force " << num(fcr) << " N, " << curve.jumps.size()
      << " jumps";
    if (full_cycle) {
        const EnergyReport energy = energy_report(curve, equilibria);
        const TrajectoryPair traj = trajectory_pair(curve, model.stroke);
        report["energy"] = to_json(energy);
        report["trajectory"] = {{"enclosed_area_mm2", traj.enclosed_area},
                                {"threshold_mm2", 0.01 * model.stroke * model.stroke},
                                {"reciprocity", to_string(traj.reciprocity_class)}};
        write_file_atomic(out_dir / (stem + ".trajectory.csv"), trajectory_csv(traj));
        write_file_atomic(out_dir / (stem + ".analysis.svg"), analysis_svg(curve, traj, label));
        s << ", dissipation_ratio " << num(energy.dissipation_ratio, 4) << ", " << to_string(traj.reciprocity_class)
          << " (area " << num(traj.enclosed_area, 2) << " mm^2)";
    }
    write_json(out_dir / (stem + ".analysis.json"), report);
    s << "\n";
    return {exit_ok, s.str()};
}

JobResult robot_job(RobotSpec spec, const fs::path& out_dir) {
    const CycleResult r = simulate_swim(spec);
    const std::string stem = "robot_" + to_string(spec.mode);
    json summary = header("robot", spec);
    summary.update(to_json(r));
    write_file_atomic(out_dir / (stem + ".csv"), swim_csv(r));
    write_json(out_dir / (stem + ".json"), summary);
    std::ostringstream s;
    s << to_string(spec.mode) << " mode: per-cycle displacement";
    for (std::size_t c = 0; c < r.per_cycle_displacement.size(); ++c) {
        s << ' ' << num(r.per_cycle_displacement[c], 2);
        if (r.backward_segment_present[c]) s << "(back " << num(r.backward_slip[c], 2) << ")";
    }
    s << " mm; mean " << num(r.mean_cycle_displacement, 2) << " mm\n";
    return {exit_ok, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiral metabeam snapping structures: geometry, path tracing, analysis and swimmer model"};
    app.set_version_flag("--version", std::string(tool_version));
    app.require_subcommand(1);

    std::string out_dir = "out";
    std::string config_path;
    std::vector<std::string> labels;
    Overrides overrides;
    int cells = 0;
    std::string mode;
    int cycles = 0;

    auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out_dir, "Output directory")->capture_default_str(); };
    auto add_scenario = [&](CLI::App* cmd) {
        cmd->add_option("scenarios", labels, "Scenario labels ('all' for every builtin)");
        cmd->add_option("--scenario", labels, "Scenario label");
        cmd->add_option("--config", config_path, "Scenario config JSON");
    };

    auto* generate = app.add_subcommand("generate", "Build the structure layout and export JSON + SVG");
    generate->add_option("--config", config_path, "Scenario or geometry config JSON");
    generate->add_option("--cells", cells, "Number of unit cells per beam")->check(CLI::PositiveNumber);
    add_out(generate);

    auto* trace = app.add_subcommand("trace", "Trace the equilibrium path of scenarios");
    add_scenario(trace);
    trace->add_option("--stroke", overrides.stroke, "Control stroke (mm)");
    trace->add_option("--elem-len", overrides.element_length, "Element length bound (mm)");
    trace->add_option("--E", overrides.youngs_modulus, "Young's modulus (MPa)");
    add_out(trace);

    auto* analyze = app.add_subcommand("analyze", "Emulate loading cycles from traced paths");
    add_scenario(analyze);
    add_out(analyze);

    auto* robot = app.add_subcommand("robot", "Simulate the swimmer in fix and pin modes");
    robot->add_option("--mode", mode, "Run a single mode")->check(CLI::IsMember({"fix", "pin"}));
    robot->add_option("--cycles", cycles, "Actuation cycles")->check(CLI::PositiveNumber);
    robot->add_option("--config", config_path, "Robot spec JSON");
    add_out(robot);

    auto* verify = app.add_subcommand("verify", "Run the analytic oracle suite");
    verify->add_option("--config", config_path, "Solver settings JSON");
    verify->add_option("--out", out_dir, "Directory for verify.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (!verify->parsed()) fs::create_directories(out_dir);

        if (generate->parsed()) {
            Scenario s = config_path.empty() ? *find_builtin("fixed-fixed") : scenario_from_json(read_json_file(config_path));
            if (cells > 0) {
                Scenario rebuilt = s;
                rebuilt.geometry.metabeam.cell_count = cells;
                rebuilt = make_scenario(s.label, rebuilt.geometry, s.boundary, s.loading);
                rebuilt.mesh = s.mesh;
                rebuilt.solver = s.solver;
                rebuilt.imperfection = s.imperfection;
                s = rebuilt;
            }
            const SnapStructureLayout& layout = s.layout;
            json doc = header("generate", s);
            doc["layout"] = layout;
            write_json(fs::path(out_dir) / "layout.json", doc);
            write_file_atomic(fs::path(out_dir) / "layout.svg", layout_svg(layout));
            Polyline all = layout.left_beam;
            all.insert(all.end(), layout.right_beam.begin(), layout.right_beam.end());
            const Box box = bounding_box(all);
            std::cout << "layout: " << layout.metabeam.cell_count << " cells per beam, inclination "
                      << num(layout.inclination_angle, 1) << " deg, beam length "
                      << num(layout.metabeam.total_length) << " mm\n"
                      << "bounding box: x [" << num(box.lo.x) << ", " << num(box.hi.x) << "] y [" << num(box.lo.y)
                      << ", " << num(box.hi.y) << "] mm\n"
                      << "centerline arc length per beam: " << num(arc_length(layout.left_beam)) << " mm\n"
                      << "wrote " << (fs::path(out_dir) / "layout.json").string() << " and layout.svg\n";
            return exit_ok;
        }

        if (trace->parsed()) {
            std::vector<std::function<JobResult()>> jobs;
            for (const auto& t : targets(labels, config_path, overrides))
                jobs.push_back([t, out_dir] { return guarded(t.label, [&] { return trace_job(t, out_dir); }); });
            return run_jobs(jobs);
        }

        if (analyze->parsed()) {
            std::vector<std::string> names;
            if (!config_path.empty()) names.push_back(read_json_file(config_path).value("label", "custom"));
            if (std::find(labels.begin(), labels.end(), "all") != labels.end()) labels = builtin_labels();
            for (const auto& l : labels) {
                if (is_truss_label(l)) names.push_back("vonmises-truss");
                else if (auto s = find_builtin(l)) names.push_back(s->label);
                else resolve_model(l);
            }
            if (names.empty()) throw SpecificationError("no scenario given (use a label, --scenario or --config)");
            std::vector<std::function<JobResult()>> jobs;
            for (const auto& n : names)
                jobs.push_back([n, out_dir] { return guarded(n, [&] { return analyze_job(n, out_dir); }); });
            return run_jobs(jobs);
        }

        if (robot->parsed()) {
            RobotSpec spec = config_path.empty() ? RobotSpec{} : robot_spec_from_json(read_json_file(config_path));
            if (cycles > 0) spec.cycles = cycles;
            std::vector<RobotMode> modes;
            if (mode.empty()) modes = {RobotMode::fix, RobotMode::pin};
            else modes = {robot_mode_from_string(mode)};
            std::vector<std::function<JobResult()>> jobs;
            for (RobotMode m : modes) {
                RobotSpec s = spec;
                s.mode = m;
                s.validate();
                jobs.push_back([s, out_dir] { return guarded(to_string(s.mode), [&] { return robot_job(s, out_dir); }); });
            }
            const int code = run_jobs(jobs);
            if (code == exit_ok && modes.size() == 2) {
                const auto fix = json::parse(read_file(fs::path(out_dir) / "robot_fix.json"));
                const auto pin = json::parse(read_file(fs::path(out_dir) / "robot_pin.json"));
                const double a = fix.at("mean_cycle_displacement_mm").get<double>();
                const double b = pin.at("mean_cycle_displacement_mm").get<double>();
                json summary = header("robot", spec);
                summary["mean_cycle_displacement_mm"] = {{"fix", a}, {"pin", b}};
                summary["fix_to_pin_ratio"] = b != 0.0 ? json(a / b) : json(nullptr);
                write_json(fs::path(out_dir) / "robot_summary.json", summary);
                std::cout << "fix/pin mean displacement ratio: " << (b != 0.0 ? num(a / b, 2) : "undefined") << "\n";
            }
            return code;
        }

        if (verify->parsed()) {
            SolverSettings settings;
            json solver_doc;
            if (!config_path.empty()) {
                const json j = read_json_file(config_path);
                solver_doc = j.contains("solver") ? j.at("solver") : j;
                json merged = settings;
                merged.update(solver_doc);
                try {
                    settings = merged.get<SolverSettings>();
                } catch (const json::exception& e) {
                    throw SpecificationError(std::string("malformed solver settings: ") + e.what());
                }
            }
            const auto results = run_oracles(settings);
            json report = header("verify", {{"solver", settings}});
            report["oracles"] = json::array();
            bool all = true;
            for (const auto& r : results) {
                std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": measured " << r.measured << ", expected "
                          << r.expected << ", error " << r.error << " (tolerance " << r.tolerance << ")";
                if (!r.detail.empty()) std::cout << " [" << r.detail << "]";
                std::cout << "\n";
                report["oracles"].push_back(to_json(r));
                all = all && r.pass;
            }
            report["pass"] = all;
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_json(fs::path(out_dir) / "verify.json", report);
            }
            return all ? exit_ok : exit_failure;
        }
    } catch (const SpecificationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const GeometryInfeasible& e) {
        std::cerr << "infeasible geometry: " << e.what() << "\n";
        return exit_config;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_ok;
}
