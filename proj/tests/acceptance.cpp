#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "snapbeam/analysis.hpp"
#include "snapbeam/io.hpp"
#include "snapbeam/oracles.hpp"
#include "snapbeam/robot.hpp"
#include "snapbeam/scenario.hpp"

using namespace snapbeam;
namespace fs = std::filesystem;

namespace {

// Outcome per criterion, filled by the tests and printed after they ran.
struct Verdict {
    bool pass{true};
    std::vector<std::string> lines;
};

std::map<int, Verdict>& verdicts() {
    static std::map<int, Verdict> v;
    return v;
}

// Records a check without asserting on it.
bool note(int criterion, bool pass, const std::string& what) {
    Verdict& v = verdicts()[criterion];
    v.pass = v.pass && pass;
    v.lines.push_back(std::string(pass ? "ok   " : "FAIL ") + what);
    return pass;
}

#define CHECK(criterion, cond, what)                         \
    do {                                                     \
        const std::string msg_ = (what);                     \
        EXPECT_TRUE(note((criterion), (cond), msg_)) << msg_; \
    } while (0)

std::string num(double x, int precision = 6) {
    std::ostringstream o;
    o.precision(precision);
    o << x;
    return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Traced scenario with everything the analysis derives from it.
struct ScenarioRun {
    ScenarioModel model;
    std::unique_ptr<ReducedSystem> system;
    EquilibriumPath path;
    double trace_seconds{0.0};
    EmulatedCurve curve;
    std::vector<FreeEquilibrium> equilibria;
    EnergyReport energy;
    TrajectoryPair trajectory;
    double critical{0.0};
};

std::unique_ptr<ScenarioRun> run_model(ScenarioModel model) {
    auto r = std::make_unique<ScenarioRun>();
    r->model = std::move(model);
    r->system = std::make_unique<ReducedSystem>(r->model.mesh, r->model.constraints);
    TraceOptions o;
    o.stroke = r->model.stroke;
    o.probe_node = r->model.probe_node;
    const auto t0 = std::chrono::steady_clock::now();
    r->path = arc_length_trace(*r->system, r->model.solver, o);
    r->trace_seconds = seconds_since(t0);
    if (r->path.status != TraceStatus::complete)
        throw std::runtime_error(r->model.label + " trace incomplete: " + r->path.message);
    r->curve = emulate_displacement_control(r->path, r->model.stroke, true);
    r->equilibria = find_free_equilibria(*r->system, r->path, r->model.solver);
    r->energy = energy_report(r->curve, r->equilibria);
    r->trajectory = trajectory_pair(r->curve, r->model.stroke);
    r->critical = critical_force(r->curve);
    return r;
}

// Traces are shared across tests of this process.
const ScenarioRun& scenario(const std::string& label, double element_length = 0.0) {
    static std::map<std::string, std::unique_ptr<ScenarioRun>> cache;
    const std::string key = label + "@" + num(element_length);
    auto it = cache.find(key);
    if (it == cache.end()) {
        std::optional<Scenario> found = find_builtin(label);
        if (!found) throw std::runtime_error("no builtin scenario " + label);
        Scenario s = *found;
        if (element_length > 0.0) s.mesh.element_length = element_length;
        it = cache.emplace(key, run_model(instantiate(s))).first;
    }
    return *it->second;
}

const ScenarioRun& truss() {
    static const std::unique_ptr<ScenarioRun> r = run_model(vonmises_truss_model());
    return *r;
}

// Structural path of a fixed-pinned case up to the robot pull displacement.
struct FinPath {
    ScenarioModel model;
    std::unique_ptr<ReducedSystem> system;
    EquilibriumPath path;
};

const FinPath& fin_path(RobotMode mode) {
    static std::map<RobotMode, std::unique_ptr<FinPath>> cache;
    auto it = cache.find(mode);
    if (it == cache.end()) {
        auto f = std::make_unique<FinPath>();
        f->model = resolve_model(mode == RobotMode::fix ? "fixed-pinned(fix)" : "fixed-pinned(pin)");
        f->system = std::make_unique<ReducedSystem>(f->model.mesh, f->model.constraints);
        TraceOptions o;
        o.stroke = RobotSpec{}.pull_displacement;
        o.probe_node = f->model.probe_node;
        f->path = arc_length_trace(*f->system, f->model.solver, o);
        if (f->path.status != TraceStatus::complete) throw std::runtime_error("fin path incomplete: " + f->path.message);
        it = cache.emplace(mode, std::move(f)).first;
    }
    return *it->second;
}

CycleResult swim(RobotMode mode, RobotSpec spec, double* seconds = nullptr) {
    spec.mode = mode;
    const FinPath& f = fin_path(mode);
    const auto t0 = std::chrono::steady_clock::now();
    const CycleResult r = simulate_swim(spec, fin_shape_sequence(f.path, spec, f.system.get()));
    if (seconds) *seconds = seconds_since(t0);
    return r;
}

std::vector<std::string> structure_labels() {
    std::vector<std::string> labels;
    for (const auto& s : builtin_scenarios()) labels.push_back(s.label);
    return labels;
}

double min_force(const EmulatedCurve& c, Phase p) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : c.phase(p)) m = std::min(m, s.force);
    return m;
}

std::size_t jumps_in(const EmulatedCurve& c, Phase p) {
    return std::count_if(c.jumps.begin(), c.jumps.end(), [p](const Jump& j) { return j.phase == p; });
}

double relative_change(double a, double b) { return std::abs(b - a) / std::abs(a); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SNAPBEAM_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Criterion1, BeamOracles) {
    const SolverSettings s{};
    for (const OracleResult& r : {cantilever_oracle(s), pure_bending_oracle(s), euler_buckling_oracle(s)}) {
        CHECK(1, r.pass,
              r.name + ": measured " + num(r.measured) + ", expected " + num(r.expected) + ", error " + num(r.error, 3) +
                  " (tolerance " + num(r.tolerance, 3) + ")");
    }
}

TEST(Criterion1, Runtime) {
    const auto t0 = std::chrono::steady_clock::now();
    euler_buckling_oracle(SolverSettings{});
    const double t = seconds_since(t0);
    CHECK(1, t < 10.0, "Euler buckling oracle runtime " + num(t, 3) + " s (< 10 s)");
}

TEST(Criterion2, TrussSCurve) {
    const ScenarioRun& r = truss();
    CHECK(2, r.path.count(FoldKind::force_limit) == 2,
          "force-limit folds " + std::to_string(r.path.count(FoldKind::force_limit)) + " (expected 2)");
    CHECK(2, r.path.points.back().control >= r.model.stroke,
          "S-curve traced to " + num(r.path.points.back().control) + " mm");
    CHECK(2, r.trace_seconds < 5.0, "trace runtime " + num(r.trace_seconds, 3) + " s (< 5 s)");
}

TEST(Criterion2, LimitLoadAndJumpEnergy) {
    for (const OracleResult& r : {vonmises_limit_oracle(SolverSettings{}), vonmises_jump_oracle(SolverSettings{})}) {
        CHECK(2, r.pass,
              r.name + ": measured " + num(r.measured) + ", expected " + num(r.expected) + ", error " + num(r.error, 3) +
                  " (tolerance " + num(r.tolerance, 3) + ")");
    }
}

TEST(Criterion3, ClassificationMatrix) {
    const ScenarioRun& ff = scenario("fixed-fixed");
    CHECK(3, classify_stability(ff.equilibria) == StabilityClass::monostable,
          "fixed-fixed " + to_string(classify_stability(ff.equilibria)) + " (expected monostable)");
    const double ff_min = std::min(min_force(ff.curve, Phase::loading), min_force(ff.curve, Phase::unloading));
    CHECK(3, ff_min >= 0.0, "fixed-fixed minimum reaction " + num(ff_min) + " N (expected >= 0)");

    const ScenarioRun& pp = scenario("pinned-pinned");
    CHECK(3, classify_stability(pp.equilibria) == StabilityClass::bistable,
          "pinned-pinned " + to_string(classify_stability(pp.equilibria)) + " (expected bistable)");
    const bool second_stable = std::any_of(pp.equilibria.begin() + 1, pp.equilibria.end(),
                                           [](const FreeEquilibrium& e) { return e.stable; });
    CHECK(3, second_stable, "pinned-pinned second stable zero-reaction equilibrium");
    const double pp_load = min_force(pp.curve, Phase::loading), pp_unload = min_force(pp.curve, Phase::unloading);
    CHECK(3, pp_load < 0.0 && pp_unload < 0.0,
          "pinned-pinned negative reaction: loading min " + num(pp_load) + " N, unloading min " + num(pp_unload) + " N");

    const ScenarioRun& pin = scenario("fixed-pinned(pin)");
    CHECK(3, pin.path.count(FoldKind::displacement_limit) == 0,
          "fixed-pinned(pin) displacement-limit folds " + std::to_string(pin.path.count(FoldKind::displacement_limit)));
    CHECK(3, pin.trajectory.reciprocity_class == Reciprocity::reciprocating,
          "fixed-pinned(pin) " + to_string(pin.trajectory.reciprocity_class) + ", area " +
              num(pin.trajectory.enclosed_area) + " mm^2");

    const ScenarioRun& fix = scenario("fixed-pinned(fix)");
    const std::size_t up = jumps_in(fix.curve, Phase::loading), down = jumps_in(fix.curve, Phase::unloading);
    CHECK(3, fix.path.count(FoldKind::displacement_limit) >= 2 && up >= 1 && down >= 1,
          "fixed-pinned(fix) displacement-limit folds " + std::to_string(fix.path.count(FoldKind::displacement_limit)) +
              ", snap-back jumps " + std::to_string(up) + " loading / " + std::to_string(down) + " unloading");
    CHECK(3, fix.trajectory.reciprocity_class == Reciprocity::non_reciprocating,
          "fixed-pinned(fix) " + to_string(fix.trajectory.reciprocity_class) + ", area " +
              num(fix.trajectory.enclosed_area) + " mm^2");

    for (const std::string& l : structure_labels()) {
        const double t = scenario(l).trace_seconds;
        CHECK(3, t < 60.0, l + " trace runtime " + num(t, 3) + " s (< 60 s)");
    }
}

// Reported in the criterion line here and asserted in FixModeAreaDominance.
TEST(Criterion3, AreaDominanceReport) {
    const double fix = scenario("fixed-pinned(fix)").trajectory.enclosed_area;
    for (const std::string& l : structure_labels()) {
        if (l == "fixed-pinned(fix)") continue;
        const double a = scenario(l).trajectory.enclosed_area;
        note(3, fix > 5.0 * a, "area fixed-pinned(fix) " + num(fix) + " vs 5 x " + l + " " + num(5.0 * a) + " mm^2");
    }
}

TEST(Criterion3, FixModeAreaDominance) {
    const double fix = scenario("fixed-pinned(fix)").trajectory.enclosed_area;
    for (const std::string& l : structure_labels()) {
        if (l == "fixed-pinned(fix)") continue;
        const double a = scenario(l).trajectory.enclosed_area;
        EXPECT_GT(fix, 5.0 * a) << l << " encloses " << a << " mm^2";
    }
}

TEST(Criterion4, CriticalForceOrdering) {
    const double ff = scenario("fixed-fixed").critical, pp = scenario("pinned-pinned").critical;
    const double ratio = ff / pp;
    CHECK(4, ff > pp, "critical force fixed-fixed " + num(ff) + " N > pinned-pinned " + num(pp) + " N");
    CHECK(4, ratio >= 1.3 && ratio <= 3.8, "ratio " + num(ratio) + " in [1.3, 3.8]");
}

// Every equilibrium of the -4 mm run is re-solved on the +4 mm model at the same
// control, starting from the nearest +4 mm path point, and compared mirrored.
TEST(Criterion5, MirrorSymmetry) {
    for (const char* base : {"fixed-fixed", "pinned-pinned"}) {
        const ScenarioRun& minus = scenario(std::string(base) + "(-4)");
        const ScenarioRun& plus = scenario(std::string(base) + "(+4)");
        const std::string name = std::string(base) + "(+-4)";
        const auto mirror = [](Vec2 v) { return Vec2{-v.x, v.y}; };
        double df = 0.0, dtip = 0.0, worst_ratio = 0.0;
        std::size_t compared = 0, skipped = 0;
        for (const PathPoint& a : minus.path.points) {
            std::size_t nearest = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < plus.path.points.size(); ++j) {
                const PathPoint& b = plus.path.points[j];
                const double d = std::abs(b.control - a.control) + std::abs(b.reaction - a.reaction) +
                                 norm(mirror(b.probe) - a.probe);
                if (d < best) {
                    best = d;
                    nearest = j;
                }
            }
            try {
                const NewtonResult r =
                    newton_correct(*plus.system, plus.path.points[nearest].q, a.control, plus.model.solver);
                const double reaction = plus.system->assemble(r.q, a.control).reaction;
                const Vec2 tip = plus.system->position(plus.model.probe_node, r.q, a.control);
                const double tol = convergence_tolerance(*plus.system, plus.model.solver, r.q, a.control);
                df = std::max(df, std::abs(reaction - a.reaction));
                worst_ratio = std::max(worst_ratio, std::abs(reaction - a.reaction) / tol);
                dtip = std::max(dtip, norm(mirror(tip) - a.probe));
                ++compared;
            } catch (const Error&) {
                ++skipped;  // fixed-control Newton is singular right at a displacement fold
            }
        }
        const std::string counts = " (" + std::to_string(compared) + " points compared, " + std::to_string(skipped) +
                                   " skipped at folds)";
        CHECK(5, compared > 0 && skipped * 100 <= minus.path.points.size(),
              name + ": " + std::to_string(compared) + " of " + std::to_string(minus.path.points.size()) +
                  " equilibria re-solved on the mirror model");
        CHECK(5, worst_ratio <= 1.0,
              name + " force curves: max reaction difference " + num(df, 3) + " N, " + num(worst_ratio, 3) +
                  " x solver tolerance" + counts);
        CHECK(5, dtip <= 1e-6, name + " tip trajectories mirrored within " + num(dtip, 3) + " mm (<= 1e-6)");
    }
}

TEST(Criterion6, EnergyBookkeeping) {
    std::vector<std::pair<std::string, const ScenarioRun*>> runs{{"vonmises-truss", &truss()}};
    for (const std::string& l : structure_labels()) runs.emplace_back(l, &scenario(l));
    for (const auto& [label, run] : runs) {
        const EnergyReport& e = run->energy;
        const double hysteresis = e.work_in - e.work_returned;
        const double released = e.released_during_loading + e.released_during_unloading;
        if (run->curve.jumps.empty()) {
            CHECK(6, std::abs(e.dissipation_ratio) < 1e-6,
                  label + " fold-free cycle dissipation ratio " + num(e.dissipation_ratio, 3) + " (< 1e-6)");
        } else {
            const double rel = std::abs(hysteresis - released) / released;
            const std::string what = label + " hysteresis " + num(hysteresis) + " vs released " + num(released) +
                                     " N mm, relative " + num(rel, 3) + " (<= 1e-3)";
            if (label == "pinned-pinned") note(6, rel <= 1e-3, what);  // asserted in NearDegenerateJumpClosure
            else CHECK(6, rel <= 1e-3, what);
        }
    }
    const EnergyReport& pp = scenario("pinned-pinned").energy;
    CHECK(6, pp.trapped_at_second_state > 0.0 && pp.loading_release_fraction > 0.0,
          "pinned-pinned trapped " + num(pp.trapped_at_second_state) + " N mm, loading release fraction " +
              num(pp.loading_release_fraction));
}

// The centered pinned-pinned jumps release about 3e-5 N mm, below the resolution of
// the integrated work (force tolerance times traversed control).
TEST(Criterion6, NearDegenerateJumpClosure) {
    const EnergyReport& e = scenario("pinned-pinned").energy;
    const double released = e.released_during_loading + e.released_during_unloading;
    EXPECT_NEAR(e.work_in - e.work_returned, released, 1e-3 * released);
}

TEST(Criterion7, RobotOrdering) {
    for (double body : {0.5, 1.0, 1.5}) {
        for (double fin : {0.5, 1.0, 1.5}) {
            RobotSpec spec;
            spec.body_drag_coeff *= body;
            spec.normal_drag_coeff *= fin;
            double t_fix = 0.0, t_pin = 0.0;
            const CycleResult fix = swim(RobotMode::fix, spec, &t_fix);
            const CycleResult pin = swim(RobotMode::pin, spec, &t_pin);
            const std::string tag = "drag x" + num(body) + " body, x" + num(fin) + " fin: ";
            CHECK(7, fix.mean_cycle_displacement >= 2.0 * pin.mean_cycle_displacement,
                  tag + "fix " + num(fix.mean_cycle_displacement) + " mm/cycle vs pin " +
                      num(pin.mean_cycle_displacement) + " mm/cycle");
            bool backward = true;
            for (std::size_t k = 1; k < pin.backward_segment_present.size(); ++k)
                backward = backward && pin.backward_segment_present[k];
            CHECK(7, backward, tag + "pin-mode backward segment in every cycle after the first");
            double worst = 0.0;
            for (std::size_t k = 0; k < fix.per_cycle_displacement.size(); ++k)
                worst = std::max(worst, fix.backward_slip[k] / fix.per_cycle_displacement[k]);
            CHECK(7, worst < 0.1, tag + "fix-mode backward slip " + num(100.0 * worst, 3) + "% of forward (< 10%)");
            CHECK(7, t_fix < 10.0 && t_pin < 10.0,
                  tag + "5-cycle runtime fix " + num(t_fix, 3) + " s, pin " + num(t_pin, 3) + " s (< 10 s)");
        }
    }
}

TEST(Criterion8, CliArtifactsAreByteIdentical) {
    const fs::path root = fs::temp_directory_path() / "snapbeam_acceptance";
    fs::remove_all(root);
    for (const char* run : {"a", "b"}) {
        const std::string out = " --out " + (root / run).string();
        ASSERT_EQ(run_cli("generate" + out), 0);
        ASSERT_EQ(run_cli("trace vonmises-truss fixed-fixed" + out), 0);
        ASSERT_EQ(run_cli("analyze vonmises-truss fixed-fixed" + out), 0);
        ASSERT_EQ(run_cli("robot --mode fix --cycles 2" + out), 0);
    }
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        const fs::path other = root / "b" / entry.path().filename();
        ++files;
        if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) {
            ++differing;
            ADD_FAILURE() << entry.path().filename() << " differs between runs";
        }
    }
    fs::remove_all(root);
    CHECK(8, files > 0 && differing == 0,
          std::to_string(files) + " CLI artifacts from two runs, " + std::to_string(differing) + " differ");
}

TEST(Criterion8, RobotOutputIsByteIdentical) {
    RobotSpec spec;
    const std::string a = swim_csv(swim(RobotMode::pin, spec));
    const std::string b = swim_csv(swim(RobotMode::pin, spec));
    CHECK(8, a == b, "robot time series identical across repeated runs");
}

TEST(Criterion8, MeshHalving) {
    for (const char* l : {"fixed-fixed", "pinned-pinned", "fixed-pinned(fix)"}) {
        const double coarse = scenario(l).critical, fine = scenario(l, 0.25).critical;
        const double d = relative_change(coarse, fine);
        CHECK(8, d < 0.01,
              std::string(l) + " critical force " + num(coarse) + " -> " + num(fine) + " N at half element length, change " +
                  num(100.0 * d, 3) + "%");
    }
    const double coarse = scenario("fixed-pinned(fix)").trajectory.enclosed_area;
    const double fine = scenario("fixed-pinned(fix)", 0.25).trajectory.enclosed_area;
    const double d = relative_change(coarse, fine);
    CHECK(8, d < 0.01,
          "fixed-pinned(fix) trajectory area " + num(coarse) + " -> " + num(fine) + " mm^2, change " +
              num(100.0 * d, 3) + "%");
}

TEST(Criterion8, RobotStepDoubling) {
    for (RobotMode mode : {RobotMode::fix, RobotMode::pin}) {
        RobotSpec spec;
        const double coarse = swim(mode, spec).mean_cycle_displacement;
        spec.steps_per_cycle *= 2;
        const double fine = swim(mode, spec).mean_cycle_displacement;
        const double d = relative_change(coarse, fine);
        CHECK(8, d < 0.01,
              to_string(mode) + "-mode mean displacement " + num(coarse) + " -> " + num(fine) +
                  " mm at doubled steps, change " + num(100.0 * d, 3) + "%");
    }
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    const int status = RUN_ALL_TESTS();
    const char* names[] = {"",
                           "analytic beam oracles",
                           "von Mises truss continuation",
                           "classification matrix",
                           "critical force ordering",
                           "mirror symmetry",
                           "energy bookkeeping",
                           "robot ordering",
                           "determinism and convergence"};
    std::cout << "\nAcceptance summary\n";
    for (int c = 1; c <= 8; ++c) {
        const auto it = verdicts().find(c);
        if (it == verdicts().end()) {
            std::cout << "C" << c << " SKIP " << names[c] << " (not run)\n";
            continue;
        }
        std::cout << "C" << c << ' ' << (it->second.pass ? "PASS " : "FAIL ") << names[c] << '\n';
        for (const auto& l : it->second.lines) std::cout << "     " << l << '\n';
    }
    return status;
}
