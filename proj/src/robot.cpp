#include "snapbeam/robot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "snapbeam/errors.hpp"
#include "snapbeam/io.hpp"
#include "snapbeam/scenario.hpp"

namespace snapbeam {

namespace {

constexpr double backward_slip_tolerance = 0.01;  // mm
constexpr double divergence_speed = 1e6;          // mm/s

Polyline fin_polyline(Vec2 tip, double rotation, const RobotSpec& spec) {
    const Vec2 dir = rotate({0.0, -1.0}, rotation);
    Polyline fin;
    fin.reserve(spec.fin_segments + 1);
    for (int i = 0; i <= spec.fin_segments; ++i) fin.push_back(tip + (spec.fin_length * i / spec.fin_segments) * dir);
    return fin;
}

}  // namespace

void RobotSpec::validate() const {
    const double positive[] = {body_length, body_drag_coeff, body_frontal_area, fin_depth, fin_length, fin_thickness,
                               fluid_density, normal_drag_coeff, cycle_time, pull_displacement};
    for (double v : positive)
        if (!(v > 0.0) || !std::isfinite(v)) throw SpecificationError("robot parameters must be positive and finite");
    if (!(pull_fraction > 0.0 && pull_fraction < 1.0)) throw SpecificationError("pull_fraction must lie in (0, 1)");
    if (cycles < 1) throw SpecificationError("cycles must be >= 1");
    if (steps_per_cycle < 2000) throw SpecificationError("steps_per_cycle must be >= 2000");
    if (fin_segments < 1) throw SpecificationError("fin_segments must be >= 1");
    if (forward_sign != 1 && forward_sign != -1) throw SpecificationError("forward_sign must be +1 or -1");
    if (!(snap_duration >= 0.0)) throw SpecificationError("snap_duration must be >= 0");
    if (snap_duration * 4.0 > cycle_time * std::min(pull_fraction, 1.0 - pull_fraction))
        throw SpecificationError("snap_duration must be well below the pull and release durations");
}

std::vector<FinShape> fin_shape_sequence(const EquilibriumPath& path, const RobotSpec& spec,
                                         const ReducedSystem* system) {
    spec.validate();
    const EmulatedCurve curve = emulate_displacement_control(path, spec.pull_displacement, true);
    const double pull_time = spec.pull_fraction * spec.cycle_time;
    const double release_time = spec.cycle_time - pull_time;

    std::vector<FinShape> shapes;
    for (Phase phase : {Phase::loading, Phase::unloading}) {
        const auto samples = curve.phase(phase);
        const double t0 = phase == Phase::loading ? 0.0 : pull_time;
        const double t_end = phase == Phase::loading ? pull_time : spec.cycle_time;
        const double span = phase == Phase::loading ? pull_time : release_time;
        // program time of each sample, then warp so each jump lasts snap_duration
        std::vector<double> times;
        for (const auto& s : samples) {
            const double frac = std::clamp(s.control / spec.pull_displacement, 0.0, 1.0);
            times.push_back(t0 + span * (phase == Phase::loading ? frac : 1.0 - frac));
        }
        std::vector<Jump> jumps;
        for (const auto& j : curve.jumps)
            if (j.phase == phase) jumps.push_back(j);
        std::size_t next_jump = 0;
        for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
            const bool jump = samples[i].control == samples[i + 1].control &&
                              samples[i].path_position != samples[i + 1].path_position;
            if (!jump) continue;
            if (next_jump >= jumps.size()) throw SpecificationError("jump samples do not match the jump list");
            const double tj = times[i];
            const double rest = t_end - tj;
            if (rest <= 0.0) throw SpecificationError("snap at the very end of the " + to_string(phase) + " phase");
            // a late snap is capped to half the time left in its phase
            const double wanted =
                spec.snap_duration > 0.0
                    ? spec.snap_duration
                    : energy_limited_snap_duration(fin_polyline(samples[i].tip, samples[i].tip_rotation, spec),
                                                   fin_polyline(samples[i + 1].tip, samples[i + 1].tip_rotation, spec),
                                                   jumps[next_jump].released_energy, spec);
            ++next_jump;
            const double duration = std::min(wanted, 0.5 * rest);
            const double scale = (rest - duration) / rest;
            for (std::size_t m = i + 1; m < samples.size(); ++m)
                times[m] = tj + duration + (times[m] - tj) * scale;
        }
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            FinShape shape;
            shape.time = times[i];
            shape.pull = s.control;
            shape.phase = phase;
            shape.tip = s.tip;
            shape.tip_rotation = s.tip_rotation;
            shape.fin = fin_polyline(s.tip, s.tip_rotation, spec);
            if (system) {
                const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s.path_position),
                                                            path.points.size() - 2);
                const double t = s.path_position - static_cast<double>(k);
                const auto& a = path.points[k];
                const auto& b = path.points[k + 1];
                const Eigen::VectorXd q = (1.0 - t) * a.q + t * b.q;
                const double lambda = (1.0 - t) * a.control + t * b.control;
                for (int n = 0; n < system->mesh().node_count(); ++n)
                    shape.structure.push_back(system->position(n, q, lambda));
            }
            shapes.push_back(std::move(shape));
        }
    }
    return shapes;
}

std::vector<FinShape> fin_shape_sequence(RobotMode mode, const RobotSpec& spec) {
    spec.validate();
    ScenarioModel model = resolve_model(mode == RobotMode::fix ? "fixed-pinned(fix)" : "fixed-pinned(pin)");
    ReducedSystem system(model.mesh, model.constraints);
    TraceOptions options;
    options.stroke = spec.pull_displacement;
    options.probe_node = model.probe_node;
    const EquilibriumPath path = arc_length_trace(system, model.solver, options);
    if (path.status != TraceStatus::complete)
        throw SpecificationError("structural path for " + model.label + " not traced up to the pull displacement: " +
                                 path.message);
    return fin_shape_sequence(path, spec, &system);
}

double energy_limited_snap_duration(const Polyline& a, const Polyline& b, double released_energy,
                                    const RobotSpec& spec) {
    if (a.size() != b.size() || a.size() < 2) throw SpecificationError("fin shapes must have matching segment counts");
    // drag work of a uniform sweep over time T is sum(k |dn|^3) / T^2
    double k = 0.0;
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
        const Vec2 chord = 0.5 * ((a[j + 1] - a[j]) + (b[j + 1] - b[j]));
        const double len = norm(chord);
        if (len == 0.0) continue;
        const Vec2 normal{-chord.y / len, chord.x / len};
        const double dn = std::abs(dot(0.5 * ((b[j] + b[j + 1]) - (a[j] + a[j + 1])), normal));
        k += 0.5 * spec.fluid_density * spec.normal_drag_coeff * spec.fin_depth * len * dn * dn * dn;
    }
    if (!(released_energy > 0.0)) return min_snap_duration;
    return std::max(min_snap_duration, std::sqrt(k / released_energy));
}

double fin_thrust(const Polyline& a, const Polyline& b, double dt, double body_velocity, const RobotSpec& spec) {
    if (a.size() != b.size() || a.size() < 2) throw SpecificationError("fin shapes must have matching segment counts");
    const Vec2 forward{static_cast<double>(spec.forward_sign), 0.0};
    double thrust = 0.0;
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
        const Vec2 mid_a = 0.5 * (a[j] + a[j + 1]);
        const Vec2 mid_b = 0.5 * (b[j] + b[j + 1]);
        const Vec2 chord = 0.5 * ((a[j + 1] - a[j]) + (b[j + 1] - b[j]));
        const double len = norm(chord);
        if (len == 0.0) continue;
        const Vec2 normal{-chord.y / len, chord.x / len};
        const Vec2 velocity = (1.0 / dt) * (mid_b - mid_a) + body_velocity * forward;
        const double vn = dot(velocity, normal);
        const double force = -0.5 * spec.fluid_density * spec.normal_drag_coeff * spec.fin_depth * len * std::abs(vn) * vn;
        // the mirrored fin doubles the axial component and cancels the lateral one
        thrust += 2.0 * force * dot(normal, forward);
    }
    return thrust;
}

namespace {

// Tip state at time t within one cycle, linear between shapes.
class ShapeClock {
public:
    explicit ShapeClock(const std::vector<FinShape>& shapes) : s_(shapes) {
        if (s_.size() < 2) throw SpecificationError("fin shape sequence needs at least two shapes");
        for (std::size_t i = 1; i < s_.size(); ++i)
            if (s_[i].time < s_[i - 1].time) throw SpecificationError("fin shape times must be nondecreasing");
    }

    std::pair<Vec2, double> at(double t) {
        if (t <= s_.front().time) return {s_.front().tip, s_.front().tip_rotation};
        if (t >= s_.back().time) return {s_.back().tip, s_.back().tip_rotation};
        if (t < s_[k_].time) k_ = 0;
        while (k_ + 1 < s_.size() && s_[k_ + 1].time <= t) ++k_;
        const auto& a = s_[k_];
        const auto& b = s_[std::min(k_ + 1, s_.size() - 1)];
        const double span = b.time - a.time;
        const double u = span > 0.0 ? (t - a.time) / span : 1.0;
        return {a.tip + u * (b.tip - a.tip), a.tip_rotation + u * (b.tip_rotation - a.tip_rotation)};
    }

    /// First shape time strictly after t (infinity past the last shape).
    double next_break(double t) const {
        const auto it = std::upper_bound(s_.begin(), s_.end(), t, [](double v, const FinShape& f) { return v < f.time; });
        return it == s_.end() ? std::numeric_limits<double>::infinity() : it->time;
    }

private:
    const std::vector<FinShape>& s_;
    std::size_t k_{0};
};

// Mean thrust over [t0, t1], split where the shape velocity changes.
double step_thrust(ShapeClock& clock, double t0, double t1, double body_velocity, const RobotSpec& spec) {
    double impulse = 0.0;
    double a = t0;
    while (a < t1) {
        const double b = std::min(t1, clock.next_break(a));
        const auto [tip_a, rot_a] = clock.at(a);
        const auto [tip_b, rot_b] = clock.at(b);
        impulse += (b - a) * fin_thrust(fin_polyline(tip_a, rot_a, spec), fin_polyline(tip_b, rot_b, spec), b - a,
                                        body_velocity, spec);
        a = b;
    }
    return impulse / (t1 - t0);
}

}  // namespace

CycleResult simulate_swim(const RobotSpec& spec, const std::vector<FinShape>& cycle) {
    spec.validate();
    ShapeClock clock(cycle);
    const double dt = spec.cycle_time / spec.steps_per_cycle;
    const double mass = spec.body_mass();
    const double drag = 0.5 * spec.fluid_density * spec.body_drag_coeff * spec.body_frontal_area;

    CycleResult r;
    r.mode = spec.mode;
    double x = 0.0, v = 0.0;
    r.time_series.push_back({0.0, 0.0, 0.0, 0.0});
    for (int c = 0; c < spec.cycles; ++c) {
        const double start = x;
        double peak = x, slip = 0.0;
        for (int step = 0; step < spec.steps_per_cycle; ++step) {
            const double t_local = step * dt;
            const double thrust = step_thrust(clock, t_local, t_local + dt, v, spec);
            v += dt * (thrust - drag * std::abs(v) * v) / mass;
            x += dt * v;
            if (c == 0 && x < 0.0) {
                x = 0.0;
                v = std::max(v, 0.0);
            }
            if (!std::isfinite(v) || std::abs(v) > divergence_speed) {
                std::ostringstream msg;
                msg << "body velocity diverged at t = " << (c * spec.cycle_time + t_local + dt)
                    << " s; increase steps_per_cycle";
                throw IntegrationError(msg.str());
            }
            peak = std::max(peak, x);
            slip = std::max(slip, peak - x);
            r.time_series.push_back({(c * spec.steps_per_cycle + step + 1) * dt, x, v, thrust});
        }
        r.per_cycle_displacement.push_back(x - start);
        r.backward_slip.push_back(slip);
        r.backward_segment_present.push_back(slip > backward_slip_tolerance);
    }
    double sum = 0.0;
    for (double d : r.per_cycle_displacement) sum += d;
    r.mean_cycle_displacement = sum / spec.cycles;
    return r;
}

CycleResult simulate_swim(const RobotSpec& spec) { return simulate_swim(spec, fin_shape_sequence(spec.mode, spec)); }

std::string to_string(RobotMode m) { return m == RobotMode::fix ? "fix" : "pin"; }

RobotMode robot_mode_from_string(const std::string& s) {
    if (s == "fix") return RobotMode::fix;
    if (s == "pin") return RobotMode::pin;
    throw SpecificationError("unknown robot mode '" + s + "' (expected fix or pin)");
}

std::string swim_csv(const CycleResult& result) {
    std::ostringstream out;
    out << "t_s,position_mm,velocity_mm_s,thrust_N\n";
    for (const auto& s : result.time_series)
        out << fmt_num(s.t, 9) << ',' << fmt_num(s.position, 9) << ',' << fmt_num(s.velocity, 9) << ','
            << fmt_num(s.thrust, 9) << '\n';
    return out.str();
}

nlohmann::json to_json(const CycleResult& result) {
    nlohmann::json backward = nlohmann::json::array();
    for (bool b : result.backward_segment_present) backward.push_back(b);
    return {{"mode", to_string(result.mode)},
            {"per_cycle_displacement_mm", result.per_cycle_displacement},
            {"backward_slip_mm", result.backward_slip},
            {"backward_segment_present", backward},
            {"mean_cycle_displacement_mm", result.mean_cycle_displacement}};
}

void to_json(nlohmann::json& j, const RobotSpec& s) {
    j = {{"body_length", s.body_length},
         {"body_drag_coeff", s.body_drag_coeff},
         {"body_frontal_area", s.body_frontal_area},
         {"fin_depth", s.fin_depth},
         {"fin_length", s.fin_length},
         {"fin_thickness", s.fin_thickness},
         {"fluid_density", s.fluid_density},
         {"normal_drag_coeff", s.normal_drag_coeff},
         {"cycle_time", s.cycle_time},
         {"pull_displacement", s.pull_displacement},
         {"pull_fraction", s.pull_fraction},
         {"mode", to_string(s.mode)},
         {"cycles", s.cycles},
         {"steps_per_cycle", s.steps_per_cycle},
         {"snap_duration", s.snap_duration},
         {"forward_sign", s.forward_sign},
         {"fin_segments", s.fin_segments}};
}

RobotSpec robot_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SpecificationError("robot config must be a JSON object");
    RobotSpec s;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "body_length") s.body_length = value.get<double>();
            else if (key == "body_drag_coeff") s.body_drag_coeff = value.get<double>();
            else if (key == "body_frontal_area") s.body_frontal_area = value.get<double>();
            else if (key == "fin_depth") s.fin_depth = value.get<double>();
            else if (key == "fin_length") s.fin_length = value.get<double>();
            else if (key == "fin_thickness") s.fin_thickness = value.get<double>();
            else if (key == "fluid_density") s.fluid_density = value.get<double>();
            else if (key == "normal_drag_coeff") s.normal_drag_coeff = value.get<double>();
            else if (key == "cycle_time") s.cycle_time = value.get<double>();
            else if (key == "pull_displacement") s.pull_displacement = value.get<double>();
            else if (key == "pull_fraction") s.pull_fraction = value.get<double>();
            else if (key == "mode") s.mode = robot_mode_from_string(value.get<std::string>());
            else if (key == "cycles") s.cycles = value.get<int>();
            else if (key == "steps_per_cycle") s.steps_per_cycle = value.get<int>();
            else if (key == "snap_duration") s.snap_duration = value.get<double>();
            else if (key == "forward_sign") s.forward_sign = value.get<int>();
            else if (key == "fin_segments") s.fin_segments = value.get<int>();
            else throw SpecificationError("unknown robot key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SpecificationError(std::string("bad robot config: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace snapbeam
