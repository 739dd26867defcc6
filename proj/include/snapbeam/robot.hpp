#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "snapbeam/analysis.hpp"
#include "snapbeam/assembly.hpp"
#include "snapbeam/continuation.hpp"
#include "snapbeam/geometry.hpp"

namespace snapbeam {

/// Tendon routed through the anchor on the fixed side (fix) or the pinned side (pin).
enum class RobotMode { fix, pin };

struct RobotSpec {
    double body_length{200.0};                   ///< mm
    double body_drag_coeff{0.8};
    double body_frontal_area{pi * 15.0 * 15.0};  ///< mm^2, 30 mm equivalent diameter
    double fin_depth{10.0};                      ///< mm, out of plane
    double fin_length{35.0};                     ///< mm, from the tip outward
    double fin_thickness{0.8};                   ///< mm
    double fluid_density{1e-9};                  ///< tonne/mm^3
    double normal_drag_coeff{1.1};
    double cycle_time{0.4};                      ///< s
    double pull_displacement{46.0};              ///< mm
    double pull_fraction{0.5};
    RobotMode mode{RobotMode::fix};
    int cycles{5};
    int steps_per_cycle{4000};
    /// Duration of a snap jump (s); 0 derives it from the released energy.
    double snap_duration{0.0};
    /// +1 when forward is the structure's +x direction, -1 otherwise.
    int forward_sign{1};
    int fin_segments{20};

    /// Neutrally buoyant body: fluid density times body volume.
    double body_mass() const { return fluid_density * body_frontal_area * body_length; }
    void validate() const;
};

/// Structure and fin shape at one instant of the actuation cycle.
struct FinShape {
    double time{0.0};   ///< s from cycle start
    double pull{0.0};   ///< tendon displacement, mm
    Phase phase{Phase::loading};
    Vec2 tip{};
    double tip_rotation{0.0};
    Polyline fin;        ///< root at the tip, extending away from the body
    Polyline structure;  ///< node positions; empty when no model was supplied
};

/// Tendon program (linear pull, linear release) mapped through the emulated
/// displacement-controlled response of `path`. A jump occupies the snap
/// duration and the rest of its phase is compressed to keep the phase length.
std::vector<FinShape> fin_shape_sequence(const EquilibriumPath& path, const RobotSpec& spec,
                                         const ReducedSystem* system = nullptr);

/// Traces fixed-pinned(fix) or fixed-pinned(pin) up to the pull displacement.
std::vector<FinShape> fin_shape_sequence(RobotMode mode, const RobotSpec& spec);

struct TimeSample {
    double t{0.0};
    double position{0.0};  ///< mm, forward positive
    double velocity{0.0};  ///< mm/s
    double thrust{0.0};    ///< N, both fins
};

struct CycleResult {
    RobotMode mode{RobotMode::fix};
    std::vector<TimeSample> time_series;
    std::vector<double> per_cycle_displacement;
    std::vector<double> backward_slip;  ///< largest retreat below the running maximum, per cycle
    std::vector<bool> backward_segment_present;
    double mean_cycle_displacement{0.0};
};

/// Time for a fin sweep from `a` to `b` at uniform speed whose normal drag work
/// equals `released_energy` (N mm); never below `min_snap_duration`.
double energy_limited_snap_duration(const Polyline& a, const Polyline& b, double released_energy,
                                    const RobotSpec& spec);
inline constexpr double min_snap_duration = 1e-3;

/// Net thrust of both fins for a fin moving from `a` to `b` during `dt` while
/// the body moves forward at `body_velocity`.
double fin_thrust(const Polyline& a, const Polyline& b, double dt, double body_velocity, const RobotSpec& spec);

/// Explicit 1-D body dynamics over `spec.cycles` repetitions of one cycle of shapes.
/// The body cannot move behind its start during the first cycle (wall contact).
CycleResult simulate_swim(const RobotSpec& spec, const std::vector<FinShape>& cycle);
CycleResult simulate_swim(const RobotSpec& spec);

std::string to_string(RobotMode m);
RobotMode robot_mode_from_string(const std::string& s);

std::string swim_csv(const CycleResult& result);
nlohmann::json to_json(const CycleResult& result);
void to_json(nlohmann::json& j, const RobotSpec& spec);
/// Overrides on top of the defaults; unknown keys are rejected.
RobotSpec robot_spec_from_json(const nlohmann::json& j);

}  // namespace snapbeam
