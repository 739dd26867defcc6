#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "snapbeam/continuation.hpp"
#include "snapbeam/errors.hpp"
#include "snapbeam/geometry.hpp"

namespace snapbeam {

enum class Phase { loading, unloading };

struct CurveSample {
    double control{0.0};        ///< displacement, mm
    double force{0.0};          ///< N
    Phase phase{Phase::loading};
    double path_position{0.0};  ///< fractional point index on the source path
    Vec2 tip{};
    double tip_rotation{0.0};
};

/// Dynamic transition between stable branches. Under displacement control the
/// displacement is unchanged; under load control the force is.
struct Jump {
    double control_before{0.0};
    double control_after{0.0};
    double force_before{0.0};
    double force_after{0.0};
    double released_energy{0.0};  ///< N mm
    Phase phase{Phase::loading};
    double path_from{0.0};
    double path_to{0.0};
};

enum class ControlMode { displacement, load };

struct EmulatedCurve {
    ControlMode mode{ControlMode::displacement};
    std::vector<CurveSample> samples;
    std::vector<Jump> jumps;

    std::vector<CurveSample> phase(Phase p) const;
};

/// Raised when a jump finds no stable landing; carries the curve up to that point.
class EmulationIncompleteCurve : public EmulationIncomplete {
public:
    EmulationIncompleteCurve(const std::string& what, EmulatedCurve partial)
        : EmulationIncomplete(what), partial_(std::move(partial)) {}
    const EmulatedCurve& partial() const { return partial_; }

private:
    EmulatedCurve partial_;
};

/// Loading from 0 to `stroke` then (for a full cycle) unloading back to 0,
/// following stable branches and jumping at constant displacement where the
/// branch ends.
EmulatedCurve emulate_displacement_control(const EquilibriumPath& path, double stroke, bool full_cycle = true);

/// Same walk with the force as the driven quantity (0 -> max_force -> 0).
/// Stability additionally needs a positive force-displacement slope.
EmulatedCurve emulate_load_control(const EquilibriumPath& path, double max_force, bool full_cycle = true);

/// First local force maximum of the loading phase (or jump onset); the
/// global maximum when the loading force never turns down.
double critical_force(const EmulatedCurve& curve);

enum class StabilityClass { monostable, bistable, multistable };
StabilityClass classify_stability(const std::vector<FreeEquilibrium>& equilibria);

struct EnergyReport {
    double work_in{0.0};
    double work_returned{0.0};
    double released_during_loading{0.0};
    double released_during_unloading{0.0};
    double trapped_at_second_state{0.0};
    double dissipation_ratio{0.0};
    double loading_release_fraction{0.0};
    std::string model_note;
};

/// Needs a closed full cycle. The trapped energy is the strain energy of the
/// first stable free equilibrium after the rest state.
EnergyReport energy_report(const EmulatedCurve& curve, const std::vector<FreeEquilibrium>& equilibria);

enum class Reciprocity { reciprocating, non_reciprocating };

struct TrajectoryPair {
    Polyline loading_path;
    Polyline unloading_path;
    double enclosed_area{0.0};
    Reciprocity reciprocity_class{Reciprocity::reciprocating};
};

inline constexpr int trajectory_samples = 256;

/// Resamples both traces, closes the loop and classifies by |signed area|.
TrajectoryPair trajectory_pair(const Polyline& loading, const Polyline& unloading, double threshold);

/// Tip traces of an emulated cycle; threshold = fraction * stroke^2.
TrajectoryPair trajectory_pair(const EmulatedCurve& curve, double stroke, double threshold_fraction = 0.01);

/// Equal arc-length resampling to `count` points.
Polyline resample_polyline(const Polyline& line, int count);
double polygon_area(const Polyline& closed);
double hausdorff_distance(const Polyline& a, const Polyline& b);

std::string to_string(Phase p);
std::string to_string(StabilityClass c);
std::string to_string(Reciprocity r);

// persistence
std::string curve_csv(const EmulatedCurve& curve);
std::string trajectory_csv(const TrajectoryPair& pair);
nlohmann::json jumps_json(const EmulatedCurve& curve);
nlohmann::json to_json(const EnergyReport& report);
/// Force-displacement plot next to the tip trajectory.
std::string analysis_svg(const EmulatedCurve& curve, const TrajectoryPair& trajectory, const std::string& title);

}  // namespace snapbeam
