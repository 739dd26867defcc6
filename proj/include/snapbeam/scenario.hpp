#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "snapbeam/assembly.hpp"
#include "snapbeam/continuation.hpp"
#include "snapbeam/geometry.hpp"

namespace snapbeam {

enum class Support { fixed, pinned };

struct BoundaryPair {
    Support left{Support::fixed};
    Support right{Support::fixed};
};

enum class BarMode { rigid_link, vertical_only };
enum class Direction { loading, unloading, full_cycle };

struct LoadingSpec {
    std::optional<double> offset;  ///< signed anchor offset in mm; empty for the center
    double bar_length{80.0};
    BarMode bar_mode{BarMode::rigid_link};
    double stroke{55.0};
    Direction direction{Direction::full_cycle};
};

/// Discretization of a layout into frame elements.
struct MeshOptions {
    double element_length{0.5};  ///< upper bound on element length along the beams
    double kink_angle_deg{30.0}; ///< polyline vertices turning more than this are kept as nodes
    Material material{};
};

/// Geometry inputs a scenario is built from (the layout is derived).
struct GeometrySpec {
    MetabeamSpec metabeam{default_metabeam()};
    double inclination_angle{35.0};
    std::vector<double> anchor_offsets{-4.0, 4.0};
    AssemblyOptions assembly{};
};

struct Scenario {
    std::string label;
    GeometrySpec geometry{};
    SnapStructureLayout layout;
    BoundaryPair boundary{};
    LoadingSpec loading{};
    MeshOptions mesh{};
    SolverSettings solver{};
    /// Lateral shift of the rigid apex block (mm); applied only when symmetric.
    double imperfection{1e-3};

    /// Center-loaded with equal supports: needs the symmetry-breaking imperfection.
    bool symmetric() const;
    double applied_imperfection() const { return symmetric() ? imperfection : 0.0; }
    void validate() const;
};

/// Mesh of a layout. Tags: apex, tip, support_left, support_right, anchor_<k>
/// for the k-th anchor offset. Beam nodes inside the apex block are rigid-linked
/// to the apex node.
BeamMesh build_mesh(const SnapStructureLayout& layout, const MeshOptions& options, double apex_shift = 0.0);

/// fixed: u, v, theta held at the support node; pinned: u, v held.
std::vector<FixedDof> apply_boundary(const BeamMesh& mesh, const BoundaryPair& pair);

/// Control linkage for the loading spec: a two-pin rigid bar or a direct
/// vertical drive at the attachment node.
Control attach_loading(const BeamMesh& mesh, const SnapStructureLayout& layout, const LoadingSpec& loading);

/// Mesh and constraints ready for tracing.
struct ScenarioModel {
    std::string label;
    BeamMesh mesh;
    Constraints constraints;
    int probe_node{-1};
    double stroke{55.0};
    SolverSettings solver{};
    double imperfection{0.0};
};

ScenarioModel instantiate(const Scenario& scenario);

/// Builds the layout from the geometry spec and validates the result.
Scenario make_scenario(std::string label, const GeometrySpec& geometry, const BoundaryPair& boundary,
                       const LoadingSpec& loading);

/// Six offset/boundary configurations plus the two symmetric center cases.
std::vector<Scenario> builtin_scenarios();

/// Shallow two-bar truss (span 2 x 50 mm, rise 5 mm) pushed down at the apex
/// through a short grip bar of the same section; lambda is the grip displacement.
struct VonMisesTruss {
    double half_span{50.0};
    double rise{5.0};
    double youngs_modulus{3500.0};
    double area{20.0};
    double stroke{15.0};
    double grip_length{5.0};  ///< mm; stiff enough that the response has no snap-back
};
ScenarioModel vonmises_truss_model(const VonMisesTruss& truss = {});

/// Builtin label (aliases such as fixed-pinned-fix accepted) or the benchmark
/// "vonmises-truss". Throws SpecificationError for unknown labels.
ScenarioModel resolve_model(const std::string& label);
std::optional<Scenario> find_builtin(const std::string& label);
std::vector<std::string> builtin_labels();

std::string to_string(Support s);
std::string to_string(BarMode m);
std::string to_string(Direction d);

/// True for the truss benchmark label.
bool is_truss_label(const std::string& label);

void to_json(nlohmann::json& j, const Scenario& s);
void to_json(nlohmann::json& j, const VonMisesTruss& t);
/// Truss parameters overriding the defaults.
VonMisesTruss truss_from_json(const nlohmann::json& j);
/// Model from a resolved config: {"label": "vonmises-truss", "truss": {...}}
/// or a scenario document.
ScenarioModel model_from_config(const nlohmann::json& j);
/// Config document {label, geometry, boundary, loading, mesh, solver, imperfection};
/// every section is optional and overrides the defaults.
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace snapbeam
