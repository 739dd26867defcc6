#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace snapbeam {

inline constexpr double pi = 3.14159265358979323846;

struct Vec2 {
    double x{0.0};
    double y{0.0};

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 rotate(Vec2 a, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
}

using Polyline = std::vector<Vec2>;

double arc_length(const Polyline& line);

/// Axis-aligned bounding box of a point set.
struct Box {
    Vec2 lo;
    Vec2 hi;
    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
};
Box bounding_box(const Polyline& line);

enum class Handedness { clockwise, counterclockwise };

/// Archimedean spiral r(theta) = a + b * theta, theta in [0, sweep_angle].
struct SpiralParams {
    double inner_radius_a{1.0};
    double growth_rate_b{0.5};
    double sweep_angle{3.0 * pi};
    Handedness handedness{Handedness::counterclockwise};

    void validate() const;
};

/// Double-spiral unit cell. The chain axis runs along `width`; the ports sit at
/// (-width/2, 0) and (+width/2, 0) in cell coordinates.
struct UnitCellSpec {
    double width{8.0};
    double height{10.0};
    double coil_thickness{0.8};
    /// Clockwise arms keep the outer coil of the apex-side cell away from the
    /// centerline once the beam is inclined.
    SpiralParams spiral{1.0, 0.5, 3.0 * pi, Handedness::clockwise};
    int samples_per_turn{64};

    void validate() const;
};

enum class ConnectorPolicy { uniform_links };

struct MetabeamSpec {
    UnitCellSpec cell{};
    int cell_count{6};
    double total_length{56.0};
    ConnectorPolicy connector_policy{ConnectorPolicy::uniform_links};

    void validate() const;
};

/// Rigid apex region joining the two beams. Anchors lie on the horizontal
/// crossline through `center`; the tip marker sits at the bottom of the block.
struct ApexBlock {
    Vec2 center{};
    Vec2 tip_marker{};
    std::vector<Vec2> anchors;
    double half_width{6.0};
    double half_height{3.0};

    bool contains(Vec2 p, double tol = 1e-12) const {
        return std::abs(p.x - center.x) <= half_width + tol &&
               std::abs(p.y - center.y) <= half_height + tol;
    }
};

struct SnapStructureLayout {
    MetabeamSpec metabeam{};
    Polyline left_beam;   ///< apex end first, support end last
    Polyline right_beam;  ///< pointwise mirror of left_beam about x = 0
    double inclination_angle{35.0};  ///< degrees from horizontal
    ApexBlock apex_block{};
    std::vector<double> anchor_offsets{-4.0, 4.0};
    double depth{10.0};
};

/// Options for assemble_structure that are not part of the beam itself.
struct AssemblyOptions {
    double depth{10.0};
    double apex_half_width{6.0};
    double apex_half_height{3.0};
};

/// Chained metabeam centerline plus the index range [first, last] of every cell.
struct BeamCenterline {
    Polyline points;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
};

Vec2 archimedean_point(const SpiralParams& params, double theta);

/// Minimum centerline distance between distinct coil passes of a polyline
/// (pairs whose arc separation exceeds pi times their distance). Infinity when
/// the curve never returns near itself.
double coil_gap(const Polyline& line);

Polyline build_unit_cell(const UnitCellSpec& spec);

/// Growth rate b for which the scaled cell has centerline coil gap
/// coil_thickness + clearance, keeping inner radius and sweep fixed.
double solve_growth_rate(const UnitCellSpec& spec, double clearance = 0.2);

/// Default cell: 8 x 10 mm, 0.8 mm coils, 1.5 turns per half-spiral,
/// growth rate solved for 0.2 mm clearance.
UnitCellSpec default_unit_cell();
MetabeamSpec default_metabeam();

BeamCenterline chain_cells(const MetabeamSpec& spec);

SnapStructureLayout assemble_structure(const BeamCenterline& beam, const MetabeamSpec& spec,
                                       double angle_deg, const std::vector<double>& anchor_offsets,
                                       const AssemblyOptions& options = {});

/// Convenience: full default pipeline (cell -> metabeam -> 35 degree structure).
SnapStructureLayout default_layout();

/// Mirror a layout about the vertical centerline (swaps and reflects beams,
/// negates anchor offsets).
SnapStructureLayout mirrored(const SnapStructureLayout& layout);

std::string layout_svg(const SnapStructureLayout& layout);
void export_layout_svg(const SnapStructureLayout& layout, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Vec2& p);
void from_json(const nlohmann::json& j, Vec2& p);
void to_json(nlohmann::json& j, const SpiralParams& s);
void from_json(const nlohmann::json& j, SpiralParams& s);
void to_json(nlohmann::json& j, const UnitCellSpec& s);
void from_json(const nlohmann::json& j, UnitCellSpec& s);
void to_json(nlohmann::json& j, const MetabeamSpec& s);
void from_json(const nlohmann::json& j, MetabeamSpec& s);
void to_json(nlohmann::json& j, const SnapStructureLayout& layout);
void from_json(const nlohmann::json& j, SnapStructureLayout& layout);

}  // namespace snapbeam
