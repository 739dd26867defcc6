#include "snapbeam/geometry.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "snapbeam/errors.hpp"
#include "snapbeam/io.hpp"

namespace snapbeam {

double arc_length(const Polyline& line) {
    double s = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) s += norm(line[i] - line[i - 1]);
    return s;
}

Box bounding_box(const Polyline& line) {
    if (line.empty()) throw DomainError("bounding box of an empty polyline");
    Box b{line.front(), line.front()};
    for (const auto& p : line) {
        b.lo.x = std::min(b.lo.x, p.x);
        b.lo.y = std::min(b.lo.y, p.y);
        b.hi.x = std::max(b.hi.x, p.x);
        b.hi.y = std::max(b.hi.y, p.y);
    }
    return b;
}

void SpiralParams::validate() const {
    if (!(inner_radius_a >= 0.0)) throw DomainError("spiral inner radius must be >= 0");
    if (!(growth_rate_b > 0.0)) throw DomainError("spiral growth rate must be > 0");
    if (!(sweep_angle >= 0.0)) throw DomainError("spiral sweep angle must be >= 0");
}

void UnitCellSpec::validate() const {
    if (!(width > 0.0) || !(height > 0.0)) throw DomainError("unit cell width and height must be > 0");
    if (!(coil_thickness > 0.0) || !(coil_thickness < 0.5 * std::min(width, height)))
        throw DomainError("coil thickness must lie in (0, min(width, height)/2)");
    if (samples_per_turn < 4) throw DomainError("samples_per_turn must be >= 4");
    spiral.validate();
}

void MetabeamSpec::validate() const {
    cell.validate();
    if (cell_count < 1) throw DomainError("metabeam needs at least one cell");
    if (!(total_length > 0.0)) throw DomainError("metabeam total length must be > 0");
}

Vec2 archimedean_point(const SpiralParams& params, double theta) {
    params.validate();
    // small slack so callers can sample the closed interval with round-off
    const double slack = 1e-12 * std::max(1.0, params.sweep_angle);
    if (!(theta >= -slack) || !(theta <= params.sweep_angle + slack))
        throw DomainError("theta outside spiral sweep range");
    const double r = params.inner_radius_a + params.growth_rate_b * theta;
    const double phi = params.handedness == Handedness::clockwise ? -theta : theta;
    return {r * std::cos(phi), r * std::sin(phi)};
}

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double& t) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + t * ab));
}

std::vector<double> cumulative_arc(const Polyline& line) {
    std::vector<double> s(line.size(), 0.0);
    for (std::size_t i = 1; i < line.size(); ++i) s[i] = s[i - 1] + norm(line[i] - line[i - 1]);
    return s;
}

// Unscaled, unrotated-to-axis S curve: arm p reversed, then -p.
Polyline raw_double_spiral(const UnitCellSpec& spec) {
    const auto& sp = spec.spiral;
    const double turns = sp.sweep_angle / (2.0 * pi);
    const int n = std::max(1, static_cast<int>(std::ceil(turns * spec.samples_per_turn - 1e-9)));
    Polyline arm(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double theta = k == n ? sp.sweep_angle : sp.sweep_angle * k / n;
        arm[k] = archimedean_point(sp, theta);
    }
    // put the outer end of arm p on the negative x axis so the ports lie on the chain axis
    const Vec2 end = arm.back();
    const double rot = norm(end) > 0.0 ? pi - std::atan2(end.y, end.x) : 0.0;
    for (auto& p : arm) p = rotate(p, rot);

    Polyline curve;
    curve.reserve(2 * arm.size());
    const auto append = [&curve](Vec2 q) {
        if (curve.empty() || norm(q - curve.back()) > 0.0) curve.push_back(q);
    };
    for (auto it = arm.rbegin(); it != arm.rend(); ++it) append(*it);
    for (const auto& p : arm) append({-p.x, -p.y});
    return curve;
}

Polyline scale_to_box(Polyline curve, double width, double height) {
    const Box b = bounding_box(curve);
    const double w0 = b.width(), h0 = b.height();
    if (!(w0 > 0.0)) throw GeometryInfeasible("unit cell curve has zero extent along the chain axis");
    const double sx = width / w0;
    // degenerate (zero-turn) cell is a straight segment; nothing to stretch across
    const double sy = h0 > 1e-12 * w0 ? height / h0 : 1.0;
    for (auto& p : curve) p = {p.x * sx, p.y * sy};
    return curve;
}

}  // namespace

double coil_gap(const Polyline& line) {
    const auto s = cumulative_arc(line);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < line.size(); ++i) {
        for (std::size_t j = 0; j + 1 < line.size(); ++j) {
            if (j == i || j + 1 == i) continue;
            double t = 0.0;
            const double d = point_segment_distance(line[i], line[j], line[j + 1], t);
            const double sj = s[j] + t * (s[j + 1] - s[j]);
            if (std::abs(sj - s[i]) > pi * d) gap = std::min(gap, d);
        }
    }
    return gap;
}

Polyline build_unit_cell(const UnitCellSpec& spec) {
    spec.validate();
    Polyline cell = scale_to_box(raw_double_spiral(spec), spec.width, spec.height);
    const double gap = coil_gap(cell);
    if (gap < spec.coil_thickness) {
        std::ostringstream msg;
        msg << "coil gap " << gap << " mm is below the coil thickness " << spec.coil_thickness
            << " mm; adjacent coil passes would overlap";
        throw GeometryInfeasible(msg.str());
    }
    return cell;
}

double solve_growth_rate(const UnitCellSpec& spec, double clearance) {
    const double target = spec.coil_thickness + clearance;
    const double a = spec.spiral.inner_radius_a;
    if (!(a > 0.0))
        throw DomainError("growth rate cannot be solved with zero inner radius (shape is scale free)");
    auto gap_for = [&](double log_b) {
        UnitCellSpec trial = spec;
        trial.spiral.growth_rate_b = a * std::exp(log_b);
        return coil_gap(scale_to_box(raw_double_spiral(trial), trial.width, trial.height));
    };
    double lo = std::log(1e-3), hi = std::log(1e3);
    if (gap_for(lo) > target || gap_for(hi) < target)
        throw GeometryInfeasible("no growth rate gives the requested coil gap for this sweep");
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap_for(mid) < target ? lo : hi) = mid;
    }
    return a * std::exp(0.5 * (lo + hi));
}

UnitCellSpec default_unit_cell() {
    UnitCellSpec spec;
    spec.spiral.growth_rate_b = solve_growth_rate(spec);
    return spec;
}

MetabeamSpec default_metabeam() {
    MetabeamSpec spec;
    spec.cell = default_unit_cell();
    return spec;
}

BeamCenterline chain_cells(const MetabeamSpec& spec) {
    spec.validate();
    const Polyline cell = build_unit_cell(spec.cell);
    const Vec2 port_in = cell.front();
    const double pitch = cell.back().x - port_in.x;
    const double cells_length = spec.cell_count * pitch;
    if (spec.total_length < cells_length - 1e-9) {
        std::ostringstream msg;
        msg << "metabeam length " << spec.total_length << " mm is shorter than " << spec.cell_count
            << " cells of pitch " << pitch << " mm";
        throw GeometryInfeasible(msg.str());
    }
    const double link = std::max(0.0, (spec.total_length - cells_length) / (spec.cell_count + 1));

    BeamCenterline out;
    out.points.push_back({0.0, 0.0});
    double x = link;
    for (int c = 0; c < spec.cell_count; ++c) {
        const Vec2 shift{x - port_in.x, -port_in.y};
        std::size_t first = out.points.size();
        for (std::size_t k = 0; k < cell.size(); ++k) {
            const Vec2 p = cell[k] + shift;
            if (k == 0 && norm(p - out.points.back()) <= 1e-12) {
                first = out.points.size() - 1;
                continue;
            }
            out.points.push_back(p);
        }
        out.cells.emplace_back(first, out.points.size() - 1);
        x += pitch + link;
    }
    const Vec2 end{spec.total_length, 0.0};
    if (norm(end - out.points.back()) > 1e-12) out.points.push_back(end);
    return out;
}

namespace {

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    double t = 0.0;
    constexpr double touch = 1e-9;
    return point_segment_distance(c, a, b, t) < touch || point_segment_distance(d, a, b, t) < touch ||
           point_segment_distance(a, c, d, t) < touch || point_segment_distance(b, c, d, t) < touch;
}

}  // namespace

SnapStructureLayout assemble_structure(const BeamCenterline& beam, const MetabeamSpec& spec,
                                       double angle_deg, const std::vector<double>& anchor_offsets,
                                       const AssemblyOptions& options) {
    if (beam.points.size() < 2) throw DomainError("beam polyline needs at least two points");
    if (!(angle_deg > 0.0 && angle_deg < 90.0)) throw DomainError("inclination angle must lie in (0, 90) degrees");
    if (!(options.depth > 0.0)) throw DomainError("depth must be > 0");
    for (std::size_t i = 1; i < beam.points.size(); ++i)
        if (!(norm(beam.points[i] - beam.points[i - 1]) > 0.0))
            throw DomainError("beam polyline has repeated points");

    SnapStructureLayout layout;
    layout.metabeam = spec;
    layout.inclination_angle = angle_deg;
    layout.anchor_offsets = anchor_offsets;
    layout.depth = options.depth;

    const double angle = angle_deg * pi / 180.0;
    const Vec2 origin = beam.points.front();
    layout.right_beam.reserve(beam.points.size());
    layout.left_beam.reserve(beam.points.size());
    for (const auto& p : beam.points) {
        const Vec2 q = rotate(p - origin, angle);
        layout.right_beam.push_back(q);
        layout.left_beam.push_back({-q.x, q.y});
    }

    auto& apex = layout.apex_block;
    apex.center = {0.0, 0.0};
    apex.half_width = options.apex_half_width;
    apex.half_height = options.apex_half_height;
    apex.tip_marker = {0.0, -options.apex_half_height};
    for (double off : anchor_offsets) {
        if (!(std::abs(off) < apex.half_width))
            throw DomainError("anchor offset must lie inside the apex block half-width");
        apex.anchors.push_back({off, 0.0});
    }

    // the beams share the apex point, so only coil passes outside the rigid block can clash
    const auto& L = layout.left_beam;
    const auto& R = layout.right_beam;
    for (std::size_t i = 0; i + 1 < L.size(); ++i) {
        if (apex.contains(L[i]) || apex.contains(L[i + 1])) continue;
        for (std::size_t j = 0; j + 1 < R.size(); ++j) {
            if (apex.contains(R[j]) || apex.contains(R[j + 1])) continue;
            if (segments_cross(L[i], L[i + 1], R[j], R[j + 1])) {
                std::ostringstream msg;
                msg << "left and right beams intersect near (" << L[i].x << ", " << L[i].y << ")";
                throw GeometryInfeasible(msg.str());
            }
        }
    }
    return layout;
}

SnapStructureLayout default_layout() {
    const MetabeamSpec spec = default_metabeam();
    return assemble_structure(chain_cells(spec), spec, 35.0, {-4.0, 4.0});
}

SnapStructureLayout mirrored(const SnapStructureLayout& layout) {
    SnapStructureLayout m = layout;
    auto flip = [](Polyline line) {
        for (auto& p : line) p.x = -p.x;
        return line;
    };
    m.left_beam = flip(layout.right_beam);
    m.right_beam = flip(layout.left_beam);
    m.apex_block.center.x = -layout.apex_block.center.x;
    m.apex_block.tip_marker.x = -layout.apex_block.tip_marker.x;
    for (auto& a : m.apex_block.anchors) a.x = -a.x;
    for (auto& o : m.anchor_offsets) o = -o;
    return m;
}

std::string layout_svg(const SnapStructureLayout& layout) {
    if (layout.left_beam.size() < 2 || layout.right_beam.size() < 2)
        throw DomainError("cannot render an empty beam polyline");
    Polyline all = layout.left_beam;
    all.insert(all.end(), layout.right_beam.begin(), layout.right_beam.end());
    const auto& apex = layout.apex_block;
    all.push_back(apex.center + Vec2{-apex.half_width, -apex.half_height});
    all.push_back(apex.center + Vec2{apex.half_width, apex.half_height});
    Box b = bounding_box(all);
    const double stroke = layout.metabeam.cell.coil_thickness;
    const double margin = 2.0 + stroke;
    b.lo = b.lo - Vec2{margin, margin};
    b.hi = b.hi + Vec2{margin, margin};

    // SVG y points down; flip so the drawing keeps the model orientation
    auto P = [](Vec2 p) { return fmt_num(p.x, 4) + "," + fmt_num(-p.y, 4); };
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(b.width(), 4) << "mm\" height=\""
        << fmt_num(b.height(), 4) << "mm\" viewBox=\"" << fmt_num(b.lo.x, 4) << " " << fmt_num(-b.hi.y, 4) << " "
        << fmt_num(b.width(), 4) << " " << fmt_num(b.height(), 4) << "\">\n";
    for (const auto* beam : {&layout.left_beam, &layout.right_beam}) {
        svg << "  <polyline fill=\"none\" stroke=\"#1f4e79\" stroke-linejoin=\"round\" stroke-width=\""
            << fmt_num(stroke, 4) << "\" points=\"";
        for (std::size_t i = 0; i < beam->size(); ++i) svg << (i ? " " : "") << P((*beam)[i]);
        svg << "\"/>\n";
    }
    svg << "  <rect x=\"" << fmt_num(apex.center.x - apex.half_width, 4) << "\" y=\""
        << fmt_num(-(apex.center.y + apex.half_height), 4) << "\" width=\"" << fmt_num(2 * apex.half_width, 4)
        << "\" height=\"" << fmt_num(2 * apex.half_height, 4) << "\" fill=\"#9db4c8\"/>\n";
    for (const auto& a : apex.anchors)
        svg << "  <circle cx=\"" << fmt_num(a.x, 4) << "\" cy=\"" << fmt_num(-a.y, 4)
            << "\" r=\"0.75\" fill=\"white\" stroke=\"black\" stroke-width=\"0.2\"/>\n";
    svg << "  <circle cx=\"" << fmt_num(apex.tip_marker.x, 4) << "\" cy=\"" << fmt_num(-apex.tip_marker.y, 4)
        << "\" r=\"0.5\" fill=\"#c0392b\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

void export_layout_svg(const SnapStructureLayout& layout, const std::filesystem::path& path) {
    write_file_atomic(path, layout_svg(layout));
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Vec2& p) { j = nlohmann::json::array({p.x, p.y}); }
void from_json(const nlohmann::json& j, Vec2& p) {
    p.x = j.at(0).get<double>();
    p.y = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const SpiralParams& s) {
    j = {{"inner_radius_a", s.inner_radius_a},
         {"growth_rate_b", s.growth_rate_b},
         {"sweep_angle", s.sweep_angle},
         {"handedness", s.handedness == Handedness::clockwise ? "clockwise" : "counterclockwise"}};
}
void from_json(const nlohmann::json& j, SpiralParams& s) {
    s.inner_radius_a = j.value("inner_radius_a", s.inner_radius_a);
    s.growth_rate_b = j.value("growth_rate_b", s.growth_rate_b);
    s.sweep_angle = j.value("sweep_angle", s.sweep_angle);
    const std::string h = j.value("handedness", std::string(
        s.handedness == Handedness::clockwise ? "clockwise" : "counterclockwise"));
    if (h != "clockwise" && h != "counterclockwise") throw SpecificationError("unknown handedness: " + h);
    s.handedness = h == "clockwise" ? Handedness::clockwise : Handedness::counterclockwise;
}

void to_json(nlohmann::json& j, const UnitCellSpec& s) {
    j = {{"width", s.width},
         {"height", s.height},
         {"coil_thickness", s.coil_thickness},
         {"spiral", s.spiral},
         {"samples_per_turn", s.samples_per_turn}};
}
void from_json(const nlohmann::json& j, UnitCellSpec& s) {
    s = UnitCellSpec{};
    s.spiral = UnitCellSpec{}.spiral;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.coil_thickness = j.value("coil_thickness", s.coil_thickness);
    if (j.contains("spiral")) s.spiral = j.at("spiral").get<SpiralParams>();
    s.samples_per_turn = j.value("samples_per_turn", s.samples_per_turn);
}

void to_json(nlohmann::json& j, const MetabeamSpec& s) {
    j = {{"cell", s.cell},
         {"cell_count", s.cell_count},
         {"total_length", s.total_length},
         {"connector_policy", "uniform_links"}};
}
void from_json(const nlohmann::json& j, MetabeamSpec& s) {
    s = MetabeamSpec{};
    if (j.contains("cell")) s.cell = j.at("cell").get<UnitCellSpec>();
    s.cell_count = j.value("cell_count", s.cell_count);
    s.total_length = j.value("total_length", s.total_length);
    if (j.value("connector_policy", std::string("uniform_links")) != "uniform_links")
        throw SpecificationError("only uniform_links connector policy is supported");
}

void to_json(nlohmann::json& j, const SnapStructureLayout& layout) {
    const auto& apex = layout.apex_block;
    j = {{"unit_cell", layout.metabeam.cell},
         {"metabeam", layout.metabeam},
         {"structure",
          {{"inclination_angle", layout.inclination_angle},
           {"depth", layout.depth},
           {"anchor_offsets", layout.anchor_offsets},
           {"apex_block",
            {{"center", apex.center},
             {"tip_marker", apex.tip_marker},
             {"anchors", apex.anchors},
             {"half_width", apex.half_width},
             {"half_height", apex.half_height}}}}},
         {"polylines", {{"left_beam", layout.left_beam}, {"right_beam", layout.right_beam}}}};
}

void from_json(const nlohmann::json& j, SnapStructureLayout& layout) {
    layout = SnapStructureLayout{};
    layout.metabeam = j.at("metabeam").get<MetabeamSpec>();
    const auto& st = j.at("structure");
    layout.inclination_angle = st.at("inclination_angle").get<double>();
    layout.depth = st.at("depth").get<double>();
    layout.anchor_offsets = st.at("anchor_offsets").get<std::vector<double>>();
    const auto& ab = st.at("apex_block");
    layout.apex_block.center = ab.at("center").get<Vec2>();
    layout.apex_block.tip_marker = ab.at("tip_marker").get<Vec2>();
    layout.apex_block.anchors = ab.at("anchors").get<std::vector<Vec2>>();
    layout.apex_block.half_width = ab.at("half_width").get<double>();
    layout.apex_block.half_height = ab.at("half_height").get<double>();
    layout.left_beam = j.at("polylines").at("left_beam").get<Polyline>();
    layout.right_beam = j.at("polylines").at("right_beam").get<Polyline>();
}

}  // namespace snapbeam
