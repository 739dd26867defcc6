#include "snapbeam/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <map>

#include "snapbeam/errors.hpp"
#include "snapbeam/io.hpp"

namespace snapbeam {

bool Scenario::symmetric() const { return !loading.offset && boundary.left == boundary.right; }

void Scenario::validate() const {
    if (label.empty()) throw SpecificationError("scenario label is empty");
    if (!(loading.stroke > 0.0)) throw SpecificationError("stroke must be > 0");
    if (loading.bar_mode == BarMode::rigid_link && !(loading.bar_length > 0.0))
        throw SpecificationError("bar length must be > 0 in rigid_link mode");
    if (loading.offset) {
        if (!(std::abs(*loading.offset) < layout.apex_block.half_width))
            throw SpecificationError("attachment offset must lie inside the apex half-width");
        const auto& offs = layout.anchor_offsets;
        if (std::none_of(offs.begin(), offs.end(), [&](double o) { return std::abs(o - *loading.offset) < 1e-9; }))
            throw SpecificationError("attachment offset " + fmt_num(*loading.offset, 3) + " is not a layout anchor");
    }
    if (!(mesh.element_length > 0.0)) throw SpecificationError("element length must be > 0");
    if (!(mesh.kink_angle_deg > 0.0)) throw SpecificationError("kink angle must be > 0");
    mesh.material.validate();
    solver.validate();
    if (!(imperfection >= 0.0) || !std::isfinite(imperfection))
        throw SpecificationError("imperfection must be a finite, non-negative length");
    if (layout.left_beam.size() < 2 || layout.right_beam.size() < 2)
        throw SpecificationError("scenario layout has no beams");
}

namespace {

// Split at sharp vertices, then place equal-arc nodes on every smooth piece.
Polyline resample(const Polyline& line, double max_len, double kink_deg) {
    const double cos_kink = std::cos(kink_deg * pi / 180.0);
    std::vector<std::size_t> breaks{0};
    for (std::size_t i = 1; i + 1 < line.size(); ++i) {
        const Vec2 a = line[i] - line[i - 1], b = line[i + 1] - line[i];
        if (dot(a, b) < cos_kink * norm(a) * norm(b)) breaks.push_back(i);
    }
    breaks.push_back(line.size() - 1);

    Polyline out{line.front()};
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const std::size_t first = breaks[k], last = breaks[k + 1];
        std::vector<double> s{0.0};
        for (std::size_t i = first + 1; i <= last; ++i) s.push_back(s.back() + norm(line[i] - line[i - 1]));
        const double total = s.back();
        const int n = std::max(1, static_cast<int>(std::ceil(total / max_len - 1e-9)));
        std::size_t seg = 0;
        for (int m = 1; m < n; ++m) {
            const double target = total * m / n;
            while (s[seg + 1] < target) ++seg;
            const double t = (target - s[seg]) / (s[seg + 1] - s[seg]);
            out.push_back(line[first + seg] + t * (line[first + seg + 1] - line[first + seg]));
        }
        out.push_back(line[last]);
    }
    return out;
}

}  // namespace

BeamMesh build_mesh(const SnapStructureLayout& layout, const MeshOptions& options, double apex_shift) {
    if (!(options.element_length > 0.0)) throw SpecificationError("element length must be > 0");
    const auto& apex = layout.apex_block;
    if (layout.left_beam.empty() || layout.right_beam.empty()) throw SpecificationError("layout has no beams");
    if (norm(layout.left_beam.front() - apex.center) > 1e-9 || norm(layout.right_beam.front() - apex.center) > 1e-9)
        throw SpecificationError("beams must start at the apex center");

    BeamMesh mesh;
    mesh.materials.push_back(options.material);
    mesh.sections.push_back(Section::rectangle(layout.metabeam.cell.coil_thickness, layout.depth));
    const Vec2 shift{apex_shift, 0.0};
    mesh.nodes.push_back(apex.center + shift);
    mesh.tags["apex"] = 0;
    std::vector<bool> rigid{true};

    auto add_beam = [&](const Polyline& line, const std::string& support_tag) {
        const Polyline pts = resample(line, options.element_length, options.kink_angle_deg);
        int prev = 0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            const bool inside = apex.contains(pts[i]);
            const int id = mesh.node_count();
            mesh.nodes.push_back(inside ? pts[i] + shift : pts[i]);
            rigid.push_back(inside);
            if (!(rigid[prev] && inside)) mesh.elements.push_back({prev, id, 0, 0, ElementKind::frame});
            prev = id;
        }
        if (rigid[prev]) throw SpecificationError("beam support lies inside the apex block");
        mesh.tags[support_tag] = prev;
    };
    add_beam(layout.left_beam, "support_left");
    add_beam(layout.right_beam, "support_right");

    auto add_block_node = [&](Vec2 p, const std::string& tag) {
        mesh.tags[tag] = mesh.node_count();
        mesh.nodes.push_back(p + shift);
        rigid.push_back(true);
    };
    add_block_node(apex.tip_marker, "tip");
    for (std::size_t k = 0; k < apex.anchors.size(); ++k) add_block_node(apex.anchors[k], "anchor_" + std::to_string(k));

    for (int i = 1; i < mesh.node_count(); ++i)
        if (rigid[i]) mesh.rigid_links.push_back({0, i, mesh.nodes[i] - mesh.nodes[0]});
    mesh.validate();
    return mesh;
}

std::vector<FixedDof> apply_boundary(const BeamMesh& mesh, const BoundaryPair& pair) {
    std::vector<FixedDof> fixed;
    for (const auto& [tag, support] : {std::pair{"support_left", pair.left}, std::pair{"support_right", pair.right}}) {
        const int node = mesh.tag(tag);
        fixed.push_back({node, 0});
        fixed.push_back({node, 1});
        if (support == Support::fixed) fixed.push_back({node, 2});
    }
    return fixed;
}

Control attach_loading(const BeamMesh& mesh, const SnapStructureLayout& layout, const LoadingSpec& loading) {
    if (loading.bar_mode == BarMode::rigid_link && !(loading.bar_length > 0.0))
        throw SpecificationError("bar length must be > 0 in rigid_link mode");
    int node = -1;
    if (!loading.offset) {
        node = mesh.tag("apex");
    } else {
        const auto& offs = layout.anchor_offsets;
        for (std::size_t k = 0; k < offs.size(); ++k)
            if (std::abs(offs[k] - *loading.offset) < 1e-9) node = mesh.tag("anchor_" + std::to_string(k));
        if (node < 0) throw SpecificationError("attachment offset is not one of the layout anchors");
    }
    if (loading.bar_mode == BarMode::rigid_link) return RigidBar{node, loading.bar_length};
    return VerticalAttach{node};
}

ScenarioModel instantiate(const Scenario& scenario) {
    scenario.validate();
    ScenarioModel model;
    model.label = scenario.label;
    model.imperfection = scenario.applied_imperfection();
    model.mesh = build_mesh(scenario.layout, scenario.mesh, model.imperfection);
    model.constraints.fixed = apply_boundary(model.mesh, scenario.boundary);
    model.constraints.control = attach_loading(model.mesh, scenario.layout, scenario.loading);
    model.probe_node = model.mesh.tag("tip");
    model.stroke = scenario.loading.stroke;
    model.solver = scenario.solver;
    return model;
}

namespace {

SnapStructureLayout build_layout(const GeometrySpec& g) {
    g.metabeam.validate();
    return assemble_structure(chain_cells(g.metabeam), g.metabeam, g.inclination_angle, g.anchor_offsets, g.assembly);
}

}  // namespace

Scenario make_scenario(std::string label, const GeometrySpec& geometry, const BoundaryPair& boundary,
                       const LoadingSpec& loading) {
    Scenario s;
    s.label = std::move(label);
    s.geometry = geometry;
    s.layout = build_layout(geometry);
    s.boundary = boundary;
    s.loading = loading;
    s.validate();
    return s;
}

std::vector<Scenario> builtin_scenarios() {
    GeometrySpec g;
    const SnapStructureLayout layout = build_layout(g);
    auto make = [&](std::string label, Support left, Support right, std::optional<double> offset) {
        Scenario s;
        s.label = std::move(label);
        s.geometry = g;
        s.layout = layout;
        s.boundary = {left, right};
        s.loading.offset = offset;
        s.validate();
        return s;
    };
    using enum Support;
    // fixed-pinned: the left support is pinned, so pulling at -4 loads the pinned side
    return {make("fixed-fixed", fixed, fixed, std::nullopt),
            make("pinned-pinned", pinned, pinned, std::nullopt),
            make("fixed-fixed(-4)", fixed, fixed, -4.0),
            make("fixed-fixed(+4)", fixed, fixed, 4.0),
            make("pinned-pinned(-4)", pinned, pinned, -4.0),
            make("pinned-pinned(+4)", pinned, pinned, 4.0),
            make("fixed-pinned(pin)", pinned, fixed, -4.0),
            make("fixed-pinned(fix)", pinned, fixed, 4.0)};
}

std::vector<std::string> builtin_labels() {
    std::vector<std::string> out;
    for (const auto& s : builtin_scenarios()) out.push_back(s.label);
    out.push_back("vonmises-truss");
    return out;
}

namespace {

// "fixed-pinned-fix" / "fixed_pinned(fix)" / "FIXED-FIXED+4" all normalize alike.
std::string normalize_label(const std::string& label) {
    std::string out;
    for (char c : label) {
        if (c == '(' || c == ')' || c == ' ') continue;
        out.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (const char* suffix : {"-fix", "-pin", "--4", "-+4"}) {
        const std::string s(suffix);
        if (out.size() > s.size() && out.compare(out.size() - s.size(), s.size(), s) == 0)
            out.erase(out.size() - s.size(), 1);
    }
    return out;
}

}  // namespace

std::optional<Scenario> find_builtin(const std::string& label) {
    const std::string key = normalize_label(label);
    for (auto& s : builtin_scenarios())
        if (normalize_label(s.label) == key) return s;
    return std::nullopt;
}

ScenarioModel vonmises_truss_model(const VonMisesTruss& truss) {
    if (!(truss.half_span > 0.0) || !(truss.rise > 0.0) || !(truss.area > 0.0) || !(truss.stroke > 0.0) ||
        !(truss.grip_length > 0.0) || !(truss.youngs_modulus > 0.0))
        throw SpecificationError("truss dimensions must be > 0");
    ScenarioModel m;
    m.label = "vonmises-truss";
    BeamMesh& mesh = m.mesh;
    mesh.nodes = {{-truss.half_span, 0.0}, {0.0, truss.rise}, {truss.half_span, 0.0},
                  {0.0, truss.rise + truss.grip_length}};
    mesh.materials.push_back({truss.youngs_modulus, 0.0});
    // square section whose area matches; bending is off for truss elements anyway
    const double side = std::sqrt(truss.area);
    mesh.sections.push_back(Section::rectangle(side, side));
    mesh.elements = {{0, 1, 0, 0, ElementKind::truss},
                     {1, 2, 0, 0, ElementKind::truss},
                     {3, 1, 0, 0, ElementKind::truss}};
    mesh.tags = {{"support_left", 0}, {"apex", 1}, {"tip", 1}, {"support_right", 2}, {"grip", 3}};
    mesh.validate();
    for (int node : {0, 2})
        for (int c = 0; c < 3; ++c) m.constraints.fixed.push_back({node, c});
    m.constraints.fixed.push_back({1, 2});
    m.constraints.fixed.push_back({3, 0});
    m.constraints.fixed.push_back({3, 2});
    // control is the downward grip displacement; the apex is free
    m.constraints.control = PrescribedDof{3, 1, -1.0};
    m.probe_node = 1;
    m.stroke = truss.stroke;
    return m;
}

bool is_truss_label(const std::string& label) { return normalize_label(label) == "vonmises-truss"; }

ScenarioModel resolve_model(const std::string& label) {
    if (is_truss_label(label)) return vonmises_truss_model();
    if (auto s = find_builtin(label)) return instantiate(*s);
    std::string known;
    for (const auto& l : builtin_labels()) known += (known.empty() ? "" : ", ") + l;
    throw SpecificationError("unknown scenario '" + label + "' (known: " + known + ")");
}

std::string to_string(Support s) { return s == Support::fixed ? "fixed" : "pinned"; }
std::string to_string(BarMode m) { return m == BarMode::rigid_link ? "rigid_link" : "vertical_only"; }
std::string to_string(Direction d) {
    switch (d) {
        case Direction::loading: return "loading";
        case Direction::unloading: return "unloading";
        case Direction::full_cycle: return "full_cycle";
    }
    return "unknown";
}

namespace {

template <typename E>
E parse_enum(const std::string& text, std::initializer_list<E> values, const char* what) {
    for (E v : values)
        if (to_string(v) == text) return v;
    throw SpecificationError(std::string("unknown ") + what + " '" + text + "'");
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw SpecificationError(std::string(where) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known) throw SpecificationError("unknown " + std::string(where) + " key '" + item.key() + "'");
    }
}

}  // namespace

void to_json(nlohmann::json& j, const Scenario& s) {
    nlohmann::json attachment = s.loading.offset ? nlohmann::json(*s.loading.offset) : nlohmann::json("center");
    j = {{"label", s.label},
         {"geometry",
          {{"metabeam", s.geometry.metabeam},
           {"inclination_angle", s.geometry.inclination_angle},
           {"anchor_offsets", s.geometry.anchor_offsets},
           {"depth", s.geometry.assembly.depth},
           {"apex_half_width", s.geometry.assembly.apex_half_width},
           {"apex_half_height", s.geometry.assembly.apex_half_height}}},
         {"boundary", {{"left", to_string(s.boundary.left)}, {"right", to_string(s.boundary.right)}}},
         {"loading",
          {{"attachment", attachment},
           {"bar_length", s.loading.bar_length},
           {"bar_mode", to_string(s.loading.bar_mode)},
           {"stroke", s.loading.stroke},
           {"direction", to_string(s.loading.direction)}}},
         {"mesh",
          {{"element_length", s.mesh.element_length},
           {"kink_angle_deg", s.mesh.kink_angle_deg},
           {"youngs_modulus", s.mesh.material.youngs_modulus},
           {"density", s.mesh.material.density}}},
         {"solver", s.solver},
         {"imperfection", s.imperfection}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        reject_unknown(j, {"label", "base", "geometry", "boundary", "loading", "mesh", "solver", "imperfection"},
                       "scenario");
        Scenario s;
        // a config may start from a builtin and override parts of it
        if (j.contains("base")) {
            auto base = find_builtin(j.at("base").get<std::string>());
            if (!base) throw SpecificationError("unknown base scenario '" + j.at("base").get<std::string>() + "'");
            s = *base;
        }
        s.label = j.value("label", s.label.empty() ? std::string("custom") : s.label);
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            reject_unknown(g, {"metabeam", "unit_cell", "inclination_angle", "anchor_offsets", "depth",
                               "apex_half_width", "apex_half_height"}, "geometry");
            if (g.contains("metabeam")) s.geometry.metabeam = g.at("metabeam").get<MetabeamSpec>();
            if (g.contains("unit_cell")) s.geometry.metabeam.cell = g.at("unit_cell").get<UnitCellSpec>();
            s.geometry.inclination_angle = g.value("inclination_angle", s.geometry.inclination_angle);
            if (g.contains("anchor_offsets"))
                s.geometry.anchor_offsets = g.at("anchor_offsets").get<std::vector<double>>();
            s.geometry.assembly.depth = g.value("depth", s.geometry.assembly.depth);
            s.geometry.assembly.apex_half_width = g.value("apex_half_width", s.geometry.assembly.apex_half_width);
            s.geometry.assembly.apex_half_height = g.value("apex_half_height", s.geometry.assembly.apex_half_height);
        }
        s.layout = build_layout(s.geometry);
        if (j.contains("boundary")) {
            const auto& b = j.at("boundary");
            reject_unknown(b, {"left", "right"}, "boundary");
            s.boundary.left = parse_enum(b.value("left", to_string(s.boundary.left)),
                                         {Support::fixed, Support::pinned}, "support");
            s.boundary.right = parse_enum(b.value("right", to_string(s.boundary.right)),
                                          {Support::fixed, Support::pinned}, "support");
        }
        if (j.contains("loading")) {
            const auto& l = j.at("loading");
            reject_unknown(l, {"attachment", "bar_length", "bar_mode", "stroke", "direction"}, "loading");
            if (l.contains("attachment")) {
                const auto& a = l.at("attachment");
                if (a.is_string()) {
                    if (a.get<std::string>() != "center")
                        throw SpecificationError("attachment must be \"center\" or a signed offset in mm");
                    s.loading.offset.reset();
                } else {
                    s.loading.offset = a.get<double>();
                }
            }
            s.loading.bar_length = l.value("bar_length", s.loading.bar_length);
            s.loading.bar_mode = parse_enum(l.value("bar_mode", to_string(s.loading.bar_mode)),
                                            {BarMode::rigid_link, BarMode::vertical_only}, "bar mode");
            s.loading.stroke = l.value("stroke", s.loading.stroke);
            s.loading.direction =
                parse_enum(l.value("direction", to_string(s.loading.direction)),
                           {Direction::loading, Direction::unloading, Direction::full_cycle}, "direction");
        }
        if (j.contains("mesh")) {
            const auto& m = j.at("mesh");
            reject_unknown(m, {"element_length", "kink_angle_deg", "youngs_modulus", "density"}, "mesh");
            s.mesh.element_length = m.value("element_length", s.mesh.element_length);
            s.mesh.kink_angle_deg = m.value("kink_angle_deg", s.mesh.kink_angle_deg);
            s.mesh.material.youngs_modulus = m.value("youngs_modulus", s.mesh.material.youngs_modulus);
            s.mesh.material.density = m.value("density", s.mesh.material.density);
        }
        if (j.contains("solver")) {
            nlohmann::json merged = s.solver;
            merged.update(j.at("solver"));
            s.solver = merged.get<SolverSettings>();
        }
        s.imperfection = j.value("imperfection", s.imperfection);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SpecificationError(std::string("malformed scenario config: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const VonMisesTruss& t) {
    j = {{"half_span", t.half_span},
         {"rise", t.rise},
         {"youngs_modulus", t.youngs_modulus},
         {"area", t.area},
         {"stroke", t.stroke},
         {"grip_length", t.grip_length}};
}

VonMisesTruss truss_from_json(const nlohmann::json& j) {
    VonMisesTruss t;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "half_span") t.half_span = value.get<double>();
            else if (key == "rise") t.rise = value.get<double>();
            else if (key == "youngs_modulus") t.youngs_modulus = value.get<double>();
            else if (key == "area") t.area = value.get<double>();
            else if (key == "stroke") t.stroke = value.get<double>();
            else if (key == "grip_length") t.grip_length = value.get<double>();
            else throw SpecificationError("unknown truss key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SpecificationError(std::string("malformed truss config: ") + e.what());
    }
    return t;
}

ScenarioModel model_from_config(const nlohmann::json& j) {
    if (!j.is_object()) throw SpecificationError("model config must be a JSON object");
    if (is_truss_label(j.value("label", std::string()))) {
        ScenarioModel m = vonmises_truss_model(truss_from_json(j.value("truss", nlohmann::json::object())));
        if (j.contains("solver")) {
            nlohmann::json merged = m.solver;
            merged.update(j.at("solver"));
            try {
                m.solver = merged.get<SolverSettings>();
            } catch (const nlohmann::json::exception& e) {
                throw SpecificationError(std::string("malformed solver settings: ") + e.what());
            }
        }
        return m;
    }
    return instantiate(scenario_from_json(j));
}

}  // namespace snapbeam
