#include "snapbeam/beam_model.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "snapbeam/errors.hpp"

namespace snapbeam {

void Material::validate() const {
    if (!(youngs_modulus > 0.0)) throw SpecificationError("Young's modulus must be > 0");
    if (!(density >= 0.0)) throw SpecificationError("density must be >= 0");
}

Section Section::rectangle(double h, double b) {
    Section s;
    s.in_plane_thickness_h = h;
    s.depth_b = b;
    s.area = b * h;
    s.second_moment = b * h * h * h / 12.0;
    s.validate();
    return s;
}

void Section::validate() const {
    if (!(in_plane_thickness_h > 0.0) || !(depth_b > 0.0))
        throw SpecificationError("section thickness and depth must be > 0");
    const double a = depth_b * in_plane_thickness_h;
    const double i = depth_b * std::pow(in_plane_thickness_h, 3) / 12.0;
    if (std::abs(area - a) > 1e-12 * a || std::abs(second_moment - i) > 1e-12 * i)
        throw SpecificationError("section area / second moment inconsistent with h and b");
}

int BeamMesh::tag(const std::string& name) const {
    const auto it = tags.find(name);
    if (it == tags.end()) throw SpecificationError("mesh has no node tagged '" + name + "'");
    return it->second;
}

void BeamMesh::validate() const {
    const int n = node_count();
    for (const auto& m : materials) m.validate();
    for (const auto& s : sections) s.validate();
    for (std::size_t k = 0; k < elements.size(); ++k) {
        const auto& e = elements[k];
        if (e.node_i < 0 || e.node_i >= n || e.node_j < 0 || e.node_j >= n || e.node_i == e.node_j)
            throw SpecificationError("element " + std::to_string(k) + " references invalid nodes");
        if (e.material < 0 || e.material >= static_cast<int>(materials.size()) || e.section < 0 ||
            e.section >= static_cast<int>(sections.size()))
            throw SpecificationError("element " + std::to_string(k) + " references invalid material/section");
        if (!(rest_length(e) > 0.0))
            throw SpecificationError("element " + std::to_string(k) + " has zero rest length");
    }
    std::map<int, int> master_of;
    for (const auto& l : rigid_links) {
        if (l.master < 0 || l.master >= n || l.slave < 0 || l.slave >= n || l.master == l.slave)
            throw SpecificationError("rigid link references invalid nodes");
        if (!master_of.emplace(l.slave, l.master).second)
            throw SpecificationError("node " + std::to_string(l.slave) + " is slaved twice");
        const Vec2 expect = nodes[l.slave] - nodes[l.master];
        if (norm(expect - l.offset) > 1e-9 * (1.0 + norm(expect)))
            throw SpecificationError("rigid link offset does not match node positions");
    }
    // acyclic: walking master pointers must terminate
    for (const auto& [slave, master] : master_of) {
        int cur = master;
        for (std::size_t steps = 0; master_of.count(cur); ++steps) {
            if (steps > master_of.size()) throw SpecificationError("rigid link graph contains a cycle");
            cur = master_of.at(cur);
        }
        (void)slave;
    }
    for (const auto& [name, node] : tags)
        if (node < 0 || node >= n) throw SpecificationError("tag '" + name + "' references an invalid node");
}

namespace {

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * pi);
    return a;
}

}  // namespace

ElementResponse element_force_and_tangent(const BeamMesh& mesh, const Element& element, const Vec6& d) {
    const Vec2 X0 = mesh.nodes[element.node_j] - mesh.nodes[element.node_i];
    const double L0 = norm(X0);
    if (!(L0 > 0.0)) throw SingularElement("element rest length is zero");
    const Material& mat = mesh.materials[element.material];
    const Section& sec = mesh.sections[element.section];
    const double EA = mat.youngs_modulus * sec.area;
    const double EI = element.kind == ElementKind::frame ? mat.youngs_modulus * sec.second_moment : 0.0;

    const Vec2 du{d[3] - d[0], d[4] - d[1]};
    const Vec2 x = X0 + du;
    const double l = norm(x);
    if (!(l > 1e-9)) throw SingularElement("element length collapsed below 1e-9 mm");

    // stretch computed without cancellation: (l^2 - L0^2) / (l + L0)
    const double stretch = (2.0 * dot(X0, du) + dot(du, du)) / (l + L0);
    const double rigid_rotation = std::atan2(cross(X0, x), dot(X0, x));
    const double c = x.x / l, s = x.y / l;

    ElementResponse out;
    const double N = EA * stretch / L0;
    double M1 = 0.0, M2 = 0.0;
    double t1 = 0.0, t2 = 0.0;
    if (element.kind == ElementKind::frame) {
        t1 = wrap_angle(d[2] - rigid_rotation);
        t2 = wrap_angle(d[5] - rigid_rotation);
        M1 = EI / L0 * (4.0 * t1 + 2.0 * t2);
        M2 = EI / L0 * (2.0 * t1 + 4.0 * t2);
    }
    out.energy = 0.5 * EA * stretch * stretch / L0 + EI / L0 * (2.0 * t1 * t1 + 2.0 * t1 * t2 + 2.0 * t2 * t2);

    Vec6 r, z;
    r << -c, -s, 0.0, c, s, 0.0;
    z << s, -c, 0.0, -s, c, 0.0;
    Eigen::Matrix<double, 3, 6> B;
    B.row(0) = r.transpose();
    B.row(1) = -z.transpose() / l;
    B.row(2) = -z.transpose() / l;
    B(1, 2) += 1.0;
    B(2, 5) += 1.0;

    Eigen::Vector3d local(N, M1, M2);
    out.force = B.transpose() * local;

    Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
    D(0, 0) = EA / L0;
    if (element.kind == ElementKind::frame) {
        D(1, 1) = 4.0 * EI / L0;
        D(1, 2) = 2.0 * EI / L0;
        D(2, 1) = 2.0 * EI / L0;
        D(2, 2) = 4.0 * EI / L0;
    }
    out.tangent = B.transpose() * D * B + (N / l) * (z * z.transpose()) +
                  ((M1 + M2) / (l * l)) * (r * z.transpose() + z * r.transpose());
    return out;
}

Vec6 element_displacement(const Element& e, const State& state) {
    Vec6 d;
    d << state[3 * e.node_i], state[3 * e.node_i + 1], state[3 * e.node_i + 2], state[3 * e.node_j],
        state[3 * e.node_j + 1], state[3 * e.node_j + 2];
    return d;
}

double strain_energy(const BeamMesh& mesh, const State& state) {
    if (state.size() != mesh.dof_count()) throw SpecificationError("state dimension does not match mesh");
    double u = 0.0;
    for (const auto& e : mesh.elements) u += element_force_and_tangent(mesh, e, element_displacement(e, state)).energy;
    return u;
}

Eigen::VectorXd internal_force(const BeamMesh& mesh, const State& state) {
    if (state.size() != mesh.dof_count()) throw SpecificationError("state dimension does not match mesh");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());
    for (const auto& e : mesh.elements) {
        const auto resp = element_force_and_tangent(mesh, e, element_displacement(e, state));
        for (int k = 0; k < 3; ++k) {
            f[3 * e.node_i + k] += resp.force[k];
            f[3 * e.node_j + k] += resp.force[3 + k];
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const BeamMesh& mesh) {
    nlohmann::json mats = nlohmann::json::array(), secs = nlohmann::json::array(), elems = nlohmann::json::array(),
                   links = nlohmann::json::array();
    for (const auto& m : mesh.materials) mats.push_back({{"youngs_modulus", m.youngs_modulus}, {"density", m.density}});
    for (const auto& s : mesh.sections) secs.push_back({{"h", s.in_plane_thickness_h}, {"b", s.depth_b}});
    for (const auto& e : mesh.elements)
        elems.push_back({e.node_i, e.node_j, e.material, e.section, e.kind == ElementKind::frame ? "frame" : "truss"});
    for (const auto& l : mesh.rigid_links) links.push_back({{"master", l.master}, {"slave", l.slave}, {"offset", l.offset}});
    j = {{"nodes", mesh.nodes},  {"materials", mats},   {"sections", secs},
         {"elements", elems},    {"rigid_links", links}, {"constraints", {{"tags", mesh.tags}}}};
}

void from_json(const nlohmann::json& j, BeamMesh& mesh) {
    mesh = BeamMesh{};
    mesh.nodes = j.at("nodes").get<std::vector<Vec2>>();
    for (const auto& m : j.at("materials"))
        mesh.materials.push_back({m.at("youngs_modulus").get<double>(), m.value("density", 0.0)});
    for (const auto& s : j.at("sections"))
        mesh.sections.push_back(Section::rectangle(s.at("h").get<double>(), s.at("b").get<double>()));
    for (const auto& e : j.at("elements")) {
        Element el{e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(), e.at(3).get<int>(), ElementKind::frame};
        const std::string kind = e.size() > 4 ? e.at(4).get<std::string>() : "frame";
        if (kind != "frame" && kind != "truss") throw SpecificationError("unknown element kind " + kind);
        el.kind = kind == "truss" ? ElementKind::truss : ElementKind::frame;
        mesh.elements.push_back(el);
    }
    for (const auto& l : j.at("rigid_links"))
        mesh.rigid_links.push_back({l.at("master").get<int>(), l.at("slave").get<int>(), l.at("offset").get<Vec2>()});
    if (j.contains("constraints") && j.at("constraints").contains("tags"))
        mesh.tags = j.at("constraints").at("tags").get<std::map<std::string, int>>();
    mesh.validate();
}

}  // namespace snapbeam
