#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "snapbeam/geometry.hpp"

namespace snapbeam {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Linear elastic material. Units: MPa, tonne/mm^3.
struct Material {
    double youngs_modulus{3500.0};
    double density{1.24e-9};

    void validate() const;
};

/// Solid rectangular section: in-plane thickness h, out-of-plane depth b.
struct Section {
    double in_plane_thickness_h{0.8};
    double depth_b{10.0};
    double area{8.0};
    double second_moment{0.8 * 0.8 * 0.8 * 10.0 / 12.0};

    static Section rectangle(double h, double b);
    void validate() const;
};

/// `frame` carries axial force and bending; `truss` is axial only and ignores
/// nodal rotations.
enum class ElementKind { frame, truss };

struct Element {
    int node_i{0};
    int node_j{0};
    int material{0};
    int section{0};
    ElementKind kind{ElementKind::frame};
};

/// Slave node rigidly attached to a master node through a reference-frame offset.
struct RigidLink {
    int master{0};
    int slave{0};
    Vec2 offset{};
};

/// Planar frame: three DOFs (u, v, theta) per node at indices 3n, 3n+1, 3n+2.
struct BeamMesh {
    std::vector<Vec2> nodes;
    std::vector<Material> materials;
    std::vector<Section> sections;
    std::vector<Element> elements;
    std::vector<RigidLink> rigid_links;
    std::map<std::string, int> tags;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int dof_count() const { return 3 * node_count(); }
    static int dof(int node, int component) { return 3 * node + component; }
    int tag(const std::string& name) const;

    double rest_length(const Element& e) const { return norm(nodes[e.node_j] - nodes[e.node_i]); }

    /// Throws SpecificationError on dangling references, zero-length elements,
    /// or a cyclic / multiply-mastered rigid link graph.
    void validate() const;
};

/// Nodal displacement vector of length 3 * node_count (mm, mm, rad).
using State = Eigen::VectorXd;

struct ElementResponse {
    Vec6 force;    ///< internal nodal forces (Fx, Fy, M) at i then j
    Mat6 tangent;  ///< d force / d displacement, material + geometric
    double energy{0.0};
};

/// Corotational Euler-Bernoulli element in global coordinates.
/// `displacement` holds (u_i, v_i, theta_i, u_j, v_j, theta_j).
ElementResponse element_force_and_tangent(const BeamMesh& mesh, const Element& element, const Vec6& displacement);

Vec6 element_displacement(const Element& element, const State& state);

/// Sum of element strain energies (N mm).
double strain_energy(const BeamMesh& mesh, const State& state);

/// Assembled internal force on the full (unconstrained) DOF vector.
Eigen::VectorXd internal_force(const BeamMesh& mesh, const State& state);

/// Deformed position of a node.
inline Vec2 deformed_position(const BeamMesh& mesh, const State& state, int node) {
    return mesh.nodes[node] + Vec2{state[3 * node], state[3 * node + 1]};
}

void to_json(nlohmann::json& j, const BeamMesh& mesh);
void from_json(const nlohmann::json& j, BeamMesh& mesh);

}  // namespace snapbeam
