#pragma once

#include <array>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Sparse>

#include "snapbeam/beam_model.hpp"

namespace snapbeam {

/// One nodal DOF held at zero.
struct FixedDof {
    int node{0};
    int component{0};
};

/// Dead load on a free or rigid-linked node DOF (N or N mm).
struct NodalLoad {
    int node{0};
    int component{0};
    double value{0.0};
};

/// Control parameter lambda is the prescribed value of one nodal DOF times `scale`.
struct PrescribedDof {
    int node{0};
    int component{0};
    double scale{1.0};
};

/// Two-pin rigid bar from `attach_node` up to a crosshead whose horizontal
/// position is fixed above the attachment and whose vertical displacement is
/// lambda. The attachment belongs to a rigid body (or is its own body).
struct RigidBar {
    int attach_node{0};
    double bar_length{80.0};
};

/// The attachment's vertical displacement is lambda; its horizontal DOF and the
/// body rotation stay free.
struct VerticalAttach {
    int attach_node{0};
};

using Control = std::variant<std::monostate, PrescribedDof, RigidBar, VerticalAttach>;

struct Constraints {
    std::vector<FixedDof> fixed;
    Control control{};
    std::vector<NodalLoad> loads;
};

/// Residual, tangent and conjugate reaction of the reduced system at (q, lambda).
struct Assembly {
    Eigen::VectorXd residual;                ///< dPi/dq - external loads
    Eigen::SparseMatrix<double> tangent;     ///< d residual / dq (symmetric)
    Eigen::VectorXd control_coupling;        ///< d residual / d lambda
    double reaction{0.0};                    ///< dPi/dlambda, force conjugate to the control
    double reaction_stiffness{0.0};          ///< d reaction / d lambda
    double energy{0.0};                      ///< strain energy
};

/// Maps reduced coordinates (q, lambda) onto full nodal displacements:
/// fixed DOFs drop out, the control enters through the chosen linkage, and
/// every rigid-link body is condensed onto a reference point and one rotation.
class ReducedSystem {
public:
    ReducedSystem(BeamMesh mesh, Constraints constraints);

    const BeamMesh& mesh() const { return mesh_; }
    const Constraints& constraints() const { return constraints_; }
    int size() const { return n_q_; }
    bool has_control() const { return !std::holds_alternative<std::monostate>(constraints_.control); }

    int constrained_count() const { return constrained_; }
    int condensed_count() const { return condensed_; }

    /// max over elements of EA/L, times a 1e-6 mm stretch.
    double reference_force() const { return reference_force_; }

    Assembly assemble(const Eigen::VectorXd& q, double lambda) const;

    /// Strain energy only (cheaper than a full assembly).
    double energy(const Eigen::VectorXd& q, double lambda) const;

    /// Full nodal displacement vector.
    State expand(const Eigen::VectorXd& q, double lambda) const;

    Vec2 position(int node, const Eigen::VectorXd& q, double lambda) const;
    double rotation(int node, const Eigen::VectorXd& q, double lambda) const;

    /// Crosshead position for a rigid-bar control (attachment position otherwise).
    Vec2 control_point(const Eigen::VectorXd& q, double lambda) const;

private:
    // Value and first/second derivatives of a node's (u, v, theta) with respect
    // to at most four reduced variables (index n_q_ stands for lambda).
    struct NodeJet {
        int nvar{0};
        std::array<int, 4> var{};
        std::array<double, 3> value{};
        std::array<std::array<double, 4>, 3> d{};
        std::array<std::array<std::array<double, 4>, 4>, 3> h{};
    };

    enum class DofKind { free, fixed, control };
    struct IndependentDof {
        DofKind kind{DofKind::free};
        int index{-1};
        double scale{1.0};
    };

    enum class RefKind { free, bar, vertical };
    struct Body {
        int ref_node{0};
        RefKind kind{RefKind::free};
        int qa{-1};  // x translation of the reference point in every mode
        int qb{-1};  // free: y translation
        int qt{-1};  // rotation
        double bar_length{0.0};
    };

    NodeJet jet(int node, const Eigen::VectorXd& q, double lambda) const;

    BeamMesh mesh_;
    Constraints constraints_;
    int n_q_{0};
    int constrained_{0};
    int condensed_{0};
    double reference_force_{0.0};
    std::vector<int> body_of_;                        // -1 for independent nodes
    std::vector<Body> bodies_;
    std::vector<std::array<IndependentDof, 3>> dofs_;  // for independent nodes
};

}  // namespace snapbeam
