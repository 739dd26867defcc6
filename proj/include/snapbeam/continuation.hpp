#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "snapbeam/assembly.hpp"

namespace snapbeam {

struct SolverSettings {
    double residual_tol{1e-8};  ///< relative to ReducedSystem::reference_force()
    int max_newton_iters{25};
    double initial_arc_radius{0.25};
    double min_arc_radius{1e-4};
    double max_arc_radius{2.0};
    int target_iters{5};
    int max_steps{20000};
    double fold_resolution{1e-3};  ///< arc length, mm
    double max_update{10.0};       ///< largest accepted Newton correction (inf-norm)

    void validate() const;
};

struct PathPoint {
    double control{0.0};        ///< lambda, mm
    Eigen::VectorXd q;          ///< reduced state
    double reaction{0.0};       ///< N
    int negative_eigs{0};       ///< inertia of the reduced tangent at fixed control
    double arc_coordinate{0.0};
    double energy{0.0};         ///< strain energy, N mm
    double reaction_slope{0.0}; ///< d reaction / d control along the path
    Vec2 probe{};               ///< tracked point position (tip marker)
    double probe_rotation{0.0};
};

enum class FoldKind { force_limit, displacement_limit };

struct Fold {
    std::size_t index{0};
    FoldKind kind{FoldKind::force_limit};
};

enum class TraceStatus { complete, max_steps, stalled };

struct EquilibriumPath {
    std::vector<PathPoint> points;
    std::vector<Fold> folds;
    std::vector<std::size_t> bifurcations;  ///< stability changes without a displacement fold
    TraceStatus status{TraceStatus::complete};
    std::string message;

    std::size_t count(FoldKind kind) const;
};

struct TraceOptions {
    double stroke{55.0};
    int probe_node{-1};  ///< node whose position is recorded per point; -1 for none
};

/// Sparse LDL^T of the reduced tangent; exposes the inertia.
class TangentFactor {
public:
    /// Returns false when a pivot vanishes.
    bool factorize(const Eigen::SparseMatrix<double>& k);
    int negative_count() const { return negatives_; }
    /// Smallest |pivot| over largest |pivot|.
    double pivot_ratio() const { return pivot_ratio_; }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool analyzed_{false};
    int negatives_{0};
    double pivot_ratio_{0.0};
};

struct NewtonResult {
    Eigen::VectorXd q;
    int iterations{0};
    double residual{0.0};
};

/// Residual norm accepted as converged: residual_tol times the reference force,
/// raised to the round-off floor of a total-displacement residual
/// (8 eps sqrt(n) k_ref max(1, |q|, |lambda|)) when that is larger.
double convergence_tolerance(const ReducedSystem& system, const SolverSettings& settings, const Eigen::VectorXd& q,
                             double control);

/// Equilibrium at fixed control. Throws ConvergenceError or FoldSingularity.
NewtonResult newton_correct(const ReducedSystem& system, const Eigen::VectorXd& q0, double control,
                            const SolverSettings& settings);

/// Cylindrical arc-length continuation from the rest state.
EquilibriumPath arc_length_trace(const ReducedSystem& system, const SolverSettings& settings,
                                 const TraceOptions& options);

struct FreeEquilibrium {
    double path_position{0.0};  ///< fractional point index along the path
    double control{0.0};
    double energy{0.0};
    Eigen::VectorXd q;
    int negative_eigs{0};       ///< of the reduced tangent at fixed control
    double reaction_slope{0.0};
    bool stable{false};         ///< stable with the control released
};

/// Zero-reaction states along a traced path, rest state first.
std::vector<FreeEquilibrium> find_free_equilibria(const ReducedSystem& system, const EquilibriumPath& path,
                                                  const SolverSettings& settings);

/// Re-evaluate the equilibrium residual of a stored point.
double residual_norm(const ReducedSystem& system, const PathPoint& point);

// persistence
std::string path_csv(const EquilibriumPath& path);
nlohmann::json path_summary_json(const EquilibriumPath& path);
std::string to_string(FoldKind kind);
std::string to_string(TraceStatus status);
void to_json(nlohmann::json& j, const SolverSettings& s);
void from_json(const nlohmann::json& j, SolverSettings& s);

/// Reload the scalar columns of a path CSV (states are not persisted).
EquilibriumPath read_path_csv(const std::string& text);
/// Path CSV plus the per-point data, folds and status of its summary JSON.
EquilibriumPath read_path_artifacts(const std::string& csv_text, const nlohmann::json& summary);

}  // namespace snapbeam
