#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "snapbeam/continuation.hpp"
#include "snapbeam/scenario.hpp"

namespace snapbeam {

/// Model value against an independently computed reference.
struct OracleResult {
    std::string name;
    double measured{0.0};
    double expected{0.0};
    double error{0.0};      ///< relative unless stated in `detail`
    double tolerance{0.0};
    bool pass{false};
    std::string detail;
};

/// Straight steel-free test beam shared by the beam oracles (mm, MPa).
struct StraightBeam {
    double length{100.0};
    double thickness{0.8};
    double depth{10.0};
    double youngs_modulus{3500.0};
    int elements{20};
};

BeamMesh straight_beam_mesh(const StraightBeam& beam);

/// Tip deflection under a small end load against F L^3 / 3EI (1%).
OracleResult cantilever_oracle(const SolverSettings& settings, const StraightBeam& beam = {});
/// End moment bending a cantilever to a quarter circle; tip position error / L (0.5%).
OracleResult pure_bending_oracle(const SolverSettings& settings, const StraightBeam& beam = {});
/// Pinned-pinned column, 40 elements: load at which the tangent loses positive
/// definiteness against pi^2 EI / L^2 (2%).
OracleResult euler_buckling_oracle(const SolverSettings& settings, StraightBeam beam = {.elements = 40});

/// Closed-form apex reaction of the two-bar truss at downward deflection w.
double vonmises_reaction(const VonMisesTruss& truss, double w);
/// Strain energy of the truss at downward deflection w.
double vonmises_energy(const VonMisesTruss& truss, double w);
/// Largest reaction before the snap, by golden-section search on the closed form.
double vonmises_limit_load(const VonMisesTruss& truss);

/// Traced S-curve: two force-limit folds and the limit load within 1%.
OracleResult vonmises_limit_oracle(const SolverSettings& settings, const VonMisesTruss& truss = {});
/// Load-control jump energy against the trapezoid area between the limit load
/// and the closed-form branch (1%).
OracleResult vonmises_jump_oracle(const SolverSettings& settings, const VonMisesTruss& truss = {});
/// Trapezoid work along a densely traced truss path against its strain energy (1e-3).
OracleResult energy_closure_oracle(const SolverSettings& settings, const VonMisesTruss& truss = {});

std::vector<OracleResult> run_oracles(const SolverSettings& settings);
nlohmann::json to_json(const OracleResult& r);

}  // namespace snapbeam
