#include <cmath>

#include <gtest/gtest.h>

#include "snapbeam/continuation.hpp"
#include "snapbeam/errors.hpp"
#include "snapbeam/oracles.hpp"
#include "snapbeam/scenario.hpp"

using namespace snapbeam;

namespace {

// Two-bar truss reaction written out from the bar geometry alone.
double truss_force(double w) {
    const double E = 3500.0, A = 20.0, a = 50.0, h = 5.0;
    const double L0 = std::sqrt(a * a + h * h), l = std::sqrt(a * a + (h - w) * (h - w));
    return 2.0 * E * A * (l - L0) / L0 * (w - h) / l;
}

double truss_peak() {
    double best = 0.0;
    for (int i = 0; i <= 200000; ++i) best = std::max(best, truss_force(5.0 * i / 200000.0));
    return best;
}

EquilibriumPath trace(const ScenarioModel& m, const SolverSettings& settings) {
    const ReducedSystem sys(m.mesh, m.constraints);
    TraceOptions o;
    o.stroke = m.stroke;
    o.probe_node = m.probe_node;
    return arc_length_trace(sys, settings, o);
}

// Single bar pulled along its axis: a linear spring.
ScenarioModel spring_model() {
    ScenarioModel m;
    m.mesh.nodes = {{0.0, 0.0}, {10.0, 0.0}};
    m.mesh.materials.push_back({3500.0, 0.0});
    m.mesh.sections.push_back(Section::rectangle(1.0, 1.0));
    m.mesh.elements.push_back({0, 1, 0, 0, ElementKind::frame});
    m.mesh.tags = {{"end", 1}};
    m.constraints.fixed = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}};
    m.constraints.control = PrescribedDof{1, 0, 1.0};
    m.probe_node = 1;
    m.stroke = 0.5;
    return m;
}

}  // namespace

TEST(Newton, RestStateNeedsNoIterations) {
    const ScenarioModel m = resolve_model("fixed-fixed(+4)");
    const ReducedSystem sys(m.mesh, m.constraints);
    const NewtonResult r = newton_correct(sys, Eigen::VectorXd::Zero(sys.size()), 0.0, m.solver);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.q.norm(), 0.0);
}

TEST(Trace, TrussSCurveHasTwoForceFolds) {
    const ScenarioModel m = vonmises_truss_model();
    const EquilibriumPath path = trace(m, m.solver);
    ASSERT_EQ(path.status, TraceStatus::complete);
    EXPECT_EQ(path.count(FoldKind::force_limit), 2u);
    EXPECT_EQ(path.count(FoldKind::displacement_limit), 0u);
    double peak = 0.0;
    for (const auto& f : path.folds)
        if (f.kind == FoldKind::force_limit) peak = std::max(peak, path.points[f.index].reaction);
    const double expected = truss_peak();
    EXPECT_NEAR(peak, expected, 0.01 * expected);
    EXPECT_NEAR(peak, vonmises_limit_load({}), 1e-6 * expected);
    // the apex follows the closed-form relation at every point
    const ReducedSystem sys(m.mesh, m.constraints);
    for (const auto& p : path.points) {
        const double w = m.mesh.nodes[m.mesh.tag("apex")].y - p.probe.y;
        EXPECT_NEAR(p.reaction, truss_force(w), 1e-6 * expected);
    }
}

TEST(Trace, EveryPointSatisfiesTheResidualTolerance) {
    const ScenarioModel m = vonmises_truss_model();
    const ReducedSystem sys(m.mesh, m.constraints);
    const EquilibriumPath path = trace(m, m.solver);
    for (const auto& p : path.points)
        EXPECT_LE(residual_norm(sys, p), convergence_tolerance(sys, m.solver, p.q, p.control));
}

TEST(Trace, ColumnLosesStabilityAtEulerLoad) {
    const StraightBeam beam{.elements = 40};
    ScenarioModel m;
    m.mesh = straight_beam_mesh(beam);
    m.constraints.fixed = {{0, 0}, {0, 1}, {beam.elements, 1}};
    m.constraints.control = PrescribedDof{beam.elements, 0, -1.0};
    m.probe_node = beam.elements / 2;
    const double EI = beam.youngs_modulus * beam.depth * std::pow(beam.thickness, 3) / 12.0;
    const double EA = beam.youngs_modulus * beam.depth * beam.thickness;
    const double euler = pi * pi * EI / (beam.length * beam.length);
    const double shortening = euler * beam.length / EA;
    m.stroke = 2.0 * shortening;
    SolverSettings s;
    s.initial_arc_radius = shortening / 40.0;
    s.max_arc_radius = shortening / 20.0;
    s.min_arc_radius = 1e-9;
    s.fold_resolution = 1e-9;
    // the straight column stays on its unstable primary branch, so the trace only ends on the step cap
    s.max_steps = 200;
    const EquilibriumPath path = trace(m, s);
    ASSERT_GT(path.points.back().reaction, 1.2 * euler);
    std::size_t first = 0;
    while (first < path.points.size() && path.points[first].negative_eigs == 0) ++first;
    ASSERT_LT(first, path.points.size());
    ASSERT_GT(first, 0u);
    EXPECT_EQ(path.points[first].negative_eigs, 1);
    const double p = 0.5 * (path.points[first - 1].reaction + path.points[first].reaction);
    EXPECT_NEAR(p, euler, 0.02 * euler);
    // primary branch: the midpoint stays on the axis
    for (const auto& pt : path.points) EXPECT_NEAR(pt.probe.y, 0.0, 1e-9);
}

TEST(Trace, LinearSpringHasOnlyTheRestEquilibrium) {
    const ScenarioModel m = spring_model();
    const ReducedSystem sys(m.mesh, m.constraints);
    const EquilibriumPath path = trace(m, m.solver);
    ASSERT_EQ(path.status, TraceStatus::complete);
    EXPECT_TRUE(path.folds.empty());
    const double k = 3500.0 * 1.0 / 10.0;
    for (const auto& p : path.points) EXPECT_NEAR(p.reaction, k * p.control, 1e-6 * k * m.stroke);
    const auto eq = find_free_equilibria(sys, path, m.solver);
    ASSERT_EQ(eq.size(), 1u);
    EXPECT_TRUE(eq[0].stable);
    EXPECT_DOUBLE_EQ(eq[0].control, 0.0);
}

TEST(Trace, StepLimitReturnsPartialPath) {
    const ScenarioModel m = vonmises_truss_model();
    SolverSettings s = m.solver;
    s.max_steps = 3;
    const EquilibriumPath path = trace(m, s);
    EXPECT_EQ(path.status, TraceStatus::max_steps);
    EXPECT_FALSE(path.message.empty());
    EXPECT_LE(path.points.size(), 4u);
}

TEST(Trace, TrussFreeEquilibria) {
    const ScenarioModel m = vonmises_truss_model();
    const ReducedSystem sys(m.mesh, m.constraints);
    const EquilibriumPath path = trace(m, m.solver);
    const auto eq = find_free_equilibria(sys, path, m.solver);
    // rest, unstable flat state, stable inverted state
    ASSERT_EQ(eq.size(), 3u);
    EXPECT_TRUE(eq[0].stable);
    EXPECT_FALSE(eq[1].stable);
    EXPECT_TRUE(eq[2].stable);
    EXPECT_NEAR(eq[2].energy, 0.0, 1e-6);
}

TEST(Settings, ValidationAndJson) {
    SolverSettings s;
    s.residual_tol = -1.0;
    EXPECT_THROW(s.validate(), SpecificationError);
    const nlohmann::json j = SolverSettings{};
    EXPECT_EQ(nlohmann::json(j.get<SolverSettings>()).dump(), j.dump());
    EXPECT_THROW(nlohmann::json({{"residual_tol", 1e-8}, {"tolerance", 1}}).get<SolverSettings>(), SpecificationError);
}

TEST(Persistence, CsvAndSummaryRoundTrip) {
    const ScenarioModel m = vonmises_truss_model();
    const EquilibriumPath path = trace(m, m.solver);
    const EquilibriumPath back = read_path_artifacts(path_csv(path), path_summary_json(path));
    ASSERT_EQ(back.points.size(), path.points.size());
    for (std::size_t i = 0; i < path.points.size(); ++i) {
        EXPECT_NEAR(back.points[i].control, path.points[i].control, 1e-9);
        EXPECT_NEAR(back.points[i].reaction, path.points[i].reaction, 1e-9);
        EXPECT_NEAR(back.points[i].energy, path.points[i].energy, 1e-9);
        EXPECT_EQ(back.points[i].negative_eigs, path.points[i].negative_eigs);
    }
    ASSERT_EQ(back.folds.size(), path.folds.size());
    EXPECT_EQ(back.status, path.status);
    EXPECT_EQ(path_csv(back), path_csv(path));
    EXPECT_THROW(read_path_csv("not,a,path\n1,2,3\n"), IoError);
    EXPECT_THROW(read_path_artifacts(path_csv(path), nlohmann::json::array()), IoError);
}

TEST(Oracles, TrussSuitePasses) {
    const SolverSettings s{};
    for (const auto& r : {vonmises_limit_oracle(s), vonmises_jump_oracle(s), energy_closure_oracle(s)})
        EXPECT_TRUE(r.pass) << r.name << " error " << r.error << " " << r.detail;
}

TEST(Oracles, CorruptedToleranceFailsTrussCheck) {
    SolverSettings s;
    s.residual_tol = 1e6;
    EXPECT_FALSE(vonmises_limit_oracle(s).pass);
    // at unit tolerance the residual allowed is that of a 1e-6 mm stretch, which stays accurate
    s.residual_tol = 1.0;
    EXPECT_TRUE(vonmises_limit_oracle(s).pass);
}
