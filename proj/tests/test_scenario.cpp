#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "snapbeam/errors.hpp"
#include "snapbeam/scenario.hpp"

using namespace snapbeam;
using nlohmann::json;

namespace {

BeamMesh default_mesh() { return build_mesh(default_layout(), MeshOptions{}); }

// Tip position at a given control, linearly interpolated along a monotone path segment.
Vec2 tip_at(const EquilibriumPath& path, double control) {
    for (std::size_t i = 1; i < path.points.size(); ++i) {
        const auto& a = path.points[i - 1];
        const auto& b = path.points[i];
        if ((a.control - control) * (b.control - control) <= 0.0 && a.control != b.control) {
            const double t = (control - a.control) / (b.control - a.control);
            return a.probe + t * (b.probe - a.probe);
        }
    }
    throw std::runtime_error("control not reached");
}

}  // namespace

TEST(Boundary, ConstrainedDofCounts) {
    const BeamMesh mesh = default_mesh();
    EXPECT_EQ(apply_boundary(mesh, {Support::fixed, Support::fixed}).size(), 6u);
    EXPECT_EQ(apply_boundary(mesh, {Support::pinned, Support::pinned}).size(), 4u);
    EXPECT_EQ(apply_boundary(mesh, {Support::pinned, Support::fixed}).size(), 5u);
    EXPECT_EQ(apply_boundary(mesh, {Support::fixed, Support::pinned}).size(), 5u);
}

TEST(Boundary, SupportsAtBeamEnds) {
    const SnapStructureLayout layout = default_layout();
    const BeamMesh mesh = build_mesh(layout, MeshOptions{});
    EXPECT_LT(norm(mesh.nodes[mesh.tag("support_left")] - layout.left_beam.back()), 1e-12);
    EXPECT_LT(norm(mesh.nodes[mesh.tag("support_right")] - layout.right_beam.back()), 1e-12);
    EXPECT_NEAR(mesh.nodes[mesh.tag("support_right")].x, 45.87, 0.01);
    EXPECT_NEAR(mesh.nodes[mesh.tag("support_right")].y, 32.12, 0.01);
}

TEST(Mesh, ElementsRespectLengthBound) {
    const BeamMesh mesh = default_mesh();
    for (const auto& e : mesh.elements) EXPECT_LE(mesh.rest_length(e), 0.5 + 1e-9);
    const Section& s = mesh.sections.front();
    EXPECT_DOUBLE_EQ(s.in_plane_thickness_h, 0.8);
    EXPECT_DOUBLE_EQ(s.depth_b, 10.0);
}

TEST(Loading, OffsetAttachmentUsesRigidLinkedAnchor) {
    const Scenario s = *find_builtin("fixed-fixed(+4)");
    const ScenarioModel m = instantiate(s);
    const auto* bar = std::get_if<RigidBar>(&m.constraints.control);
    ASSERT_NE(bar, nullptr);
    const int anchor = bar->attach_node;
    EXPECT_NEAR(m.mesh.nodes[anchor].x, 4.0, 1e-12);
    EXPECT_NEAR(m.mesh.nodes[anchor].y, 0.0, 1e-12);
    const int apex = m.mesh.tag("apex");
    const bool linked = std::any_of(m.mesh.rigid_links.begin(), m.mesh.rigid_links.end(),
                                    [&](const RigidLink& l) { return l.slave == anchor && l.master == apex; });
    EXPECT_TRUE(linked);
    EXPECT_DOUBLE_EQ(bar->bar_length, 80.0);
}

TEST(Loading, VerticalOnlyAtZeroControlLeavesMeshUnloaded) {
    Scenario s = *find_builtin("fixed-fixed");
    s.loading.bar_mode = BarMode::vertical_only;
    s.imperfection = 0.0;
    const ScenarioModel m = instantiate(s);
    const ReducedSystem sys(m.mesh, m.constraints);
    const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(sys.size());
    const Assembly a = sys.assemble(q0, 0.0);
    EXPECT_LT(a.residual.norm(), 1e-12);
    EXPECT_DOUBLE_EQ(a.energy, 0.0);
    EXPECT_NEAR(a.reaction, 0.0, 1e-12);
    const NewtonResult r = newton_correct(sys, q0, 0.0, m.solver);
    EXPECT_EQ(r.iterations, 0);
}

TEST(Loading, LongBarApproachesVerticalDrive) {
    Scenario bar = *find_builtin("fixed-fixed");
    bar.loading.bar_length = 1e4;
    bar.loading.stroke = 8.0;
    Scenario vertical = bar;
    vertical.loading.bar_mode = BarMode::vertical_only;
    std::vector<EquilibriumPath> paths;
    for (const Scenario* s : {&bar, &vertical}) {
        const ScenarioModel m = instantiate(*s);
        const ReducedSystem sys(m.mesh, m.constraints);
        TraceOptions o;
        o.stroke = m.stroke;
        o.probe_node = m.probe_node;
        paths.push_back(arc_length_trace(sys, m.solver, o));
        ASSERT_EQ(paths.back().status, TraceStatus::complete);
    }
    double gap = 0.0;
    for (double c = 0.5; c <= 8.0; c += 0.5) gap = std::max(gap, norm(tip_at(paths[0], c) - tip_at(paths[1], c)));
    EXPECT_LT(gap, 0.1);
}

TEST(Builtins, LabelsAndValidation) {
    const auto labels = builtin_labels();
    for (const char* l : {"fixed-fixed", "pinned-pinned", "fixed-pinned(fix)", "fixed-pinned(pin)", "fixed-fixed(-4)",
                          "fixed-fixed(+4)", "pinned-pinned(-4)", "pinned-pinned(+4)"})
        EXPECT_NE(std::find(labels.begin(), labels.end(), l), labels.end()) << l;
    for (const auto& s : builtin_scenarios()) EXPECT_NO_THROW(s.validate()) << s.label;
}

TEST(Builtins, AliasesResolve) {
    EXPECT_EQ(find_builtin("fixed-pinned-fix")->label, "fixed-pinned(fix)");
    EXPECT_EQ(find_builtin("FIXED_PINNED(PIN)")->label, "fixed-pinned(pin)");
    EXPECT_EQ(find_builtin("fixed-fixed+4")->label, "fixed-fixed(+4)");
    EXPECT_FALSE(find_builtin("free-free").has_value());
    EXPECT_THROW(resolve_model("free-free"), SpecificationError);
    EXPECT_TRUE(is_truss_label("vonmises-truss"));
    EXPECT_EQ(resolve_model("vonmises-truss").label, "vonmises-truss");
}

TEST(Builtins, FixedPinnedPullsOnTheNamedSide) {
    const Scenario fix = *find_builtin("fixed-pinned(fix)");
    const Scenario pin = *find_builtin("fixed-pinned(pin)");
    ASSERT_TRUE(fix.loading.offset && pin.loading.offset);
    // the anchor sits on the side of the named support
    const auto side = [](const Scenario& s) { return *s.loading.offset < 0.0 ? s.boundary.left : s.boundary.right; };
    EXPECT_EQ(side(fix), Support::fixed);
    EXPECT_EQ(side(pin), Support::pinned);
}

TEST(Builtins, OffsetPairsAreMirrorImages) {
    for (const char* base : {"fixed-fixed", "pinned-pinned"}) {
        const Scenario minus = *find_builtin(std::string(base) + "(-4)");
        const Scenario plus = *find_builtin(std::string(base) + "(+4)");
        const SnapStructureLayout m = mirrored(minus.layout);
        ASSERT_EQ(m.left_beam.size(), plus.layout.left_beam.size());
        for (std::size_t k = 0; k < m.left_beam.size(); ++k) {
            EXPECT_LT(norm(m.left_beam[k] - plus.layout.left_beam[k]), 1e-9);
            EXPECT_LT(norm(m.right_beam[k] - plus.layout.right_beam[k]), 1e-9);
        }
        EXPECT_DOUBLE_EQ(-*minus.loading.offset, *plus.loading.offset);
        EXPECT_EQ(minus.boundary.left, plus.boundary.right);
        EXPECT_EQ(minus.boundary.right, plus.boundary.left);
    }
}

TEST(Builtins, ImperfectionOnlyForSymmetricCases) {
    EXPECT_GT(find_builtin("pinned-pinned")->applied_imperfection(), 0.0);
    EXPECT_GT(find_builtin("fixed-fixed")->applied_imperfection(), 0.0);
    EXPECT_EQ(find_builtin("pinned-pinned(+4)")->applied_imperfection(), 0.0);
    EXPECT_EQ(find_builtin("fixed-pinned(fix)")->applied_imperfection(), 0.0);
}

TEST(Config, ScenarioJsonRoundTrip) {
    for (const auto& s : builtin_scenarios()) {
        const json j = s;
        const Scenario back = scenario_from_json(j);
        EXPECT_EQ(json(back).dump(), j.dump()) << s.label;
    }
}

TEST(Config, OverridesAndRejections) {
    const Scenario s = scenario_from_json(json::parse(R"({"label": "custom", "loading": {"stroke": 30, "attachment": 4},
                                                           "mesh": {"element_length": 0.4}})"));
    EXPECT_DOUBLE_EQ(s.loading.stroke, 30.0);
    EXPECT_DOUBLE_EQ(*s.loading.offset, 4.0);
    EXPECT_DOUBLE_EQ(s.mesh.element_length, 0.4);
    EXPECT_THROW(scenario_from_json(json::parse(R"({"label": "x", "bogus": 1})")), SpecificationError);
    EXPECT_THROW(scenario_from_json(json::parse(R"({"label": "x", "loading": {"stroke": -1}})")), SpecificationError);
    EXPECT_THROW(scenario_from_json(json::parse(R"({"label": "x", "boundary": {"left": "glued"}})")),
                 SpecificationError);
}

TEST(Config, TrussConfig) {
    const json j = {{"label", "vonmises-truss"}, {"truss", {{"rise", 4.0}}}};
    const ScenarioModel m = model_from_config(j);
    EXPECT_EQ(m.label, "vonmises-truss");
    EXPECT_NEAR(m.mesh.nodes[m.mesh.tag("apex")].y, 4.0, 1e-12);
    EXPECT_THROW(truss_from_json({{"span", 3.0}}), SpecificationError);
    EXPECT_THROW(model_from_config({{"label", "vonmises-truss"}, {"truss", {{"area", -1.0}}}}), SpecificationError);
}
