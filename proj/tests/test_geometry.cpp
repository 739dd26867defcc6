#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "snapbeam/errors.hpp"
#include "snapbeam/geometry.hpp"
#include "snapbeam/io.hpp"

using namespace snapbeam;

namespace {

// Largest |p[first + k] + p[last - k] - 2 c| over a point range with center c.
double point_symmetry_error(const Polyline& line, std::size_t first, std::size_t last) {
    const Vec2 c = 0.5 * (line[first] + line[last]);
    double worst = 0.0;
    for (std::size_t k = 0; first + k <= last; ++k) {
        const Vec2 d = line[first + k] + line[last - k] - 2.0 * c;
        worst = std::max(worst, norm(d));
    }
    return worst;
}

MetabeamSpec straight_metabeam() {
    MetabeamSpec spec = default_metabeam();
    spec.cell.spiral.sweep_angle = 0.0;
    return spec;
}

}  // namespace

TEST(Spiral, ZeroRadiusAtOrigin) {
    const Vec2 p = archimedean_point({0.0, 1.0, 2.0 * pi, Handedness::counterclockwise}, 0.0);
    EXPECT_DOUBLE_EQ(p.x, 0.0);
    EXPECT_DOUBLE_EQ(p.y, 0.0);
}

TEST(Spiral, HalfTurnEvaluation) {
    const Vec2 p = archimedean_point({2.0, 0.5, 2.0 * pi, Handedness::counterclockwise}, pi);
    EXPECT_NEAR(p.x, -(2.0 + 0.5 * pi), 1e-12);
    EXPECT_NEAR(p.y, 0.0, 1e-12);
    EXPECT_NEAR(p.x, -3.5708, 1e-4);
}

TEST(Spiral, HandednessMirrorsAboutXAxis) {
    const SpiralParams ccw{1.0, 1.0, 2.0 * pi, Handedness::counterclockwise};
    SpiralParams cw = ccw;
    cw.handedness = Handedness::clockwise;
    for (double t = 0.0; t <= 2.0 * pi; t += 0.1) {
        const Vec2 a = archimedean_point(ccw, t), b = archimedean_point(cw, t);
        EXPECT_NEAR(a.x, b.x, 1e-12);
        EXPECT_NEAR(a.y, -b.y, 1e-12);
    }
}

TEST(Spiral, RejectsBadParameters) {
    EXPECT_THROW(archimedean_point({-1.0, 1.0, pi, Handedness::clockwise}, 0.0), DomainError);
    EXPECT_THROW(archimedean_point({1.0, 0.0, pi, Handedness::clockwise}, 0.0), DomainError);
    EXPECT_THROW(archimedean_point({1.0, 1.0, pi, Handedness::clockwise}, 4.0), DomainError);
}

TEST(UnitCell, DefaultBoundingBoxIsEightByTen) {
    const Box b = bounding_box(build_unit_cell(default_unit_cell()));
    EXPECT_NEAR(b.width(), 8.0, 1e-6);
    EXPECT_NEAR(b.height(), 10.0, 1e-6);
}

TEST(UnitCell, PointSymmetricAboutCenter) {
    const Polyline cell = build_unit_cell(default_unit_cell());
    EXPECT_LT(point_symmetry_error(cell, 0, cell.size() - 1), 1e-9);
    const Vec2 c = 0.5 * (cell.front() + cell.back());
    EXPECT_NEAR(c.x, 0.0, 1e-12);
    EXPECT_NEAR(c.y, 0.0, 1e-12);

    UnitCellSpec other = default_unit_cell();
    other.spiral.sweep_angle = 2.0 * pi;
    other.spiral.handedness = Handedness::counterclockwise;
    const Polyline cell2 = build_unit_cell(other);
    EXPECT_LT(point_symmetry_error(cell2, 0, cell2.size() - 1), 1e-9);
}

TEST(UnitCell, CoilsKeepClearance) {
    const UnitCellSpec spec = default_unit_cell();
    EXPECT_GE(coil_gap(build_unit_cell(spec)), spec.coil_thickness + 0.2 - 1e-6);
}

TEST(UnitCell, ZeroSweepIsStraightPortToPortSegment) {
    UnitCellSpec spec = default_unit_cell();
    spec.spiral.sweep_angle = 0.0;
    const Polyline cell = build_unit_cell(spec);
    const Box b = bounding_box(cell);
    EXPECT_NEAR(arc_length(cell), spec.width, 1e-9);
    EXPECT_NEAR(b.height(), 0.0, 1e-12);
}

TEST(UnitCell, TightCoilsAreInfeasible) {
    UnitCellSpec spec = default_unit_cell();
    spec.spiral.sweep_angle = 8.0 * pi;
    spec.coil_thickness = 3.0;
    EXPECT_THROW(build_unit_cell(spec), Error);
}

TEST(Metabeam, DefaultEndToEndLength) {
    const BeamCenterline beam = chain_cells(default_metabeam());
    EXPECT_NEAR(norm(beam.points.back() - beam.points.front()), 56.0, 1e-6);
    EXPECT_EQ(beam.cells.size(), 6u);
}

TEST(Metabeam, SingleCellWithoutConnectors) {
    MetabeamSpec spec = default_metabeam();
    spec.cell_count = 1;
    spec.total_length = spec.cell.width;
    const BeamCenterline beam = chain_cells(spec);
    const Polyline cell = build_unit_cell(spec.cell);
    ASSERT_EQ(beam.points.size(), cell.size());
    for (std::size_t k = 0; k < cell.size(); ++k) EXPECT_LT(norm(beam.points[k] - (cell[k] - cell.front())), 1e-12);
}

TEST(Metabeam, EveryCellIsPointSymmetric) {
    const BeamCenterline beam = chain_cells(default_metabeam());
    ASSERT_EQ(beam.cells.size(), 6u);
    for (const auto& [first, last] : beam.cells) EXPECT_LT(point_symmetry_error(beam.points, first, last), 1e-9);
}

TEST(Metabeam, TooManyCellsIsInfeasible) {
    MetabeamSpec spec = default_metabeam();
    spec.cell_count = 8;
    EXPECT_THROW(chain_cells(spec), GeometryInfeasible);
}

TEST(Structure, DefaultSupportSpan) {
    const SnapStructureLayout layout = default_layout();
    const double span = layout.right_beam.back().x - layout.left_beam.back().x;
    EXPECT_NEAR(span, 2.0 * 56.0 * std::cos(35.0 * pi / 180.0), 1e-6);
    EXPECT_NEAR(span, 91.74, 0.01);
    EXPECT_NEAR(layout.inclination_angle, 35.0, 0.0);
    EXPECT_NEAR(layout.depth, 10.0, 0.0);
}

TEST(Structure, BeamsMirrorAboutCenterline) {
    const SnapStructureLayout layout = default_layout();
    ASSERT_EQ(layout.left_beam.size(), layout.right_beam.size());
    for (std::size_t k = 0; k < layout.left_beam.size(); ++k) {
        EXPECT_NEAR(layout.left_beam[k].x, -layout.right_beam[k].x, 1e-9);
        EXPECT_NEAR(layout.left_beam[k].y, layout.right_beam[k].y, 1e-9);
    }
}

TEST(Structure, AnchorsEightMillimetresApart) {
    const SnapStructureLayout layout = default_layout();
    ASSERT_EQ(layout.apex_block.anchors.size(), 2u);
    EXPECT_NEAR(norm(layout.apex_block.anchors[1] - layout.apex_block.anchors[0]), 8.0, 1e-12);
    EXPECT_NEAR(layout.apex_block.anchors[0].x, -4.0, 1e-12);
}

TEST(Structure, NearVerticalBeamsCloseTheSpan) {
    const MetabeamSpec spec = straight_metabeam();
    const BeamCenterline beam = chain_cells(spec);
    double previous = 1e9;
    for (double angle : {60.0, 80.0, 89.0, 89.99}) {
        const SnapStructureLayout layout = assemble_structure(beam, spec, angle, {-4.0, 4.0});
        const double span = layout.right_beam.back().x - layout.left_beam.back().x;
        EXPECT_LT(span, previous);
        previous = span;
    }
    EXPECT_LT(previous, 0.05);
}

TEST(Structure, RejectsAnchorOutsideBlock) {
    const MetabeamSpec spec = default_metabeam();
    EXPECT_THROW(assemble_structure(chain_cells(spec), spec, 35.0, {-7.0, 4.0}), DomainError);
}

TEST(Structure, MirroredLayoutSwapsBeams) {
    const SnapStructureLayout layout = default_layout();
    const SnapStructureLayout m = mirrored(layout);
    for (std::size_t k = 0; k < layout.left_beam.size(); ++k)
        EXPECT_LT(norm(m.left_beam[k] - layout.left_beam[k]), 1e-9);
    EXPECT_DOUBLE_EQ(m.anchor_offsets[0], 4.0);
}

TEST(Svg, ViewBoxKeepsMargin) {
    const SnapStructureLayout layout = default_layout();
    const std::string svg = layout_svg(layout);
    const auto at = svg.find("viewBox=\"");
    ASSERT_NE(at, std::string::npos);
    double x = 0, y = 0, w = 0, h = 0;
    ASSERT_EQ(std::sscanf(svg.c_str() + at + 9, "%lf %lf %lf %lf", &x, &y, &w, &h), 4);
    Polyline all = layout.left_beam;
    all.insert(all.end(), layout.right_beam.begin(), layout.right_beam.end());
    const Box b = bounding_box(all);
    // SVG y is flipped: the view spans [-y_top, -y_top + h]
    EXPECT_LE(x, b.lo.x - 2.0);
    EXPECT_GE(x + w, b.hi.x + 2.0);
    EXPECT_LE(y, -b.hi.y - 2.0);
    EXPECT_GE(y + h, -b.lo.y + 2.0);
}

TEST(Svg, EmptyPolylineFailsWithoutWriting) {
    SnapStructureLayout layout = default_layout();
    layout.left_beam.clear();
    const auto path = std::filesystem::temp_directory_path() / "snapbeam_empty_layout.svg";
    std::filesystem::remove(path);
    EXPECT_THROW(export_layout_svg(layout, path), DomainError);
    EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(Svg, Deterministic) {
    const auto dir = std::filesystem::temp_directory_path();
    export_layout_svg(default_layout(), dir / "snapbeam_a.svg");
    export_layout_svg(default_layout(), dir / "snapbeam_b.svg");
    EXPECT_EQ(read_file(dir / "snapbeam_a.svg"), read_file(dir / "snapbeam_b.svg"));
}

TEST(Json, LayoutRoundTrip) {
    const SnapStructureLayout layout = default_layout();
    const nlohmann::json j = layout;
    const SnapStructureLayout back = j.get<SnapStructureLayout>();
    ASSERT_EQ(back.left_beam.size(), layout.left_beam.size());
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}
