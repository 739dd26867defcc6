#include "snapbeam/oracles.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "snapbeam/analysis.hpp"
#include "snapbeam/errors.hpp"

namespace snapbeam {

namespace {

OracleResult judge(std::string name, double measured, double expected, double tolerance, std::string detail = {}) {
    OracleResult r{std::move(name), measured, expected, 0.0, tolerance, false, std::move(detail)};
    r.error = std::abs(measured - expected) / std::abs(expected);
    r.pass = std::isfinite(measured) && r.error <= tolerance;
    return r;
}

OracleResult failed(std::string name, double expected, double tolerance, const std::exception& e) {
    OracleResult r{std::move(name), std::nan(""), expected, std::nan(""), tolerance, false, e.what()};
    return r;
}

struct Loaded {
    std::unique_ptr<ReducedSystem> system;
    Eigen::VectorXd q;
};

// Equilibrium under end loads applied in `steps` equal increments.
Loaded load_steps(const BeamMesh& mesh, const std::vector<FixedDof>& fixed, const std::vector<NodalLoad>& loads,
                  int steps, const SolverSettings& settings) {
    Loaded out;
    for (int k = 1; k <= steps; ++k) {
        std::vector<NodalLoad> scaled = loads;
        for (auto& l : scaled) l.value *= static_cast<double>(k) / steps;
        out.system = std::make_unique<ReducedSystem>(mesh, Constraints{fixed, std::monostate{}, scaled});
        if (out.q.size() == 0) out.q = Eigen::VectorXd::Zero(out.system->size());
        out.q = newton_correct(*out.system, out.q, 0.0, settings).q;
    }
    return out;
}

// Deflection of the limit point, by golden-section search on the closed form.
double vonmises_limit_deflection(const VonMisesTruss& t) {
    // the reaction peaks before the apex reaches the span line
    double a = 0.0, b = t.rise;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (vonmises_reaction(t, c) > vonmises_reaction(t, d)) b = d;
        else a = c;
    }
    return 0.5 * (a + b);
}

}  // namespace

BeamMesh straight_beam_mesh(const StraightBeam& beam) {
    if (beam.elements < 1 || !(beam.length > 0.0)) throw SpecificationError("test beam needs length and elements");
    BeamMesh mesh;
    for (int i = 0; i <= beam.elements; ++i) mesh.nodes.push_back({beam.length * i / beam.elements, 0.0});
    mesh.materials.push_back({beam.youngs_modulus, 0.0});
    mesh.sections.push_back(Section::rectangle(beam.thickness, beam.depth));
    for (int i = 0; i < beam.elements; ++i) mesh.elements.push_back({i, i + 1, 0, 0, ElementKind::frame});
    mesh.tags = {{"root", 0}, {"end", beam.elements}};
    mesh.validate();
    return mesh;
}

OracleResult cantilever_oracle(const SolverSettings& settings, const StraightBeam& beam) {
    const double EI = beam.youngs_modulus * Section::rectangle(beam.thickness, beam.depth).second_moment;
    const double expected_scale = std::pow(beam.length, 3) / (3.0 * EI);
    // load giving a tip deflection of 1e-4 L keeps geometric effects negligible
    const double load = 1e-4 * beam.length / expected_scale;
    const double expected = load * expected_scale;
    try {
        const BeamMesh mesh = straight_beam_mesh(beam);
        const Loaded s = load_steps(mesh, {{0, 0}, {0, 1}, {0, 2}}, {{beam.elements, 1, -load}}, 1, settings);
        const double tip = -(s.system->position(beam.elements, s.q, 0.0).y);
        return judge("cantilever tip deflection", tip, expected, 0.01, "mm, F L^3 / 3EI");
    } catch (const Error& e) {
        return failed("cantilever tip deflection", expected, 0.01, e);
    }
}

OracleResult pure_bending_oracle(const SolverSettings& settings, const StraightBeam& beam) {
    const double EI = beam.youngs_modulus * Section::rectangle(beam.thickness, beam.depth).second_moment;
    const double angle = pi / 2.0;
    const double moment = EI * angle / beam.length;
    const double radius = beam.length / angle;
    const Vec2 exact{radius * std::sin(angle), radius * (1.0 - std::cos(angle))};
    OracleResult r;
    r.name = "pure bending tip position";
    r.expected = 0.0;
    r.tolerance = 0.005;
    r.detail = "|tip - arc end| / L, quarter circle";
    try {
        const BeamMesh mesh = straight_beam_mesh(beam);
        const Loaded s = load_steps(mesh, {{0, 0}, {0, 1}, {0, 2}}, {{beam.elements, 2, moment}}, 10, settings);
        const Vec2 tip = s.system->position(beam.elements, s.q, 0.0);
        r.measured = norm(tip - exact) / beam.length;
        r.error = r.measured;
        r.pass = std::isfinite(r.error) && r.error <= r.tolerance;
    } catch (const Error& e) {
        r.measured = r.error = std::nan("");
        r.detail = e.what();
    }
    return r;
}

OracleResult euler_buckling_oracle(const SolverSettings& settings, StraightBeam beam) {
    const double EI = beam.youngs_modulus * Section::rectangle(beam.thickness, beam.depth).second_moment;
    const double expected = pi * pi * EI / (beam.length * beam.length);
    const std::string name = "Euler buckling load";
    try {
        const BeamMesh mesh = straight_beam_mesh(beam);
        const std::vector<FixedDof> fixed{{0, 0}, {0, 1}, {beam.elements, 1}};
        // negative tangent eigenvalues of the compressed straight column at load p
        auto negatives = [&](double p) {
            const ReducedSystem sys(mesh, Constraints{fixed, std::monostate{}, {{beam.elements, 0, -p}}});
            const auto q = newton_correct(sys, Eigen::VectorXd::Zero(sys.size()), 0.0, settings).q;
            TangentFactor f;
            if (!f.factorize(sys.assemble(q, 0.0).tangent)) return 1;
            return f.negative_count();
        };
        double lo = 0.0, hi = EI / (beam.length * beam.length);
        while (negatives(hi) == 0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e6 * EI) throw ConvergenceError("column never lost stability", 0.0);
        }
        for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (negatives(mid) == 0 ? lo : hi) = mid;
        }
        return judge(name, 0.5 * (lo + hi), expected, 0.02, "N, pi^2 EI / L^2");
    } catch (const Error& e) {
        return failed(name, expected, 0.02, e);
    }
}

double vonmises_reaction(const VonMisesTruss& t, double w) {
    const double L0 = std::hypot(t.half_span, t.rise);
    const double l = std::hypot(t.half_span, t.rise - w);
    return 2.0 * t.youngs_modulus * t.area / L0 * (l - L0) * (w - t.rise) / l;
}

double vonmises_energy(const VonMisesTruss& t, double w) {
    const double L0 = std::hypot(t.half_span, t.rise);
    const double l = std::hypot(t.half_span, t.rise - w);
    return t.youngs_modulus * t.area / L0 * (l - L0) * (l - L0);
}

double vonmises_limit_load(const VonMisesTruss& t) { return vonmises_reaction(t, vonmises_limit_deflection(t)); }

namespace {

EquilibriumPath trace_truss(const SolverSettings& settings, const VonMisesTruss& truss) {
    const ScenarioModel m = vonmises_truss_model(truss);
    const ReducedSystem sys(m.mesh, m.constraints);
    TraceOptions opt;
    opt.stroke = m.stroke;
    opt.probe_node = m.probe_node;
    return arc_length_trace(sys, settings, opt);
}

}  // namespace

OracleResult vonmises_limit_oracle(const SolverSettings& settings, const VonMisesTruss& truss) {
    const double expected = vonmises_limit_load(truss);
    const std::string name = "von Mises truss limit load";
    try {
        const EquilibriumPath path = trace_truss(settings, truss);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& f : path.folds)
            if (f.kind == FoldKind::force_limit) best = std::max(best, path.points[f.index].reaction);
        OracleResult r = judge(name, best, expected, 0.01);
        const auto folds = path.count(FoldKind::force_limit);
        std::ostringstream detail;
        detail << "N; " << folds << " force-limit folds, trace " << to_string(path.status);
        r.detail = detail.str();
        r.pass = r.pass && folds == 2 && path.status == TraceStatus::complete;
        return r;
    } catch (const Error& e) {
        return failed(name, expected, 0.01, e);
    }
}

OracleResult vonmises_jump_oracle(const SolverSettings& settings, const VonMisesTruss& truss) {
    const std::string name = "von Mises truss load-control jump energy";
    const double fmax = vonmises_limit_load(truss);
    // landing: the far branch point with the same reaction, beyond the span line
    double lo = truss.rise, hi = truss.stroke;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (vonmises_reaction(truss, mid) < fmax ? lo : hi) = mid;
    }
    const double w_land = 0.5 * (lo + hi);
    const double w_dep = vonmises_limit_deflection(truss);
    const int n = 20000;
    double area = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w0 = w_dep + (w_land - w_dep) * i / n, w1 = w_dep + (w_land - w_dep) * (i + 1) / n;
        area += 0.5 * ((fmax - vonmises_reaction(truss, w0)) + (fmax - vonmises_reaction(truss, w1))) * (w1 - w0);
    }
    try {
        const EquilibriumPath path = trace_truss(settings, truss);
        const EmulatedCurve curve = emulate_load_control(path, 1.5 * fmax, false);
        if (curve.jumps.empty()) {
            OracleResult r{name, 0.0, area, 1.0, 0.01, false, "no jump found under load control"};
            return r;
        }
        return judge(name, curve.jumps.front().released_energy, area, 0.01, "N mm, trapezoid branch area");
    } catch (const Error& e) {
        return failed(name, area, 0.01, e);
    }
}

OracleResult energy_closure_oracle(const SolverSettings& settings, const VonMisesTruss& truss) {
    const std::string name = "energy-work identity";
    SolverSettings dense = settings;
    dense.max_arc_radius = std::min(settings.max_arc_radius, 0.05);
    dense.initial_arc_radius = std::min(settings.initial_arc_radius, dense.max_arc_radius);
    try {
        const EquilibriumPath path = trace_truss(dense, truss);
        double work = 0.0, scale = 0.0;
        for (std::size_t i = 1; i < path.points.size(); ++i) {
            const auto &a = path.points[i - 1], &b = path.points[i];
            work += 0.5 * (a.reaction + b.reaction) * (b.control - a.control);
            scale = std::max(scale, std::abs(b.energy));
        }
        OracleResult r{name, work, path.points.back().energy, 0.0, 1e-3, false,
                       "trapezoid work vs final strain energy, relative to the largest energy on the path"};
        r.error = std::abs(work - r.expected) / scale;
        r.pass = std::isfinite(r.error) && r.error <= r.tolerance && path.status == TraceStatus::complete;
        return r;
    } catch (const Error& e) {
        return failed(name, 0.0, 1e-3, e);
    }
}

std::vector<OracleResult> run_oracles(const SolverSettings& settings) {
    return {cantilever_oracle(settings),          pure_bending_oracle(settings), euler_buckling_oracle(settings),
            vonmises_limit_oracle(settings),      vonmises_jump_oracle(settings), energy_closure_oracle(settings)};
}

nlohmann::json to_json(const OracleResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"name", r.name},         {"measured", num(r.measured)}, {"expected", num(r.expected)},
            {"error", num(r.error)},  {"tolerance", r.tolerance},    {"pass", r.pass},
            {"detail", r.detail}};
}

}  // namespace snapbeam
