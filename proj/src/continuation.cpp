#include "snapbeam/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "snapbeam/errors.hpp"
#include "snapbeam/io.hpp"

namespace snapbeam {

void SolverSettings::validate() const {
    if (!(residual_tol > 0.0) || max_newton_iters <= 0 || !(initial_arc_radius > 0.0) || !(min_arc_radius > 0.0) ||
        !(max_arc_radius > 0.0) || target_iters <= 0 || max_steps <= 0 || !(fold_resolution > 0.0) ||
        !(max_update > 0.0))
        throw SpecificationError("solver settings must all be positive");
    if (min_arc_radius > max_arc_radius) throw SpecificationError("min arc radius exceeds max arc radius");
}

std::size_t EquilibriumPath::count(FoldKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(folds.begin(), folds.end(), [kind](const Fold& f) { return f.kind == kind; }));
}

bool TangentFactor::factorize(const Eigen::SparseMatrix<double>& k) {
    if (!analyzed_) {
        ldlt_.analyzePattern(k);
        analyzed_ = true;
    }
    ldlt_.factorize(k);
    if (ldlt_.info() != Eigen::Success) return false;
    const Eigen::VectorXd d = ldlt_.vectorD();
    negatives_ = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) return false;
        if (d[i] < 0.0) ++negatives_;
        lo = std::min(lo, std::abs(d[i]));
        hi = std::max(hi, std::abs(d[i]));
    }
    pivot_ratio_ = hi > 0.0 ? lo / hi : 0.0;
    return lo > 0.0;
}

Eigen::VectorXd TangentFactor::solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }

double convergence_tolerance(const ReducedSystem& system, const SolverSettings& settings, const Eigen::VectorXd& q,
                             double control) {
    const double scale = std::max({1.0, std::abs(control), q.size() ? q.lpNorm<Eigen::Infinity>() : 0.0});
    const double stiffness = system.reference_force() / 1e-6;
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(q.size())) *
                         stiffness * scale;
    return std::max(settings.residual_tol * system.reference_force(), floor);
}

NewtonResult newton_correct(const ReducedSystem& system, const Eigen::VectorXd& q0, double control,
                            const SolverSettings& settings) {
    settings.validate();
    NewtonResult out{q0, 0, 0.0};
    TangentFactor factor;
    for (int it = 0;; ++it) {
        const Assembly a = system.assemble(out.q, control);
        out.residual = a.residual.norm();
        out.iterations = it;
        if (!std::isfinite(out.residual)) throw ConvergenceError("residual is not finite", out.residual);
        if (out.residual <= convergence_tolerance(system, settings, out.q, control)) return out;
        if (it >= settings.max_newton_iters) {
            std::ostringstream msg;
            msg << "Newton did not converge in " << settings.max_newton_iters << " iterations (residual "
                << out.residual << " N)";
            throw ConvergenceError(msg.str(), out.residual);
        }
        if (!factor.factorize(a.tangent) || factor.pivot_ratio() < 1e-13)
            throw FoldSingularity("tangent is singular at fixed control; switch to arc-length continuation");
        const Eigen::VectorXd dq = factor.solve(-a.residual);
        if (!dq.allFinite() || dq.lpNorm<Eigen::Infinity>() > settings.max_update) {
            std::ostringstream msg;
            msg << "Newton correction left the trust bound (|dq| = " << dq.lpNorm<Eigen::Infinity>()
                << "); the control is likely beyond a displacement limit";
            throw ConvergenceError(msg.str(), out.residual);
        }
        out.q += dq;
    }
}

namespace {

// Converged point plus everything the tracer needs from its tangent.
struct Solved {
    Eigen::VectorXd q;
    double lambda{0.0};
    Assembly assembly;
    int iterations{0};
    int negative_eigs{0};
    Eigen::VectorXd tangent_q;  // unit tangent (q part), orientation not yet fixed
    double tangent_lambda{1.0};
};

class Tracer {
public:
    Tracer(const ReducedSystem& system, const SolverSettings& settings)
        : sys_(system), set_(settings) {}

    // Factorize at a converged state, fill inertia and unit tangent.
    bool finish(Solved& s) {
        if (!factor_.factorize(s.assembly.tangent)) {
            // exactly singular pivot: nudge by the smallest representable shift so inertia stays defined
            Eigen::SparseMatrix<double> k = s.assembly.tangent;
            for (int i = 0; i < k.rows(); ++i) k.coeffRef(i, i) += 1e-12 * sys_.reference_force();
            if (!factor_.factorize(k)) return false;
        }
        s.negative_eigs = factor_.negative_count();
        const Eigen::VectorXd db = factor_.solve(-s.assembly.control_coupling);
        if (!db.allFinite()) return false;
        const double n = std::sqrt(db.squaredNorm() + 1.0);
        s.tangent_q = db / n;
        s.tangent_lambda = 1.0 / n;
        return true;
    }

    // Arc-length corrector on a cylinder of radius r about `base`, predictor along `dir`.
    std::optional<Solved> correct(const Eigen::VectorXd& q0, double l0, const Eigen::VectorXd& dir_q, double dir_l,
                                  double r) {
        Eigen::VectorXd dq = r * dir_q;
        double dl = r * dir_l;
        for (int it = 0; it <= set_.max_newton_iters; ++it) {
            Solved s;
            s.assembly = sys_.assemble(q0 + dq, l0 + dl);
            const double res = s.assembly.residual.norm();
            if (!std::isfinite(res)) return std::nullopt;
            if (res <= convergence_tolerance(sys_, set_, q0 + dq, l0 + dl)) {
                s.q = q0 + dq;
                s.lambda = l0 + dl;
                s.iterations = it;
                return s;
            }
            if (it == set_.max_newton_iters) break;
            if (!factor_.factorize(s.assembly.tangent)) return std::nullopt;
            const Eigen::VectorXd da = factor_.solve(-s.assembly.residual);
            const Eigen::VectorXd db = factor_.solve(-s.assembly.control_coupling);
            if (!da.allFinite() || !db.allFinite()) return std::nullopt;
            const Eigen::VectorXd w = dq + da;
            const double a1 = db.squaredNorm() + 1.0;
            const double a2 = 2.0 * (w.dot(db) + dl);
            const double a3 = w.squaredNorm() + dl * dl - r * r;
            double disc = a2 * a2 - 4.0 * a1 * a3;
            if (disc < 0.0) {
                // no intersection with the cylinder: take the closest point if the miss is tiny
                if (disc < -1e-6 * a2 * a2) return std::nullopt;
                disc = 0.0;
            }
            const double sq = std::sqrt(disc);
            const double roots[2] = {(-a2 + sq) / (2.0 * a1), (-a2 - sq) / (2.0 * a1)};
            double best = 0.0, best_dot = -std::numeric_limits<double>::infinity();
            for (double mu : roots) {
                const Eigen::VectorXd cand = w + mu * db;
                const double d = cand.dot(dq) + (dl + mu) * dl;
                if (d > best_dot) {
                    best_dot = d;
                    best = mu;
                }
            }
            const Eigen::VectorXd next = w + best * db;
            if ((next - dq).lpNorm<Eigen::Infinity>() > set_.max_update) return std::nullopt;
            dq = next;
            dl += best;
        }
        return std::nullopt;
    }

    TangentFactor& factor() { return factor_; }

private:
    const ReducedSystem& sys_;
    const SolverSettings& set_;
    TangentFactor factor_;
};

PathPoint make_point(const ReducedSystem& sys, const Solved& s, double arc, int probe, double slope) {
    PathPoint p;
    p.control = s.lambda;
    p.q = s.q;
    p.reaction = s.assembly.reaction;
    p.negative_eigs = s.negative_eigs;
    p.arc_coordinate = arc;
    p.energy = s.assembly.energy;
    p.reaction_slope = slope;
    if (probe >= 0) {
        p.probe = sys.position(probe, s.q, s.lambda);
        p.probe_rotation = sys.rotation(probe, s.q, s.lambda);
    }
    return p;
}

// dF/ds along the oriented tangent
double reaction_rate(const Solved& s, const Eigen::VectorXd& tq, double tl) {
    return s.assembly.control_coupling.dot(tq) + s.assembly.reaction_stiffness * tl;
}

double slope_of(const Solved& s, const Eigen::VectorXd& tq, double tl) {
    const double rate = reaction_rate(s, tq, tl);
    if (std::abs(tl) < 1e-300) return rate > 0 ? std::numeric_limits<double>::infinity()
                                               : -std::numeric_limits<double>::infinity();
    return rate / tl;
}

}  // namespace

EquilibriumPath arc_length_trace(const ReducedSystem& system, const SolverSettings& settings,
                                 const TraceOptions& options) {
    settings.validate();
    if (!system.has_control()) throw SpecificationError("arc-length trace needs a control parameter");
    Tracer tr(system, settings);
    EquilibriumPath path;

    Solved cur;
    {
        const NewtonResult rest = newton_correct(system, Eigen::VectorXd::Zero(system.size()), 0.0, settings);
        cur.q = rest.q;
        cur.lambda = 0.0;
        cur.assembly = system.assemble(cur.q, 0.0);
        if (!tr.finish(cur)) throw FoldSingularity("tangent singular at the rest state");
    }
    // first direction: increasing control
    Eigen::VectorXd tq = cur.tangent_q;
    double tl = cur.tangent_lambda;
    path.points.push_back(make_point(system, cur, 0.0, options.probe_node, slope_of(cur, tq, tl)));

    Eigen::VectorXd prev_dq = tq;
    double prev_dl = tl;
    double r = std::clamp(settings.initial_arc_radius, settings.min_arc_radius, settings.max_arc_radius);
    double arc = 0.0;
    int steps = 0;

    auto orient = [](const Solved& s, const Eigen::VectorXd& inc_q, double inc_l, Eigen::VectorXd& oq, double& ol) {
        oq = s.tangent_q;
        ol = s.tangent_lambda;
        if (oq.dot(inc_q) + ol * inc_l < 0.0) {
            oq = -oq;
            ol = -ol;
        }
    };

    while (true) {
        const PathPoint& last = path.points.back();
        if (last.control >= options.stroke && last.negative_eigs == 0) {
            path.status = TraceStatus::complete;
            break;
        }
        if (steps >= settings.max_steps) {
            path.status = TraceStatus::max_steps;
            path.message = "maximum number of steps reached before the stroke";
            break;
        }
        ++steps;

        std::optional<Solved> next;
        while (true) {
            next = tr.correct(cur.q, cur.lambda, tq, tl, r);
            if (next) {
                const Eigen::VectorXd inc = next->q - cur.q;
                const double inc_l = next->lambda - cur.lambda;
                // reject steps that double back on the previous increment
                if (inc.dot(prev_dq) + inc_l * prev_dl > 0.0 && tr.finish(*next)) break;
                next.reset();
            }
            r *= 0.5;
            if (r < settings.min_arc_radius) break;
        }
        if (!next) {
            path.status = TraceStatus::stalled;
            std::ostringstream msg;
            msg << "arc-length radius underflow at control " << cur.lambda << " mm";
            path.message = msg.str();
            break;
        }

        const Eigen::VectorXd inc_q = next->q - cur.q;
        const double inc_l = next->lambda - cur.lambda;
        Eigen::VectorXd nq;
        double nl = 0.0;
        orient(*next, inc_q, inc_l, nq, nl);

        // fold refinement by bisection on the step radius
        struct Refined {
            double s;
            FoldKind kind;
        };
        std::vector<Refined> refine;
        const double rate0 = reaction_rate(cur, tq, tl);
        const double rate1 = reaction_rate(*next, nq, nl);
        const bool disp_fold = (tl > 0.0) != (nl > 0.0);
        const bool force_fold = (rate0 > 0.0) != (rate1 > 0.0) && rate0 != 0.0;
        auto locate = [&](FoldKind kind) {
            const bool sign0 = kind == FoldKind::displacement_limit ? tl > 0.0 : rate0 > 0.0;
            double lo = 0.0, hi = r;
            while (hi - lo > settings.fold_resolution) {
                const double mid = 0.5 * (lo + hi);
                auto trial = tr.correct(cur.q, cur.lambda, tq, tl, mid);
                if (!trial || !tr.finish(*trial)) break;
                Eigen::VectorXd oq;
                double ol = 0.0;
                orient(*trial, trial->q - cur.q, trial->lambda - cur.lambda, oq, ol);
                const bool sign = kind == FoldKind::displacement_limit ? ol > 0.0 : reaction_rate(*trial, oq, ol) > 0.0;
                (sign == sign0 ? lo : hi) = mid;
            }
            refine.push_back({0.5 * (lo + hi), kind});
        };
        if (disp_fold) locate(FoldKind::displacement_limit);
        if (force_fold) locate(FoldKind::force_limit);
        std::sort(refine.begin(), refine.end(), [](const Refined& a, const Refined& b) { return a.s < b.s; });
        for (const auto& f : refine) {
            auto trial = tr.correct(cur.q, cur.lambda, tq, tl, f.s);
            if (!trial || !tr.finish(*trial)) {
                // fall back to logging the fold at the step end point
                path.folds.push_back({path.points.size(), f.kind});
                continue;
            }
            Eigen::VectorXd oq;
            double ol = 0.0;
            orient(*trial, trial->q - cur.q, trial->lambda - cur.lambda, oq, ol);
            const double s_arc = arc + f.s;
            if (s_arc <= path.points.back().arc_coordinate) continue;
            path.folds.push_back({path.points.size(), f.kind});
            path.points.push_back(make_point(system, *trial, s_arc, options.probe_node, slope_of(*trial, oq, ol)));
        }

        arc += r;
        cur = std::move(*next);
        tq = nq;
        tl = nl;
        prev_dq = inc_q;
        prev_dl = inc_l;
        path.points.push_back(make_point(system, cur, arc, options.probe_node, slope_of(cur, tq, tl)));

        const double ratio = static_cast<double>(settings.target_iters) / std::max(cur.iterations, 1);
        r = std::clamp(r * std::sqrt(ratio), settings.min_arc_radius, settings.max_arc_radius);
    }

    // a fold recorded at the final point is not interior; drop it
    std::erase_if(path.folds, [&](const Fold& f) { return f.index == 0 || f.index + 1 >= path.points.size(); });

    for (std::size_t i = 1; i < path.points.size(); ++i) {
        if (path.points[i].negative_eigs == path.points[i - 1].negative_eigs) continue;
        const bool near_fold = std::any_of(path.folds.begin(), path.folds.end(), [&](const Fold& f) {
            return f.kind == FoldKind::displacement_limit && (f.index == i || f.index + 1 == i);
        });
        if (!near_fold) path.bifurcations.push_back(i);
    }
    return path;
}

std::vector<FreeEquilibrium> find_free_equilibria(const ReducedSystem& system, const EquilibriumPath& path,
                                                  const SolverSettings& settings) {
    std::vector<FreeEquilibrium> out;
    if (path.points.empty()) return out;
    const PathPoint& rest = path.points.front();
    FreeEquilibrium r0;
    r0.path_position = 0.0;
    r0.control = rest.control;
    r0.energy = rest.energy;
    r0.q = rest.q;
    r0.negative_eigs = rest.negative_eigs;
    r0.reaction_slope = rest.reaction_slope;
    r0.stable = rest.negative_eigs == 0 && rest.reaction_slope > 0.0;
    out.push_back(r0);

    Tracer tr(system, settings);
    for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
        const PathPoint& a = path.points[i];
        const PathPoint& b = path.points[i + 1];
        // rest point itself is already recorded; a sign change must be strict
        const bool change = (a.reaction > 0.0 && b.reaction <= 0.0 && !(b.reaction == 0.0 && i + 2 == path.points.size())) ||
                            (a.reaction < 0.0 && b.reaction >= 0.0);
        if (!change || (i == 0 && a.reaction == 0.0)) continue;

        FreeEquilibrium fe;
        const bool sign_a = a.reaction > 0.0;
        bool refined = false;
        if (a.q.size() == system.size() && b.q.size() == system.size()) {
            // bisection on the arc radius about point a, along the chord direction to b
            Eigen::VectorXd dq = b.q - a.q;
            double dl = b.control - a.control;
            const double len = std::sqrt(dq.squaredNorm() + dl * dl);
            if (len > 0.0) {
                dq /= len;
                dl /= len;
                double lo = 0.0, hi = len;
                std::optional<Solved> best;
                for (int it = 0; it < 60 && hi - lo > 1e-10 * (1.0 + len); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    auto s = tr.correct(a.q, a.control, dq, dl, mid);
                    if (!s) break;
                    ((s->assembly.reaction > 0.0) == sign_a ? lo : hi) = mid;
                    best = std::move(s);
                }
                if (best && tr.finish(*best)) {
                    Eigen::VectorXd oq = best->tangent_q;
                    double ol = best->tangent_lambda;
                    if (oq.dot(dq) + ol * dl < 0.0) {
                        oq = -oq;
                        ol = -ol;
                    }
                    fe.q = best->q;
                    fe.control = best->lambda;
                    fe.energy = best->assembly.energy;
                    fe.negative_eigs = best->negative_eigs;
                    fe.reaction_slope = slope_of(*best, oq, ol);
                    const double t = 0.5 * (lo + hi) / len;
                    fe.path_position = static_cast<double>(i) + std::clamp(t, 0.0, 1.0);
                    refined = true;
                }
            }
        }
        if (!refined) {
            // scalar-only path: linear interpolation of the reaction
            const double t = a.reaction / (a.reaction - b.reaction);
            fe.path_position = static_cast<double>(i) + t;
            fe.control = a.control + t * (b.control - a.control);
            fe.energy = a.energy + t * (b.energy - a.energy);
            fe.negative_eigs = std::max(a.negative_eigs, b.negative_eigs);
            fe.reaction_slope = (b.reaction - a.reaction) / (b.control - a.control);
        }
        fe.stable = fe.negative_eigs == 0 && fe.reaction_slope > 0.0;
        out.push_back(std::move(fe));
    }
    return out;
}

double residual_norm(const ReducedSystem& system, const PathPoint& point) {
    return system.assemble(point.q, point.control).residual.norm();
}

// ---------------------------------------------------------------------------
// persistence

std::string to_string(FoldKind kind) {
    return kind == FoldKind::force_limit ? "force_limit" : "displacement_limit";
}

std::string to_string(TraceStatus status) {
    switch (status) {
        case TraceStatus::complete: return "complete";
        case TraceStatus::max_steps: return "max_steps";
        case TraceStatus::stalled: return "stalled";
    }
    return "unknown";
}

std::string path_csv(const EquilibriumPath& path) {
    std::ostringstream out;
    out << "arc_coordinate,control_mm,reaction_N,negative_eigs,tip_x_mm,tip_y_mm\n";
    for (const auto& p : path.points)
        out << fmt_num(p.arc_coordinate, 9) << ',' << fmt_num(p.control, 12) << ',' << fmt_num(p.reaction, 12) << ','
            << p.negative_eigs << ',' << fmt_num(p.probe.x, 12) << ',' << fmt_num(p.probe.y, 12) << '\n';
    return out.str();
}

nlohmann::json path_summary_json(const EquilibriumPath& path) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : path.folds) {
        const auto& p = path.points[f.index];
        folds.push_back({{"index", f.index},
                         {"kind", to_string(f.kind)},
                         {"control_mm", p.control},
                         {"reaction_N", p.reaction}});
    }
    nlohmann::json extra = nlohmann::json::array();
    for (const auto& p : path.points)
        extra.push_back({p.energy, p.reaction_slope, p.probe_rotation});
    return {{"status", to_string(path.status)},
            {"message", path.message},
            {"point_count", path.points.size()},
            {"folds", folds},
            {"bifurcations", path.bifurcations},
            {"point_data_columns", {"energy_Nmm", "reaction_slope_N_per_mm", "tip_rotation_rad"}},
            {"point_data", extra}};
}

void to_json(nlohmann::json& j, const SolverSettings& s) {
    j = {{"residual_tol", s.residual_tol},
         {"max_newton_iters", s.max_newton_iters},
         {"initial_arc_radius", s.initial_arc_radius},
         {"radius_bounds", {s.min_arc_radius, s.max_arc_radius}},
         {"target_iters", s.target_iters},
         {"max_steps", s.max_steps},
         {"fold_resolution", s.fold_resolution},
         {"max_update", s.max_update}};
}

void from_json(const nlohmann::json& j, SolverSettings& s) {
    static const char* const keys[] = {"residual_tol", "max_newton_iters", "initial_arc_radius", "radius_bounds",
                                       "target_iters", "max_steps",        "fold_resolution",    "max_update"};
    if (!j.is_object()) throw SpecificationError("solver settings must be a JSON object");
    for (const auto& item : j.items())
        if (std::find(std::begin(keys), std::end(keys), item.key()) == std::end(keys))
            throw SpecificationError("unknown solver key '" + item.key() + "'");
    s = SolverSettings{};
    s.residual_tol = j.value("residual_tol", s.residual_tol);
    s.max_newton_iters = j.value("max_newton_iters", s.max_newton_iters);
    s.initial_arc_radius = j.value("initial_arc_radius", s.initial_arc_radius);
    if (j.contains("radius_bounds")) {
        s.min_arc_radius = j.at("radius_bounds").at(0).get<double>();
        s.max_arc_radius = j.at("radius_bounds").at(1).get<double>();
    }
    s.target_iters = j.value("target_iters", s.target_iters);
    s.max_steps = j.value("max_steps", s.max_steps);
    s.fold_resolution = j.value("fold_resolution", s.fold_resolution);
    s.max_update = j.value("max_update", s.max_update);
    s.validate();
}

EquilibriumPath read_path_csv(const std::string& text) {
    EquilibriumPath path;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("arc_coordinate,control_mm,reaction_N", 0) != 0)
        throw IoError("path CSV header missing or unexpected");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        double v[6];
        for (int k = 0; k < 6; ++k) {
            if (!std::getline(row, cell, ',')) throw IoError("path CSV row has fewer than 6 columns");
            try {
                v[k] = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("path CSV holds a non-numeric value: " + cell);
            }
        }
        PathPoint p;
        p.arc_coordinate = v[0];
        p.control = v[1];
        p.reaction = v[2];
        p.negative_eigs = static_cast<int>(v[3]);
        p.probe = {v[4], v[5]};
        path.points.push_back(std::move(p));
    }
    return path;
}

EquilibriumPath read_path_artifacts(const std::string& csv_text, const nlohmann::json& summary) {
    EquilibriumPath path = read_path_csv(csv_text);
    try {
        const auto& data = summary.at("point_data");
        if (data.size() != path.points.size()) throw IoError("path summary and CSV disagree on the point count");
        for (std::size_t i = 0; i < data.size(); ++i) {
            path.points[i].energy = data[i].at(0).get<double>();
            path.points[i].reaction_slope = data[i].at(1).get<double>();
            path.points[i].probe_rotation = data[i].at(2).get<double>();
        }
        for (const auto& f : summary.at("folds")) {
            const auto kind = f.at("kind").get<std::string>();
            if (kind != "force_limit" && kind != "displacement_limit") throw IoError("unknown fold kind " + kind);
            const auto index = f.at("index").get<std::size_t>();
            if (index >= path.points.size()) throw IoError("fold index out of range");
            path.folds.push_back({index, kind == "force_limit" ? FoldKind::force_limit : FoldKind::displacement_limit});
        }
        path.bifurcations = summary.at("bifurcations").get<std::vector<std::size_t>>();
        const auto status = summary.at("status").get<std::string>();
        if (status == "complete") path.status = TraceStatus::complete;
        else if (status == "max_steps") path.status = TraceStatus::max_steps;
        else if (status == "stalled") path.status = TraceStatus::stalled;
        else throw IoError("unknown trace status " + status);
        path.message = summary.value("message", "");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("path summary is malformed: ") + e.what());
    }
    return path;
}

}  // namespace snapbeam
