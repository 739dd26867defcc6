#include "snapbeam/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "snapbeam/io.hpp"

namespace snapbeam {

std::vector<CurveSample> EmulatedCurve::phase(Phase p) const {
    std::vector<CurveSample> out;
    for (const auto& s : samples)
        if (s.phase == p) out.push_back(s);
    return out;
}

namespace {

// Point on the path at segment k, fraction t, with its trapezoidal work.
struct Located {
    int k{0};
    double t{0.0};
    double lambda{0.0};
    double force{0.0};
    double energy{0.0};
    Vec2 tip{};
    double rotation{0.0};
};

class Walker {
public:
    Walker(const EquilibriumPath& path, ControlMode mode) : p_(path.points), mode_(mode) {
        if (p_.size() < 2) throw SpecificationError("path needs at least two points to emulate");
    }

    int size() const { return static_cast<int>(p_.size()); }

    // driven coordinate
    double x(int i) const { return mode_ == ControlMode::displacement ? p_[i].control : p_[i].reaction; }

    bool stable_vertex(int i) const { return p_[i].negative_eigs == 0; }

    bool stable_segment(int k) const {
        if (!stable_vertex(k) || !stable_vertex(k + 1)) return false;
        if (mode_ == ControlMode::load) {
            const double dl = p_[k + 1].control - p_[k].control, df = p_[k + 1].reaction - p_[k].reaction;
            return dl * df > 0.0;
        }
        return true;
    }

    Located at(int k, double t) const {
        Located L;
        if (k == size() - 1) {
            k = size() - 2;
            t = 1.0;
        }
        L.k = k;
        L.t = t;
        const auto& a = p_[k];
        const auto& b = p_[k + 1];
        L.lambda = a.control + t * (b.control - a.control);
        L.force = a.reaction + t * (b.reaction - a.reaction);
        // cubic Hermite in t: the reaction is the derivative of the strain energy
        const double dl = b.control - a.control;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        L.energy = h00 * a.energy + h10 * dl * a.reaction + h01 * b.energy + h11 * dl * b.reaction;
        L.tip = a.probe + t * (b.probe - a.probe);
        L.rotation = a.probe_rotation + t * (b.probe_rotation - a.probe_rotation);
        return L;
    }

    // Energy whose decrease drives a jump: strain energy under displacement
    // control, total potential under load control.
    double potential(const Located& L) const {
        return mode_ == ControlMode::displacement ? L.energy : L.energy - L.force * L.lambda;
    }
    double driven(const Located& L) const { return mode_ == ControlMode::displacement ? L.lambda : L.force; }
    double other(const Located& L) const { return mode_ == ControlMode::displacement ? L.force : L.lambda; }

    ControlMode mode() const { return mode_; }

private:
    const std::vector<PathPoint>& p_;
    ControlMode mode_;
};

CurveSample sample_of(const Located& L, Phase phase) {
    return {L.lambda, L.force, phase, L.k + L.t, L.tip, L.rotation};
}

// Cursor on the path: position plus direction of travel in point index.
struct Cursor {
    Located at;
    int dir{1};
};

// Walk one phase; `sign` is +1 when the driven quantity increases.
Cursor walk(const Walker& w, Cursor cur, double sign, double target, Phase phase, EmulatedCurve& curve) {
    const int n = w.size();
    const double tol_x = 1e-12 * (1.0 + std::abs(target));
    curve.samples.push_back(sample_of(cur.at, phase));
    for (int guard = 0; guard < 4 * n + 16; ++guard) {
        if ((w.driven(cur.at) - target) * sign >= -tol_x) return cur;

        // candidate next vertex along the current direction
        const bool on_vertex = cur.at.t == 0.0 || cur.at.t == 1.0;
        const int here = cur.at.t == 1.0 ? cur.at.k + 1 : cur.at.k;
        int next, seg;
        if (cur.dir > 0) {
            next = on_vertex ? here + 1 : cur.at.k + 1;
            seg = next - 1;
        } else {
            next = on_vertex ? here - 1 : cur.at.k;
            seg = next;
        }
        const bool ok = next >= 0 && next < n && w.stable_segment(seg) &&
                        (w.x(next) - w.driven(cur.at)) * sign > 0.0;
        if (ok) {
            if ((w.x(next) - target) * sign >= 0.0) {
                const double x0 = w.x(seg), x1 = w.x(seg + 1);
                const double t = std::clamp((target - x0) / (x1 - x0), 0.0, 1.0);
                cur.at = w.at(seg, t);
                curve.samples.push_back(sample_of(cur.at, phase));
                return cur;
            }
            cur.at = w.at(next, 0.0);
            curve.samples.push_back(sample_of(cur.at, phase));
            continue;
        }

        // the stable branch ends: jump at constant driven value to the nearest
        // stable branch point with lower potential
        const double xd = w.driven(cur.at);
        const double phi = w.potential(cur.at);
        std::optional<Cursor> best;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int k = 0; k + 1 < n; ++k) {
            if (on_vertex ? (k == here || k == here - 1) : k == cur.at.k) continue;
            if (!w.stable_segment(k)) continue;
            const double x0 = w.x(k), x1 = w.x(k + 1);
            if (x0 == x1 || xd < std::min(x0, x1) || xd > std::max(x0, x1)) continue;
            const Located land = w.at(k, (xd - x0) / (x1 - x0));
            if (!(w.potential(land) < phi - 1e-12 * (1.0 + std::abs(phi)))) continue;
            const double gap = std::abs(w.other(land) - w.other(cur.at));
            if (gap < best_gap) {
                best_gap = gap;
                best = Cursor{land, (x1 - x0) * sign > 0.0 ? 1 : -1};
            }
        }
        if (!best) {
            std::ostringstream msg;
            msg << "no stable landing branch at " << (w.mode() == ControlMode::displacement ? "control " : "force ")
                << xd << " during " << to_string(phase);
            throw EmulationIncompleteCurve(msg.str(), curve);
        }
        Jump j;
        j.control_before = cur.at.lambda;
        j.control_after = best->at.lambda;
        j.force_before = cur.at.force;
        j.force_after = best->at.force;
        j.released_energy = phi - w.potential(best->at);
        j.phase = phase;
        j.path_from = cur.at.k + cur.at.t;
        j.path_to = best->at.k + best->at.t;
        curve.jumps.push_back(j);
        cur = *best;
        curve.samples.push_back(sample_of(cur.at, phase));
    }
    throw EmulationIncompleteCurve("emulation did not terminate (path revisits its branches)", curve);
}

EmulatedCurve emulate(const EquilibriumPath& path, ControlMode mode, double extent, bool full_cycle) {
    if (!(extent > 0.0)) throw SpecificationError("emulation extent must be > 0");
    const Walker w(path, mode);
    EmulatedCurve curve;
    curve.mode = mode;
    Cursor cur{w.at(0, 0.0), 1};
    if (!(w.x(1) > w.x(0))) throw SpecificationError("path must start with an increasing driven quantity");
    cur = walk(w, cur, 1.0, extent, Phase::loading, curve);
    if (full_cycle) {
        cur.dir = -cur.dir;
        walk(w, cur, -1.0, 0.0, Phase::unloading, curve);
    }
    return curve;
}

}  // namespace

EmulatedCurve emulate_displacement_control(const EquilibriumPath& path, double stroke, bool full_cycle) {
    const double reach = path.points.empty() ? 0.0 : std::max_element(path.points.begin(), path.points.end(),
                                                                       [](const auto& a, const auto& b) {
                                                                           return a.control < b.control;
                                                                       })->control;
    if (reach < stroke - 1e-9) throw SpecificationError("path does not reach the requested stroke");
    return emulate(path, ControlMode::displacement, stroke, full_cycle);
}

EmulatedCurve emulate_load_control(const EquilibriumPath& path, double max_force, bool full_cycle) {
    return emulate(path, ControlMode::load, max_force, full_cycle);
}

double critical_force(const EmulatedCurve& curve) {
    std::vector<CurveSample> load = curve.phase(Phase::loading);
    if (load.empty()) throw SpecificationError("curve has no loading phase");
    // first jump onset bounds the search
    double limit = std::numeric_limits<double>::infinity();
    double jump_force = 0.0;
    for (const auto& j : curve.jumps)
        if (j.phase == Phase::loading) {
            limit = j.path_from;
            jump_force = j.force_before;
            break;
        }
    for (std::size_t i = 1; i + 1 < load.size(); ++i) {
        if (load[i].path_position > limit) break;
        if (load[i].force > load[i - 1].force && load[i].force >= load[i + 1].force) {
            // a jump leaving from this very sample is the same event
            return load[i].force;
        }
    }
    if (std::isfinite(limit)) return jump_force;
    double best = load.front().force;
    for (const auto& s : load) best = std::max(best, s.force);
    return best;
}

StabilityClass classify_stability(const std::vector<FreeEquilibrium>& equilibria) {
    if (equilibria.empty()) throw SpecificationError("free equilibrium list is empty; the rest state must be present");
    const auto stable = std::count_if(equilibria.begin(), equilibria.end(), [](const auto& e) { return e.stable; });
    if (stable <= 1) return StabilityClass::monostable;
    if (stable == 2) return StabilityClass::bistable;
    return StabilityClass::multistable;
}

namespace {

double phase_work(const std::vector<CurveSample>& s) {
    double w = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) w += 0.5 * (s[i].force + s[i - 1].force) * (s[i].control - s[i - 1].control);
    return w;
}

}  // namespace

EnergyReport energy_report(const EmulatedCurve& curve, const std::vector<FreeEquilibrium>& equilibria) {
    const auto load = curve.phase(Phase::loading);
    const auto unload = curve.phase(Phase::unloading);
    if (load.size() < 2 || unload.size() < 2) throw SpecificationError("energy report needs a full loading-unloading cycle");
    const auto& first = load.front();
    const auto& last = unload.back();
    const double scale = 1.0 + std::abs(first.control) + std::abs(last.control);
    if (std::abs(last.path_position - first.path_position) > 1e-9 &&
        (std::abs(last.control - first.control) > 1e-9 * scale || std::abs(last.force - first.force) > 1e-6))
        throw SpecificationError("cycle is open: unloading does not return to the starting state");

    EnergyReport r;
    r.work_in = phase_work(load);
    r.work_returned = -phase_work(unload);
    for (const auto& j : curve.jumps)
        (j.phase == Phase::loading ? r.released_during_loading : r.released_during_unloading) += j.released_energy;
    for (std::size_t i = 1; i < equilibria.size(); ++i)
        if (equilibria[i].stable) {
            r.trapped_at_second_state = equilibria[i].energy;
            break;
        }
    r.dissipation_ratio = r.work_in > 0.0 ? (r.work_in - r.work_returned) / r.work_in : 0.0;
    const double released = r.released_during_loading + r.released_during_unloading;
    r.loading_release_fraction = released > 0.0 ? r.released_during_loading / released : 0.0;
    r.model_note =
        "linear elastic model: dissipation counts only energy released in snap jumps; material hysteresis of the "
        "printed polymer is not modeled";
    return r;
}

Polyline resample_polyline(const Polyline& line, int count) {
    if (line.size() < 2) throw SpecificationError("trace needs at least two points");
    if (count < 2) throw DomainError("resampling needs at least two points");
    std::vector<double> s{0.0};
    for (std::size_t i = 1; i < line.size(); ++i) s.push_back(s.back() + norm(line[i] - line[i - 1]));
    const double total = s.back();
    Polyline out;
    out.reserve(count);
    if (total == 0.0) return Polyline(count, line.front());
    std::size_t seg = 0;
    for (int m = 0; m < count; ++m) {
        const double target = total * m / (count - 1);
        while (seg + 2 < s.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(line[seg] + t * (line[seg + 1] - line[seg]));
    }
    return out;
}

double polygon_area(const Polyline& closed) {
    double a = 0.0;
    for (std::size_t i = 0; i < closed.size(); ++i) a += cross(closed[i], closed[(i + 1) % closed.size()]);
    return 0.5 * a;
}

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + t * ab));
}

double directed_hausdorff(const Polyline& a, const Polyline& b) {
    double worst = 0.0;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < b.size(); ++i) best = std::min(best, point_segment_distance(p, b[i], b[i + 1]));
        if (b.size() == 1) best = norm(p - b.front());
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

double hausdorff_distance(const Polyline& a, const Polyline& b) {
    if (a.empty() || b.empty()) throw SpecificationError("Hausdorff distance of an empty polyline");
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

TrajectoryPair trajectory_pair(const Polyline& loading, const Polyline& unloading, double threshold) {
    if (loading.size() < 2 || unloading.size() < 2) throw SpecificationError("tip traces need at least two points");
    if (!(threshold >= 0.0)) throw SpecificationError("reciprocity threshold must be >= 0");
    TrajectoryPair t;
    t.loading_path = resample_polyline(loading, trajectory_samples);
    t.unloading_path = resample_polyline(unloading, trajectory_samples);
    Polyline loop = t.loading_path;
    loop.insert(loop.end(), t.unloading_path.begin(), t.unloading_path.end());
    t.enclosed_area = std::abs(polygon_area(loop));
    t.reciprocity_class = t.enclosed_area > threshold ? Reciprocity::non_reciprocating : Reciprocity::reciprocating;
    return t;
}

TrajectoryPair trajectory_pair(const EmulatedCurve& curve, double stroke, double threshold_fraction) {
    Polyline load, unload;
    for (const auto& s : curve.samples) (s.phase == Phase::loading ? load : unload).push_back(s.tip);
    return trajectory_pair(load, unload, threshold_fraction * stroke * stroke);
}

std::string to_string(Phase p) { return p == Phase::loading ? "loading" : "unloading"; }

std::string to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::monostable: return "monostable";
        case StabilityClass::bistable: return "bistable";
        case StabilityClass::multistable: return "multistable";
    }
    return "unknown";
}

std::string to_string(Reciprocity r) {
    return r == Reciprocity::reciprocating ? "reciprocating" : "non_reciprocating";
}

std::string curve_csv(const EmulatedCurve& curve) {
    std::ostringstream out;
    out << "phase,control_mm,force_N\n";
    for (const auto& s : curve.samples)
        out << to_string(s.phase) << ',' << fmt_num(s.control, 9) << ',' << fmt_num(s.force, 9) << '\n';
    return out.str();
}

std::string trajectory_csv(const TrajectoryPair& pair) {
    std::ostringstream out;
    out << "phase,x_mm,y_mm\n";
    for (const auto& p : pair.loading_path) out << "loading," << fmt_num(p.x, 9) << ',' << fmt_num(p.y, 9) << '\n';
    for (const auto& p : pair.unloading_path) out << "unloading," << fmt_num(p.x, 9) << ',' << fmt_num(p.y, 9) << '\n';
    return out.str();
}

nlohmann::json jumps_json(const EmulatedCurve& curve) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& j : curve.jumps)
        out.push_back({{"phase", to_string(j.phase)},
                       {"control_mm", j.control_before},
                       {"control_after_mm", j.control_after},
                       {"force_before_N", j.force_before},
                       {"force_after_N", j.force_after},
                       {"released_energy_Nmm", j.released_energy}});
    return out;
}

nlohmann::json to_json(const EnergyReport& r) {
    return {{"work_in_Nmm", r.work_in},
            {"work_returned_Nmm", r.work_returned},
            {"released_during_loading_Nmm", r.released_during_loading},
            {"released_during_unloading_Nmm", r.released_during_unloading},
            {"trapped_at_second_state_Nmm", r.trapped_at_second_state},
            {"dissipation_ratio", r.dissipation_ratio},
            {"loading_release_fraction", r.loading_release_fraction},
            {"model_note", r.model_note}};
}

namespace {

struct Frame {
    double x0, y0, w, h;  // panel placement in SVG units
    Box data;
    Vec2 map(Vec2 p) const {
        const double sx = data.width() > 0 ? (p.x - data.lo.x) / data.width() : 0.5;
        const double sy = data.height() > 0 ? (p.y - data.lo.y) / data.height() : 0.5;
        return {x0 + sx * w, y0 + h - sy * h};
    }
};

void polyline_svg(std::ostringstream& svg, const Frame& f, const Polyline& pts, const char* color) {
    if (pts.empty()) return;
    svg << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2 q = f.map(pts[i]);
        svg << (i ? " " : "") << fmt_num(q.x, 2) << ',' << fmt_num(q.y, 2);
    }
    svg << "\"/>\n";
}

void axes_svg(std::ostringstream& svg, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    svg << "  <rect x=\"" << fmt_num(f.x0, 2) << "\" y=\"" << fmt_num(f.y0, 2) << "\" width=\"" << fmt_num(f.w, 2)
        << "\" height=\"" << fmt_num(f.h, 2) << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"0.8\"/>\n";
    if (f.data.lo.y < 0.0 && f.data.hi.y > 0.0) {
        const Vec2 a = f.map({f.data.lo.x, 0.0}), b = f.map({f.data.hi.x, 0.0});
        svg << "  <line x1=\"" << fmt_num(a.x, 2) << "\" y1=\"" << fmt_num(a.y, 2) << "\" x2=\"" << fmt_num(b.x, 2)
            << "\" y2=\"" << fmt_num(b.y, 2) << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
    }
    svg << "  <text x=\"" << fmt_num(f.x0 + f.w / 2, 2) << "\" y=\"" << fmt_num(f.y0 + f.h + 28, 2)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    svg << "  <text x=\"" << fmt_num(f.x0 - 34, 2) << "\" y=\"" << fmt_num(f.y0 + f.h / 2, 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " << fmt_num(f.x0 - 34, 2) << ' '
        << fmt_num(f.y0 + f.h / 2, 2) << ")\">" << ylabel << "</text>\n";
    auto label = [&](Vec2 at, double value, const char* anchor) {
        svg << "  <text x=\"" << fmt_num(at.x, 2) << "\" y=\"" << fmt_num(at.y, 2) << "\" text-anchor=\"" << anchor
            << "\" font-size=\"10\">" << fmt_num(value, 2) << "</text>\n";
    };
    label({f.x0, f.y0 + f.h + 14}, f.data.lo.x, "start");
    label({f.x0 + f.w, f.y0 + f.h + 14}, f.data.hi.x, "end");
    label({f.x0 - 4, f.y0 + f.h}, f.data.lo.y, "end");
    label({f.x0 - 4, f.y0 + 10}, f.data.hi.y, "end");
}

Box padded(Box b) {
    const double px = 0.05 * std::max(b.width(), 1e-9), py = 0.05 * std::max(b.height(), 1e-9);
    b.lo = b.lo - Vec2{px, py};
    b.hi = b.hi + Vec2{px, py};
    return b;
}

}  // namespace

std::string analysis_svg(const EmulatedCurve& curve, const TrajectoryPair& trajectory, const std::string& title) {
    Polyline load, unload;
    for (const auto& s : curve.samples) (s.phase == Phase::loading ? load : unload).push_back({s.control, s.force});
    Polyline all = load;
    all.insert(all.end(), unload.begin(), unload.end());
    if (all.empty()) throw SpecificationError("cannot plot an empty curve");
    Polyline tips = trajectory.loading_path;
    tips.insert(tips.end(), trajectory.unloading_path.begin(), trajectory.unloading_path.end());
    if (tips.empty()) throw SpecificationError("cannot plot an empty trajectory");

    const Frame fd{60, 40, 360, 260, padded(bounding_box(all))};
    // equal axis scaling for the trajectory panel
    Box tb = padded(bounding_box(tips));
    const double side = std::max(tb.width(), tb.height());
    const Vec2 c = 0.5 * (tb.lo + tb.hi);
    tb.lo = c - Vec2{side / 2, side / 2};
    tb.hi = c + Vec2{side / 2, side / 2};
    const Frame ft{520, 40, 260, 260, tb};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"820\" height=\"350\" viewBox=\"0 0 820 350\">\n";
    svg << "  <rect width=\"820\" height=\"350\" fill=\"white\"/>\n";
    svg << "  <text x=\"410\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    axes_svg(svg, fd, "displacement (mm)", "force (N)");
    polyline_svg(svg, fd, load, "#1f4e79");
    polyline_svg(svg, fd, unload, "#c0392b");
    axes_svg(svg, ft, "tip x (mm)", "tip y (mm)");
    polyline_svg(svg, ft, trajectory.loading_path, "#1f4e79");
    polyline_svg(svg, ft, trajectory.unloading_path, "#c0392b");
    svg << "  <text x=\"530\" y=\"56\" font-size=\"10\">area " << fmt_num(trajectory.enclosed_area, 2)
        << " mm2, " << to_string(trajectory.reciprocity_class) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace snapbeam
