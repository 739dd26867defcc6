#include "snapbeam/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snapbeam/errors.hpp"

namespace snapbeam {

namespace {

int find_root(std::vector<int>& parent, int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
}

}  // namespace

ReducedSystem::ReducedSystem(BeamMesh mesh, Constraints constraints)
    : mesh_(std::move(mesh)), constraints_(std::move(constraints)) {
    mesh_.validate();
    const int n = mesh_.node_count();

    // group rigid-link components into bodies
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<bool> linked(n, false);
    for (const auto& l : mesh_.rigid_links) {
        parent[find_root(parent, l.slave)] = find_root(parent, l.master);
        linked[l.slave] = linked[l.master] = true;
    }
    int attach = -1;
    RefKind drive = RefKind::free;
    double bar_length = 0.0;
    if (const auto* bar = std::get_if<RigidBar>(&constraints_.control)) {
        if (!(bar->bar_length > 0.0)) throw SpecificationError("rigid bar length must be > 0");
        attach = bar->attach_node;
        drive = RefKind::bar;
        bar_length = bar->bar_length;
    } else if (const auto* va = std::get_if<VerticalAttach>(&constraints_.control)) {
        attach = va->attach_node;
        drive = RefKind::vertical;
    }
    if (attach >= n || (attach < 0 && drive != RefKind::free))
        throw SpecificationError("control attachment node does not exist");
    if (attach >= 0) linked[attach] = true;

    body_of_.assign(n, -1);
    std::vector<int> body_of_root(n, -1);
    for (int i = 0; i < n; ++i) {
        if (!linked[i]) continue;
        const int root = find_root(parent, i);
        if (body_of_root[root] < 0) {
            body_of_root[root] = static_cast<int>(bodies_.size());
            Body b;
            b.ref_node = root;
            bodies_.push_back(b);
        }
        body_of_[i] = body_of_root[root];
    }
    if (attach >= 0) {
        Body& b = bodies_[body_of_[attach]];
        b.ref_node = attach;
        b.kind = drive;
        b.bar_length = bar_length;
    }

    dofs_.assign(n, {});
    for (const auto& f : constraints_.fixed) {
        if (f.node < 0 || f.node >= n || f.component < 0 || f.component > 2)
            throw SpecificationError("fixed DOF references an invalid node/component");
        if (body_of_[f.node] >= 0) throw SpecificationError("cannot fix a DOF of a rigid-linked node");
        if (dofs_[f.node][f.component].kind == DofKind::fixed) continue;
        dofs_[f.node][f.component].kind = DofKind::fixed;
        ++constrained_;
    }
    if (const auto* pd = std::get_if<PrescribedDof>(&constraints_.control)) {
        if (pd->node < 0 || pd->node >= n || pd->component < 0 || pd->component > 2)
            throw SpecificationError("prescribed DOF references an invalid node/component");
        if (body_of_[pd->node] >= 0) throw SpecificationError("cannot prescribe a DOF of a rigid-linked node");
        auto& d = dofs_[pd->node][pd->component];
        if (d.kind == DofKind::fixed) throw SpecificationError("prescribed DOF is also fixed");
        d.kind = DofKind::control;
        d.scale = pd->scale;
        ++constrained_;
    }

    std::vector<bool> body_done(bodies_.size(), false);
    std::vector<int> body_size(bodies_.size(), 0);
    for (int i = 0; i < n; ++i) {
        const int b = body_of_[i];
        if (b < 0) {
            for (auto& d : dofs_[i])
                if (d.kind == DofKind::free) d.index = n_q_++;
            continue;
        }
        ++body_size[b];
        if (body_done[b]) continue;
        body_done[b] = true;
        Body& body = bodies_[b];
        body.qa = n_q_++;
        if (body.kind == RefKind::free) body.qb = n_q_++;
        body.qt = n_q_++;
    }
    for (std::size_t b = 0; b < bodies_.size(); ++b) {
        const int kept = bodies_[b].kind == RefKind::free ? 3 : 2;
        condensed_ += 3 * body_size[b] - kept;
    }

    for (const auto& load : constraints_.loads) {
        if (load.node < 0 || load.node >= n || load.component < 0 || load.component > 2)
            throw SpecificationError("load references an invalid node/component");
        if (body_of_[load.node] < 0 && dofs_[load.node][load.component].kind != DofKind::free)
            throw SpecificationError("constrained DOF referenced as loaded free DOF");
    }

    for (const auto& e : mesh_.elements) {
        const double EA = mesh_.materials[e.material].youngs_modulus * mesh_.sections[e.section].area;
        reference_force_ = std::max(reference_force_, EA / mesh_.rest_length(e) * 1e-6);
    }
}

ReducedSystem::NodeJet ReducedSystem::jet(int node, const Eigen::VectorXd& q, double lambda) const {
    NodeJet j;
    auto slot = [&j](int var) {
        for (int s = 0; s < j.nvar; ++s)
            if (j.var[s] == var) return s;
        j.var[j.nvar] = var;
        return j.nvar++;
    };
    const int b = body_of_[node];
    if (b < 0) {
        for (int c = 0; c < 3; ++c) {
            const auto& d = dofs_[node][c];
            if (d.kind == DofKind::free) {
                j.value[c] = q[d.index];
                j.d[c][slot(d.index)] = 1.0;
            } else if (d.kind == DofKind::control) {
                j.value[c] = d.scale * lambda;
                j.d[c][slot(n_q_)] = d.scale;
            }
        }
        return j;
    }

    const Body& body = bodies_[b];
    const double theta = q[body.qt];
    const double ct = std::cos(theta), st = std::sin(theta);
    const Vec2 off = mesh_.nodes[node] - mesh_.nodes[body.ref_node];
    const Vec2 rot{ct * off.x - st * off.y, st * off.x + ct * off.y};
    // (R - I) off without cancellation: cos - 1 = -2 sin^2(theta / 2)
    const double cm1 = -2.0 * std::pow(std::sin(0.5 * theta), 2);
    const Vec2 moved{cm1 * off.x - st * off.y, st * off.x + cm1 * off.y};

    Vec2 U{};
    switch (body.kind) {
        case RefKind::free: {
            U = {q[body.qa], q[body.qb]};
            j.d[0][slot(body.qa)] = 1.0;
            j.d[1][slot(body.qb)] = 1.0;
            break;
        }
        case RefKind::bar: {
            // qa is the horizontal travel s of the attachment; the pin stays on a
            // circle of radius L about the crosshead, so it rises by L - sqrt(L^2 - s^2)
            const double L = body.bar_length, s = q[body.qa];
            const double c2 = L * L - s * s;
            if (!(c2 > 0.0)) {
                const double nan = std::numeric_limits<double>::quiet_NaN();
                U = {nan, nan};
            } else {
                const double c = std::sqrt(c2);
                U = {s, lambda + s * s / (L + c)};
                const int sa = slot(body.qa);
                j.d[0][sa] = 1.0;
                j.d[1][sa] = s / c;
                j.h[1][sa][sa] = L * L / (c2 * c);
            }
            j.d[1][slot(n_q_)] = 1.0;
            break;
        }
        case RefKind::vertical: {
            U = {q[body.qa], lambda};
            j.d[0][slot(body.qa)] = 1.0;
            j.d[1][slot(n_q_)] = 1.0;
            break;
        }
    }
    const int s_t = slot(body.qt);
    j.value[0] = U.x + moved.x;
    j.value[1] = U.y + moved.y;
    j.value[2] = theta;
    j.d[0][s_t] = -rot.y;
    j.d[1][s_t] = rot.x;
    j.d[2][s_t] = 1.0;
    j.h[0][s_t][s_t] = -rot.x;
    j.h[1][s_t][s_t] = -rot.y;
    return j;
}

Assembly ReducedSystem::assemble(const Eigen::VectorXd& q, double lambda) const {
    if (q.size() != n_q_) throw SpecificationError("reduced state dimension mismatch");
    const int n = mesh_.node_count();
    std::vector<NodeJet> jets(n);
    for (int i = 0; i < n; ++i) jets[i] = jet(i, q, lambda);

    Assembly out;
    out.residual = Eigen::VectorXd::Zero(n_q_);
    out.control_coupling = Eigen::VectorXd::Zero(n_q_);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh_.elements.size() * 36);

    for (const auto& e : mesh_.elements) {
        const NodeJet* ends[2] = {&jets[e.node_i], &jets[e.node_j]};
        Vec6 disp;
        for (int k = 0; k < 6; ++k) disp[k] = ends[k / 3]->value[k % 3];
        const ElementResponse resp = element_force_and_tangent(mesh_, e, disp);
        out.energy += resp.energy;

        // merged variable list of both ends
        std::array<int, 8> vars{};
        int m = 0;
        std::array<std::array<int, 4>, 2> map{};
        for (int end = 0; end < 2; ++end) {
            for (int s = 0; s < ends[end]->nvar; ++s) {
                const int v = ends[end]->var[s];
                int pos = 0;
                while (pos < m && vars[pos] != v) ++pos;
                if (pos == m) vars[m++] = v;
                map[end][s] = pos;
            }
        }
        Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 8> J = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 8>::Zero(6, m);
        for (int k = 0; k < 6; ++k) {
            const NodeJet& nj = *ends[k / 3];
            for (int s = 0; s < nj.nvar; ++s) J(k, map[k / 3][s]) = nj.d[k % 3][s];
        }
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1> g = J.transpose() * resp.force;
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8> H = J.transpose() * resp.tangent * J;
        for (int k = 0; k < 6; ++k) {
            const NodeJet& nj = *ends[k / 3];
            const double f = resp.force[k];
            if (f == 0.0) continue;
            for (int s = 0; s < nj.nvar; ++s)
                for (int t = 0; t < nj.nvar; ++t) {
                    const double hv = nj.h[k % 3][s][t];
                    if (hv != 0.0) H(map[k / 3][s], map[k / 3][t]) += f * hv;
                }
        }
        for (int a = 0; a < m; ++a) {
            const int va = vars[a];
            if (va == n_q_) {
                out.reaction += g[a];
            } else {
                out.residual[va] += g[a];
            }
            for (int b = 0; b < m; ++b) {
                const int vb = vars[b];
                const double hv = H(a, b);
                if (va < n_q_ && vb < n_q_) {
                    trip.emplace_back(va, vb, hv);
                } else if (va < n_q_ && vb == n_q_) {
                    out.control_coupling[va] += hv;
                } else if (va == n_q_ && vb == n_q_) {
                    out.reaction_stiffness += hv;
                }
            }
        }
    }
    // dead loads; on rigid-body nodes they also stiffen through the rotation
    for (const auto& load : constraints_.loads) {
        const NodeJet& nj = jets[load.node];
        const int c = load.component;
        for (int a = 0; a < nj.nvar; ++a) {
            const int va = nj.var[a];
            const double g = load.value * nj.d[c][a];
            (va == n_q_ ? out.reaction : out.residual[va]) -= g;
            for (int b = 0; b < nj.nvar; ++b) {
                const int vb = nj.var[b];
                const double hv = load.value * nj.h[c][a][b];
                if (hv == 0.0) continue;
                if (va < n_q_ && vb < n_q_) trip.emplace_back(va, vb, -hv);
                else if (va < n_q_) out.control_coupling[va] -= hv;
                else if (vb == n_q_) out.reaction_stiffness -= hv;
            }
        }
    }
    out.tangent.resize(n_q_, n_q_);
    out.tangent.setFromTriplets(trip.begin(), trip.end());
    return out;
}

double ReducedSystem::energy(const Eigen::VectorXd& q, double lambda) const {
    return strain_energy(mesh_, expand(q, lambda));
}

State ReducedSystem::expand(const Eigen::VectorXd& q, double lambda) const {
    if (q.size() != n_q_) throw SpecificationError("reduced state dimension mismatch");
    State s(mesh_.dof_count());
    for (int i = 0; i < mesh_.node_count(); ++i) {
        const NodeJet j = jet(i, q, lambda);
        for (int c = 0; c < 3; ++c) s[3 * i + c] = j.value[c];
    }
    return s;
}

Vec2 ReducedSystem::position(int node, const Eigen::VectorXd& q, double lambda) const {
    const NodeJet j = jet(node, q, lambda);
    return mesh_.nodes[node] + Vec2{j.value[0], j.value[1]};
}

double ReducedSystem::rotation(int node, const Eigen::VectorXd& q, double lambda) const {
    return jet(node, q, lambda).value[2];
}

Vec2 ReducedSystem::control_point(const Eigen::VectorXd& q, double lambda) const {
    if (const auto* bar = std::get_if<RigidBar>(&constraints_.control)) {
        const Vec2 x = mesh_.nodes[bar->attach_node];
        return {x.x, x.y + bar->bar_length + lambda};
    }
    if (const auto* va = std::get_if<VerticalAttach>(&constraints_.control)) return position(va->attach_node, q, lambda);
    if (const auto* pd = std::get_if<PrescribedDof>(&constraints_.control)) return position(pd->node, q, lambda);
    return {};
}

}  // namespace snapbeam
