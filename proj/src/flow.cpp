#include "coropve/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <Eigen/Dense>

#include "coropve/config.hpp"
#include "coropve/errors.hpp"
#include "coropve/io.hpp"

namespace coropve {

namespace {

// Pa*s/m^3 -> mmHg*s/mL and Pa*s^2/m^6 -> mmHg*s^2/mL^2.
constexpr double kPaPerMmhg = 133.322387415;
constexpr double kLinSiToMl = 1e-6 / kPaPerMmhg;
constexpr double kQuadSiToMl = 1e-12 / kPaPerMmhg;

// Poiseuille resistance of a diameter profile, trapezoid rule on 1/d^4.
double poiseuille_resistance(std::span<const DiameterSample> profile, double viscosity) {
    double r_si = 0.0;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        const double ds = (profile[i].s_mm - profile[i - 1].s_mm) * 1e-3;
        const double d0 = profile[i - 1].diameter_mm * 1e-3;
        const double d1 = profile[i].diameter_mm * 1e-3;
        const double f0 = 1.0 / (d0 * d0 * d0 * d0);
        const double f1 = 1.0 / (d1 * d1 * d1 * d1);
        r_si += 128.0 * viscosity / std::numbers::pi * 0.5 * (f0 + f1) * ds;
    }
    return r_si * kLinSiToMl;
}

double circle_area_m2(double diameter_mm) {
    const double d = diameter_mm * 1e-3;
    return std::numbers::pi * d * d / 4.0;
}

// Exact flow through one edge for a given pressure drop:
// dp = r_lin*q + r_quad*q*|q|, solved for q with the sign of dp.
double edge_flow(const FlowEdge& e, double dp) {
    if (e.r_quad <= 0.0) return dp / e.r_lin;
    const double mag = std::abs(dp);
    const double q = (-e.r_lin + std::sqrt(e.r_lin * e.r_lin + 4.0 * e.r_quad * mag)) /
                     (2.0 * e.r_quad);
    return dp >= 0.0 ? q : -q;
}

}  // namespace

double VesselSegment::min_diameter() const {
    double m = std::numeric_limits<double>::max();
    for (const DiameterSample& d : profile) m = std::min(m, d.diameter_mm);
    return m;
}

double VesselSegment::diameter_at(double s) const {
    if (profile.empty()) return 0.0;
    if (s <= profile.front().s_mm) return profile.front().diameter_mm;
    if (s >= profile.back().s_mm) return profile.back().diameter_mm;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        if (s <= profile[i].s_mm) {
            const double t =
                (s - profile[i - 1].s_mm) / (profile[i].s_mm - profile[i - 1].s_mm);
            return profile[i - 1].diameter_mm +
                   t * (profile[i].diameter_mm - profile[i - 1].diameter_mm);
        }
    }
    return profile.back().diameter_mm;
}

std::vector<int> VesselTree::outlet_nodes() const {
    std::vector<bool> has_outgoing(n_nodes, false);
    std::vector<bool> seen(n_nodes, false);
    for (const VesselSegment& seg : segments) {
        has_outgoing[seg.from_node] = true;
        seen[seg.from_node] = seen[seg.to_node] = true;
    }
    std::vector<int> outlets;
    for (int node = 0; node < n_nodes; ++node) {
        if (seen[node] && !has_outgoing[node] && node != root_node) outlets.push_back(node);
    }
    return outlets;
}

double VesselTree::outlet_diameter(int node) const {
    for (const VesselSegment& seg : segments) {
        if (seg.to_node == node) return seg.profile.back().diameter_mm;
    }
    throw LocationError("node " + std::to_string(node) + " has no incoming segment");
}

VesselTree tree_from_surfaces(std::span<const LumenSurface> surfaces,
                              const CenterlineTree& topology) {
    const int root_branch = topology.validate_and_root();
    if (surfaces.size() != topology.branches.size()) {
        throw TopologyError("got " + std::to_string(surfaces.size()) + " surfaces for " +
                            std::to_string(topology.branches.size()) + " branches");
    }

    // Per-branch smoothed diameter samples at the surface plane arcs.
    std::vector<std::vector<DiameterSample>> branch_profile(surfaces.size());
    for (std::size_t b = 0; b < surfaces.size(); ++b) {
        const LumenSurface& surf = surfaces[b];
        if (surf.planes.size() < 2) {
            throw TopologyError("branch " + std::to_string(b) + " surface has fewer than 2 planes");
        }
        std::vector<double> d(surf.planes.size());
        for (std::size_t i = 0; i < surf.planes.size(); ++i) {
            d[i] = surf.planes[i].effective_diameter_mm;
        }
        std::vector<DiameterSample>& prof = branch_profile[b];
        prof.resize(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            double v = d[i];
            if (i > 0 && i + 1 < d.size()) {
                double w[3] = {d[i - 1], d[i], d[i + 1]};
                std::sort(w, w + 3);
                v = w[1];  // 3-plane moving median
            }
            prof[i] = {surf.plane_arc(static_cast<int>(i)), v};
        }
    }

    auto profile_diameter = [&](std::size_t b, double s) {
        VesselSegment tmp;
        tmp.profile = branch_profile[b];
        return tmp.diameter_at(s);
    };

    VesselTree tree;
    tree.tree_side = topology.tree_side;
    tree.root_node = 0;
    int next_node = 0;

    // Cut points per branch: start, every child attachment, end.
    std::vector<std::vector<double>> cuts(surfaces.size());
    for (std::size_t b = 0; b < surfaces.size(); ++b) {
        cuts[b].push_back(0.0);
        cuts[b].push_back(branch_profile[b].back().s_mm);
    }
    for (std::size_t b = 0; b < surfaces.size(); ++b) {
        if (!topology.parent[b]) continue;
        const ParentLink& link = *topology.parent[b];
        const double parent_len = branch_profile[link.branch].back().s_mm;
        const double attach = std::min(link.arc_length_mm, parent_len);
        cuts[link.branch].push_back(attach);
    }
    for (std::vector<double>& c : cuts) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                c.end());
    }

    // Assign node ids: walk branches from the root outward so node 0 is the
    // ostium and numbering is deterministic.
    std::map<std::pair<int, int>, int> node_id;  // (branch, cut index) -> node
    std::vector<int> order;
    order.push_back(root_branch);
    for (std::size_t b = 0; b < surfaces.size(); ++b) {
        if (static_cast<int>(b) != root_branch) order.push_back(static_cast<int>(b));
    }

    auto cut_index = [&](int branch, double arc) {
        const std::vector<double>& c = cuts[branch];
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (std::abs(c[i] - arc) < 1e-6) return static_cast<int>(i);
        }
        throw TopologyError("attachment at " + std::to_string(arc) +
                            " mm is not a cut point of branch " + std::to_string(branch));
    };

    for (const int b : order) {
        // The first node of a non-root branch is its attachment node on the
        // parent, which has already been numbered.
        if (topology.parent[b]) {
            const ParentLink& link = *topology.parent[b];
            const double parent_len = branch_profile[link.branch].back().s_mm;
            const double attach = std::min(link.arc_length_mm, parent_len);
            const int parent_cut = cut_index(link.branch, attach);
            const auto it = node_id.find({link.branch, parent_cut});
            if (it == node_id.end()) {
                throw TopologyError("branch " + std::to_string(b) +
                                    " attaches to an unprocessed parent (branch order)");
            }
            node_id[{b, 0}] = it->second;
        } else {
            node_id[{b, 0}] = next_node++;
        }
        for (std::size_t c = 1; c < cuts[b].size(); ++c) {
            node_id[{b, static_cast<int>(c)}] = next_node++;
        }

        for (std::size_t c = 1; c < cuts[b].size(); ++c) {
            const double s0 = cuts[b][c - 1];
            const double s1 = cuts[b][c];
            VesselSegment seg;
            seg.from_node = node_id[{b, static_cast<int>(c - 1)}];
            seg.to_node = node_id[{b, static_cast<int>(c)}];
            seg.length_mm = s1 - s0;
            seg.branch = b;
            seg.branch_start_mm = s0;
            seg.profile.push_back({0.0, profile_diameter(b, s0)});
            for (const DiameterSample& d : branch_profile[b]) {
                if (d.s_mm > s0 + 1e-9 && d.s_mm < s1 - 1e-9) {
                    seg.profile.push_back({d.s_mm - s0, d.diameter_mm});
                }
            }
            seg.profile.push_back({s1 - s0, profile_diameter(b, s1)});
            tree.segments.push_back(std::move(seg));
        }
    }
    tree.n_nodes = next_node;
    return tree;
}

double calibrate_outlet_scale(const FlowParams& params) {
    const std::vector<DiameterSample> reference{{0.0, 3.0}, {100.0, 3.0}};
    const double r_tube = poiseuille_resistance(reference, params.fluid.viscosity_pa_s);
    const double target_ffr = 0.97;
    const double r_out = target_ffr / (1.0 - target_ffr) * r_tube;
    return r_out / std::pow(3.0, params.outlet_exponent);
}

FlowNetwork build_network(const VesselTree& tree, const FlowParams& params) {
    FlowNetwork net;
    net.n_nodes = tree.n_nodes;
    net.root_node = tree.root_node;
    net.ostial_pressure_mmhg = params.ostial_pressure_mmhg;
    net.venous_pressure_mmhg = params.venous_pressure_mmhg;

    for (std::size_t s = 0; s < tree.segments.size(); ++s) {
        const VesselSegment& seg = tree.segments[s];
        FlowEdge edge;
        edge.from = seg.from_node;
        edge.to = seg.to_node;
        edge.segment = static_cast<int>(s);
        edge.r_lin = poiseuille_resistance(seg.profile, params.fluid.viscosity_pa_s);

        const double a_min = circle_area_m2(seg.min_diameter());
        const double a_distal = circle_area_m2(seg.profile.back().diameter_mm);
        const double diff = 1.0 / a_min - 1.0 / a_distal;  // >= 0 (min includes the end)
        edge.r_quad = params.fluid.expansion_loss_k * params.fluid.density_kg_m3 / 2.0 *
                      diff * diff * kQuadSiToMl;
        net.edges.push_back(edge);
    }

    const double scale =
        params.outlet_scale > 0.0 ? params.outlet_scale : calibrate_outlet_scale(params);
    for (const int node : tree.outlet_nodes()) {
        const double d = tree.outlet_diameter(node);
        net.outlet_resistances.emplace_back(node, scale * std::pow(d, params.outlet_exponent));
    }
    return net;
}

FlowResult solve_flow(const FlowNetwork& net) {
    const int n = net.n_nodes;
    const int root = net.root_node;
    for (const FlowEdge& e : net.edges) {
        if (e.r_lin <= 0.0) throw FormatError("flow edge with non-positive linear resistance");
    }
    for (const auto& [node, r] : net.outlet_resistances) {
        if (r <= 0.0) throw FormatError("outlet with non-positive resistance");
    }

    // Unknowns: every node pressure except the fixed root.
    std::vector<int> unknown_of(n, -1);
    int n_unknown = 0;
    for (int v = 0; v < n; ++v) {
        if (v != root) unknown_of[v] = n_unknown++;
    }

    std::vector<double> pressure(n, net.ostial_pressure_mmhg);
    pressure[root] = net.ostial_pressure_mmhg;

    auto residual_of = [&](const std::vector<double>& p, std::vector<double>* flows) {
        std::vector<double> imbalance(n, 0.0);
        if (flows) flows->clear();
        for (const FlowEdge& e : net.edges) {
            const double q = edge_flow(e, p[e.from] - p[e.to]);
            if (flows) flows->push_back(q);
            imbalance[e.from] -= q;
            imbalance[e.to] += q;
        }
        for (const auto& [node, r] : net.outlet_resistances) {
            imbalance[node] -= (p[node] - net.venous_pressure_mmhg) / r;
        }
        double worst = 0.0;
        for (int v = 0; v < n; ++v) {
            if (v != root) worst = std::max(worst, std::abs(imbalance[v]));
        }
        return worst;
    };

    double damping = 1.0;
    double residual = residual_of(pressure, nullptr);
    int iterations = 0;
    const int max_iterations = 200;
    for (; iterations < max_iterations; ++iterations) {
        // Effective linear resistances at the current flow estimates.
        Eigen::MatrixXd conductance = Eigen::MatrixXd::Zero(n_unknown, n_unknown);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
        auto stamp = [&](int a, int b, double g) {
            const int ua = unknown_of[a], ub = unknown_of[b];
            if (ua >= 0) conductance(ua, ua) += g;
            if (ub >= 0) conductance(ub, ub) += g;
            if (ua >= 0 && ub >= 0) {
                conductance(ua, ub) -= g;
                conductance(ub, ua) -= g;
            } else if (ua >= 0) {
                rhs(ua) += g * pressure[b];
            } else if (ub >= 0) {
                rhs(ub) += g * pressure[a];
            }
        };
        for (const FlowEdge& e : net.edges) {
            const double q = edge_flow(e, pressure[e.from] - pressure[e.to]);
            stamp(e.from, e.to, 1.0 / (e.r_lin + e.r_quad * std::abs(q)));
        }
        for (const auto& [node, r] : net.outlet_resistances) {
            const int u = unknown_of[node];
            if (u >= 0) {
                conductance(u, u) += 1.0 / r;
                rhs(u) += net.venous_pressure_mmhg / r;
            }
        }

        const Eigen::VectorXd solved = conductance.partialPivLu().solve(rhs);
        std::vector<double> next = pressure;
        double max_rel_change = 0.0;
        for (int v = 0; v < n; ++v) {
            if (unknown_of[v] < 0) continue;
            const double target = solved(unknown_of[v]);
            const double updated = pressure[v] + damping * (target - pressure[v]);
            max_rel_change = std::max(max_rel_change, std::abs(updated - pressure[v]) /
                                                          std::max(std::abs(updated), 1e-12));
            next[v] = updated;
        }

        const double next_residual = residual_of(next, nullptr);
        if (next_residual > residual && damping > 0.1) {
            damping *= 0.5;  // overshoot on the nonlinear terms: back off
            continue;
        }
        pressure = std::move(next);
        residual = next_residual;
        if (residual < 1e-9 && max_rel_change < 1e-10) {
            ++iterations;
            break;
        }
    }
    if (residual >= 1e-9) {
        throw NoConvergenceError("flow solver stalled at residual " + std::to_string(residual) +
                                     " mL/s after " + std::to_string(iterations) + " iterations",
                                 residual);
    }

    FlowResult result;
    result.node_pressures_mmhg = pressure;
    result.solver_residual_ml_s = residual_of(pressure, &result.edge_flows_ml_s);
    for (const auto& [node, r] : net.outlet_resistances) {
        result.outlet_flows_ml_s.push_back((pressure[node] - net.venous_pressure_mmhg) / r);
    }
    result.iterations = iterations;
    return result;
}

double ffr_at(const VesselTree& tree, const FlowNetwork& net, const FlowResult& result,
              int segment, double s_mm) {
    if (segment < 0 || segment >= static_cast<int>(tree.segments.size())) {
        throw LocationError("segment index " + std::to_string(segment) + " out of range");
    }
    const VesselSegment& seg = tree.segments[segment];
    if (s_mm < -1e-9 || s_mm > seg.length_mm + 1e-9) {
        throw LocationError("arc position " + std::to_string(s_mm) + " mm outside segment of " +
                            std::to_string(seg.length_mm) + " mm");
    }
    const double t = std::clamp(s_mm / seg.length_mm, 0.0, 1.0);
    const double p0 = result.node_pressures_mmhg[seg.from_node];
    const double p1 = result.node_pressures_mmhg[seg.to_node];
    return (p0 + t * (p1 - p0)) / net.ostial_pressure_mmhg;
}

double node_ffr(const FlowNetwork& net, const FlowResult& result, int node) {
    if (node < 0 || node >= static_cast<int>(result.node_pressures_mmhg.size())) {
        throw LocationError("node index " + std::to_string(node) + " out of range");
    }
    return result.node_pressures_mmhg[node] / net.ostial_pressure_mmhg;
}

void save_flow_result(const VesselTree& tree, const FlowNetwork& net, const FlowResult& result,
                      const nlohmann::json& meta, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "coropve.ffr";
    j["tool_version"] = kToolVersion;
    j["tree_side"] = to_string(tree.tree_side);
    j["ostial_pressure_mmhg"] = net.ostial_pressure_mmhg;
    j["venous_pressure_mmhg"] = net.venous_pressure_mmhg;

    nlohmann::json outlets = nlohmann::json::array();
    for (std::size_t i = 0; i < net.outlet_resistances.size(); ++i) {
        const auto& [node, r] = net.outlet_resistances[i];
        outlets.push_back({{"node", node},
                           {"diameter_mm", tree.outlet_diameter(node)},
                           {"resistance_mmhg_s_ml", r},
                           {"flow_ml_s", result.outlet_flows_ml_s[i]}});
    }
    j["outlets"] = std::move(outlets);
    j["node_pressures_mmhg"] = result.node_pressures_mmhg;

    nlohmann::json edges = nlohmann::json::array();
    double min_ffr = 1.0;
    nlohmann::json segment_ffr = nlohmann::json::array();
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const FlowEdge& edge = net.edges[e];
        edges.push_back({{"from", edge.from},
                         {"to", edge.to},
                         {"segment", edge.segment},
                         {"r_lin_mmhg_s_ml", edge.r_lin},
                         {"r_quad_mmhg_s2_ml2", edge.r_quad},
                         {"flow_ml_s", result.edge_flows_ml_s[e]}});
        const double distal = node_ffr(net, result, edge.to);
        segment_ffr.push_back({{"segment", edge.segment}, {"distal_ffr", distal}});
        min_ffr = std::min(min_ffr, distal);
    }
    j["edges"] = std::move(edges);
    j["segment_ffr"] = std::move(segment_ffr);
    j["min_ffr"] = min_ffr;
    j["solver"] = {{"iterations", result.iterations},
                   {"residual_ml_s", result.solver_residual_ml_s}};
    j["meta"] = meta;
    save_json(j, path);
}

}  // namespace coropve
