#include "coropve/graphcut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/boykov_kolmogorov_max_flow.hpp>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

// Intensity variance of one cross-section (plane), population convention.
double plane_variance(const CylindricalGrid& grid, int plane) {
    const int n = grid.n_angles * grid.n_radii();
    double mean = 0.0;
    for (int a = 0; a < grid.n_angles; ++a) {
        for (int r = 0; r < grid.n_radii(); ++r) mean += grid.at(plane, a, r);
    }
    mean /= n;
    double var = 0.0;
    for (int a = 0; a < grid.n_angles; ++a) {
        for (int r = 0; r < grid.n_radii(); ++r) {
            const double d = grid.at(plane, a, r) - mean;
            var += d * d;
        }
    }
    return var / n;
}

}  // namespace

CostPair unary_cost(double lumen_probability, double epsilon) {
    CostPair cost;
    cost.lumen = -std::log(std::max(lumen_probability, epsilon));
    cost.background = -std::log(std::max(1.0 - lumen_probability, epsilon));
    return cost;
}

double pairwise_weight(double intensity_a, double intensity_b, double distance_mm,
                       double sigma_c) {
    if (sigma_c < 1e-6) sigma_c = 1.0;  // degenerate cross-section: flat substitute
    const double di = intensity_a - intensity_b;
    return std::exp(-di * di / sigma_c) * std::exp(-distance_mm * distance_mm);
}

SegmentationGraph build_segmentation_graph(const CylindricalGrid& grid,
                                           const ProbabilityField& prob, double lambda) {
    const int n_planes = grid.n_planes;
    const int n_angles = grid.n_angles;
    const int n_radii = grid.n_radii();

    SegmentationGraph graph;
    graph.n_planes = static_cast<std::size_t>(n_planes);
    graph.n_angles = static_cast<std::size_t>(n_angles);
    graph.n_radii = static_cast<std::size_t>(n_radii);
    graph.unary.resize(graph.n_samples());
    for (std::size_t p = 0; p < graph.n_samples(); ++p) {
        graph.unary[p] = unary_cost(prob.prob[p]);
    }

    std::vector<double> variance(n_planes);
    for (int i = 0; i < n_planes; ++i) variance[i] = plane_variance(grid, i);

    auto add_edge = [&](int i0, int a0, int r0, int i1, int a1, int r1, double sigma_c) {
        const double d =
            distance(grid.sample_position(i0, a0, r0), grid.sample_position(i1, a1, r1));
        const double w =
            pairwise_weight(grid.at(i0, a0, r0), grid.at(i1, a1, r1), d, sigma_c);
        PairwiseEdge e;
        e.a = static_cast<std::uint32_t>(graph.index(i0, a0, r0));
        e.b = static_cast<std::uint32_t>(graph.index(i1, a1, r1));
        e.weight = lambda * w;
        graph.pairwise.push_back(e);
    };

    for (int i = 0; i < n_planes; ++i) {
        for (int a = 0; a < n_angles; ++a) {
            for (int r = 0; r < n_radii; ++r) {
                if (r + 1 < n_radii) add_edge(i, a, r, i, a, r + 1, variance[i]);
                // One edge per adjacent angle pair, wrapping; with only two
                // angles the wrap pair would duplicate (0,1).
                if (n_angles > 2 || (n_angles == 2 && a == 0)) {
                    add_edge(i, a, r, i, (a + 1) % n_angles, r, variance[i]);
                }
                if (i + 1 < n_planes) {
                    add_edge(i, a, r, i + 1, a, r, 0.5 * (variance[i] + variance[i + 1]));
                }
            }
        }
    }
    return graph;
}

Labeling solve_min_cut(const SegmentationGraph& graph) {
    using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
    using Graph = boost::adjacency_list<
        boost::vecS, boost::vecS, boost::directedS,
        boost::property<
            boost::vertex_color_t, boost::default_color_type,
            boost::property<boost::vertex_distance_t, long,
                            boost::property<boost::vertex_predecessor_t,
                                            Traits::edge_descriptor>>>,
        boost::property<boost::edge_capacity_t, double,
                        boost::property<boost::edge_residual_capacity_t, double,
                                        boost::property<boost::edge_reverse_t,
                                                        Traits::edge_descriptor>>>>;
    using Vertex = Traits::vertex_descriptor;

    const std::size_t n = graph.n_samples();
    Graph g(n + 2);
    const Vertex source = n;
    const Vertex sink = n + 1;

    auto capacity = get(boost::edge_capacity, g);
    auto reverse = get(boost::edge_reverse, g);
    auto link = [&](Vertex u, Vertex v, double cap, double rev_cap) {
        const auto e = boost::add_edge(u, v, g).first;
        const auto er = boost::add_edge(v, u, g).first;
        capacity[e] = cap;
        capacity[er] = rev_cap;
        reverse[e] = er;
        reverse[er] = e;
    };

    // Source side = lumen. A lumen vertex severs its sink link (paying the
    // lumen cost); a background vertex severs its source link.
    double finite_total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        finite_total += graph.unary[p].lumen + graph.unary[p].background;
    }
    for (const PairwiseEdge& e : graph.pairwise) finite_total += 2.0 * e.weight;
    const double inf_cap = finite_total + 1.0;

    for (std::size_t p = 0; p < n; ++p) {
        link(source, p, graph.unary[p].background, 0.0);
        link(p, sink, graph.unary[p].lumen, 0.0);
    }
    for (const PairwiseEdge& e : graph.pairwise) {
        if (e.weight > 0.0) link(e.a, e.b, e.weight, e.weight);
    }
    if (graph.star_constraint) {
        // Outer lumen may not sit on a background inner neighbor: an
        // infinite-capacity edge outer -> inner makes that cut unaffordable.
        for (std::size_t i = 0; i < graph.n_planes; ++i) {
            for (std::size_t a = 0; a < graph.n_angles; ++a) {
                for (std::size_t r = 1; r < graph.n_radii; ++r) {
                    link(graph.index(i, a, r), graph.index(i, a, r - 1), inf_cap, 0.0);
                }
            }
        }
    }

    boost::boykov_kolmogorov_max_flow(g, source, sink);

    Labeling labeling;
    labeling.n_planes = graph.n_planes;
    labeling.n_angles = graph.n_angles;
    labeling.n_radii = graph.n_radii;
    labeling.labels.resize(n);
    auto color = get(boost::vertex_color, g);
    for (std::size_t p = 0; p < n; ++p) {
        labeling.labels[p] = color[p] == boost::black_color ? 1 : 0;
    }
    return labeling;
}

double labeling_energy(const SegmentationGraph& graph, const Labeling& labeling) {
    if (labeling.labels.size() != graph.n_samples()) {
        throw LengthMismatchError("labeling size does not match graph");
    }
    if (graph.star_constraint && !star_feasible(labeling)) {
        return std::numeric_limits<double>::infinity();
    }
    double energy = 0.0;
    for (std::size_t p = 0; p < graph.n_samples(); ++p) {
        energy += labeling.labels[p] ? graph.unary[p].lumen : graph.unary[p].background;
    }
    for (const PairwiseEdge& e : graph.pairwise) {
        if (labeling.labels[e.a] != labeling.labels[e.b]) energy += e.weight;
    }
    return energy;
}

bool star_feasible(const Labeling& labeling) {
    for (std::size_t i = 0; i < labeling.n_planes; ++i) {
        for (std::size_t a = 0; a < labeling.n_angles; ++a) {
            bool seen_background = false;
            for (std::size_t r = 0; r < labeling.n_radii; ++r) {
                const std::uint8_t label = labeling.labels[labeling.index(i, a, r)];
                if (label == 0) {
                    seen_background = true;
                } else if (seen_background) {
                    return false;
                }
            }
        }
    }
    return true;
}

LumenSurface extract_surface(const CylindricalGrid& grid, const Labeling& labeling) {
    LumenSurface surface;
    surface.plane_spacing_mm = grid.plane_spacing;
    surface.n_angles = grid.n_angles;
    surface.planes.resize(grid.n_planes);

    const int n_radii = grid.n_radii();
    for (int i = 0; i < grid.n_planes; ++i) {
        SurfacePlane& plane = surface.planes[i];
        plane.center = grid.plane_center[i];
        plane.axis_u = grid.plane_axis_u[i];
        plane.axis_v = grid.plane_axis_v[i];
        plane.r_star_mm.resize(grid.n_angles);
        for (int a = 0; a < grid.n_angles; ++a) {
            int prefix = 0;  // number of lumen samples from the centerline out
            while (prefix < n_radii && labeling.labels[labeling.index(i, a, prefix)]) ++prefix;
            if (prefix == 0) {
                plane.r_star_mm[a] = grid.radii.front();  // collapsed ray
            } else if (prefix == n_radii) {
                plane.r_star_mm[a] = grid.radii.back();
                ++surface.n_saturated_rays;
            } else {
                // The boundary sits on the outermost lumen sample. Training
                // labels treat the sample at the true radius as lumen, so a
                // cut that reproduces them puts r* exactly on that radius.
                plane.r_star_mm[a] = grid.radii[prefix - 1];
            }
        }
        plane.area_mm2 = contour_area(plane.r_star_mm);
        plane.effective_diameter_mm = 2.0 * std::sqrt(plane.area_mm2 / std::numbers::pi);
    }
    return surface;
}

SegmentBranchResult segment_branch(const CylindricalGrid& grid, const IntensityProfile& profile,
                                   const RayDatabase& db, const RadiusModel& radius_model,
                                   const PipelineConfig& config) {
    SegmentBranchResult result;
    if (config.pve_mode == PveMode::On) {
        result.profile_model = detect_pve(profile);
    } else {
        result.profile_model.pve_mask.assign(static_cast<std::size_t>(grid.n_planes), 0);
    }

    // Config-level K / kernel lambda override the database's stored values.
    const RayDatabase* use_db = &db;
    RayDatabase local;
    if ((config.k_neighbors > 0 && config.k_neighbors != db.k_neighbors) ||
        (config.kernel_lambda > 0.0 && config.kernel_lambda != db.kernel_lambda)) {
        local = db;
        if (config.k_neighbors > 0) local.k_neighbors = config.k_neighbors;
        if (config.kernel_lambda > 0.0) local.kernel_lambda = config.kernel_lambda;
        use_db = &local;
    }

    const ProbabilityField field =
        build_probability_field(grid, *use_db, result.profile_model, radius_model, profile,
                                config.pve_mode, config.calcium, config.jobs);
    const SegmentationGraph graph = build_segmentation_graph(grid, field, config.graph_lambda);
    result.labeling = solve_min_cut(graph);
    result.energy = labeling_energy(graph, result.labeling);
    result.surface = extract_surface(grid, result.labeling);
    for (const std::uint8_t flag : field.plane_is_pve) result.n_pve_planes += flag;
    return result;
}

SegmentBranchResult segment_branch(const ScalarVolume& vol, const Centerline& cl,
                                   const RayDatabase& db, const RadiusModel& radius_model,
                                   const PipelineConfig& config) {
    const Centerline dense = resample_centerline(cl, 0.5);
    const CylindricalGrid grid = warp_to_cylindrical(vol, dense, config.grid.n_angles,
                                                     config.grid.radii(),
                                                     config.grid.plane_spacing_mm);
    IntensityProfile profile;
    profile.arc_length.reserve(grid.n_planes);
    profile.intensity.reserve(grid.n_planes);
    for (int i = 0; i < grid.n_planes; ++i) {
        profile.arc_length.push_back(grid.plane_arc(i));
        profile.intensity.push_back(sample_trilinear(vol, grid.plane_center[i]));
    }
    return segment_branch(grid, profile, db, radius_model, config);
}

}  // namespace coropve
