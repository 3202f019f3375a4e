#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coropve/centerline.hpp"
#include "coropve/surface.hpp"

namespace coropve {

struct DiameterSample {
    double s_mm = 0.0;        // arc position from segment start
    double diameter_mm = 0.0;
};

/// One vessel segment between two tree nodes with its sampled diameter profile.
struct VesselSegment {
    int from_node = -1;
    int to_node = -1;
    double length_mm = 0.0;
    std::vector<DiameterSample> profile;  // s strictly increasing, covers [0, length]
    int branch = -1;                      // originating centerline branch
    double branch_start_mm = 0.0;         // arc offset of the segment start on that branch

    double min_diameter() const;
    double diameter_at(double s) const;   // linear interpolation
};

/// Segment tree for one coronary tree. Node 0 conventions: `root_node` is the
/// ostium; outlets are nodes with no outgoing segment.
struct VesselTree {
    std::vector<VesselSegment> segments;
    int n_nodes = 0;
    int root_node = 0;
    TreeSide tree_side = TreeSide::Left;

    std::vector<int> outlet_nodes() const;
    /// Distal diameter of the segment entering `node` (outlet boundary value).
    double outlet_diameter(int node) const;
};

/// Splits each branch surface at its children's attachment points and carries
/// over per-plane effective diameters (3-plane moving median smoothed).
/// Throws TopologyError on dangling parent links.
VesselTree tree_from_surfaces(std::span<const LumenSurface> surfaces, const CenterlineTree& topology);

struct FluidParams {
    double viscosity_pa_s = 0.0035;
    double density_kg_m3 = 1050.0;
    double expansion_loss_k = 1.0;  // quadratic loss coefficient
};

struct FlowParams {
    FluidParams fluid;
    double outlet_exponent = -1.0 / 3.0;
    double outlet_scale = 0.0;          // <= 0: use calibrate_outlet_scale()
    double ostial_pressure_mmhg = 100.0;
    double venous_pressure_mmhg = 0.0;
};

/// Resistance element with pressure drop R_lin*Q + R_quad*Q*|Q|
/// (mmHg when Q is in mL/s).
struct FlowEdge {
    int from = -1;
    int to = -1;
    double r_lin = 0.0;   // mmHg s / mL
    double r_quad = 0.0;  // mmHg s^2 / mL^2
    int segment = -1;
};

struct FlowNetwork {
    std::vector<FlowEdge> edges;
    std::vector<std::pair<int, double>> outlet_resistances;  // (node, R_i)
    double ostial_pressure_mmhg = 100.0;
    double venous_pressure_mmhg = 0.0;
    int n_nodes = 0;
    int root_node = 0;
};

struct FlowResult {
    std::vector<double> node_pressures_mmhg;
    std::vector<double> edge_flows_ml_s;    // per network edge
    std::vector<double> outlet_flows_ml_s;  // per outlet resistance
    double solver_residual_ml_s = 0.0;      // max nodal flow imbalance
    int iterations = 0;
};

/// Poiseuille resistance of each segment integrated along its diameter
/// profile plus a quadratic expansion-loss term where the segment narrows,
/// and Eq.-style outlet resistances R_i = scale * d_i^exponent.
FlowNetwork build_network(const VesselTree& tree, const FlowParams& params);

/// Proportionality constant for the outlet resistances, fixed so that a
/// healthy reference tree (3 mm uniform, 100 mm path) reaches FFR 0.97 at
/// its outlet. Stands in for hyperemic boundary conditions.
double calibrate_outlet_scale(const FlowParams& params);

/// Kirchhoff nodal solve with the nonlinear edge laws, by damped fixed-point
/// iteration on effective conductances. Converges when the max nodal flow
/// imbalance is below 1e-9 mL/s and pressures have settled (rel 1e-10);
/// throws NoConvergenceError after 200 iterations.
FlowResult solve_flow(const FlowNetwork& net);

/// Pressure ratio at an arc position inside a segment (linear interpolation
/// between the segment's node pressures, divided by the ostial pressure).
/// Throws LocationError for an invalid segment or position.
double ffr_at(const VesselTree& tree, const FlowNetwork& net, const FlowResult& result,
              int segment, double s_mm);

double node_ffr(const FlowNetwork& net, const FlowResult& result, int node);

/// Full result record (*.ffr.json): outlet table, pressures, flows, per-
/// segment FFR, solver diagnostics, plus the caller's config echo.
void save_flow_result(const VesselTree& tree, const FlowNetwork& net, const FlowResult& result,
                      const nlohmann::json& meta, const std::filesystem::path& path);

}  // namespace coropve
