#pragma once

#include <cstdint>
#include <vector>

#include "coropve/config.hpp"
#include "coropve/cylindrical.hpp"
#include "coropve/likelihood.hpp"
#include "coropve/surface.hpp"

namespace coropve {

/// Unary potentials for the two labels of one sample.
struct CostPair {
    double lumen = 0.0;
    double background = 0.0;
};

/// -log probability with an epsilon floor so certain probabilities stay finite.
CostPair unary_cost(double lumen_probability, double epsilon = 1e-6);

/// Contrast-modulated pairwise weight: exp(-(dI)^2 / sigma_c) * exp(-d^2),
/// with d the Euclidean distance between the two sample positions in mm.
/// sigma_c <= 0 degrades gracefully to intensity-independent smoothing.
double pairwise_weight(double intensity_a, double intensity_b, double distance_mm, double sigma_c);

/// Binary labeling over a cylindrical grid. labels[idx] is 1 for lumen.
struct Labeling {
    std::size_t n_planes = 0;
    std::size_t n_angles = 0;
    std::size_t n_radii = 0;
    std::vector<std::uint8_t> labels;

    std::size_t index(std::size_t i, std::size_t a, std::size_t r) const {
        return (i * n_angles + a) * n_radii + r;
    }
};

/// Sparse pairwise term between two samples.
struct PairwiseEdge {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double weight = 0.0;
};

/// Energy minimization problem: unary costs per sample plus weighted
/// smoothness edges, with optional hard star-shape ordering constraints
/// (outer sample may be lumen only if the inner one is).
struct SegmentationGraph {
    std::size_t n_planes = 0;
    std::size_t n_angles = 0;
    std::size_t n_radii = 0;
    std::vector<CostPair> unary;           // [sample]
    std::vector<PairwiseEdge> pairwise;    // lambda already applied
    bool star_constraint = true;

    std::size_t n_samples() const { return n_planes * n_angles * n_radii; }
    std::size_t index(std::size_t i, std::size_t a, std::size_t r) const {
        return (i * n_angles + a) * n_radii + r;
    }
};

/// Assembles the graph for one vessel: unary costs from the probability
/// field, pairwise edges between radial/angular/axial neighbors weighted by
/// Eq-style contrast terms scaled by lambda. sigma_c is estimated per plane
/// pair from the local intensity variance (averaged across the two planes).
SegmentationGraph build_segmentation_graph(const CylindricalGrid& grid,
                                           const ProbabilityField& prob, double lambda);

/// Global min-cut via Boykov-Kolmogorov max-flow. Returns the optimal
/// labeling; star constraints are enforced with infinite-capacity edges.
Labeling solve_min_cut(const SegmentationGraph& graph);

/// Evaluates the energy of an arbitrary labeling (unary + violated pairwise
/// terms). Star-constraint violations return +infinity.
double labeling_energy(const SegmentationGraph& graph, const Labeling& labeling);

/// True if every column of `labeling` is a prefix of 1s followed by 0s.
bool star_feasible(const Labeling& labeling);

/// Converts a feasible labeling into a lumen surface: per (plane, angle),
/// r* is the midpoint between the outermost lumen sample and the first
/// background sample. All-background rays collapse to radii[0]; all-lumen
/// rays saturate at radii[last] and are counted in n_saturated_rays.
LumenSurface extract_surface(const CylindricalGrid& grid, const Labeling& labeling);

/// One-call segmentation of a warped branch.
struct SegmentBranchResult {
    Labeling labeling;
    LumenSurface surface;
    ProfileModel profile_model;
    double energy = 0.0;
    std::size_t n_pve_planes = 0;
};

SegmentBranchResult segment_branch(const CylindricalGrid& grid, const IntensityProfile& profile,
                                   const RayDatabase& db, const RadiusModel& radius_model,
                                   const PipelineConfig& config);

/// Convenience overload: warps the volume around the centerline, samples the
/// centerline intensity profile at the plane centers, and segments.
SegmentBranchResult segment_branch(const ScalarVolume& vol, const Centerline& cl,
                                   const RayDatabase& db, const RadiusModel& radius_model,
                                   const PipelineConfig& config);

}  // namespace coropve
