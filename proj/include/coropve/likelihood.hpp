#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coropve/config.hpp"
#include "coropve/cylindrical.hpp"
#include "coropve/profile.hpp"
#include "coropve/raydb.hpp"

namespace coropve {

/// exp(-kernel_lambda * ||a - b||^2) for two equal-length intensity rays.
double ray_weight(std::span<const float> a, std::span<const float> b, double kernel_lambda);

/// Identifies where a probability came from; PVE-corrected planes replace
/// the data-driven term with a geometric prior.
enum class ProbabilitySource : std::uint8_t { Data = 0, PartialVolume = 1, Calcium = 2 };

/// Per-sample lumen probability over a cylindrical grid, plus bookkeeping
/// of which planes used the PVE prior.
struct ProbabilityField {
    std::size_t n_planes = 0;
    std::size_t n_angles = 0;
    std::size_t n_radii = 0;
    std::vector<double> prob;                    // [(plane*n_angles+angle)*n_radii + r]
    std::vector<ProbabilitySource> source;       // same layout
    std::vector<std::uint8_t> plane_is_pve;      // [plane]

    std::size_t index(std::size_t i, std::size_t a, std::size_t r) const {
        return (i * n_angles + a) * n_radii + r;
    }
};

/// Weighted K-NN vote over the ray database: for each radial sample,
/// probability = sum(w_k * label_k) / sum(w_k) over the K nearest rays.
/// Weights are stabilized by factoring out the minimum distance, which
/// leaves the ratio unchanged. `exclude` (if >= 0) skips that database row
/// so a ray never votes for itself during leave-one-out evaluation.
std::vector<double> knn_lumen_probability(std::span<const float> query, const RayDatabase& db,
                                          std::ptrdiff_t exclude = -1);

/// Geometric prior for PVE-corrected planes: step function that is 1 inside
/// the model-estimated radius and 0 outside.
std::vector<double> pve_step_probability(std::span<const float> radii, double r_prime_mm);

/// Builds the full probability field for one warped vessel. Planes flagged
/// in `model.pve_mask` use the radius-model step prior when `mode` is On;
/// all other planes (and every plane when `mode` is Off) use the K-NN vote.
/// Samples above the calcium HU threshold are overridden with the calcium
/// probability regardless of plane type.
ProbabilityField build_probability_field(const CylindricalGrid& grid, const RayDatabase& db,
                                         const ProfileModel& model, const RadiusModel& radius_model,
                                         const IntensityProfile& profile, PveMode mode,
                                         const CalciumParams& calcium, int jobs = 0);

}  // namespace coropve
