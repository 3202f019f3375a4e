#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coropve/centerline.hpp"
#include "coropve/config.hpp"
#include "coropve/phantom.hpp"
#include "coropve/volume.hpp"

namespace coropve {

/// Training rays: intensity profiles along cylindrical rays with matched
/// binary lumen labels. Labels are prefix-monotone (1s then 0s) because the
/// lumen is star-shaped about the centerline.
struct RayDatabase {
    std::vector<float> radii;           // shared radial grid, mm
    std::vector<float> intensities;     // [ray * n_radii + r], HU
    std::vector<std::uint8_t> labels;   // [ray * n_radii + r], 0/1
    double kernel_lambda = 0.0;         // Gaussian kernel decay, 1/HU^2
    int k_neighbors = 100;
    std::string provenance;

    std::size_t n_rays() const { return radii.empty() ? 0 : intensities.size() / radii.size(); }
    std::size_t n_radii() const { return radii.size(); }

    std::span<const float> intensity_ray(std::size_t k) const {
        return {intensities.data() + k * n_radii(), n_radii()};
    }
    std::span<const std::uint8_t> label_ray(std::size_t k) const {
        return {labels.data() + k * n_radii(), n_radii()};
    }
};

/// Per-sample RMS difference of 50 HU costs e^-1.
double default_kernel_lambda(std::size_t n_radii);

/// A labeled vessel: volume, exact lumen mask, and the centerline to warp
/// around. Used to harvest training rays. When `truth_spec` is set the labels
/// come from its analytic radius profile instead of the voxelized mask, which
/// avoids the half-voxel boundary quantization of mask resampling.
struct LabeledVessel {
    const ScalarVolume* volume = nullptr;
    const MaskVolume* mask = nullptr;
    const Centerline* centerline = nullptr;
    const PhantomSpec* truth_spec = nullptr;
};

/// Warps each vessel (volume and mask) to cylindrical coordinates and emits
/// one ray per (plane, angle). Mask samples are thresholded at 0.5 and label
/// rays truncated at their first 0 to enforce prefix monotonicity; vessels
/// with an analytic truth radius label directly against it instead.
/// kernel_lambda <= 0 selects the scale-aware default.
/// Throws EmptyDatabaseError if no rays are produced.
RayDatabase build_ray_database(std::span<const LabeledVessel> vessels, const GridParams& grid,
                               double kernel_lambda, int k_neighbors);

RayDatabase build_ray_database(std::span<const PhantomTruth> phantoms, const GridParams& grid,
                               double kernel_lambda, int k_neighbors);

/// Binary .raydb format: magic "CRAYDB1\0", LE u32 n_rays, u32 n_radii,
/// f32 radii[], f32 intensities[], u8 labels[], JSON footer.
void save_ray_database(const RayDatabase& db, const std::filesystem::path& path);
RayDatabase load_ray_database(const std::filesystem::path& path);

}  // namespace coropve
