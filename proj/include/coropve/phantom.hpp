#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "coropve/centerline.hpp"
#include "coropve/volume.hpp"

namespace coropve {

/// Soft or calcified plaque shell wrapped around the lumen over an arc range.
struct PlaqueSegment {
    double start_mm = 0.0;
    double end_mm = 0.0;
    double hu = 60.0;
    double outer_radius_mm = 0.0;  // must be >= local lumen radius
};

/// Straight-axis vessel phantom description. The radius profile is a
/// piecewise-linear function of arc length given by (arc, radius) breakpoints.
struct PhantomSpec {
    double length_mm = 40.0;
    std::vector<std::pair<double, double>> radius_profile{{0.0, 2.0}};
    std::vector<PlaqueSegment> plaque_segments;
    double lumen_hu = 400.0;
    double background_hu = 0.0;
    double psf_sigma_mm = 0.6;   // isotropic Gaussian blur
    Vec3 voxel_spacing_mm{0.35, 0.35, 0.35};
    double noise_sigma_hu = 0.0;

    /// Lumen radius at arc length s (clamped to the profile range).
    double radius_at(double s) const;
};

/// Ground truth bundle: blurred and pre-blur volumes, the exact lumen mask on
/// the ideal grid, and the straight centerline along the vessel axis.
struct PhantomTruth {
    ScalarVolume volume;        // blurred (+ noise)
    ScalarVolume ideal_volume;  // pre-blur rasterization
    MaskVolume lumen_mask;      // supersampled lumen fraction >= 0.5
    Centerline centerline;
    PhantomSpec spec;
    std::uint64_t seed = 0;
};

/// Rasterizes the spec with 3x3x3 subvoxel supersampling, convolves with the
/// Gaussian PSF (separable, mirror boundary) and adds seeded Gaussian noise.
/// Throws SpecError if a plaque shell is thinner than the local lumen.
PhantomTruth generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Radius estimate from a cross-sectional intensity profile: half the width
/// at (max + background)/2, with linear interpolation at the crossings.
/// Throws NoPeakError if the profile never rises above the background.
double fwhm_radius(std::span<const double> profile, double sample_spacing_mm,
                   double background_hu);

/// Centerline HU reduction of a blurred ideal cylinder per diameter:
/// reduction = 1 - HU_center / lumen_hu. Uses the closed-form center
/// response of a disk under 2D Gaussian blur (the axial direction of an
/// ideal cylinder integrates out).
std::vector<std::pair<double, double>> hu_reduction_curve(std::span<const double> diameters_mm,
                                                          double lumen_hu, double background_hu,
                                                          double psf_sigma_mm);

}  // namespace coropve
