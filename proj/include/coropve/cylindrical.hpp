#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coropve/centerline.hpp"
#include "coropve/geometry.hpp"
#include "coropve/volume.hpp"

namespace coropve {

/// Volume resampled on cylindrical coordinates (plane index, angle, radius)
/// around a centerline. Plane normals follow the local tangent; the in-plane
/// basis is parallel-transported so there is no axial twist discontinuity.
struct CylindricalGrid {
    int n_planes = 0;
    int n_angles = 0;
    double plane_spacing = 0.0;    // mm between consecutive planes
    std::vector<double> radii;     // mm, strictly increasing, radii[0] > 0
    std::vector<double> intensities;  // [(plane * n_angles + angle) * n_radii + r]
    std::vector<Vec3> plane_center;
    std::vector<Vec3> plane_axis_u;
    std::vector<Vec3> plane_axis_v;
    std::int64_t n_clamped = 0;    // samples that fell outside the volume

    int n_radii() const { return static_cast<int>(radii.size()); }

    std::size_t index(int plane, int angle, int r) const {
        return (static_cast<std::size_t>(plane) * n_angles + angle) * radii.size() + r;
    }
    double at(int plane, int angle, int r) const { return intensities[index(plane, angle, r)]; }
    double& at(int plane, int angle, int r) { return intensities[index(plane, angle, r)]; }

    double angle_rad(int a) const;

    /// Physical position of sample (plane, angle, r).
    Vec3 sample_position(int plane, int angle, int r) const;

    /// Arc length of plane i from the ostium.
    double plane_arc(int plane) const { return plane * plane_spacing; }
};

/// Resamples `vol` around `cl` with one plane every `plane_spacing` of arc
/// length (floor(total/spacing) + 1 planes). Angles are uniform over [0, 2pi).
CylindricalGrid warp_to_cylindrical(const ScalarVolume& vol, const Centerline& cl, int n_angles,
                                    const std::vector<double>& radii, double plane_spacing);

/// Same warp applied to a binary mask (values interpolated, not thresholded).
CylindricalGrid warp_to_cylindrical(const MaskVolume& mask, const Centerline& cl, int n_angles,
                                    const std::vector<double>& radii, double plane_spacing);

}  // namespace coropve
