#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "coropve/geometry.hpp"
#include "coropve/volume.hpp"

namespace coropve {

/// One cross-sectional lumen contour: boundary radius per angle plus the
/// derived area and effective diameter.
struct SurfacePlane {
    Vec3 center;
    Vec3 axis_u;
    Vec3 axis_v;
    std::vector<double> r_star_mm;      // boundary radius per angle
    double area_mm2 = 0.0;              // 1/2 * integral of r*^2 dtheta
    double effective_diameter_mm = 0.0; // 2 * sqrt(area / pi)
};

/// Lumen boundary surface over the cylindrical grid of one branch.
struct LumenSurface {
    double plane_spacing_mm = 0.0;
    int n_angles = 0;
    std::vector<SurfacePlane> planes;
    int n_saturated_rays = 0;  // rays where the boundary hit the outermost radius

    std::size_t n_planes() const { return planes.size(); }
    double plane_arc(int i) const { return i * plane_spacing_mm; }
};

/// Cross-sectional area of a closed polar contour sampled at uniform angles.
double contour_area(std::span<const double> r_star);

/// Boundary points of every plane contour, in volume coordinates.
std::vector<Vec3> surface_contour_points(const LumenSurface& surface);

/// Rasterizes the enclosed lumen onto the given reference geometry: a voxel
/// is set when its center lies inside the solid (closed boundary).
MaskVolume voxelize_surface(const LumenSurface& surface, const std::array<int, 3>& dims,
                            const Vec3& spacing, const Vec3& origin);

/// Surface JSON I/O. `meta` (config echo, diagnostics) is stored alongside
/// the per-plane records and returned verbatim on load.
void save_surface(const LumenSurface& surface, const nlohmann::json& meta,
                  const std::filesystem::path& path);
LumenSurface load_surface(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace coropve
