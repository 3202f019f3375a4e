#include "coropve/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "coropve/config.hpp"
#include "coropve/errors.hpp"
#include "coropve/io.hpp"

namespace coropve {

double contour_area(std::span<const double> r_star) {
    if (r_star.empty()) return 0.0;
    // Sector sum 0.5 * sum(r^2) * dtheta == pi * mean(r^2). The compensated
    // sum keeps a uniform contour at the analytic disk area to a few ulps.
    double acc = 0.0, comp = 0.0;
    for (const double r : r_star) {
        const double term = r * r - comp;
        const double next = acc + term;
        comp = (next - acc) - term;
        acc = next;
    }
    return std::numbers::pi * acc / static_cast<double>(r_star.size());
}

std::vector<Vec3> surface_contour_points(const LumenSurface& surface) {
    std::vector<Vec3> points;
    points.reserve(surface.planes.size() * surface.n_angles);
    for (const SurfacePlane& plane : surface.planes) {
        for (int a = 0; a < surface.n_angles; ++a) {
            const double theta = 2.0 * std::numbers::pi * a / surface.n_angles;
            const Vec3 dir = plane.axis_u * std::cos(theta) + plane.axis_v * std::sin(theta);
            points.push_back(plane.center + dir * plane.r_star_mm[a]);
        }
    }
    return points;
}

namespace {

// r* at an arbitrary angle by linear interpolation between the sampled angles.
double r_star_at(const SurfacePlane& plane, int n_angles, double theta) {
    const double two_pi = 2.0 * std::numbers::pi;
    theta = std::fmod(theta, two_pi);
    if (theta < 0.0) theta += two_pi;
    const double pos = theta / two_pi * n_angles;
    const int a0 = static_cast<int>(pos) % n_angles;
    const int a1 = (a0 + 1) % n_angles;
    const double t = pos - std::floor(pos);
    return plane.r_star_mm[a0] * (1.0 - t) + plane.r_star_mm[a1] * t;
}

// True when every plane normal is +z and the centers share one vertical
// axis: the phantom layout, which allows direct plane lookup.
bool straight_vertical(const LumenSurface& surface) {
    for (const SurfacePlane& p : surface.planes) {
        const Vec3 n = cross(p.axis_u, p.axis_v);
        if (std::abs(n.x) > 1e-12 || std::abs(n.y) > 1e-12 || n.z < 1.0 - 1e-12) return false;
        if (std::abs(p.center.x - surface.planes.front().center.x) > 1e-12 ||
            std::abs(p.center.y - surface.planes.front().center.y) > 1e-12) {
            return false;
        }
    }
    return true;
}

}  // namespace

MaskVolume voxelize_surface(const LumenSurface& surface, const std::array<int, 3>& dims,
                            const Vec3& spacing, const Vec3& origin) {
    MaskVolume mask;
    mask.dims = dims;
    mask.spacing = spacing;
    mask.origin = origin;
    mask.values.assign(mask.size(), 0);
    if (surface.planes.empty()) return mask;

    const bool fast_path = straight_vertical(surface);
    const int n_planes = static_cast<int>(surface.planes.size());
    const double half_slab = 0.5 * surface.plane_spacing_mm;

    auto containing_plane = [&](const Vec3& p) -> int {
        if (fast_path) {
            const double t = (p.z - surface.planes.front().center.z) / surface.plane_spacing_mm;
            // Clamp before the slab test so the half-slab caps beyond the end
            // planes resolve exactly like the generic nearest-plane search.
            const int i = std::clamp(static_cast<int>(std::lround(t)), 0, n_planes - 1);
            if (std::abs(p.z - surface.planes[i].center.z) > half_slab + 1e-9) return -1;
            return i;
        }
        int best = -1;
        double best_d2 = std::numeric_limits<double>::max();
        for (int i = 0; i < n_planes; ++i) {
            const Vec3 d = p - surface.planes[i].center;
            const double d2 = dot(d, d);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        // The axial offset to the winning plane must stay inside its slab.
        const SurfacePlane& plane = surface.planes[best];
        const Vec3 normal = cross(plane.axis_u, plane.axis_v);
        if (std::abs(dot(p - plane.center, normal)) > half_slab + 1e-9) return -1;
        return best;
    };

    auto inside = [&](const Vec3& p) -> bool {
        const int i = containing_plane(p);
        if (i < 0) return false;
        const SurfacePlane& plane = surface.planes[i];
        const Vec3 normal = cross(plane.axis_u, plane.axis_v);
        const Vec3 d = p - plane.center;
        const Vec3 radial = d - normal * dot(d, normal);
        const double r = norm(radial);
        if (r == 0.0) return true;
        const double theta = std::atan2(dot(radial, plane.axis_v), dot(radial, plane.axis_u));
        return r <= r_star_at(plane, surface.n_angles, theta);
    };

    // Center-in-solid digitization: unbiased for smooth boundaries and exact
    // on the closed contour (a center on the surface counts as inside).
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                mask.at(i, j, k) = inside(mask.voxel_center(i, j, k)) ? 1 : 0;
            }
        }
    }
    return mask;
}

void save_surface(const LumenSurface& surface, const nlohmann::json& meta,
                  const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "coropve.surface";
    j["tool_version"] = kToolVersion;
    j["plane_spacing_mm"] = surface.plane_spacing_mm;
    j["n_angles"] = surface.n_angles;
    j["n_saturated_rays"] = surface.n_saturated_rays;
    nlohmann::json planes = nlohmann::json::array();
    for (std::size_t i = 0; i < surface.planes.size(); ++i) {
        const SurfacePlane& p = surface.planes[i];
        nlohmann::json jp;
        jp["index"] = i;
        jp["center_mm"] = {p.center.x, p.center.y, p.center.z};
        jp["axis_u"] = {p.axis_u.x, p.axis_u.y, p.axis_u.z};
        jp["axis_v"] = {p.axis_v.x, p.axis_v.y, p.axis_v.z};
        jp["r_star_mm"] = p.r_star_mm;
        jp["area_mm2"] = p.area_mm2;
        jp["effective_diameter_mm"] = p.effective_diameter_mm;
        planes.push_back(std::move(jp));
    }
    j["planes"] = std::move(planes);
    j["meta"] = meta;
    save_json(j, path);
}

LumenSurface load_surface(const std::filesystem::path& path, nlohmann::json* meta) {
    const nlohmann::json j = load_json(path);
    const nlohmann::json& fmt = require_field(j, "format", path);
    if (fmt.get<std::string>() != "coropve.surface") {
        throw FormatError(path.string() + ": format is '" + fmt.get<std::string>() +
                          "', expected 'coropve.surface'");
    }
    LumenSurface surface;
    surface.plane_spacing_mm = require_field(j, "plane_spacing_mm", path).get<double>();
    surface.n_angles = require_field(j, "n_angles", path).get<int>();
    surface.n_saturated_rays = require_field(j, "n_saturated_rays", path).get<int>();
    const nlohmann::json& planes = require_field(j, "planes", path);
    for (std::size_t i = 0; i < planes.size(); ++i) {
        const nlohmann::json& jp = planes[i];
        const std::string ctx = "planes[" + std::to_string(i) + "]";
        SurfacePlane p;
        const auto read_vec = [&](const char* key) {
            const nlohmann::json& v = require_field(jp, key, path, ctx);
            return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
        };
        p.center = read_vec("center_mm");
        p.axis_u = read_vec("axis_u");
        p.axis_v = read_vec("axis_v");
        p.r_star_mm = require_field(jp, "r_star_mm", path, ctx).get<std::vector<double>>();
        if (static_cast<int>(p.r_star_mm.size()) != surface.n_angles) {
            throw FormatError(path.string() + ": " + ctx + ".r_star_mm length does not match n_angles");
        }
        p.area_mm2 = require_field(jp, "area_mm2", path, ctx).get<double>();
        p.effective_diameter_mm =
            require_field(jp, "effective_diameter_mm", path, ctx).get<double>();
        surface.planes.push_back(std::move(p));
    }
    if (meta && j.contains("meta")) *meta = j.at("meta");
    return surface;
}

}  // namespace coropve
