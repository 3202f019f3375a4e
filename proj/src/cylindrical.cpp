#include "coropve/cylindrical.hpp"

#include <cmath>
#include <numbers>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

// Any unit vector orthogonal to t: take the coordinate axis least aligned
// with t and project out the tangential component.
Vec3 initial_normal(const Vec3& t) {
    const double ax = std::abs(t.x), ay = std::abs(t.y), az = std::abs(t.z);
    Vec3 e = ax <= ay && ax <= az ? Vec3{1, 0, 0} : ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
    return normalized(e - t * dot(e, t));
}

// Minimal rotation taking a onto b (both unit), applied to v.
Vec3 rotate_between(const Vec3& a, const Vec3& b, const Vec3& v) {
    const Vec3 axis = cross(a, b);
    const double s = norm(axis);
    const double c = dot(a, b);
    if (s < 1e-14) return v;  // parallel tangents: frame carries over
    const Vec3 k = axis / s;
    // Rodrigues' formula.
    return v * c + cross(k, v) * s + k * (dot(k, v) * (1.0 - c));
}

template <typename T>
CylindricalGrid warp_impl(const Grid3<T>& vol, const Centerline& cl, int n_angles,
                          const std::vector<double>& radii, double plane_spacing) {
    if (cl.points.size() < 2) {
        throw DegenerateTangentError("centerline needs at least 2 points to define tangents");
    }
    for (std::size_t i = 1; i < radii.size(); ++i) {
        if (radii[i] <= radii[i - 1]) throw FormatError("radii must be strictly increasing");
    }
    if (radii.empty() || radii.front() <= 0.0) throw FormatError("radii must start above 0");
    if (n_angles < 2) throw FormatError("cylindrical warp needs at least 2 angles");
    if (!(plane_spacing > 0.0)) throw FormatError("plane spacing must be positive");

    CylindricalGrid grid;
    grid.n_planes = static_cast<int>(std::floor(cl.total_length() / plane_spacing + 1e-9)) + 1;
    grid.n_angles = n_angles;
    grid.plane_spacing = plane_spacing;
    grid.radii = radii;
    grid.intensities.resize(static_cast<std::size_t>(grid.n_planes) * n_angles * radii.size());
    grid.plane_center.resize(grid.n_planes);
    grid.plane_axis_u.resize(grid.n_planes);
    grid.plane_axis_v.resize(grid.n_planes);

    Vec3 t_prev = cl.tangent_at(0.0);
    Vec3 u = initial_normal(t_prev);
    for (int i = 0; i < grid.n_planes; ++i) {
        const double s = i * plane_spacing;
        const Vec3 t = cl.tangent_at(s);
        u = rotate_between(t_prev, t, u);
        u = normalized(u - t * dot(u, t));  // guard against drift
        const Vec3 v = cross(t, u);
        t_prev = t;

        grid.plane_center[i] = cl.point_at(s);
        grid.plane_axis_u[i] = u;
        grid.plane_axis_v[i] = v;

        for (int a = 0; a < n_angles; ++a) {
            const double theta = 2.0 * std::numbers::pi * a / n_angles;
            const Vec3 dir = u * std::cos(theta) + v * std::sin(theta);
            for (std::size_t r = 0; r < radii.size(); ++r) {
                bool clamped = false;
                const Vec3 p = grid.plane_center[i] + dir * radii[r];
                grid.intensities[grid.index(i, a, static_cast<int>(r))] =
                    sample_trilinear(vol, p, &clamped);
                if (clamped) ++grid.n_clamped;
            }
        }
    }
    return grid;
}

}  // namespace

double CylindricalGrid::angle_rad(int a) const {
    return 2.0 * std::numbers::pi * a / n_angles;
}

Vec3 CylindricalGrid::sample_position(int plane, int angle, int r) const {
    const double theta = angle_rad(angle);
    const Vec3 dir = plane_axis_u[plane] * std::cos(theta) + plane_axis_v[plane] * std::sin(theta);
    return plane_center[plane] + dir * radii[r];
}

CylindricalGrid warp_to_cylindrical(const ScalarVolume& vol, const Centerline& cl, int n_angles,
                                    const std::vector<double>& radii, double plane_spacing) {
    return warp_impl(vol, cl, n_angles, radii, plane_spacing);
}

CylindricalGrid warp_to_cylindrical(const MaskVolume& mask, const Centerline& cl, int n_angles,
                                    const std::vector<double>& radii, double plane_spacing) {
    return warp_impl(mask, cl, n_angles, radii, plane_spacing);
}

}  // namespace coropve
