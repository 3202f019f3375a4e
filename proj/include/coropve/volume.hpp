#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "coropve/geometry.hpp"

namespace coropve {

/// Regular 3D grid with physical spacing. `origin` is the position of the
/// center of voxel (0,0,0); values are stored x-fastest.
template <typename T>
struct Grid3 {
    std::array<int, 3> dims{0, 0, 0};  // nx, ny, nz
    Vec3 spacing{1.0, 1.0, 1.0};       // mm, all > 0
    Vec3 origin{};                     // mm
    std::vector<T> values;

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }

    T& at(int i, int j, int k) { return values[index(i, j, k)]; }
    T at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 voxel_center(int i, int j, int k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
    }

    bool geometry_valid() const {
        return dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 && spacing.x > 0.0 &&
               spacing.y > 0.0 && spacing.z > 0.0 && values.size() == size();
    }

    template <typename U>
    bool same_geometry(const Grid3<U>& o) const {
        return dims == o.dims && spacing == o.spacing && origin == o.origin;
    }
};

/// HU volume. Kept as float in memory; stored as int16 on disk.
using ScalarVolume = Grid3<float>;
/// Binary mask sharing ScalarVolume geometry (0 or 1 per voxel).
using MaskVolume = Grid3<std::uint8_t>;

/// Trilinear interpolation of the 8 voxels enclosing `p`. Points outside the
/// grid are clamped to the nearest face, which makes the lookup total.
/// `clamped`, when given, is set to whether any coordinate had to be clamped.
template <typename T>
double sample_trilinear(const Grid3<T>& vol, const Vec3& p, bool* clamped = nullptr) {
    // Continuous voxel coordinates (voxel centers at integer positions).
    double u = (p.x - vol.origin.x) / vol.spacing.x;
    double v = (p.y - vol.origin.y) / vol.spacing.y;
    double w = (p.z - vol.origin.z) / vol.spacing.z;

    bool clip = false;
    auto clamp_axis = [&clip](double c, int n) {
        if (c < 0.0) {
            clip = true;
            return 0.0;
        }
        if (c > n - 1.0) {
            clip = true;
            return static_cast<double>(n - 1);
        }
        return c;
    };
    u = clamp_axis(u, vol.dims[0]);
    v = clamp_axis(v, vol.dims[1]);
    w = clamp_axis(w, vol.dims[2]);
    if (clamped) *clamped = clip;

    const int i0 = std::min(static_cast<int>(u), vol.dims[0] - 1);
    const int j0 = std::min(static_cast<int>(v), vol.dims[1] - 1);
    const int k0 = std::min(static_cast<int>(w), vol.dims[2] - 1);
    const int i1 = std::min(i0 + 1, vol.dims[0] - 1);
    const int j1 = std::min(j0 + 1, vol.dims[1] - 1);
    const int k1 = std::min(k0 + 1, vol.dims[2] - 1);
    const double fx = u - i0;
    const double fy = v - j0;
    const double fz = w - k0;

    auto g = [&](int i, int j, int k) { return static_cast<double>(vol.at(i, j, k)); };
    const double c00 = g(i0, j0, k0) * (1 - fx) + g(i1, j0, k0) * fx;
    const double c10 = g(i0, j1, k0) * (1 - fx) + g(i1, j1, k0) * fx;
    const double c01 = g(i0, j0, k1) * (1 - fx) + g(i1, j0, k1) * fx;
    const double c11 = g(i0, j1, k1) * (1 - fx) + g(i1, j1, k1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

/// Separable Gaussian blur with mirror boundary handling. sigma_mm == 0 is a
/// no-op. Kernel is truncated at 4 sigma and normalized to unit sum.
void gaussian_blur_mirror(ScalarVolume& vol, double sigma_mm);

}  // namespace coropve
