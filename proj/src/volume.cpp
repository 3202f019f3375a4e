#include "coropve/volume.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

namespace coropve {

namespace {

std::vector<double> gaussian_kernel(double sigma_vox) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_vox));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * i * i / (sigma_vox * sigma_vox));
        k[i + radius] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

// Reflection through the edge voxel centers: -1 -> 1, n -> n-2. Folded
// repeatedly so kernels wider than the axis stay in range.
int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

void blur_axis(std::vector<double>& values, const std::array<int, 3>& dims, int axis,
               const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const int n = dims[axis];
    const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? static_cast<std::size_t>(dims[0])
                                         : static_cast<std::size_t>(dims[0]) * dims[1];
    // Iterate over all lines along `axis`.
    const int na = dims[(axis + 1) % 3];
    const int nb = dims[(axis + 2) % 3];
    const std::size_t stride_a = (axis + 1) % 3 == 0 ? 1
                               : (axis + 1) % 3 == 1 ? static_cast<std::size_t>(dims[0])
                                                     : static_cast<std::size_t>(dims[0]) * dims[1];
    const std::size_t stride_b = (axis + 2) % 3 == 0 ? 1
                               : (axis + 2) % 3 == 1 ? static_cast<std::size_t>(dims[0])
                                                     : static_cast<std::size_t>(dims[0]) * dims[1];

    std::vector<double> line(n), out(n);
    for (int a = 0; a < na; ++a) {
        for (int b = 0; b < nb; ++b) {
            const std::size_t base = a * stride_a + b * stride_b;
            for (int i = 0; i < n; ++i) line[i] = values[base + i * stride];
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = -radius; j <= radius; ++j) {
                    acc += kernel[j + radius] * line[mirror_index(i + j, n)];
                }
                out[i] = acc;
            }
            for (int i = 0; i < n; ++i) values[base + i * stride] = out[i];
        }
    }
}

}  // namespace

void gaussian_blur_mirror(ScalarVolume& vol, double sigma_mm) {
    if (sigma_mm <= 0.0) return;
    std::vector<double> work(vol.values.begin(), vol.values.end());
    const double spacings[3] = {vol.spacing.x, vol.spacing.y, vol.spacing.z};
    for (int axis = 0; axis < 3; ++axis) {
        const double sigma_vox = sigma_mm / spacings[axis];
        blur_axis(work, vol.dims, axis, gaussian_kernel(sigma_vox));
    }
    for (std::size_t i = 0; i < work.size(); ++i) {
        vol.values[i] = static_cast<float>(work[i]);
    }
}

}  // namespace coropve
