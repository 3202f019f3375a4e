#include "coropve/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

void validate_spec(const PhantomSpec& spec) {
    if (spec.length_mm <= 0.0) throw SpecError("phantom length must be positive");
    if (spec.radius_profile.empty()) throw SpecError("radius profile needs >= 1 breakpoint");
    for (std::size_t i = 0; i < spec.radius_profile.size(); ++i) {
        if (spec.radius_profile[i].second <= 0.0) {
            throw SpecError("radius profile must be positive everywhere");
        }
        if (i > 0 && spec.radius_profile[i].first <= spec.radius_profile[i - 1].first) {
            throw SpecError("radius profile breakpoints must have increasing arc length");
        }
    }
    if (spec.psf_sigma_mm < 0.0) throw SpecError("psf_sigma must be >= 0");
    if (spec.lumen_hu <= spec.background_hu) {
        throw SpecError("lumen_hu must exceed background_hu");
    }
    if (spec.voxel_spacing_mm.x <= 0.0 || spec.voxel_spacing_mm.y <= 0.0 ||
        spec.voxel_spacing_mm.z <= 0.0) {
        throw SpecError("voxel spacing must be positive");
    }
    if (spec.noise_sigma_hu < 0.0) throw SpecError("noise_sigma must be >= 0");
    for (const PlaqueSegment& p : spec.plaque_segments) {
        if (p.end_mm <= p.start_mm) throw SpecError("plaque segment has non-positive extent");
        // The shell must enclose the lumen over its whole arc range.
        const double step = 0.05;
        for (double s = p.start_mm; s <= p.end_mm + 1e-9; s += step) {
            const double lumen_r = spec.radius_at(std::min(s, p.end_mm));
            if (p.outer_radius_mm < lumen_r) {
                throw SpecError("plaque outer radius " + std::to_string(p.outer_radius_mm) +
                                " mm is inside the lumen (radius " + std::to_string(lumen_r) +
                                " mm) at arc " + std::to_string(s) + " mm");
            }
        }
    }
}

}  // namespace

double PhantomSpec::radius_at(double s) const {
    const auto& rp = radius_profile;
    if (s <= rp.front().first) return rp.front().second;
    if (s >= rp.back().first) return rp.back().second;
    for (std::size_t i = 1; i < rp.size(); ++i) {
        if (s <= rp[i].first) {
            const double t = (s - rp[i - 1].first) / (rp[i].first - rp[i - 1].first);
            return rp[i - 1].second + t * (rp[i].second - rp[i - 1].second);
        }
    }
    return rp.back().second;
}

PhantomTruth generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    validate_spec(spec);

    // Cross-section extent: widest structure plus room for the blur tails.
    double max_r = 0.0;
    for (const auto& [s, r] : spec.radius_profile) max_r = std::max(max_r, r);
    for (const PlaqueSegment& p : spec.plaque_segments) max_r = std::max(max_r, p.outer_radius_mm);
    const double margin = std::max(3.0, 6.0 * spec.psf_sigma_mm);
    const double half_extent = max_r + margin;

    const Vec3 sp = spec.voxel_spacing_mm;
    const int hx = static_cast<int>(std::ceil(half_extent / sp.x));
    const int hy = static_cast<int>(std::ceil(half_extent / sp.y));
    const int nz = static_cast<int>(std::floor(spec.length_mm / sp.z + 1e-9)) + 1;

    PhantomTruth truth;
    truth.spec = spec;
    truth.seed = seed;

    ScalarVolume& ideal = truth.ideal_volume;
    ideal.dims = {2 * hx + 1, 2 * hy + 1, nz};   // odd xy counts center a voxel on the axis
    ideal.spacing = sp;
    ideal.origin = {-hx * sp.x, -hy * sp.y, 0.0};
    ideal.values.assign(ideal.size(), 0.0f);

    MaskVolume& mask = truth.lumen_mask;
    mask.dims = ideal.dims;
    mask.spacing = sp;
    mask.origin = ideal.origin;
    mask.values.assign(mask.size(), 0);

    // Intensities average a 3x3x3 supersample (offsets -1/3, 0, +1/3 of the
    // spacing) so boundary voxels carry true partial-volume values. The mask
    // uses center-in-solid digitization with a closed boundary -- the same
    // rule voxelize_surface applies -- so a segmentation that recovers the
    // exact contour also reproduces the truth mask voxel for voxel.
    const double off[3] = {-1.0 / 3.0, 0.0, 1.0 / 3.0};
    for (int k = 0; k < ideal.dims[2]; ++k) {
        for (int j = 0; j < ideal.dims[1]; ++j) {
            for (int i = 0; i < ideal.dims[0]; ++i) {
                const Vec3 c = ideal.voxel_center(i, j, k);
                double acc = 0.0;
                for (int a = 0; a < 3; ++a) {
                    for (int b = 0; b < 3; ++b) {
                        for (int d = 0; d < 3; ++d) {
                            const double x = c.x + off[a] * sp.x;
                            const double y = c.y + off[b] * sp.y;
                            const double z = c.z + off[d] * sp.z;
                            const double rr = std::sqrt(x * x + y * y);
                            double hu = spec.background_hu;
                            if (rr <= spec.radius_at(z)) {
                                hu = spec.lumen_hu;
                            } else {
                                for (const PlaqueSegment& p : spec.plaque_segments) {
                                    if (z >= p.start_mm && z <= p.end_mm &&
                                        rr <= p.outer_radius_mm) {
                                        hu = p.hu;
                                        break;
                                    }
                                }
                            }
                            acc += hu;
                        }
                    }
                }
                ideal.at(i, j, k) = static_cast<float>(acc / 27.0);
                const double rc = std::sqrt(c.x * c.x + c.y * c.y);
                mask.at(i, j, k) = rc <= spec.radius_at(c.z) ? 1 : 0;
            }
        }
    }

    truth.volume = ideal;
    gaussian_blur_mirror(truth.volume, spec.psf_sigma_mm);

    if (spec.noise_sigma_hu > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma_hu);
        for (float& v : truth.volume.values) v = static_cast<float>(v + noise(rng));
    }

    // CT volumes carry integer HU. Quantizing with the storage rounding keeps
    // the in-memory volume byte-identical across a disk round trip.
    for (float& v : truth.volume.values) {
        const double r = std::llround(static_cast<double>(v));
        v = static_cast<float>(std::clamp(r, -32768.0, 32767.0));
    }

    std::vector<Vec3> cl_points;
    const int n_cl = static_cast<int>(std::ceil(spec.length_mm / 0.5)) + 1;
    for (int i = 0; i < n_cl; ++i) {
        const double z = spec.length_mm * static_cast<double>(i) / (n_cl - 1);
        cl_points.push_back({0.0, 0.0, z});
    }
    truth.centerline = make_centerline(std::move(cl_points));
    return truth;
}

double fwhm_radius(std::span<const double> profile, double sample_spacing_mm,
                   double background_hu) {
    if (profile.empty()) throw NoPeakError("empty profile");
    const auto peak_it = std::max_element(profile.begin(), profile.end());
    const double peak = *peak_it;
    if (peak <= background_hu) {
        throw NoPeakError("profile maximum " + std::to_string(peak) +
                          " HU does not exceed the background " +
                          std::to_string(background_hu) + " HU");
    }
    const double half = 0.5 * (peak + background_hu);
    const auto peak_idx = static_cast<std::size_t>(peak_it - profile.begin());

    // Walk outward from the peak to the first samples below the half level
    // and interpolate the crossing positions linearly.
    double left = 0.0;
    for (std::size_t i = peak_idx; i-- > 0;) {
        if (profile[i] < half) {
            const double t = (half - profile[i]) / (profile[i + 1] - profile[i]);
            left = (static_cast<double>(i) + t) * sample_spacing_mm;
            break;
        }
    }
    double right = static_cast<double>(profile.size() - 1) * sample_spacing_mm;
    for (std::size_t i = peak_idx + 1; i < profile.size(); ++i) {
        if (profile[i] < half) {
            const double t = (profile[i - 1] - half) / (profile[i - 1] - profile[i]);
            right = (static_cast<double>(i - 1) + t) * sample_spacing_mm;
            break;
        }
    }
    return 0.5 * (right - left);
}

std::vector<std::pair<double, double>> hu_reduction_curve(std::span<const double> diameters_mm,
                                                          double lumen_hu, double background_hu,
                                                          double psf_sigma_mm) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(diameters_mm.size());
    for (const double d : diameters_mm) {
        double reduction = 0.0;
        if (psf_sigma_mm > 0.0) {
            // Center response of a disk of radius a under an isotropic 2D
            // Gaussian blur (the axial direction of an ideal cylinder
            // integrates out): HU_center = bg + (lum - bg)(1 - e^{-a^2/2s^2}).
            const double a = 0.5 * d;
            const double attenuated = std::exp(-a * a / (2.0 * psf_sigma_mm * psf_sigma_mm));
            reduction = (1.0 - background_hu / lumen_hu) * attenuated;
        }
        curve.emplace_back(d, reduction);
    }
    return curve;
}

}  // namespace coropve
