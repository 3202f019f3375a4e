#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace coropve {

/// HU samples along a centerline, indexed by arc length from the ostium.
struct IntensityProfile {
    std::vector<double> arc_length;  // mm, strictly increasing
    std::vector<double> intensity;   // HU

    std::size_t size() const { return arc_length.size(); }
};

/// Quadratic expected-intensity model with its residual spread and the
/// per-sample partial-volume flag.
struct ProfileModel {
    std::array<double, 3> beta{0.0, 0.0, 0.0};  // HU, HU/mm, HU/mm^2
    double sigma = 0.0;                         // residual standard deviation, HU
    std::vector<std::uint8_t> pve_mask;         // 1 where the sample is flagged

    double value_at(double s) const { return beta[0] + beta[1] * s + beta[2] * s * s; }
};

/// Linear map from centerline HU reduction to lumen radius:
/// r = 0.5 * (alpha * reduction + beta).
struct RadiusModel {
    double alpha_mm = -2.0;
    double beta_mm = 1.4;
};

/// Least-squares quadratic fit; the mask comes back all zero. sigma is the
/// (population) standard deviation of the residuals.
/// Throws RankDeficientError when the arc lengths cannot support a quadratic.
ProfileModel fit_polynomial(const IntensityProfile& profile);

/// Two-phase robust fit: fit on everything, flag samples more than 2 sigma
/// below the model, refit on the clean set, then re-evaluate the flag against
/// the refit model and its sigma. Requires >= 10 samples.
/// Throws AllOutliersError if fewer than 3 samples survive phase 1.
ProfileModel detect_pve(const IntensityProfile& profile);

/// Radius from the intensity ratio I(c)/I_p(c). The ratio is clamped to
/// [0, 1.5] and the result floored at 0.25 mm so severe reductions never
/// produce a non-physical cross-section.
double estimate_radius(const RadiusModel& model, double intensity_ratio);

/// Fits diameter = alpha * reduction + beta over curve points with reduction
/// in (0.02, 0.8). Throws InsufficientRangeError with fewer than 2 usable
/// distinct diameters.
RadiusModel calibrate_radius_model(std::span<const std::pair<double, double>> curve);

void save_radius_model(const RadiusModel& model, const std::filesystem::path& path);
RadiusModel load_radius_model(const std::filesystem::path& path);

/// CSV dump (arc_length_mm, intensity_hu, model_hu, pve_flag) for plotting.
void write_profile_csv(const IntensityProfile& profile, const ProfileModel& model,
                       const std::filesystem::path& path);

}  // namespace coropve
