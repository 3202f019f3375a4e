#include "coropve/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "coropve/config.hpp"
#include "coropve/errors.hpp"
#include "coropve/io.hpp"

namespace coropve {

namespace {

void check_profile(const IntensityProfile& profile, std::size_t min_samples,
                   const char* caller) {
    if (profile.arc_length.size() != profile.intensity.size()) {
        throw LengthMismatchError(std::string(caller) + ": arc_length and intensity lengths differ");
    }
    if (profile.size() < min_samples) {
        throw RankDeficientError(std::string(caller) + ": needs >= " +
                                 std::to_string(min_samples) + " samples, got " +
                                 std::to_string(profile.size()));
    }
    for (std::size_t i = 1; i < profile.arc_length.size(); ++i) {
        if (profile.arc_length[i] <= profile.arc_length[i - 1]) {
            throw FormatError(std::string(caller) + ": arc_length must be strictly increasing");
        }
    }
}

// Quadratic LS fit restricted to the samples where `use` is set. sigma is
// the population standard deviation of the residuals of the used samples.
ProfileModel fit_subset(const IntensityProfile& profile, const std::vector<std::uint8_t>& use,
                        std::size_t n_used) {
    Eigen::MatrixXd design(n_used, 3);
    Eigen::VectorXd rhs(n_used);
    std::size_t row = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (!use[i]) continue;
        const double s = profile.arc_length[i];
        design(row, 0) = 1.0;
        design(row, 1) = s;
        design(row, 2) = s * s;
        rhs(row) = profile.intensity[i];
        ++row;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 3) {
        throw RankDeficientError("arc lengths do not span a quadratic (design rank " +
                                 std::to_string(qr.rank()) + ")");
    }
    const Eigen::Vector3d beta = qr.solve(rhs);

    ProfileModel model;
    model.beta = {beta(0), beta(1), beta(2)};
    double ssr = 0.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (!use[i]) continue;
        const double r = profile.intensity[i] - model.value_at(profile.arc_length[i]);
        ssr += r * r;
    }
    model.sigma = std::sqrt(ssr / static_cast<double>(n_used));
    model.pve_mask.assign(profile.size(), 0);
    return model;
}

// Guard for exactly-fitting profiles: with sigma == 0 the <= in the outlier
// rule would flag every sample through floating-point jitter alone.
double sigma_floor(const IntensityProfile& profile) {
    double max_abs = 0.0;
    for (const double v : profile.intensity) max_abs = std::max(max_abs, std::abs(v));
    return 1e-12 * (1.0 + max_abs);
}

void apply_outlier_rule(const IntensityProfile& profile, ProfileModel& model, double floor) {
    const double sigma = std::max(model.sigma, floor);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double expected = model.value_at(profile.arc_length[i]);
        model.pve_mask[i] = profile.intensity[i] <= expected - 2.0 * sigma ? 1 : 0;
    }
}

}  // namespace

ProfileModel fit_polynomial(const IntensityProfile& profile) {
    check_profile(profile, 3, "fit_polynomial");
    const std::vector<std::uint8_t> all(profile.size(), 1);
    return fit_subset(profile, all, profile.size());
}

ProfileModel detect_pve(const IntensityProfile& profile) {
    check_profile(profile, 10, "detect_pve");
    const double floor = sigma_floor(profile);

    std::vector<std::uint8_t> use(profile.size(), 1);
    ProfileModel phase1 = fit_subset(profile, use, profile.size());
    apply_outlier_rule(profile, phase1, floor);

    std::size_t n_clean = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        use[i] = phase1.pve_mask[i] ? 0 : 1;
        n_clean += use[i];
    }
    if (n_clean < 3) {
        throw AllOutliersError("robust fit left only " + std::to_string(n_clean) +
                               " clean samples of " + std::to_string(profile.size()));
    }

    ProfileModel phase2 = fit_subset(profile, use, n_clean);
    apply_outlier_rule(profile, phase2, floor);
    return phase2;
}

double estimate_radius(const RadiusModel& model, double intensity_ratio) {
    const double ratio = std::clamp(intensity_ratio, 0.0, 1.5);
    const double reduction = 1.0 - ratio;
    const double r = 0.5 * (model.alpha_mm * reduction + model.beta_mm);
    return std::max(r, 0.25);
}

RadiusModel calibrate_radius_model(std::span<const std::pair<double, double>> curve) {
    // Usable points: reduction strictly inside (0.02, 0.8).
    std::vector<std::pair<double, double>> usable;  // (reduction, diameter)
    for (const auto& [diameter, reduction] : curve) {
        if (reduction > 0.02 && reduction < 0.8) usable.emplace_back(reduction, diameter);
    }
    std::size_t distinct = 0;
    std::vector<double> seen;
    for (const auto& [red, d] : usable) {
        if (std::find(seen.begin(), seen.end(), d) == seen.end()) {
            seen.push_back(d);
            ++distinct;
        }
    }
    if (distinct < 2) {
        throw InsufficientRangeError("need >= 2 distinct diameters with reduction in (0.02, 0.8), got " +
                                     std::to_string(distinct));
    }

    // Simple-regression fit of diameter = alpha * reduction + beta.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(usable.size());
    for (const auto& [x, y] : usable) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-15) {
        throw InsufficientRangeError("calibration reductions are all identical");
    }
    RadiusModel model;
    model.alpha_mm = (n * sxy - sx * sy) / denom;
    model.beta_mm = (sy - model.alpha_mm * sx) / n;
    return model;
}

void save_radius_model(const RadiusModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "coropve.radius_model";
    j["tool_version"] = kToolVersion;
    j["alpha_mm"] = model.alpha_mm;
    j["beta_mm"] = model.beta_mm;
    save_json(j, path);
}

RadiusModel load_radius_model(const std::filesystem::path& path) {
    const nlohmann::json j = load_json(path);
    const nlohmann::json& fmt = require_field(j, "format", path);
    if (fmt.get<std::string>() != "coropve.radius_model") {
        throw FormatError(path.string() + ": format is '" + fmt.get<std::string>() +
                          "', expected 'coropve.radius_model'");
    }
    RadiusModel model;
    model.alpha_mm = require_field(j, "alpha_mm", path).get<double>();
    model.beta_mm = require_field(j, "beta_mm", path).get<double>();
    if (model.beta_mm <= 0.0 || model.alpha_mm >= 0.0) {
        throw FormatError(path.string() + ": radius model must have alpha_mm < 0 and beta_mm > 0");
    }
    return model;
}

void write_profile_csv(const IntensityProfile& profile, const ProfileModel& model,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    out << "arc_length_mm,intensity_hu,model_hu,pve_flag\n";
    for (std::size_t i = 0; i < profile.size(); ++i) {
        out << format_double(profile.arc_length[i]) << ','
            << format_double(profile.intensity[i]) << ','
            << format_double(model.value_at(profile.arc_length[i])) << ','
            << static_cast<int>(i < model.pve_mask.size() ? model.pve_mask[i] : 0) << '\n';
    }
    write_text_atomic(path, out.str());
}

}  // namespace coropve
