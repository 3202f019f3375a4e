#include "coropve/likelihood.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

}  // namespace

double ray_weight(std::span<const float> a, std::span<const float> b, double kernel_lambda) {
    if (a.size() != b.size()) {
        throw LengthMismatchError("ray_weight: ray lengths differ (" + std::to_string(a.size()) +
                                  " vs " + std::to_string(b.size()) + ")");
    }
    return std::exp(-kernel_lambda * squared_distance(a, b));
}

std::vector<double> knn_lumen_probability(std::span<const float> query, const RayDatabase& db,
                                          std::ptrdiff_t exclude) {
    const std::size_t n_rays = db.n_rays();
    if (n_rays == 0) throw EmptyDatabaseError("ray database is empty");
    if (query.size() != db.n_radii()) {
        throw LengthMismatchError("query ray length " + std::to_string(query.size()) +
                                  " does not match database radii count " +
                                  std::to_string(db.n_radii()));
    }

    std::vector<std::pair<double, std::size_t>> dist;  // (squared distance, ray index)
    dist.reserve(n_rays);
    for (std::size_t k = 0; k < n_rays; ++k) {
        if (exclude >= 0 && k == static_cast<std::size_t>(exclude)) continue;
        dist.emplace_back(squared_distance(query, db.intensity_ray(k)), k);
    }
    if (dist.empty()) throw EmptyDatabaseError("ray database has no usable rays after exclusion");

    const std::size_t k_take = std::min(static_cast<std::size_t>(std::max(db.k_neighbors, 1)),
                                        dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_take),
                      dist.end());  // pair ordering breaks distance ties by lower index

    // Factoring the smallest distance out of every weight keeps the ratio
    // identical while avoiding underflow for far-away queries.
    const double d_min = dist.front().first;
    std::vector<double> num(db.n_radii(), 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < k_take; ++j) {
        const double w = std::exp(-db.kernel_lambda * (dist[j].first - d_min));
        denom += w;
        const std::span<const std::uint8_t> labels = db.label_ray(dist[j].second);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (labels[r]) num[r] += w;
        }
    }
    for (double& p : num) p /= denom;
    return num;
}

std::vector<double> pve_step_probability(std::span<const float> radii, double r_prime_mm) {
    std::vector<double> prob(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        prob[i] = static_cast<double>(radii[i]) <= r_prime_mm ? 1.0 : 0.0;
    }
    return prob;
}

ProbabilityField build_probability_field(const CylindricalGrid& grid, const RayDatabase& db,
                                         const ProfileModel& model, const RadiusModel& radius_model,
                                         const IntensityProfile& profile, PveMode mode,
                                         const CalciumParams& calcium, int jobs) {
    const auto n_planes = static_cast<std::size_t>(grid.n_planes);
    const auto n_angles = static_cast<std::size_t>(grid.n_angles);
    const auto n_radii = static_cast<std::size_t>(grid.n_radii());
    if (static_cast<std::size_t>(grid.n_radii()) != db.n_radii()) {
        throw LengthMismatchError("cylindrical grid and ray database radii counts differ");
    }
    if (profile.size() != n_planes || model.pve_mask.size() != n_planes) {
        throw LengthMismatchError("centerline profile / pve mask must have one sample per plane");
    }

    ProbabilityField field;
    field.n_planes = n_planes;
    field.n_angles = n_angles;
    field.n_radii = n_radii;
    field.prob.resize(n_planes * n_angles * n_radii);
    field.source.resize(field.prob.size(), ProbabilitySource::Data);
    field.plane_is_pve.assign(n_planes, 0);

    std::vector<float> radii_f(grid.radii.begin(), grid.radii.end());

    auto process_plane = [&](std::size_t i) {
        const bool pve_plane = mode == PveMode::On && model.pve_mask[i] != 0;
        field.plane_is_pve[i] = pve_plane ? 1 : 0;

        std::vector<double> plane_prob;
        if (pve_plane) {
            const double expected = model.value_at(profile.arc_length[i]);
            const double ratio = expected != 0.0 ? profile.intensity[i] / expected : 1.0;
            const double r_prime = estimate_radius(radius_model, ratio);
            plane_prob = pve_step_probability(radii_f, r_prime);
        }

        std::vector<float> query(n_radii);
        for (std::size_t a = 0; a < n_angles; ++a) {
            const std::size_t base = (i * n_angles + a) * n_radii;
            if (pve_plane) {
                for (std::size_t r = 0; r < n_radii; ++r) {
                    field.prob[base + r] = plane_prob[r];
                    field.source[base + r] = ProbabilitySource::PartialVolume;
                }
            } else {
                for (std::size_t r = 0; r < n_radii; ++r) {
                    query[r] = static_cast<float>(
                        grid.at(static_cast<int>(i), static_cast<int>(a), static_cast<int>(r)));
                }
                const std::vector<double> pr = knn_lumen_probability(query, db);
                std::copy(pr.begin(), pr.end(), field.prob.begin() + static_cast<std::ptrdiff_t>(base));
            }
            for (std::size_t r = 0; r < n_radii; ++r) {
                const double hu =
                    grid.at(static_cast<int>(i), static_cast<int>(a), static_cast<int>(r));
                if (hu >= calcium.threshold_hu) {
                    field.prob[base + r] = calcium.probability;
                    field.source[base + r] = ProbabilitySource::Calcium;
                }
            }
        }
    };

    const int workers = std::min<int>(std::max(jobs, 1), static_cast<int>(n_planes));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_planes; ++i) process_plane(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n_planes; i = next.fetch_add(1)) {
                    process_plane(i);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }
    return field;
}

}  // namespace coropve
