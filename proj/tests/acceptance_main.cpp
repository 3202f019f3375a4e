// Acceptance harness for coropve. Each numbered criterion prints exactly one
// PASS/FAIL line carrying its pinned tolerances and the measured values, and
// the process exits nonzero if any criterion fails. Oracles are independent
// re-derivations (exhaustive enumeration, bisection, all-pairs counting,
// permutation resampling), not calls back into the code under test.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coropve/centerline.hpp"
#include "coropve/config.hpp"
#include "coropve/errors.hpp"
#include "coropve/flow.hpp"
#include "coropve/graphcut.hpp"
#include "coropve/likelihood.hpp"
#include "coropve/metrics.hpp"
#include "coropve/phantom.hpp"
#include "coropve/pipeline.hpp"
#include "coropve/profile.hpp"
#include "coropve/raydb.hpp"
#include "coropve/volume.hpp"

namespace {

using namespace coropve;
namespace fs = std::filesystem;

const char* kArtifactsDir = "acceptance_artifacts";

std::string fmt(const char* format, auto... args) {
    char buf[640];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

/// Per-criterion outcome: `measured` is printed on PASS, `why` on FAIL.
struct Check {
    bool ok = true;
    std::string measured;
    std::string why;

    void require(bool cond, const std::string& reason) {
        if (cond) return;
        ok = false;
        if (why.size() > 500) return;
        if (!why.empty()) why += "; ";
        why += reason;
    }
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// In-memory phantom case (same shape a case directory would load back to).
PhantomCase memory_case(const PhantomTruth& truth, const std::string& name) {
    PhantomCase c;
    c.dir = fs::path("cases") / name;
    c.volume = truth.volume;
    c.lumen_mask = truth.lumen_mask;
    c.tree.branches = {truth.centerline};
    c.tree.parent = {std::nullopt};
    c.spec = truth.spec;
    c.seed = truth.seed;
    return c;
}

PhantomSpec straight_spec(double radius_mm, double length_mm) {
    PhantomSpec spec;
    spec.length_mm = length_mm;
    spec.radius_profile = {{0.0, radius_mm}};
    spec.psf_sigma_mm = 0.6;
    spec.noise_sigma_hu = 0.0;
    return spec;
}

// ---------------------------------------------------------------------------
// Criterion 1: FWHM overestimation on blurred cylinders.

double fwhm_of_blurred_cylinder(double radius_mm, Check& c) {
    PhantomSpec spec = straight_spec(radius_mm, 8.0);
    spec.voxel_spacing_mm = {0.25, 0.25, 0.25};
    const PhantomTruth truth = generate_phantom(spec, 7);

    const Vec3 mid = truth.centerline.points[truth.centerline.points.size() / 2];
    const double extent = std::max(4.0, radius_mm + 4.0 * spec.psf_sigma_mm + 1.0);
    const double step = 0.02;
    std::vector<double> profile;
    for (double x = -extent; x <= extent + 1e-9; x += step) {
        profile.push_back(sample_trilinear(truth.volume, {mid.x + x, mid.y, mid.z}));
    }
    const double measured = fwhm_radius(profile, step, spec.background_hu);
    c.require(measured > 0.0, fmt("fwhm measurement failed at r=%g", radius_mm));
    return measured;
}

void criterion1(Check& c) {
    std::string meas = "measured";
    for (const double r : {0.4, 0.6, 0.8}) {
        const double est = fwhm_of_blurred_cylinder(r, c);
        c.require(est > r, fmt("fwhm %.3f mm does not exceed truth %.1f mm", est, r));
        meas += fmt(" %.3f>%.1f", est, r);
    }
    const double est3 = fwhm_of_blurred_cylinder(3.0, c);
    const double rel = std::abs(est3 - 3.0) / 3.0;
    c.require(rel <= 0.05, fmt("3 mm estimate %.3f mm is off by %.1f%%", est3, 100.0 * rel));
    c.measured = meas + fmt(" mm; 3 mm err %.2f%%", 100.0 * rel);
}

// ---------------------------------------------------------------------------
// Criterion 2: radius-model calibration.

void criterion2(Check& c) {
    // Exact-linear synthetic curve: (diameter, reduction) points placed on
    // diameter = -2 * reduction + 1.4, all inside the usable window.
    std::vector<std::pair<double, double>> synthetic;
    for (const double d : {0.8, 1.0, 1.2, 1.35}) synthetic.emplace_back(d, (1.4 - d) / 2.0);
    const RadiusModel exact = calibrate_radius_model(synthetic);
    c.require(std::abs(exact.alpha_mm + 2.0) <= 1e-9,
              fmt("synthetic alpha %.12f != -2.0 (tol 1e-9)", exact.alpha_mm));
    c.require(std::abs(exact.beta_mm - 1.4) <= 1e-9,
              fmt("synthetic beta %.12f != 1.4 (tol 1e-9)", exact.beta_mm));

    // Phantom-curve calibration and held-out evaluation.
    const double lumen = 400.0, bg = 0.0, psf = 0.6;
    const std::array<double, 4> train{0.8, 1.2, 1.6, 2.0};
    const auto curve = hu_reduction_curve(train, lumen, bg, psf);
    const RadiusModel model = calibrate_radius_model(curve);

    const std::array<double, 3> held{0.6, 1.0, 1.4};
    double sq = 0.0;
    for (const auto& [d_true, reduction] : hu_reduction_curve(held, lumen, bg, psf)) {
        const double d_pred = model.alpha_mm * reduction + model.beta_mm;
        sq += (d_pred - d_true) * (d_pred - d_true);
    }
    const double rmse = std::sqrt(sq / static_cast<double>(held.size()));
    c.require(rmse <= 0.15, fmt("held-out diameter RMSE %.4f mm > 0.15 mm", rmse));
    c.measured = fmt("synthetic recovers alpha=-2.0 beta=1.4; phantom goldens alpha=%.4f "
                     "beta=%.4f mm (recorded, not asserted); held-out RMSE %.4f mm",
                     model.alpha_mm, model.beta_mm, rmse);
}

// ---------------------------------------------------------------------------
// Criterion 3: robust-fit dip detection.

// Randomized dip instance: quadratic baseline, bounded cosine pseudo-noise,
// and a 1-3 sample dip of depth 5x the clean residual spread.
IntensityProfile dip_instance(std::uint64_t seed, std::vector<int>& support) {
    const int n = 60;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const double b0 = 250.0 + 100.0 * u01(rng);
    const double b1 = -3.0 * u01(rng);
    const double b2 = -0.05 + 0.1 * u01(rng);
    const double amp = 4.0 + 6.0 * u01(rng);
    const double omega = 2.0 + 3.0 * u01(rng);
    const double phase = 2.0 * std::numbers::pi * u01(rng);
    const double depth = 5.0 * amp / std::sqrt(2.0);

    const int k = 1 + static_cast<int>(u01(rng) * 3.0);
    const int start = 10 + static_cast<int>(u01(rng) * (n - 20 - k));

    IntensityProfile p;
    support.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        const double s = 0.5 * i;
        double v = b0 + b1 * s + b2 * s * s + amp * std::cos(omega * s + phase);
        if (i >= start && i < start + k) {
            v -= depth;
            support[i] = 1;
        }
        p.arc_length.push_back(s);
        p.intensity.push_back(v);
    }
    return p;
}

void criterion3(Check& c) {
    int exact_matches = 0;
    int sigma_ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::vector<int> support;
        const IntensityProfile p = dip_instance(seed, support);
        const ProfileModel phase1 = fit_polynomial(p);
        const ProfileModel robust = detect_pve(p);

        bool match = robust.pve_mask.size() == support.size();
        for (std::size_t i = 0; match && i < support.size(); ++i) {
            match = static_cast<int>(robust.pve_mask[i]) == support[i];
        }
        if (match) {
            ++exact_matches;
        } else {
            c.require(false, fmt("seed %llu: flagged set != dip support",
                                 static_cast<unsigned long long>(seed)));
        }
        // Every instance has outliers by construction, so the refit spread
        // must never exceed the contaminated phase-1 spread.
        if (robust.sigma <= phase1.sigma) {
            ++sigma_ok;
        } else {
            c.require(false, fmt("seed %llu: refit sigma %.6f > phase-1 sigma %.6f",
                                 static_cast<unsigned long long>(seed), robust.sigma,
                                 phase1.sigma));
        }
    }
    c.measured = fmt("%d/100 exact flag matches, %d/100 sigma non-increases", exact_matches,
                     sigma_ok);
}

// ---------------------------------------------------------------------------
// Criterion 4: KNN likelihood vs the exhaustive direct-vote oracle.

RayDatabase random_db(std::mt19937_64& rng, std::size_t n_rays, std::size_t n_radii, int k) {
    RayDatabase db;
    std::uniform_real_distribution<double> hu(0.0, 400.0);
    std::uniform_int_distribution<int> extent(0, static_cast<int>(n_radii));
    for (std::size_t r = 0; r < n_radii; ++r) db.radii.push_back(0.1f * (r + 1));
    for (std::size_t i = 0; i < n_rays; ++i) {
        const int inside = extent(rng);
        for (std::size_t r = 0; r < n_radii; ++r) {
            db.intensities.push_back(static_cast<float>(hu(rng)));
            db.labels.push_back(static_cast<int>(r) < inside ? 1 : 0);
        }
    }
    db.kernel_lambda = default_kernel_lambda(n_radii);
    db.k_neighbors = k;
    return db;
}

// Direct transcription of the weighted vote: full exponential weights over
// the K nearest rays, no numerical stabilization.
std::vector<double> knn_oracle(std::span<const float> query, const RayDatabase& db) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t k = 0; k < db.n_rays(); ++k) {
        double d = 0.0;
        const auto ray = db.intensity_ray(k);
        for (std::size_t r = 0; r < ray.size(); ++r) {
            const double diff = static_cast<double>(query[r]) - static_cast<double>(ray[r]);
            d += diff * diff;
        }
        dist.emplace_back(d, k);
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t k_take = std::min<std::size_t>(db.k_neighbors, dist.size());
    std::vector<double> num(db.n_radii(), 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < k_take; ++j) {
        const double w = std::exp(-db.kernel_lambda * dist[j].first);
        denom += w;
        const auto labels = db.label_ray(dist[j].second);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (labels[r]) num[r] += w;
        }
    }
    for (double& p : num) p /= denom;
    return num;
}

void criterion4(Check& c) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const RayDatabase db = random_db(rng, 50, 8, 10);
        std::uniform_real_distribution<double> hu(0.0, 400.0);
        std::vector<float> query(8);
        for (float& q : query) q = static_cast<float>(hu(rng));

        const std::vector<double> got = knn_lumen_probability(query, db);
        const std::vector<double> want = knn_oracle(query, db);
        for (std::size_t r = 0; r < want.size(); ++r) {
            const double diff = std::abs(got[r] - want[r]);
            worst = std::max(worst, diff);
            c.require(diff <= 1e-12, fmt("seed %llu radius %zu: |diff| %.3g > 1e-12",
                                         static_cast<unsigned long long>(seed), r, diff));
        }
    }
    c.measured = fmt("max |probability difference| %.3g over 100 seeds", worst);
}

// ---------------------------------------------------------------------------
// Criterion 5: min-cut optimality.

// Independent exhaustive minimizer. All costs in the random graphs are
// multiples of 1/1024 so every energy sum is exact in double regardless of
// accumulation order, making == comparisons against the solver valid.
double brute_force_min(const SegmentationGraph& g) {
    const std::size_t n = g.n_samples();
    if (n > 12) throw std::logic_error("brute force oracle limited to 12 vertices");
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (g.star_constraint) {
            bool feasible = true;
            for (std::size_t i = 0; feasible && i < g.n_planes; ++i) {
                for (std::size_t a = 0; feasible && a < g.n_angles; ++a) {
                    bool seen_zero = false;
                    for (std::size_t r = 0; r < g.n_radii; ++r) {
                        const bool lumen = (bits >> g.index(i, a, r)) & 1u;
                        if (!lumen) {
                            seen_zero = true;
                        } else if (seen_zero) {
                            feasible = false;
                            break;
                        }
                    }
                }
            }
            if (!feasible) continue;
        }
        double energy = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            energy += (bits >> p) & 1u ? g.unary[p].lumen : g.unary[p].background;
        }
        for (const PairwiseEdge& e : g.pairwise) {
            if (((bits >> e.a) & 1u) != ((bits >> e.b) & 1u)) energy += e.weight;
        }
        best = std::min(best, energy);
    }
    return best;
}

SegmentationGraph random_dyadic_graph(std::mt19937_64& rng) {
    static const std::array<std::array<std::size_t, 3>, 8> shapes = {{
        {2, 2, 3}, {1, 3, 4}, {3, 2, 2}, {2, 1, 5}, {1, 4, 3}, {12, 1, 1}, {1, 1, 12}, {2, 6, 1}}};
    const auto& shape = shapes[rng() % shapes.size()];

    SegmentationGraph g;
    g.n_planes = shape[0];
    g.n_angles = shape[1];
    g.n_radii = shape[2];
    g.star_constraint = rng() % 2 == 0;

    std::uniform_int_distribution<int> unary_k(0, 8192);
    std::uniform_int_distribution<int> edge_k(0, 2048);
    g.unary.resize(g.n_samples());
    for (CostPair& u : g.unary) {
        u.lumen = unary_k(rng) / 1024.0;
        u.background = unary_k(rng) / 1024.0;
    }
    std::uniform_int_distribution<std::size_t> vertex(0, g.n_samples() - 1);
    for (std::size_t e = 0; e < g.n_samples(); ++e) {
        const std::size_t a = vertex(rng);
        const std::size_t b = vertex(rng);
        if (a == b) continue;
        g.pairwise.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                              edge_k(rng) / 1024.0});
    }
    return g;
}

CylindricalGrid synthetic_grid(int n_planes, int n_angles, std::vector<double> radii,
                               std::mt19937_64& rng) {
    CylindricalGrid grid;
    grid.n_planes = n_planes;
    grid.n_angles = n_angles;
    grid.plane_spacing = 0.5;
    grid.radii = std::move(radii);
    std::uniform_real_distribution<double> hu(0.0, 400.0);
    grid.intensities.resize(static_cast<std::size_t>(n_planes) * n_angles * grid.radii.size());
    for (double& v : grid.intensities) v = hu(rng);
    for (int i = 0; i < n_planes; ++i) {
        grid.plane_center.push_back({0, 0, 0.5 * i});
        grid.plane_axis_u.push_back({1, 0, 0});
        grid.plane_axis_v.push_back({0, 1, 0});
    }
    return grid;
}

ProbabilityField random_field(const CylindricalGrid& grid, std::mt19937_64& rng) {
    ProbabilityField field;
    field.n_planes = static_cast<std::size_t>(grid.n_planes);
    field.n_angles = static_cast<std::size_t>(grid.n_angles);
    field.n_radii = static_cast<std::size_t>(grid.n_radii());
    std::uniform_real_distribution<double> p01(0.0, 1.0);
    field.prob.resize(field.n_planes * field.n_angles * field.n_radii);
    for (double& p : field.prob) p = p01(rng);
    field.source.resize(field.prob.size(), ProbabilitySource::Data);
    field.plane_is_pve.assign(field.n_planes, 0);
    return field;
}

void criterion5(Check& c) {
    std::mt19937_64 rng(424242);
    int exact = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const SegmentationGraph g = random_dyadic_graph(rng);
        const Labeling labeling = solve_min_cut(g);
        if (g.star_constraint && !star_feasible(labeling)) {
            c.require(false, fmt("trial %d: solver labeling violates the star constraint", trial));
            continue;
        }
        const double solver_energy = labeling_energy(g, labeling);
        const double oracle = brute_force_min(g);
        if (solver_energy == oracle) {
            ++exact;
        } else {
            c.require(false, fmt("trial %d: solver %.6f != brute force %.6f", trial,
                                 solver_energy, oracle));
        }
    }

    std::uint64_t beaten = 0;
    for (int gi = 0; gi < 20; ++gi) {
        const int n_planes = 3 + static_cast<int>(rng() % 3);
        const int n_angles = 6 + 2 * static_cast<int>(rng() % 2);
        const std::size_t n_r = 5 + rng() % 2;
        std::vector<double> radii;
        for (std::size_t j = 0; j < n_r; ++j) radii.push_back(0.5 * (j + 1));
        const CylindricalGrid grid = synthetic_grid(n_planes, n_angles, radii, rng);
        const ProbabilityField field = random_field(grid, rng);
        const SegmentationGraph g = build_segmentation_graph(grid, field, 1.75);

        const Labeling solved = solve_min_cut(g);
        c.require(star_feasible(solved), fmt("graph %d: infeasible solver labeling", gi));
        const double solver_energy = labeling_energy(g, solved);

        std::uniform_int_distribution<int> prefix(0, static_cast<int>(n_r));
        for (int trial = 0; trial < 1000; ++trial) {
            Labeling candidate;
            candidate.n_planes = g.n_planes;
            candidate.n_angles = g.n_angles;
            candidate.n_radii = g.n_radii;
            candidate.labels.resize(g.n_samples());
            for (std::size_t i = 0; i < g.n_planes; ++i) {
                for (std::size_t a = 0; a < g.n_angles; ++a) {
                    const int keep = prefix(rng);
                    for (std::size_t r = 0; r < g.n_radii; ++r) {
                        candidate.labels[candidate.index(i, a, r)] = static_cast<int>(r) < keep;
                    }
                }
            }
            if (labeling_energy(g, candidate) < solver_energy - 1e-9) ++beaten;
        }
    }
    c.require(beaten == 0, fmt("%llu random labelings beat the solver energy",
                               static_cast<unsigned long long>(beaten)));
    c.measured = fmt("%d/200 exact energy matches; 0/20000 labelings below solver-1e-9", exact);
}

// ---------------------------------------------------------------------------
// Criterion 6: end-to-end segmentation of a clean 2 mm cylinder.

void criterion6(Check& c) {
    const PhantomTruth truth = generate_phantom(straight_spec(1.0, 20.0), 21);
    const PhantomCase pc = memory_case(truth, "clean2mm");

    PipelineConfig config;
    config.jobs = 1;
    std::vector<PhantomCase> cases{pc};
    const RayDatabase db = build_raydb_from_cases(cases, config);
    const RadiusModel model = calibrate_radius_model_for_psf(0.6, 400.0, 0.0);

    const CaseRun on = run_case(pc, db, model, config, PveMode::On);
    const CaseRun off = run_case(pc, db, model, config, PveMode::Off);

    const double maxsd_tol = 2.0 * config.grid.radius_step_mm;  // 0.2 mm
    c.require(on.metrics.dice >= 0.95, fmt("PVE-on Dice %.4f < 0.95", on.metrics.dice));
    c.require(off.metrics.dice >= 0.95, fmt("PVE-off Dice %.4f < 0.95", off.metrics.dice));
    c.require(on.metrics.maxsd_mm <= maxsd_tol,
              fmt("PVE-on MaxSD %.3f mm > %.1f mm", on.metrics.maxsd_mm, maxsd_tol));
    c.require(off.metrics.maxsd_mm <= maxsd_tol,
              fmt("PVE-off MaxSD %.3f mm > %.1f mm", off.metrics.maxsd_mm, maxsd_tol));

    c.require(on.seg.n_pve_planes == 0,
              fmt("clean phantom flagged %zu PVE planes", on.seg.n_pve_planes));
    c.require(on.seg.labeling.labels == off.seg.labeling.labels,
              "PVE-on and PVE-off labelings differ");
    c.require(on.seg.energy == off.seg.energy, "PVE-on and PVE-off energies differ");
    bool surfaces_equal = on.seg.surface.planes.size() == off.seg.surface.planes.size();
    for (std::size_t i = 0; surfaces_equal && i < on.seg.surface.planes.size(); ++i) {
        surfaces_equal = on.seg.surface.planes[i].r_star_mm == off.seg.surface.planes[i].r_star_mm;
    }
    c.require(surfaces_equal, "PVE-on and PVE-off surfaces differ");
    c.require(on.min_ffr == off.min_ffr, "PVE-on and PVE-off FFR differ");

    c.measured = fmt("Dice on/off %.4f/%.4f, MaxSD on/off %.3f/%.3f mm, 0 PVE planes, "
                     "modes bit-identical",
                     on.metrics.dice, off.metrics.dice, on.metrics.maxsd_mm,
                     off.metrics.maxsd_mm);
}

// ---------------------------------------------------------------------------
// Criterion 7: PVE ablation direction on a stenosis suite.

void criterion7(Check& c) {
    PipelineConfig config;
    config.jobs = 1;

    // Training database from straight vessels at the standard diameters.
    std::vector<PhantomCase> training;
    int seed = 100;
    for (const double d : {0.8, 1.2, 1.6, 2.0}) {
        const PhantomTruth t = generate_phantom(straight_spec(d / 2.0, 20.0), seed);
        training.push_back(memory_case(t, fmt("train_%d", seed)));
        ++seed;
    }
    const RayDatabase db = build_raydb_from_cases(training, config);
    const RadiusModel model = calibrate_radius_model_for_psf(0.6, 400.0, 0.0);

    int n_cases = 0, n_diam_ok = 0, n_strict = 0, n_ffr_ok = 0;
    for (int i = 0; i < 10; ++i) {
        const double r_min = 0.4 + 0.3 * i / 9.0;
        PhantomSpec spec = straight_spec(1.5, 30.0);
        spec.radius_profile = {
            {0.0, 1.5}, {12.0, 1.5}, {15.0, r_min}, {18.0, 1.5}, {30.0, 1.5}};
        const PhantomTruth t = generate_phantom(spec, 200 + i);
        const PhantomCase pc = memory_case(t, fmt("sten_%02d", i));

        const CaseRun on = run_case(pc, db, model, config, PveMode::On);
        const CaseRun off = run_case(pc, db, model, config, PveMode::Off);
        ++n_cases;
        const bool diam_ok =
            on.min_effective_diameter_mm <= off.min_effective_diameter_mm + 1e-9;
        if (diam_ok) {
            ++n_diam_ok;
            if (on.min_ffr <= off.min_ffr + 1e-9) {
                ++n_ffr_ok;
            } else {
                c.require(false, fmt("case %d (r_min %.2f): diameter shrank but FFR on %.4f > "
                                     "off %.4f",
                                     i, r_min, on.min_ffr, off.min_ffr));
            }
        }
        if (on.min_effective_diameter_mm < off.min_effective_diameter_mm - 1e-12) ++n_strict;
    }
    c.require(n_diam_ok >= 9,
              fmt("PVE-on min diameter <= PVE-off in only %d/%d cases (need >= 9)", n_diam_ok,
                  n_cases));
    c.measured = fmt("diameter condition %d/%d (strict in %d), FFR condition %d/%d on those",
                     n_diam_ok, n_cases, n_strict, n_ffr_ok, n_diam_ok);
}

// ---------------------------------------------------------------------------
// Criterion 8: flow solver.

VesselSegment make_segment(int from, int to, double length_mm, double d0, double d1) {
    VesselSegment s;
    s.from_node = from;
    s.to_node = to;
    s.length_mm = length_mm;
    s.profile = {{0.0, d0}, {length_mm, d1}};
    s.branch = 0;
    return s;
}

// Flow through dp = r_lin*q + r_quad*q^2 (dp >= 0), found by bisection so the
// oracle shares no algebra with the library's closed form.
double oracle_edge_flow(double r_lin, double r_quad, double dp) {
    double lo = 0.0, hi = dp / r_lin + 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (r_lin * mid + r_quad * mid * mid <= dp ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void criterion8(Check& c) {
    // (a) Two-resistor voltage divider, relative tolerance 1e-9.
    {
        VesselTree tree;
        tree.segments = {make_segment(0, 1, 30.0, 3.0, 3.0), make_segment(1, 2, 25.0, 2.5, 2.5)};
        tree.n_nodes = 3;
        FlowParams params;
        params.outlet_scale = 5.0;
        const FlowNetwork net = build_network(tree, params);
        const FlowResult res = solve_flow(net);

        const double r1 = net.edges[0].r_lin, r2 = net.edges[1].r_lin;
        const double r_out = net.outlet_resistances[0].second;
        const double q = 100.0 / (r1 + r2 + r_out);
        const double p1 = 100.0 - q * r1;
        const double p2 = p1 - q * r2;
        const double err = std::max({std::abs(res.node_pressures_mmhg[1] - p1) / p1,
                                     std::abs(res.node_pressures_mmhg[2] - p2) / p2,
                                     std::abs(res.outlet_flows_ml_s[0] - q) / q});
        c.require(err <= 1e-9, fmt("divider relative error %.3g > 1e-9", err));
    }

    // (b) Symmetric bifurcation, flow conservation within 1e-9 mL/s.
    double conservation = 0.0;
    {
        VesselTree tree;
        tree.segments = {make_segment(0, 1, 20.0, 3.0, 3.0), make_segment(1, 2, 30.0, 2.2, 2.2),
                         make_segment(1, 3, 30.0, 2.2, 2.2)};
        tree.n_nodes = 4;
        FlowParams params;
        params.outlet_scale = 5.0;
        const FlowNetwork net = build_network(tree, params);
        const FlowResult res = solve_flow(net);
        conservation = std::abs(res.edge_flows_ml_s[0] - res.edge_flows_ml_s[1] -
                                res.edge_flows_ml_s[2]);
        c.require(conservation <= 1e-9,
                  fmt("bifurcation imbalance %.3g mL/s > 1e-9", conservation));
    }

    // (c) Nonlinear single-edge case vs the bisection oracle, within 1e-9.
    double q_err = 0.0, p_err = 0.0;
    {
        VesselTree tree;
        VesselSegment seg = make_segment(0, 1, 50.0, 3.0, 3.0);
        seg.profile = {{0.0, 3.0}, {20.0, 1.2}, {50.0, 3.0}};
        tree.segments = {seg};
        tree.n_nodes = 2;
        FlowParams params;
        params.outlet_scale = 0.8 * std::cbrt(3.0);  // outlet resistance ~0.8 mmHg s/mL
        const FlowNetwork net = build_network(tree, params);
        c.require(net.edges[0].r_quad > 0.0, "stenotic segment has no quadratic loss term");
        const FlowResult res = solve_flow(net);

        const double r_lin = net.edges[0].r_lin, r_quad = net.edges[0].r_quad;
        const double r_out = net.outlet_resistances[0].second;
        double lo = 0.0, hi = 100.0;  // junction pressure bracket
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double g = oracle_edge_flow(r_lin, r_quad, 100.0 - mid) - mid / r_out;
            (g >= 0.0 ? lo : hi) = mid;
        }
        const double p1 = 0.5 * (lo + hi);
        const double q = p1 / r_out;
        q_err = std::abs(res.outlet_flows_ml_s[0] - q);
        p_err = std::abs(res.node_pressures_mmhg[1] - p1);
        c.require(q_err <= 1e-9, fmt("nonlinear flow error %.3g mL/s > 1e-9", q_err));
        c.require(p_err <= 1e-9, fmt("nonlinear pressure error %.3g mmHg > 1e-9", p_err));
    }

    // (d) Healthy trees under the calibrated outlet scale.
    double ffr100 = 0.0, ffr40 = 0.0;
    {
        for (const double length : {100.0, 40.0}) {
            VesselTree tree;
            tree.segments = {make_segment(0, 1, length, 3.0, 3.0)};
            tree.n_nodes = 2;
            const FlowNetwork net = build_network(tree, FlowParams{});  // scale <= 0: calibrated
            const FlowResult res = solve_flow(net);
            const double ffr = node_ffr(net, res, 1);
            (length == 100.0 ? ffr100 : ffr40) = ffr;
            c.require(ffr >= 0.97 - 1e-9,
                      fmt("healthy %.0f mm tree FFR %.6f < 0.97", length, ffr));
        }
    }

    // (e) Outlet resistance ratio: diameter ratio 8 -> resistance ratio 0.5.
    {
        VesselTree tree;
        tree.segments = {make_segment(0, 1, 10.0, 3.0, 3.0), make_segment(1, 2, 10.0, 8.0, 8.0),
                         make_segment(1, 3, 10.0, 1.0, 1.0)};
        tree.n_nodes = 4;
        FlowParams params;
        params.outlet_scale = 5.0;
        const FlowNetwork net = build_network(tree, params);
        const double ratio = net.outlet_resistances[0].second / net.outlet_resistances[1].second;
        c.require(ratio == 0.5, fmt("resistance ratio %.17g != 0.5 exactly", ratio));
    }

    c.measured = fmt("divider ok, conservation %.2g mL/s, nonlinear dq %.2g / dp %.2g, "
                     "healthy FFR %.4f (100 mm) %.4f (40 mm), ratio exact",
                     conservation, q_err, p_err, ffr100, ffr40);
}

// ---------------------------------------------------------------------------
// Criterion 9: statistics.

struct ScoredInstance {
    std::vector<double> scores;
    std::vector<int> labels;
};

ScoredInstance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_dist(6, 40);
    std::uniform_int_distribution<int> grid(0, 9);
    std::uniform_int_distribution<int> lab(0, 1);
    while (true) {
        const int n = n_dist(rng);
        ScoredInstance inst;
        int np = 0;
        for (int i = 0; i < n; ++i) {
            inst.scores.push_back(grid(rng) / 2.0);  // coarse grid forces ties
            const int l = lab(rng);
            np += l;
            inst.labels.push_back(l);
        }
        if (np >= 2 && n - np >= 2) return inst;
        // resample until both classes have at least two members
    }
}

// All-pairs AUC with an integer doubled numerator (exact for any scores).
double pairwise_auc(std::span<const double> pos, std::span<const double> neg) {
    std::uint64_t twice = 0;
    for (const double p : pos) {
        for (const double n : neg) {
            if (p > n) {
                twice += 2;
            } else if (p == n) {
                twice += 1;
            }
        }
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pos.size()) *
                                         static_cast<double>(neg.size()));
}

void criterion9(Check& c) {
    // AUC vs all-pairs counting, plus monotone-transform invariance.
    std::mt19937_64 rng(31337);
    int auc_exact = 0, transform_exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ScoredInstance inst = random_instance(rng);
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < inst.scores.size(); ++i) {
            (inst.labels[i] ? pos : neg).push_back(inst.scores[i]);
        }
        const double want = pairwise_auc(pos, neg);
        const double got = auc_mann_whitney(inst.scores, inst.labels,
                                            ScoreDirection::HigherIsPositive);
        if (got == want) {
            ++auc_exact;
        } else {
            c.require(false, fmt("trial %d: auc %.17g != all-pairs %.17g", trial, got, want));
        }

        std::vector<double> expd = inst.scores, affine = inst.scores;
        for (double& s : expd) s = std::exp(s);
        for (double& s : affine) s = 3.0 * s + 1.0;
        const double a_exp =
            auc_mann_whitney(expd, inst.labels, ScoreDirection::HigherIsPositive);
        const double a_aff =
            auc_mann_whitney(affine, inst.labels, ScoreDirection::HigherIsPositive);
        if (a_exp == got && a_aff == got) {
            ++transform_exact;
        } else {
            c.require(false, fmt("trial %d: monotone transform changed the AUC", trial));
        }

        const double complement =
            auc_mann_whitney(inst.scores, inst.labels, ScoreDirection::LowerIsPositive);
        c.require(std::abs(got + complement - 1.0) <= 1e-15,
                  fmt("trial %d: direction complement %.17g != 1", trial, got + complement));
    }

    // DeLong p vs a paired-permutation oracle, within 0.05 absolute.
    double worst_gap = 0.0;
    for (int ds = 0; ds < 10; ++ds) {
        std::mt19937_64 prng(5000 + ds);
        std::normal_distribution<double> noise(0.0, 1.0);
        const int np = 20, nn = 20;
        std::vector<double> a, b;
        std::vector<int> labels;
        for (int i = 0; i < np + nn; ++i) {
            const int label = i < np ? 1 : 0;
            const double common = label + 0.6 * noise(prng);
            a.push_back(common + 0.45 * noise(prng));
            b.push_back(0.85 * common + 0.55 * noise(prng));
            labels.push_back(label);
        }
        const DelongResult dl =
            delong_paired_test(a, b, labels, ScoreDirection::HigherIsPositive);

        std::vector<double> pa(np), pb(np), na(nn), nb(nn);
        for (int i = 0; i < np; ++i) {
            pa[i] = a[i];
            pb[i] = b[i];
        }
        for (int i = 0; i < nn; ++i) {
            na[i] = a[np + i];
            nb[i] = b[np + i];
        }
        const double observed = std::abs(pairwise_auc(pa, na) - pairwise_auc(pb, nb));

        const int n_perm = 100000;
        int hits = 0;
        std::uniform_int_distribution<int> coin(0, 1);
        std::vector<double> qa(np), qb(np), ma(nn), mb(nn);
        for (int t = 0; t < n_perm; ++t) {
            for (int i = 0; i < np; ++i) {
                const bool flip = coin(prng) == 1;
                qa[i] = flip ? pb[i] : pa[i];
                qb[i] = flip ? pa[i] : pb[i];
            }
            for (int i = 0; i < nn; ++i) {
                const bool flip = coin(prng) == 1;
                ma[i] = flip ? nb[i] : na[i];
                mb[i] = flip ? na[i] : nb[i];
            }
            const double delta = std::abs(pairwise_auc(qa, ma) - pairwise_auc(qb, mb));
            if (delta >= observed - 1e-12) ++hits;
        }
        const double p_perm = (hits + 1.0) / (n_perm + 1.0);
        const double gap = std::abs(p_perm - dl.p_value);
        worst_gap = std::max(worst_gap, gap);
        c.require(gap <= 0.05, fmt("dataset %d: |permutation p %.4f - DeLong p %.4f| = %.4f "
                                   "> 0.05",
                                   ds, p_perm, dl.p_value, gap));
    }
    c.measured = fmt("100/100 exact AUC matches and transform invariance; "
                     "max |p_perm - p_DeLong| %.4f",
                     worst_gap);
}

// ---------------------------------------------------------------------------
// Criterion 10: parameter sensitivity sweeps.

void criterion10(Check& c) {
    PipelineConfig config;
    config.jobs = 1;

    std::vector<PhantomCase> cases;
    cases.push_back(memory_case(generate_phantom(straight_spec(1.0, 20.0), 300), "sw01"));
    cases.push_back(memory_case(generate_phantom(straight_spec(0.8, 20.0), 301), "sw02"));
    PhantomSpec mild = straight_spec(1.25, 20.0);
    mild.radius_profile = {{0.0, 1.25}, {8.0, 1.25}, {10.0, 0.9}, {12.0, 1.25}, {20.0, 1.25}};
    cases.push_back(memory_case(generate_phantom(mild, 302), "sw03"));
    PhantomSpec tight = straight_spec(1.1, 20.0);
    tight.radius_profile = {{0.0, 1.1}, {8.0, 1.1}, {10.0, 0.7}, {12.0, 1.1}, {20.0, 1.1}};
    cases.push_back(memory_case(generate_phantom(tight, 303), "sw04"));

    const fs::path out_dir = fs::path(kArtifactsDir);
    fs::create_directories(out_dir);

    double spread_lambda = 0.0, spread_k = 0.0;
    {
        const std::vector<double> values = {0.875, 1.75, 3.5};
        const std::vector<SweepRow> rows = run_sweep(SweepParam::Lambda, values, cases, config);
        write_sweep_csv(SweepParam::Lambda, rows, config, out_dir / "sweep_lambda.csv");
        double lo = 1.0, hi = 0.0;
        for (const SweepRow& r : rows) {
            lo = std::min(lo, r.mean_dice);
            hi = std::max(hi, r.mean_dice);
        }
        spread_lambda = hi - lo;
        c.require(spread_lambda <= 0.05,
                  fmt("lambda sweep mean-Dice spread %.4f > 0.05", spread_lambda));
    }
    {
        const std::vector<double> values = {50.0, 100.0, 200.0};
        const std::vector<SweepRow> rows = run_sweep(SweepParam::K, values, cases, config);
        write_sweep_csv(SweepParam::K, rows, config, out_dir / "sweep_k.csv");
        double lo = 1.0, hi = 0.0;
        for (const SweepRow& r : rows) {
            lo = std::min(lo, r.mean_dice);
            hi = std::max(hi, r.mean_dice);
        }
        spread_k = hi - lo;
        c.require(spread_k <= 0.05, fmt("K sweep mean-Dice spread %.4f > 0.05", spread_k));
    }
    c.measured = fmt("mean-Dice spread: lambda %.4f, K %.4f; CSVs in %s/", spread_lambda,
                     spread_k, kArtifactsDir);
}

// ---------------------------------------------------------------------------
// Criterion 11: pipeline determinism (spawns the real CLI twice).

void criterion11(Check& c) {
    const fs::path base = fs::path(kArtifactsDir) / "determinism";
    fs::remove_all(base);
    fs::create_directories(base / "cases");

    save_phantom_case(generate_phantom(straight_spec(1.0, 20.0), 41), base / "cases" / "c01");
    PhantomSpec sten = straight_spec(1.25, 20.0);
    sten.radius_profile = {{0.0, 1.25}, {8.0, 1.25}, {10.0, 0.8}, {12.0, 1.25}, {20.0, 1.25}};
    save_phantom_case(generate_phantom(sten, 42), base / "cases" / "c02");

    const std::string cli = COROPVE_CLI_PATH;
    for (int run = 1; run <= 2; ++run) {
        const fs::path out = base / ("out" + std::to_string(run));
        const fs::path log = base / ("run" + std::to_string(run) + ".log");
        const std::string cmd = cli + " pipeline run --cases " + (base / "cases").string() +
                                " --out " + out.string() + " --jobs 1 > " + log.string() +
                                " 2>&1";
        const int status = std::system(cmd.c_str());
        c.require(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0,
                  fmt("pipeline run %d exited abnormally", run));
    }
    if (!c.ok) return;

    const auto collect = [](const fs::path& root) {
        std::vector<fs::path> rel;
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), root));
        }
        std::sort(rel.begin(), rel.end());
        return rel;
    };
    const std::vector<fs::path> f1 = collect(base / "out1");
    const std::vector<fs::path> f2 = collect(base / "out2");
    c.require(!f1.empty(), "pipeline produced no files");
    c.require(f1 == f2, fmt("output file lists differ (%zu vs %zu entries)", f1.size(),
                            f2.size()));
    if (!c.ok) return;

    for (const fs::path& rel : f1) {
        if (read_file(base / "out1" / rel) != read_file(base / "out2" / rel)) {
            c.require(false, "file differs between runs: " + rel.string());
        }
    }
    c.measured = fmt("%zu output files byte-identical across two runs", f1.size());
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string claim;
        double budget_s;
        std::function<void(Check&)> body;
    };
    const std::vector<Criterion> criteria = {
        {1,
         "FWHM radius exceeds truth for r in {0.4,0.6,0.8} mm at psf 0.6 mm and is within 5% "
         "at r = 3 mm",
         5.0, criterion1},
        {2,
         "synthetic exact-linear curve recovers alpha=-2.0/beta=1.4 within 1e-9; held-out "
         "diameter RMSE <= 0.15 mm (train {0.8,1.2,1.6,2.0} mm, eval {0.6,1.0,1.4} mm)",
         30.0, criterion2},
        {3,
         "robust fit flags exactly the injected 5-sigma dip support on 100 instances and "
         "refit sigma <= phase-1 sigma",
         5.0, criterion3},
        {4,
         "KNN probabilities match the exhaustive direct-vote oracle within 1e-12 "
         "(n=50, K=10, 100 seeds)",
         0.0, criterion4},
        {5,
         "min-cut energy equals brute force on 200 12-vertex graphs (exact ==) and is beaten "
         "by none of 1000 random feasible labelings on each of 20 mid-size graphs (slack 1e-9)",
         60.0, criterion5},
        {6,
         "clean 2 mm cylinder: Dice >= 0.95 and MaxSD <= 0.2 mm (2 radial steps) in both PVE "
         "modes; modes bit-identical with 0 PVE planes",
         0.0, criterion6},
        {7,
         "stenosis suite (min radii 0.40-0.70 mm): PVE-on min effective diameter <= PVE-off "
         "in >= 9/10 cases and FFR(on) <= FFR(off) in those cases (slack 1e-9)",
         300.0, criterion7},
        {8,
         "flow: divider within 1e-9 relative, conservation <= 1e-9 mL/s, nonlinear edge "
         "matches bisection within 1e-9, healthy-tree FFR >= 0.97, d-ratio 8 -> R-ratio 0.5 "
         "exact",
         0.0, criterion8},
        {9,
         "AUC equals all-pairs counting and is monotone-transform invariant on 100 "
         "instances; DeLong p within 0.05 of a 1e5-sample permutation oracle on 10 datasets",
         0.0, criterion9},
        {10,
         "mean Dice varies <= 0.05 across lambda {0.875,1.75,3.5} and K {50,100,200}; sweep "
         "CSVs emitted",
         0.0, criterion10},
        {11, "two pipeline run invocations produce byte-identical output trees", 0.0,
         criterion11},
    };

    int failures = 0;
    for (const Criterion& cr : criteria) {
        Check chk;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.body(chk);
        } catch (const std::exception& e) {
            chk.require(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (cr.budget_s > 0.0) {
            chk.require(secs < cr.budget_s,
                        fmt("runtime %.1f s exceeds the %g s budget", secs, cr.budget_s));
        }
        const std::string& tail = chk.ok ? chk.measured : chk.why;
        std::printf("%s criterion %2d: %s -- %s [%.1f s%s]\n", chk.ok ? "PASS" : "FAIL", cr.id,
                    cr.claim.c_str(), tail.c_str(), secs,
                    cr.budget_s > 0.0 ? fmt(", budget %g s", cr.budget_s).c_str() : "");
        std::fflush(stdout);
        if (!chk.ok) ++failures;
    }
    std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
