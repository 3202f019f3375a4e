#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coropve/config.hpp"
#include "coropve/flow.hpp"
#include "coropve/graphcut.hpp"
#include "coropve/metrics.hpp"
#include "coropve/phantom.hpp"
#include "coropve/raydb.hpp"

namespace coropve {

// A phantom case directory contains:
//   volume.vol.json/.raw       blurred volume (the scan stand-in)
//   ideal.vol.json/.raw        pre-blur rasterization
//   lumen_mask.vol.json/.raw   exact truth mask
//   centerline.cl.json         single-branch tree along the vessel axis
//   truth.json                 phantom spec + seed (radius profile reference)

nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j, const std::string& file_hint = "");
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

void save_phantom_case(const PhantomTruth& truth, const std::filesystem::path& dir);

/// Phantom case as read back from disk (the ideal volume is not reloaded;
/// evaluation only needs the blurred volume, mask, centerline and spec).
struct PhantomCase {
    std::filesystem::path dir;
    ScalarVolume volume;
    MaskVolume lumen_mask;
    CenterlineTree tree;
    PhantomSpec spec;
    std::uint64_t seed = 0;
};

PhantomCase load_phantom_case(const std::filesystem::path& dir);

/// Immediate subdirectories of `cases_dir` containing a truth.json, sorted
/// by name. Throws FormatError if there are none.
std::vector<std::filesystem::path> list_case_dirs(const std::filesystem::path& cases_dir);

/// Harvests training rays from every case (volume + exact mask).
RayDatabase build_raydb_from_cases(std::span<const PhantomCase> cases,
                                   const PipelineConfig& config);

/// Radius model self-calibration: HU-reduction curve over the standard
/// training diameters {0.8, 1.2, 1.6, 2.0} mm at the given blur.
RadiusModel calibrate_radius_model_for_psf(double psf_sigma_mm, double lumen_hu,
                                           double background_hu);

struct SegMetricsRow {
    std::string case_id;
    double dice = 0.0;
    double msd_mm = 0.0;
    double maxsd_mm = 0.0;
};

/// Dice against the truth mask (surface voxelized on the truth grid) and
/// symmetric surface distances against the true contour (truth radius
/// evaluated at the predicted surface's plane arcs and angles).
SegMetricsRow evaluate_segmentation(const LumenSurface& surface, const PhantomCase& c);

/// Truth contour points for a case on the sampling pattern of `surface`.
std::vector<Vec3> truth_contour_points(const LumenSurface& surface, const PhantomCase& c);

struct CaseRun {
    SegmentBranchResult seg;
    IntensityProfile profile;  // centerline samples the fit was run on
    SegMetricsRow metrics;
    double min_effective_diameter_mm = 0.0;
    double min_ffr = 1.0;          // minimum over segment distal ends
    FlowResult flow;
    VesselTree vessel_tree;
};

/// Segments the case's root branch in the given mode, evaluates it against
/// truth and runs the flow simulation on the resulting one-segment tree.
CaseRun run_case(const PhantomCase& c, const RayDatabase& db, const RadiusModel& radius_model,
                 const PipelineConfig& config, PveMode mode);

/// End-to-end batch: builds the ray database and radius model from the cases
/// themselves, runs every case in both PVE modes, and writes per-case
/// surfaces, FFR records and a paired summary.csv under out_dir.
void run_pipeline(const std::filesystem::path& cases_dir, const std::filesystem::path& out_dir,
                  const PipelineConfig& config);

enum class SweepParam { Lambda, K };

struct SweepRow {
    double value = 0.0;
    double mean_dice = 0.0;
    double mean_msd_mm = 0.0;
    double mean_maxsd_mm = 0.0;
};

/// Re-segments every case (PVE on) at each parameter value; shared ray
/// database, per-value config override.
std::vector<SweepRow> run_sweep(SweepParam param, std::span<const double> values,
                                std::span<const PhantomCase> cases, const PipelineConfig& config);

void write_sweep_csv(SweepParam param, std::span<const SweepRow> rows,
                     const PipelineConfig& config, const std::filesystem::path& path);

/// One row of the paired-score evaluation table
/// (case_id, score_pve_on, score_pve_off, invasive_label).
struct RocCaseRow {
    std::string case_id;
    double score_on = 0.0;
    double score_off = 0.0;
    int label = 0;
};

std::vector<RocCaseRow> load_roc_cases_csv(const std::filesystem::path& path);

/// Confusion at the threshold, AUC and ROC points for both score sets, and
/// the paired DeLong comparison (lower score = positive, FFR semantics).
nlohmann::json evaluate_roc_cases(std::span<const RocCaseRow> rows, double threshold);

/// Minimal standalone SVG with one polyline per series over the given axes
/// ranges; series are (label, points) pairs. `desc` is embedded verbatim in
/// a <desc> element (used for the config echo).
struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string polyline_svg(std::span<const SvgSeries> series, const std::string& x_label,
                         const std::string& y_label, const std::string& desc);

/// "# key=value" comment header for CSV outputs: tool version + compact
/// config echo.
std::string csv_config_header(const PipelineConfig& config);

/// Number of worker threads: explicit jobs if > 0, else COROPVE_JOBS, else 1.
int resolve_jobs(int jobs);

}  // namespace coropve
