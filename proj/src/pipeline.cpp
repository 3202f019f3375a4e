#include "coropve/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "coropve/errors.hpp"
#include "coropve/io.hpp"
#include "coropve/surface.hpp"

namespace coropve {

namespace {

constexpr double kTrainingDiametersMm[] = {0.8, 1.2, 1.6, 2.0};

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json{v.x, v.y, v.z}; }

/// Runs fn(0..n-1) on `jobs` workers; rethrows the first worker exception.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string case_id_of(const std::filesystem::path& dir) { return dir.filename().string(); }

std::string mode_suffix(PveMode mode) { return "pve_" + to_string(mode); }

double mean_of(std::span<const double> values) {
    double acc = 0.0;
    for (const double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string svg_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

nlohmann::json to_json(const PhantomSpec& spec) {
    nlohmann::json profile = nlohmann::json::array();
    for (const auto& [s, r] : spec.radius_profile) profile.push_back({s, r});
    nlohmann::json plaques = nlohmann::json::array();
    for (const PlaqueSegment& p : spec.plaque_segments) {
        plaques.push_back({{"start_mm", p.start_mm},
                           {"end_mm", p.end_mm},
                           {"hu", p.hu},
                           {"outer_radius_mm", p.outer_radius_mm}});
    }
    return nlohmann::json{{"length_mm", spec.length_mm},
                          {"radius_profile", profile},
                          {"plaque_segments", plaques},
                          {"lumen_hu", spec.lumen_hu},
                          {"background_hu", spec.background_hu},
                          {"psf_sigma_mm", spec.psf_sigma_mm},
                          {"voxel_spacing_mm", vec3_json(spec.voxel_spacing_mm)},
                          {"noise_sigma_hu", spec.noise_sigma_hu}};
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j, const std::string& file_hint) {
    const std::string where = file_hint.empty() ? "phantom spec" : file_hint;
    if (!j.is_object()) throw FormatError(where + ": phantom spec must be a JSON object");

    auto number = [&](const nlohmann::json& node, const char* key, double fallback) {
        if (!node.contains(key)) return fallback;
        if (!node.at(key).is_number()) {
            throw FormatError(where + ": \"" + key + "\" must be a number");
        }
        return node.at(key).get<double>();
    };

    PhantomSpec spec;
    spec.length_mm = number(j, "length_mm", spec.length_mm);
    spec.lumen_hu = number(j, "lumen_hu", spec.lumen_hu);
    spec.background_hu = number(j, "background_hu", spec.background_hu);
    spec.psf_sigma_mm = number(j, "psf_sigma_mm", spec.psf_sigma_mm);
    spec.noise_sigma_hu = number(j, "noise_sigma_hu", spec.noise_sigma_hu);

    if (j.contains("radius_profile")) {
        const nlohmann::json& profile = j.at("radius_profile");
        if (!profile.is_array() || profile.empty()) {
            throw FormatError(where + ": \"radius_profile\" must be a non-empty array");
        }
        spec.radius_profile.clear();
        for (const nlohmann::json& entry : profile) {
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
                !entry[1].is_number()) {
                throw FormatError(where +
                                  ": radius_profile entries must be [arc_mm, radius_mm] pairs");
            }
            spec.radius_profile.emplace_back(entry[0].get<double>(), entry[1].get<double>());
        }
    }
    if (j.contains("plaque_segments")) {
        const nlohmann::json& plaques = j.at("plaque_segments");
        if (!plaques.is_array()) {
            throw FormatError(where + ": \"plaque_segments\" must be an array");
        }
        for (const nlohmann::json& entry : plaques) {
            if (!entry.is_object()) {
                throw FormatError(where + ": plaque_segments entries must be objects");
            }
            for (const char* key : {"start_mm", "end_mm", "hu", "outer_radius_mm"}) {
                if (!entry.contains(key)) {
                    throw FormatError(where + ": plaque segment missing \"" + key + "\"");
                }
            }
            PlaqueSegment p;
            p.start_mm = number(entry, "start_mm", 0.0);
            p.end_mm = number(entry, "end_mm", 0.0);
            p.hu = number(entry, "hu", 0.0);
            p.outer_radius_mm = number(entry, "outer_radius_mm", 0.0);
            spec.plaque_segments.push_back(p);
        }
    }
    if (j.contains("voxel_spacing_mm")) {
        const nlohmann::json& sp = j.at("voxel_spacing_mm");
        if (!sp.is_array() || sp.size() != 3) {
            throw FormatError(where + ": \"voxel_spacing_mm\" must be a 3-element array");
        }
        spec.voxel_spacing_mm = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    }
    return spec;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    return phantom_spec_from_json(load_json(path), path.string());
}

void save_phantom_case(const PhantomTruth& truth, const std::filesystem::path& dir) {
    save_volume(truth.volume, dir / "volume.vol.json");
    save_volume(truth.ideal_volume, dir / "ideal.vol.json");
    save_mask(truth.lumen_mask, dir / "lumen_mask.vol.json");

    CenterlineTree tree;
    tree.branches.push_back(truth.centerline);
    tree.parent.push_back(std::nullopt);
    save_centerline_tree(tree, dir / "centerline.cl.json");

    const nlohmann::json j{{"format", "coropve.phantom_truth"},
                           {"tool_version", kToolVersion},
                           {"seed", truth.seed},
                           {"spec", to_json(truth.spec)}};
    save_json(j, dir / "truth.json");
}

PhantomCase load_phantom_case(const std::filesystem::path& dir) {
    PhantomCase c;
    c.dir = dir;
    c.volume = load_volume(dir / "volume.vol.json");
    c.lumen_mask = load_mask(dir / "lumen_mask.vol.json");
    c.tree = load_centerline_tree(dir / "centerline.cl.json");

    const std::filesystem::path truth_path = dir / "truth.json";
    const nlohmann::json j = load_json(truth_path);
    c.spec = phantom_spec_from_json(require_field(j, "spec", truth_path), truth_path.string());
    c.seed = require_field(j, "seed", truth_path).get<std::uint64_t>();
    return c;
}

std::vector<std::filesystem::path> list_case_dirs(const std::filesystem::path& cases_dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(cases_dir, ec)) {
        throw FormatError("case directory does not exist: " + cases_dir.string());
    }
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(cases_dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "truth.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) {
        throw FormatError("no case directories with a truth.json under " + cases_dir.string());
    }
    return dirs;
}

RayDatabase build_raydb_from_cases(std::span<const PhantomCase> cases,
                                   const PipelineConfig& config) {
    std::vector<LabeledVessel> vessels;
    vessels.reserve(cases.size());
    for (const PhantomCase& c : cases) {
        const int root = c.tree.validate_and_root();
        vessels.push_back({&c.volume, &c.lumen_mask,
                           &c.tree.branches[static_cast<std::size_t>(root)], &c.spec});
    }
    RayDatabase db = build_ray_database(vessels, config.grid, config.kernel_lambda,
                                        config.k_neighbors);
    db.provenance = "built from " + std::to_string(cases.size()) + " phantom case(s)";
    return db;
}

RadiusModel calibrate_radius_model_for_psf(double psf_sigma_mm, double lumen_hu,
                                           double background_hu) {
    const auto curve =
        hu_reduction_curve(kTrainingDiametersMm, lumen_hu, background_hu, psf_sigma_mm);
    return calibrate_radius_model(curve);
}

std::vector<Vec3> truth_contour_points(const LumenSurface& surface, const PhantomCase& c) {
    std::vector<Vec3> points;
    points.reserve(surface.n_planes() * static_cast<std::size_t>(surface.n_angles));
    for (std::size_t i = 0; i < surface.n_planes(); ++i) {
        const SurfacePlane& plane = surface.planes[i];
        const double r_true = c.spec.radius_at(surface.plane_arc(static_cast<int>(i)));
        for (int a = 0; a < surface.n_angles; ++a) {
            const double theta = 2.0 * std::numbers::pi * a / surface.n_angles;
            points.push_back(plane.center + r_true * (std::cos(theta) * plane.axis_u +
                                                      std::sin(theta) * plane.axis_v));
        }
    }
    return points;
}

SegMetricsRow evaluate_segmentation(const LumenSurface& surface, const PhantomCase& c) {
    SegMetricsRow row;
    row.case_id = case_id_of(c.dir);

    const MaskVolume predicted = voxelize_surface(surface, c.lumen_mask.dims,
                                                  c.lumen_mask.spacing, c.lumen_mask.origin);
    row.dice = dice_coefficient(predicted, c.lumen_mask);

    const std::vector<Vec3> pred_points = surface_contour_points(surface);
    const std::vector<Vec3> true_points = truth_contour_points(surface, c);
    const SurfaceDistanceStats stats = surface_distance(pred_points, true_points);
    row.msd_mm = stats.mean_mm;
    row.maxsd_mm = stats.max_mm;
    return row;
}

CaseRun run_case(const PhantomCase& c, const RayDatabase& db, const RadiusModel& radius_model,
                 const PipelineConfig& config, PveMode mode) {
    PipelineConfig run_config = config;
    run_config.pve_mode = mode;

    const int root = c.tree.validate_and_root();
    const Centerline dense =
        resample_centerline(c.tree.branches[static_cast<std::size_t>(root)], 0.5);
    const CylindricalGrid grid =
        warp_to_cylindrical(c.volume, dense, run_config.grid.n_angles, run_config.grid.radii(),
                            run_config.grid.plane_spacing_mm);

    CaseRun run;
    run.profile.arc_length.reserve(static_cast<std::size_t>(grid.n_planes));
    run.profile.intensity.reserve(static_cast<std::size_t>(grid.n_planes));
    for (int i = 0; i < grid.n_planes; ++i) {
        run.profile.arc_length.push_back(grid.plane_arc(i));
        run.profile.intensity.push_back(sample_trilinear(c.volume, grid.plane_center[static_cast<std::size_t>(i)]));
    }

    run.seg = segment_branch(grid, run.profile, db, radius_model, run_config);
    run.metrics = evaluate_segmentation(run.seg.surface, c);

    run.min_effective_diameter_mm = std::numeric_limits<double>::max();
    for (const SurfacePlane& plane : run.seg.surface.planes) {
        run.min_effective_diameter_mm =
            std::min(run.min_effective_diameter_mm, plane.effective_diameter_mm);
    }

    run.vessel_tree = tree_from_surfaces({&run.seg.surface, 1}, c.tree);
    const FlowNetwork net = build_network(run.vessel_tree, run_config.flow);
    run.flow = solve_flow(net);
    run.min_ffr = 1.0;
    for (const VesselSegment& segment : run.vessel_tree.segments) {
        run.min_ffr = std::min(run.min_ffr, node_ffr(net, run.flow, segment.to_node));
    }
    return run;
}

namespace {

nlohmann::json run_meta(const PipelineConfig& config, PveMode mode, const std::string& case_id,
                        const CaseRun& run) {
    PipelineConfig resolved = config;
    resolved.pve_mode = mode;
    return nlohmann::json{{"case_id", case_id},
                          {"pve_mode", to_string(mode)},
                          {"energy", run.seg.energy},
                          {"n_pve_planes", run.seg.n_pve_planes},
                          {"config", to_json(resolved)}};
}

void write_case_artifacts(const std::filesystem::path& case_dir, const std::string& case_id,
                          const PipelineConfig& config, PveMode mode, const CaseRun& run,
                          const PhantomCase& c) {
    const std::string suffix = mode_suffix(mode);
    const nlohmann::json meta = run_meta(config, mode, case_id, run);
    save_surface(run.seg.surface, meta, case_dir / ("surface_" + suffix + ".surface.json"));

    const FlowNetwork net = build_network(run.vessel_tree, config.flow);
    save_flow_result(run.vessel_tree, net, run.flow, meta,
                     case_dir / ("ffr_" + suffix + ".ffr.json"));

    if (mode == PveMode::On) {
        write_profile_csv(run.profile, run.seg.profile_model, case_dir / "profile.csv");

        std::vector<SvgSeries> series(2);
        series[0].label = "intensity";
        series[1].label = "model";
        for (std::size_t i = 0; i < run.profile.size(); ++i) {
            series[0].points.emplace_back(run.profile.arc_length[i], run.profile.intensity[i]);
            series[1].points.emplace_back(run.profile.arc_length[i],
                                          run.seg.profile_model.value_at(run.profile.arc_length[i]));
        }
        write_text_atomic(case_dir / "profile.svg",
                          polyline_svg(series, "arc length (mm)", "intensity (HU)",
                                       "coropve " + std::string(kToolVersion) + " case " +
                                           case_id + " " + to_json(config).dump()));
    }
    (void)c;
}

}  // namespace

void run_pipeline(const std::filesystem::path& cases_dir, const std::filesystem::path& out_dir,
                  const PipelineConfig& config) {
    const std::vector<std::filesystem::path> dirs = list_case_dirs(cases_dir);
    std::vector<PhantomCase> cases;
    cases.reserve(dirs.size());
    for (const std::filesystem::path& d : dirs) cases.push_back(load_phantom_case(d));

    const RayDatabase db = build_raydb_from_cases(cases, config);
    const PhantomSpec& ref = cases.front().spec;
    const RadiusModel radius_model =
        calibrate_radius_model_for_psf(ref.psf_sigma_mm, ref.lumen_hu, ref.background_hu);

    std::filesystem::create_directories(out_dir);
    save_ray_database(db, out_dir / "rays.raydb");
    save_radius_model(radius_model, out_dir / "pve-model.json");

    struct PairedRun {
        CaseRun on, off;
    };
    std::vector<PairedRun> runs(cases.size());

    PipelineConfig case_config = config;
    case_config.jobs = 1;  // parallelism is at case level
    parallel_for(cases.size(), resolve_jobs(config.jobs), [&](std::size_t i) {
        runs[i].on = run_case(cases[i], db, radius_model, case_config, PveMode::On);
        runs[i].off = run_case(cases[i], db, radius_model, case_config, PveMode::Off);
    });

    std::string csv = csv_config_header(config);
    csv += "case_id";
    for (const char* suffix : {"_pve_on", "_pve_off"}) {
        for (const char* col : {"dice", "msd_mm", "maxsd_mm", "min_diameter_mm", "min_ffr"}) {
            csv += ",";
            csv += col;
            csv += suffix;
        }
    }
    csv += "\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string case_id = case_id_of(cases[i].dir);
        const std::filesystem::path case_dir = out_dir / case_id;
        write_case_artifacts(case_dir, case_id, config, PveMode::On, runs[i].on, cases[i]);
        write_case_artifacts(case_dir, case_id, config, PveMode::Off, runs[i].off, cases[i]);

        csv += case_id;
        for (const CaseRun* run : {&runs[i].on, &runs[i].off}) {
            csv += "," + format_double(run->metrics.dice);
            csv += "," + format_double(run->metrics.msd_mm);
            csv += "," + format_double(run->metrics.maxsd_mm);
            csv += "," + format_double(run->min_effective_diameter_mm);
            csv += "," + format_double(run->min_ffr);
        }
        csv += "\n";
    }
    write_text_atomic(out_dir / "summary.csv", csv);
}

std::vector<SweepRow> run_sweep(SweepParam param, std::span<const double> values,
                                std::span<const PhantomCase> cases,
                                const PipelineConfig& config) {
    if (values.empty()) throw SpecError("sweep needs at least one parameter value");
    const RayDatabase db = build_raydb_from_cases(cases, config);
    const PhantomSpec& ref = cases.front().spec;
    const RadiusModel radius_model =
        calibrate_radius_model_for_psf(ref.psf_sigma_mm, ref.lumen_hu, ref.background_hu);

    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (const double value : values) {
        PipelineConfig run_config = config;
        run_config.jobs = 1;
        if (param == SweepParam::Lambda) {
            run_config.graph_lambda = value;
        } else {
            const int k = static_cast<int>(std::llround(value));
            if (k < 1 || std::abs(value - k) > 1e-9) {
                throw SpecError("sweep value " + format_double(value) +
                                " is not a positive integer K");
            }
            run_config.k_neighbors = k;
        }

        std::vector<SegMetricsRow> metrics(cases.size());
        parallel_for(cases.size(), resolve_jobs(config.jobs), [&](std::size_t i) {
            metrics[i] =
                run_case(cases[i], db, radius_model, run_config, PveMode::On).metrics;
        });

        std::vector<double> dice, msd, maxsd;
        for (const SegMetricsRow& m : metrics) {
            dice.push_back(m.dice);
            msd.push_back(m.msd_mm);
            maxsd.push_back(m.maxsd_mm);
        }
        rows.push_back({value, mean_of(dice), mean_of(msd), mean_of(maxsd)});
    }
    return rows;
}

void write_sweep_csv(SweepParam param, std::span<const SweepRow> rows,
                     const PipelineConfig& config, const std::filesystem::path& path) {
    std::string csv = csv_config_header(config);
    csv += param == SweepParam::Lambda ? "lambda" : "k";
    csv += ",mean_dice,mean_msd_mm,mean_maxsd_mm\n";
    for (const SweepRow& row : rows) {
        csv += format_double(row.value) + "," + format_double(row.mean_dice) + "," +
               format_double(row.mean_msd_mm) + "," + format_double(row.mean_maxsd_mm) + "\n";
    }
    write_text_atomic(path, csv);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

double parse_double_field(const std::string& field, const std::string& what,
                          const std::filesystem::path& file, std::size_t line_no) {
    const std::string text = trim(field);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError(file.string() + ":" + std::to_string(line_no) + ": bad " + what +
                          " \"" + field + "\"");
    }
    return value;
}

}  // namespace

std::vector<RocCaseRow> load_roc_cases_csv(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::istringstream stream(text);
    std::string line;
    std::vector<RocCaseRow> rows;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        if (!header_seen) {
            if (stripped != "case_id,score_pve_on,score_pve_off,invasive_label") {
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected header "
                                  "\"case_id,score_pve_on,score_pve_off,invasive_label\", got \"" +
                                  stripped + "\"");
            }
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv_line(stripped);
        if (fields.size() != 4) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        }
        RocCaseRow row;
        row.case_id = trim(fields[0]);
        row.score_on = parse_double_field(fields[1], "score_pve_on", path, line_no);
        row.score_off = parse_double_field(fields[2], "score_pve_off", path, line_no);
        const double label = parse_double_field(fields[3], "invasive_label", path, line_no);
        if (label != 0.0 && label != 1.0) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": invasive_label must be 0 or 1, got \"" + fields[3] + "\"");
        }
        row.label = static_cast<int>(label);
        rows.push_back(row);
    }
    if (!header_seen) throw FormatError(path.string() + ": missing CSV header");
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");
    return rows;
}

namespace {

nlohmann::json json_rate(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

nlohmann::json confusion_json(const ConfusionStats& c) {
    return nlohmann::json{{"tp", c.tp},
                          {"fp", c.fp},
                          {"tn", c.tn},
                          {"fn", c.fn},
                          {"sensitivity", json_rate(c.sensitivity())},
                          {"specificity", json_rate(c.specificity())},
                          {"accuracy", json_rate(c.accuracy())},
                          {"ppv", json_rate(c.ppv())},
                          {"npv", json_rate(c.npv())}};
}

nlohmann::json roc_json(std::span<const RocPoint> curve) {
    nlohmann::json points = nlohmann::json::array();
    for (const RocPoint& p : curve) {
        nlohmann::json threshold;
        if (std::isinf(p.threshold)) {
            threshold = p.threshold > 0 ? "+inf" : "-inf";
        } else {
            threshold = p.threshold;
        }
        points.push_back({{"threshold", threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    }
    return points;
}

}  // namespace

nlohmann::json evaluate_roc_cases(std::span<const RocCaseRow> rows, double threshold) {
    std::vector<double> on, off;
    std::vector<int> labels;
    for (const RocCaseRow& row : rows) {
        on.push_back(row.score_on);
        off.push_back(row.score_off);
        labels.push_back(row.label);
    }
    const auto direction = ScoreDirection::LowerIsPositive;  // FFR: low score = disease

    nlohmann::json result;
    result["n_cases"] = rows.size();
    result["n_positive"] = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    result["n_negative"] = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0));
    result["threshold"] = threshold;
    result["score_direction"] = "lower_is_positive";
    result["pve_on"] = {
        {"auc", auc_mann_whitney(on, labels, direction)},
        {"confusion", confusion_json(confusion_at_threshold(on, labels, threshold, direction))},
        {"roc", roc_json(roc_curve(on, labels, direction))}};
    result["pve_off"] = {
        {"auc", auc_mann_whitney(off, labels, direction)},
        {"confusion", confusion_json(confusion_at_threshold(off, labels, threshold, direction))},
        {"roc", roc_json(roc_curve(off, labels, direction))}};

    const DelongResult delong = delong_paired_test(on, off, labels, direction);
    result["delong"] = {{"auc_pve_on", delong.auc_a}, {"auc_pve_off", delong.auc_b},
                        {"var_pve_on", delong.var_a}, {"var_pve_off", delong.var_b},
                        {"covariance", delong.covariance}, {"z", delong.z},
                        {"p_value", delong.p_value}};
    return result;
}

std::string polyline_svg(std::span<const SvgSeries> series, const std::string& x_label,
                         const std::string& y_label, const std::string& desc) {
    constexpr double kWidth = 640.0, kHeight = 480.0;
    constexpr double kLeft = 70.0, kRight = 610.0, kTop = 40.0, kBottom = 420.0;
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b"};
    constexpr std::size_t kPaletteSize = sizeof kPalette / sizeof kPalette[0];

    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const SvgSeries& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                x_min = x_max = x;
                y_min = y_max = y;
                first = false;
            } else {
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        }
    }
    if (x_max - x_min < 1e-12) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max - y_min < 1e-12) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft); };
    auto py = [&](double y) { return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    svg += "  <desc>" + xml_escape(desc) + "</desc>\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";

    // Axes with 5 evenly spaced labeled ticks.
    svg += "  <g stroke=\"black\" fill=\"none\">\n";
    svg += "    <line x1=\"" + svg_coord(kLeft) + "\" y1=\"" + svg_coord(kBottom) + "\" x2=\"" +
           svg_coord(kRight) + "\" y2=\"" + svg_coord(kBottom) + "\"/>\n";
    svg += "    <line x1=\"" + svg_coord(kLeft) + "\" y1=\"" + svg_coord(kTop) + "\" x2=\"" +
           svg_coord(kLeft) + "\" y2=\"" + svg_coord(kBottom) + "\"/>\n";
    svg += "  </g>\n";
    svg += "  <g font-family=\"monospace\" font-size=\"12\" fill=\"black\">\n";
    for (int t = 0; t < 5; ++t) {
        const double fx = x_min + (x_max - x_min) * t / 4.0;
        const double fy = y_min + (y_max - y_min) * t / 4.0;
        svg += "    <line stroke=\"black\" x1=\"" + svg_coord(px(fx)) + "\" y1=\"" +
               svg_coord(kBottom) + "\" x2=\"" + svg_coord(px(fx)) + "\" y2=\"" +
               svg_coord(kBottom + 5.0) + "\"/>\n";
        svg += "    <text text-anchor=\"middle\" x=\"" + svg_coord(px(fx)) + "\" y=\"" +
               svg_coord(kBottom + 18.0) + "\">" + xml_escape(tick_label(fx)) + "</text>\n";
        svg += "    <line stroke=\"black\" x1=\"" + svg_coord(kLeft - 5.0) + "\" y1=\"" +
               svg_coord(py(fy)) + "\" x2=\"" + svg_coord(kLeft) + "\" y2=\"" +
               svg_coord(py(fy)) + "\"/>\n";
        svg += "    <text text-anchor=\"end\" x=\"" + svg_coord(kLeft - 8.0) + "\" y=\"" +
               svg_coord(py(fy) + 4.0) + "\">" + xml_escape(tick_label(fy)) + "</text>\n";
    }
    svg += "    <text text-anchor=\"middle\" x=\"" + svg_coord((kLeft + kRight) / 2.0) +
           "\" y=\"" + svg_coord(kHeight - 16.0) + "\">" + xml_escape(x_label) + "</text>\n";
    svg += "    <text text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           svg_coord((kTop + kBottom) / 2.0) + ")\" x=\"16\" y=\"" +
           svg_coord((kTop + kBottom) / 2.0) + "\">" + xml_escape(y_label) + "</text>\n";
    svg += "  </g>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % kPaletteSize];
        std::string points;
        for (const auto& [x, y] : series[s].points) {
            if (!points.empty()) points += " ";
            points += svg_coord(px(x)) + "," + svg_coord(py(y));
        }
        svg += "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        const double ly = kTop + 16.0 * static_cast<double>(s);
        svg += "  <rect x=\"" + svg_coord(kRight - 150.0) + "\" y=\"" + svg_coord(ly) +
               "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
        svg += "  <text font-family=\"monospace\" font-size=\"12\" fill=\"black\" x=\"" +
               svg_coord(kRight - 135.0) + "\" y=\"" + svg_coord(ly + 9.0) + "\">" +
               xml_escape(series[s].label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string csv_config_header(const PipelineConfig& config) {
    std::string header = "# tool=coropve " + std::string(kToolVersion) + "\n";
    header += "# config=" + to_json(config).dump() + "\n";
    return header;
}

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    if (const char* env = std::getenv("COROPVE_JOBS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && parsed > 0 && parsed < 1024) {
            return static_cast<int>(parsed);
        }
    }
    return 1;
}

}  // namespace coropve
