// coropve: partial-volume-aware coronary lumen segmentation and lumped-
// parameter FFR estimation on synthetic CT phantoms.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coropve/config.hpp"
#include "coropve/errors.hpp"
#include "coropve/flow.hpp"
#include "coropve/graphcut.hpp"
#include "coropve/io.hpp"
#include "coropve/phantom.hpp"
#include "coropve/pipeline.hpp"
#include "coropve/profile.hpp"
#include "coropve/raydb.hpp"
#include "coropve/surface.hpp"

namespace {

using namespace coropve;

PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_config(path);
}

void warn_clamped(const CylindricalGrid& grid, const std::string& what) {
    const std::size_t total = static_cast<std::size_t>(grid.n_planes) *
                              static_cast<std::size_t>(grid.n_angles) * grid.n_radii();
    if (total == 0) return;
    const double fraction = static_cast<double>(grid.n_clamped) / static_cast<double>(total);
    if (fraction > 0.01) {
        std::fprintf(stderr, "warning: %s: %zu of %zu samples (%.1f%%) clamped at the volume boundary\n",
                     what.c_str(), grid.n_clamped, total, 100.0 * fraction);
    }
}

void warn_saturated(const LumenSurface& surface, const std::string& what) {
    if (surface.n_saturated_rays > 0) {
        std::fprintf(stderr, "warning: %s: %d rays saturated at the outermost radius\n",
                     what.c_str(), surface.n_saturated_rays);
    }
}

// ---------------------------------------------------------------------------
// phantom gen

struct PhantomGenArgs {
    std::string spec, out;
    std::uint64_t seed = 0;
};

void cmd_phantom_gen(const PhantomGenArgs& args) {
    const PhantomSpec spec = load_phantom_spec(args.spec);
    const PhantomTruth truth = generate_phantom(spec, args.seed);
    save_phantom_case(truth, args.out);
    std::printf("phantom case (%dx%dx%d voxels, %g mm) -> %s\n", truth.volume.dims[0],
                truth.volume.dims[1], truth.volume.dims[2], spec.length_mm, args.out.c_str());
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
    std::string phantom_dir, out;
    double psf_sigma = 0.0;
};

void cmd_calibrate(const CalibrateArgs& args) {
    // Each case contributes its mid-vessel diameter; the reduction curve is
    // the analytic blurred-disk response at the given PSF width.
    const std::vector<std::filesystem::path> dirs = list_case_dirs(args.phantom_dir);
    std::vector<double> diameters;
    double lumen_hu = 0.0, background_hu = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const std::filesystem::path truth_path = dirs[i] / "truth.json";
        const nlohmann::json j = load_json(truth_path);
        const PhantomSpec spec =
            phantom_spec_from_json(require_field(j, "spec", truth_path), truth_path.string());
        diameters.push_back(2.0 * spec.radius_at(spec.length_mm / 2.0));
        if (i == 0) {
            lumen_hu = spec.lumen_hu;
            background_hu = spec.background_hu;
        }
    }
    const auto curve = hu_reduction_curve(diameters, lumen_hu, background_hu, args.psf_sigma);
    const RadiusModel model = calibrate_radius_model(curve);
    save_radius_model(model, args.out);
    std::printf("radius model alpha=%g mm beta=%g mm (%zu cases) -> %s\n", model.alpha_mm,
                model.beta_mm, dirs.size(), args.out.c_str());
}

// ---------------------------------------------------------------------------
// raydb build

struct RaydbBuildArgs {
    std::string phantom_dir, config, out;
};

void cmd_raydb_build(const RaydbBuildArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    const std::vector<std::filesystem::path> dirs = list_case_dirs(args.phantom_dir);
    std::vector<PhantomCase> cases;
    cases.reserve(dirs.size());
    for (const std::filesystem::path& d : dirs) cases.push_back(load_phantom_case(d));
    const RayDatabase db = build_raydb_from_cases(cases, config);
    save_ray_database(db, args.out);
    std::printf("ray database: %zu rays x %zu radii -> %s\n", db.n_rays(), db.n_radii(),
                args.out.c_str());
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
    std::string volume, centerline, raydb, pve_model, pve = "on", config, out;
    int jobs = 0;
};

void cmd_segment(const SegmentArgs& args) {
    PipelineConfig config = load_config_or_default(args.config);
    config.pve_mode = pve_mode_from_string(args.pve);
    config.jobs = resolve_jobs(args.jobs > 0 ? args.jobs : config.jobs);

    const ScalarVolume vol = load_volume(args.volume);
    const CenterlineTree tree = load_centerline_tree(args.centerline);
    const RayDatabase db = load_ray_database(args.raydb);
    const RadiusModel radius_model = load_radius_model(args.pve_model);

    // The config echo deliberately leaves out the on/off mode selector and
    // the worker count: neither changes the segmentation, so runs that agree
    // produce byte-identical artifacts.
    nlohmann::json config_echo = to_json(config);
    config_echo.erase("pve_mode");
    config_echo.erase("jobs");

    const bool single = tree.branches.size() == 1;
    for (std::size_t b = 0; b < tree.branches.size(); ++b) {
        const Centerline dense = resample_centerline(tree.branches[b], 0.5);
        const CylindricalGrid grid =
            warp_to_cylindrical(vol, dense, config.grid.n_angles, config.grid.radii(),
                                config.grid.plane_spacing_mm);
        warn_clamped(grid, "branch " + std::to_string(b));

        IntensityProfile profile;
        for (int i = 0; i < grid.n_planes; ++i) {
            profile.arc_length.push_back(grid.plane_arc(i));
            profile.intensity.push_back(
                sample_trilinear(vol, grid.plane_center[static_cast<std::size_t>(i)]));
        }
        const SegmentBranchResult result =
            segment_branch(grid, profile, db, radius_model, config);
        warn_saturated(result.surface, "branch " + std::to_string(b));

        const nlohmann::json meta{{"config", config_echo},
                                  {"branch", b},
                                  {"energy", result.energy},
                                  {"n_pve_planes", result.n_pve_planes},
                                  {"inputs",
                                   {{"volume", args.volume},
                                    {"centerline", args.centerline},
                                    {"raydb", args.raydb},
                                    {"pve_model", args.pve_model}}}};
        std::filesystem::path out_path = args.out;
        if (!single) {
            char name[64];
            std::snprintf(name, sizeof name, "branch_%03zu.surface.json", b);
            out_path = std::filesystem::path(args.out) / name;
        }
        save_surface(result.surface, meta, out_path);
        std::printf("branch %zu: %zu planes, energy %.6g, %zu PVE planes -> %s\n", b,
                    result.surface.n_planes(), result.energy, result.n_pve_planes,
                    out_path.string().c_str());
    }
}

// ---------------------------------------------------------------------------
// flow

struct FlowArgs {
    std::string surfaces, topology, config, out;
};

void cmd_flow(const FlowArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    const CenterlineTree tree = load_centerline_tree(args.topology);

    std::error_code ec;
    if (!std::filesystem::is_directory(args.surfaces, ec)) {
        throw FormatError("surface directory does not exist: " + args.surfaces);
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(args.surfaces)) {
        if (entry.path().string().ends_with(".surface.json")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() != tree.branches.size()) {
        throw FormatError("found " + std::to_string(files.size()) + " surfaces in " +
                          args.surfaces + " for " + std::to_string(tree.branches.size()) +
                          " centerline branches");
    }
    std::vector<LumenSurface> surfaces;
    surfaces.reserve(files.size());
    for (const std::filesystem::path& f : files) surfaces.push_back(load_surface(f));

    const VesselTree vessel_tree = tree_from_surfaces(surfaces, tree);
    const FlowNetwork net = build_network(vessel_tree, config.flow);
    const FlowResult result = solve_flow(net);

    double min_ffr = 1.0;
    for (const VesselSegment& segment : vessel_tree.segments) {
        min_ffr = std::min(min_ffr, node_ffr(net, result, segment.to_node));
    }
    nlohmann::json surface_names = nlohmann::json::array();
    for (const std::filesystem::path& f : files) surface_names.push_back(f.filename().string());
    const nlohmann::json meta{{"config", to_json(config)},
                              {"inputs",
                               {{"surfaces", args.surfaces},
                                {"surface_files", surface_names},
                                {"topology", args.topology}}}};
    save_flow_result(vessel_tree, net, result, meta, args.out);
    std::printf("flow: %zu segments, %d iterations, min FFR %.4f -> %s\n",
                vessel_tree.segments.size(), result.iterations, min_ffr, args.out.c_str());
}

// ---------------------------------------------------------------------------
// eval seg

struct EvalSegArgs {
    std::string pred, truth, out;
};

void cmd_eval_seg(const EvalSegArgs& args) {
    const LumenSurface surface = load_surface(args.pred);
    const PhantomCase c = load_phantom_case(args.truth);
    const SegMetricsRow row = evaluate_segmentation(surface, c);

    std::string csv = "# tool=coropve " + std::string(kToolVersion) + "\n";
    csv += "# pred=" + args.pred + "\n";
    csv += "# truth=" + args.truth + "\n";
    csv += "case_id,dice,msd_mm,maxsd_mm\n";
    csv += row.case_id + "," + format_double(row.dice) + "," + format_double(row.msd_mm) + "," +
           format_double(row.maxsd_mm) + "\n";
    write_text_atomic(args.out, csv);
    std::printf("dice %.4f msd %.4f mm maxsd %.4f mm -> %s\n", row.dice, row.msd_mm,
                row.maxsd_mm, args.out.c_str());
}

// ---------------------------------------------------------------------------
// eval roc

struct EvalRocArgs {
    std::string cases, out, plot;
    double threshold = 0.8;
};

void cmd_eval_roc(const EvalRocArgs& args) {
    const std::vector<RocCaseRow> rows = load_roc_cases_csv(args.cases);
    nlohmann::json stats = evaluate_roc_cases(rows, args.threshold);
    stats["tool_version"] = kToolVersion;
    stats["inputs"] = {{"cases", args.cases}};
    save_json(stats, args.out);

    if (!args.plot.empty()) {
        std::vector<double> on, off;
        std::vector<int> labels;
        for (const RocCaseRow& row : rows) {
            on.push_back(row.score_on);
            off.push_back(row.score_off);
            labels.push_back(row.label);
        }
        std::vector<SvgSeries> series(3);
        series[0].label = "pve on";
        for (const RocPoint& p : roc_curve(on, labels, ScoreDirection::LowerIsPositive)) {
            series[0].points.emplace_back(p.fpr, p.tpr);
        }
        series[1].label = "pve off";
        for (const RocPoint& p : roc_curve(off, labels, ScoreDirection::LowerIsPositive)) {
            series[1].points.emplace_back(p.fpr, p.tpr);
        }
        series[2].label = "chance";
        series[2].points = {{0.0, 0.0}, {1.0, 1.0}};
        const std::string desc = "coropve " + std::string(kToolVersion) + " eval roc cases=" +
                                 args.cases + " threshold=" + format_double(args.threshold);
        write_text_atomic(args.plot,
                          polyline_svg(series, "false positive rate", "true positive rate", desc));
    }
    std::printf("AUC pve_on %.4f pve_off %.4f, DeLong p %.4g -> %s\n",
                stats["pve_on"]["auc"].get<double>(), stats["pve_off"]["auc"].get<double>(),
                stats["delong"]["p_value"].get<double>(), args.out.c_str());
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string param, cases, config, out, plot;
    std::vector<double> values;
    int jobs = 0;
};

void cmd_sweep(const SweepArgs& args) {
    PipelineConfig config = load_config_or_default(args.config);
    if (args.jobs > 0) config.jobs = args.jobs;
    const SweepParam param = args.param == "lambda" ? SweepParam::Lambda : SweepParam::K;

    const std::vector<std::filesystem::path> dirs = list_case_dirs(args.cases);
    std::vector<PhantomCase> cases;
    cases.reserve(dirs.size());
    for (const std::filesystem::path& d : dirs) cases.push_back(load_phantom_case(d));

    const std::vector<SweepRow> rows = run_sweep(param, args.values, cases, config);
    write_sweep_csv(param, rows, config, args.out);

    if (!args.plot.empty()) {
        std::vector<SvgSeries> series(1);
        series[0].label = "mean dice";
        for (const SweepRow& row : rows) series[0].points.emplace_back(row.value, row.mean_dice);
        const std::string desc = "coropve " + std::string(kToolVersion) + " sweep param=" +
                                 args.param + " " + to_json(config).dump();
        write_text_atomic(args.plot, polyline_svg(series, args.param, "mean dice", desc));
    }
    std::printf("sweep over %zu values of %s on %zu cases -> %s\n", rows.size(),
                args.param.c_str(), cases.size(), args.out.c_str());
}

// ---------------------------------------------------------------------------
// pipeline run

struct PipelineRunArgs {
    std::string config, cases, out;
    int jobs = 0;
};

void cmd_pipeline_run(const PipelineRunArgs& args) {
    PipelineConfig config = load_config_or_default(args.config);
    if (args.jobs > 0) config.jobs = args.jobs;
    run_pipeline(args.cases, args.out, config);
    std::printf("pipeline outputs -> %s\n", args.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partial-volume-aware coronary lumen segmentation and FFR estimation"};
    app.require_subcommand(1);

    PhantomGenArgs phantom_gen;
    CLI::App* phantom = app.add_subcommand("phantom", "synthetic phantom utilities");
    phantom->require_subcommand(1);
    CLI::App* gen = phantom->add_subcommand("gen", "generate a phantom case directory");
    gen->add_option("--spec", phantom_gen.spec, "phantom spec JSON")->required();
    gen->add_option("--seed", phantom_gen.seed, "noise RNG seed")->required();
    gen->add_option("--out", phantom_gen.out, "output case directory")->required();
    gen->callback([&] { cmd_phantom_gen(phantom_gen); });

    CalibrateArgs calibrate;
    CLI::App* cal = app.add_subcommand("calibrate", "fit the HU-reduction radius model");
    cal->add_option("--phantom-dir", calibrate.phantom_dir, "directory of phantom cases")
        ->required();
    cal->add_option("--psf-sigma", calibrate.psf_sigma, "PSF sigma in mm")->required();
    cal->add_option("--out", calibrate.out, "output radius model JSON")->required();
    cal->callback([&] { cmd_calibrate(calibrate); });

    RaydbBuildArgs raydb_build;
    CLI::App* raydb = app.add_subcommand("raydb", "training ray database utilities");
    raydb->require_subcommand(1);
    CLI::App* build = raydb->add_subcommand("build", "harvest rays from phantom cases");
    build->add_option("--phantom-dir", raydb_build.phantom_dir, "directory of phantom cases")
        ->required();
    build->add_option("--config", raydb_build.config, "pipeline config JSON");
    build->add_option("--out", raydb_build.out, "output .raydb path")->required();
    build->callback([&] { cmd_raydb_build(raydb_build); });

    SegmentArgs segment;
    CLI::App* seg = app.add_subcommand("segment", "segment the lumen around a centerline");
    seg->add_option("--volume", segment.volume, "input volume (.vol.json)")->required();
    seg->add_option("--centerline", segment.centerline, "centerline tree (.cl.json)")->required();
    seg->add_option("--raydb", segment.raydb, "training ray database")->required();
    seg->add_option("--pve-model", segment.pve_model, "radius model JSON")->required();
    seg->add_option("--pve", segment.pve, "partial-volume handling: on|off")
        ->check(CLI::IsMember({"on", "off"}));
    seg->add_option("--config", segment.config, "pipeline config JSON");
    seg->add_option("--jobs", segment.jobs, "worker threads (default COROPVE_JOBS or 1)");
    seg->add_option("--out", segment.out,
                    "output surface path (directory when the tree has several branches)")
        ->required();
    seg->callback([&] { cmd_segment(segment); });

    FlowArgs flow;
    CLI::App* fl = app.add_subcommand("flow", "lumped-parameter flow and FFR");
    fl->add_option("--surfaces", flow.surfaces, "directory of branch surfaces")->required();
    fl->add_option("--topology", flow.topology, "centerline tree (.cl.json)")->required();
    fl->add_option("--config", flow.config, "pipeline config JSON");
    fl->add_option("--out", flow.out, "output FFR JSON")->required();
    fl->callback([&] { cmd_flow(flow); });

    CLI::App* eval = app.add_subcommand("eval", "evaluation utilities");
    eval->require_subcommand(1);

    EvalSegArgs eval_seg;
    CLI::App* es = eval->add_subcommand("seg", "segmentation metrics against phantom truth");
    es->add_option("--pred", eval_seg.pred, "predicted surface JSON")->required();
    es->add_option("--truth", eval_seg.truth, "phantom case directory")->required();
    es->add_option("--out", eval_seg.out, "output metrics CSV")->required();
    es->callback([&] { cmd_eval_seg(eval_seg); });

    EvalRocArgs eval_roc;
    CLI::App* er = eval->add_subcommand("roc", "paired score evaluation and DeLong test");
    er->add_option("--cases", eval_roc.cases, "CSV of per-case scores and labels")->required();
    er->add_option("--threshold", eval_roc.threshold, "decision threshold (default 0.8)");
    er->add_option("--out", eval_roc.out, "output stats JSON")->required();
    er->add_option("--plot", eval_roc.plot, "optional ROC SVG path");
    er->callback([&] { cmd_eval_roc(eval_roc); });

    SweepArgs sweep;
    CLI::App* sw = app.add_subcommand("sweep", "parameter sensitivity sweep");
    sw->add_option("--param", sweep.param, "parameter to sweep: lambda|k")
        ->required()
        ->check(CLI::IsMember({"lambda", "k"}));
    sw->add_option("--values", sweep.values, "comma-separated parameter values")
        ->required()
        ->delimiter(',');
    sw->add_option("--cases", sweep.cases, "directory of phantom cases")->required();
    sw->add_option("--config", sweep.config, "pipeline config JSON");
    sw->add_option("--jobs", sweep.jobs, "worker threads (default COROPVE_JOBS or 1)");
    sw->add_option("--out", sweep.out, "output sweep CSV")->required();
    sw->add_option("--plot", sweep.plot, "optional SVG path");
    sw->callback([&] { cmd_sweep(sweep); });

    PipelineRunArgs pipeline_run;
    CLI::App* pipe = app.add_subcommand("pipeline", "end-to-end batch runs");
    pipe->require_subcommand(1);
    CLI::App* run = pipe->add_subcommand("run", "segment and simulate every case, both PVE modes");
    run->add_option("--config", pipeline_run.config, "pipeline config JSON");
    run->add_option("--cases", pipeline_run.cases, "directory of phantom cases")->required();
    run->add_option("--out", pipeline_run.out, "output directory")->required();
    run->add_option("--jobs", pipeline_run.jobs, "worker threads (default COROPVE_JOBS or 1)");
    run->callback([&] { cmd_pipeline_run(pipeline_run); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
