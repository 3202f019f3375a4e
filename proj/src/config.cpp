#include "coropve/config.hpp"

#include <cmath>
#include <filesystem>

#include "coropve/errors.hpp"
#include "coropve/io.hpp"

namespace coropve {

std::vector<double> GridParams::radii() const {
    if (radius_min_mm <= 0.0 || radius_step_mm <= 0.0 || radius_max_mm < radius_min_mm) {
        throw SpecError("invalid radial grid: min " + std::to_string(radius_min_mm) +
                        " mm, max " + std::to_string(radius_max_mm) + " mm, step " +
                        std::to_string(radius_step_mm) + " mm");
    }
    const int n = static_cast<int>(std::llround((radius_max_mm - radius_min_mm) / radius_step_mm)) + 1;
    std::vector<double> values(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = radius_min_mm + i * radius_step_mm;
    return values;
}

std::string to_string(PveMode mode) { return mode == PveMode::On ? "on" : "off"; }

PveMode pve_mode_from_string(const std::string& s) {
    if (s == "on") return PveMode::On;
    if (s == "off") return PveMode::Off;
    throw FormatError("unknown PVE mode \"" + s + "\" (expected \"on\" or \"off\")");
}

nlohmann::json to_json(const PipelineConfig& config) {
    return nlohmann::json{
        {"tool_version", kToolVersion},
        {"grid",
         {{"plane_spacing_mm", config.grid.plane_spacing_mm},
          {"n_angles", config.grid.n_angles},
          {"radius_min_mm", config.grid.radius_min_mm},
          {"radius_max_mm", config.grid.radius_max_mm},
          {"radius_step_mm", config.grid.radius_step_mm}}},
        {"graph_lambda", config.graph_lambda},
        {"k_neighbors", config.k_neighbors},
        {"kernel_lambda", config.kernel_lambda},
        {"calcium",
         {{"threshold_hu", config.calcium.threshold_hu},
          {"probability", config.calcium.probability}}},
        {"pve_mode", to_string(config.pve_mode)},
        {"flow",
         {{"viscosity_pa_s", config.flow.fluid.viscosity_pa_s},
          {"density_kg_m3", config.flow.fluid.density_kg_m3},
          {"expansion_loss_k", config.flow.fluid.expansion_loss_k},
          {"outlet_exponent", config.flow.outlet_exponent},
          {"outlet_scale", config.flow.outlet_scale},
          {"ostial_pressure_mmhg", config.flow.ostial_pressure_mmhg},
          {"venous_pressure_mmhg", config.flow.venous_pressure_mmhg}}},
        {"seed", config.seed},
        {"jobs", config.jobs}};
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out, const std::string& file_hint) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad value for \"" + std::string(key) + "\"" +
                          (file_hint.empty() ? "" : " in " + file_hint) + ": " + e.what());
    }
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j, const std::string& file_hint) {
    if (!j.is_object()) {
        throw FormatError("config must be a JSON object" +
                          (file_hint.empty() ? "" : " (" + file_hint + ")"));
    }
    PipelineConfig config;
    if (j.contains("grid")) {
        const nlohmann::json& g = j.at("grid");
        read_if(g, "plane_spacing_mm", config.grid.plane_spacing_mm, file_hint);
        read_if(g, "n_angles", config.grid.n_angles, file_hint);
        read_if(g, "radius_min_mm", config.grid.radius_min_mm, file_hint);
        read_if(g, "radius_max_mm", config.grid.radius_max_mm, file_hint);
        read_if(g, "radius_step_mm", config.grid.radius_step_mm, file_hint);
    }
    read_if(j, "graph_lambda", config.graph_lambda, file_hint);
    read_if(j, "k_neighbors", config.k_neighbors, file_hint);
    read_if(j, "kernel_lambda", config.kernel_lambda, file_hint);
    if (j.contains("calcium")) {
        const nlohmann::json& c = j.at("calcium");
        read_if(c, "threshold_hu", config.calcium.threshold_hu, file_hint);
        read_if(c, "probability", config.calcium.probability, file_hint);
    }
    if (j.contains("pve_mode")) {
        std::string mode;
        read_if(j, "pve_mode", mode, file_hint);
        config.pve_mode = pve_mode_from_string(mode);
    }
    if (j.contains("flow")) {
        const nlohmann::json& f = j.at("flow");
        read_if(f, "viscosity_pa_s", config.flow.fluid.viscosity_pa_s, file_hint);
        read_if(f, "density_kg_m3", config.flow.fluid.density_kg_m3, file_hint);
        read_if(f, "expansion_loss_k", config.flow.fluid.expansion_loss_k, file_hint);
        read_if(f, "outlet_exponent", config.flow.outlet_exponent, file_hint);
        read_if(f, "outlet_scale", config.flow.outlet_scale, file_hint);
        read_if(f, "ostial_pressure_mmhg", config.flow.ostial_pressure_mmhg, file_hint);
        read_if(f, "venous_pressure_mmhg", config.flow.venous_pressure_mmhg, file_hint);
    }
    read_if(j, "seed", config.seed, file_hint);
    read_if(j, "jobs", config.jobs, file_hint);

    if (config.grid.plane_spacing_mm <= 0.0) {
        throw SpecError("plane_spacing_mm must be positive" +
                        (file_hint.empty() ? "" : " (" + file_hint + ")"));
    }
    if (config.grid.n_angles < 2) {
        throw SpecError("n_angles must be at least 2" +
                        (file_hint.empty() ? "" : " (" + file_hint + ")"));
    }
    if (config.k_neighbors < 1) {
        throw SpecError("k_neighbors must be at least 1" +
                        (file_hint.empty() ? "" : " (" + file_hint + ")"));
    }
    if (config.graph_lambda < 0.0) {
        throw SpecError("graph_lambda must be non-negative" +
                        (file_hint.empty() ? "" : " (" + file_hint + ")"));
    }
    config.grid.radii();  // validates the radial grid
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return config_from_json(load_json(path), path.string());
}

}  // namespace coropve
