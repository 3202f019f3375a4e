#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "coropve/flow.hpp"

namespace coropve {

inline constexpr const char* kToolVersion = "0.1.0";

/// Cylindrical sampling resolution shared by segmentation and the ray
/// database (the two must agree on the radial grid).
struct GridParams {
    double plane_spacing_mm = 0.5;
    int n_angles = 32;
    double radius_min_mm = 0.1;
    double radius_max_mm = 4.0;
    double radius_step_mm = 0.1;

    std::vector<double> radii() const;
};

struct CalciumParams {
    double threshold_hu = 600.0;  // HU at or above which a vertex is treated as calcium
    double probability = 0.01;    // lumen probability assigned to calcium vertices
};

enum class PveMode { Off, On };

std::string to_string(PveMode mode);
PveMode pve_mode_from_string(const std::string& s);

/// Resolved parameter set for the whole pipeline. Every output file embeds
/// this (resolved) config so runs are reproducible from their artifacts.
struct PipelineConfig {
    GridParams grid;
    double graph_lambda = 1.75;
    int k_neighbors = 100;
    double kernel_lambda = 0.0;  // 0: use the ray database's stored value
    CalciumParams calcium;
    PveMode pve_mode = PveMode::On;
    FlowParams flow;
    std::uint64_t seed = 1234;
    int jobs = 0;  // 0: COROPVE_JOBS env or 1
};

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& file_hint = "");
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace coropve
