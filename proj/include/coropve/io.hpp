#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "coropve/centerline.hpp"
#include "coropve/cylindrical.hpp"
#include "coropve/volume.hpp"

namespace coropve {

// On-disk formats (all JSON is UTF-8, keys snake_case):
//   *.vol.json + *.raw   volume: little-endian int16 (HU) or uint8 (mask) voxels
//   *.cl.json            centerline tree: branch point arrays, parent links, tree side
//   *.cyl.json + *.raw   cylindrical grid: little-endian float64 samples

/// Writes `content` to a temp file next to `path` and renames it into place,
/// so readers never observe a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);
void write_bytes_atomic(const std::filesystem::path& path, const void* data, std::size_t size);

/// Reads a whole file; FormatError if it cannot be opened.
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal representation (std::to_chars), used for all
/// CSV/SVG output so files are byte-stable across runs.
std::string format_double(double v);

/// Parses a JSON file; FormatError names the file on failure.
nlohmann::json load_json(const std::filesystem::path& path);

/// Serializes with 2-space indent and trailing newline, atomically.
void save_json(const nlohmann::json& j, const std::filesystem::path& path);

/// Fetches a required field; FormatError names the file and the field path.
const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key,
                                    const std::filesystem::path& file,
                                    const std::string& context = "");

/// Volume I/O. `json_path` should end in .vol.json; the voxel payload goes to
/// the sibling .raw file referenced from the sidecar. Values are rounded to
/// the nearest int16 on save (clamped to the int16 range).
void save_volume(const ScalarVolume& vol, const std::filesystem::path& json_path);
ScalarVolume load_volume(const std::filesystem::path& json_path);

void save_mask(const MaskVolume& mask, const std::filesystem::path& json_path);
MaskVolume load_mask(const std::filesystem::path& json_path);

/// Centerline tree I/O (*.cl.json). Branches coarser than 0.5 mm point
/// spacing are resampled on load.
void save_centerline_tree(const CenterlineTree& tree, const std::filesystem::path& path);
CenterlineTree load_centerline_tree(const std::filesystem::path& path);

/// Cylindrical grid I/O (*.cyl.json + .raw, float64 payload).
void save_cylindrical(const CylindricalGrid& grid, const std::filesystem::path& json_path);
CylindricalGrid load_cylindrical(const std::filesystem::path& json_path);

}  // namespace coropve
