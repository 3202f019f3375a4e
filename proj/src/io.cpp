#include "coropve/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "coropve/config.hpp"
#include "coropve/errors.hpp"

namespace coropve {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raw payload path for a *.vol.json / *.cyl.json sidecar.
fs::path raw_sibling(const fs::path& json_path) {
    std::string name = json_path.filename().string();
    for (const char* suffix : {".vol.json", ".cyl.json", ".json"}) {
        const std::string_view sv = suffix;
        if (name.size() > sv.size() && name.ends_with(sv)) {
            name.resize(name.size() - sv.size());
            break;
        }
    }
    return json_path.parent_path() / (name + ".raw");
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open for reading");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<char> bytes(size);
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (!in) throw FormatError(path.string() + ": read failed");
    return bytes;
}

void append_le16(std::vector<char>& out, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<char>(u & 0xFF));
    out.push_back(static_cast<char>((u >> 8) & 0xFF));
}

std::int16_t decode_le16(const char* p) {
    const auto lo = static_cast<std::uint8_t>(p[0]);
    const auto hi = static_cast<std::uint8_t>(p[1]);
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j, const fs::path& file, const std::string& what) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number()) {
        throw FormatError(file.string() + ": " + what + " must be a 3-element number array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void geometry_to_json(json& j, const Grid3<T>& g) {
    j["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
    j["spacing_mm"] = vec3_to_json(g.spacing);
    j["origin_mm"] = vec3_to_json(g.origin);
}

template <typename T>
void geometry_from_json(const json& j, const fs::path& file, Grid3<T>& g) {
    const json& dims = require_field(j, "dims", file);
    if (!dims.is_array() || dims.size() != 3) {
        throw FormatError(file.string() + ": dims must be a 3-element array");
    }
    for (int axis = 0; axis < 3; ++axis) {
        g.dims[axis] = dims[axis].get<int>();
        if (g.dims[axis] < 1) throw FormatError(file.string() + ": dims must all be >= 1");
    }
    g.spacing = vec3_from_json(require_field(j, "spacing_mm", file), file, "spacing_mm");
    g.origin = vec3_from_json(require_field(j, "origin_mm", file), file, "origin_mm");
    if (g.spacing.x <= 0.0 || g.spacing.y <= 0.0 || g.spacing.z <= 0.0) {
        throw FormatError(file.string() + ": spacing_mm must be positive");
    }
}

void check_format_tag(const json& j, const fs::path& file, const std::string& expected) {
    const json& fmt = require_field(j, "format", file);
    if (fmt.get<std::string>() != expected) {
        throw FormatError(file.string() + ": format is '" + fmt.get<std::string>() +
                          "', expected '" + expected + "'");
    }
}

void check_dtype(const json& j, const fs::path& file, const std::string& expected) {
    const json& dtype = require_field(j, "dtype", file);
    if (dtype.get<std::string>() != expected) {
        throw FormatError(file.string() + ": dtype is '" + dtype.get<std::string>() +
                          "', expected '" + expected + "'");
    }
}

void check_payload_size(const fs::path& raw, std::size_t actual, std::size_t expected) {
    if (actual != expected) {
        throw FormatError(raw.string() + ": expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(actual));
    }
}

}  // namespace

void write_bytes_atomic(const fs::path& path, const void* data, std::size_t size) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError(tmp.string() + ": cannot open for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw FormatError(tmp.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, std::string_view content) {
    write_bytes_atomic(path, content.data(), content.size());
}

std::string read_text(const fs::path& path) {
    const std::vector<char> bytes = read_bytes(path);
    return {bytes.begin(), bytes.end()};
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

json load_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_json(const json& j, const fs::path& path) {
    write_text_atomic(path, j.dump(2) + "\n");
}

const json& require_field(const json& j, const std::string& key, const fs::path& file,
                          const std::string& context) {
    if (!j.is_object() || !j.contains(key)) {
        const std::string where = context.empty() ? key : context + "." + key;
        throw FormatError(file.string() + ": missing field '" + where + "'");
    }
    return j.at(key);
}

void save_volume(const ScalarVolume& vol, const fs::path& json_path) {
    const fs::path raw = raw_sibling(json_path);
    std::vector<char> bytes;
    bytes.reserve(vol.values.size() * 2);
    for (const float v : vol.values) {
        const double r = std::llround(static_cast<double>(v));
        const auto clamped = static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
        append_le16(bytes, clamped);
    }
    write_bytes_atomic(raw, bytes.data(), bytes.size());

    json j;
    j["format"] = "coropve.volume";
    j["tool_version"] = kToolVersion;
    geometry_to_json(j, vol);
    j["dtype"] = "int16";
    j["data"] = raw.filename().string();
    save_json(j, json_path);
}

ScalarVolume load_volume(const fs::path& json_path) {
    const json j = load_json(json_path);
    check_format_tag(j, json_path, "coropve.volume");
    check_dtype(j, json_path, "int16");

    ScalarVolume vol;
    geometry_from_json(j, json_path, vol);
    const fs::path raw =
        json_path.parent_path() / require_field(j, "data", json_path).get<std::string>();
    const std::vector<char> bytes = read_bytes(raw);
    check_payload_size(raw, bytes.size(), vol.size() * 2);
    vol.values.resize(vol.size());
    for (std::size_t i = 0; i < vol.values.size(); ++i) {
        vol.values[i] = static_cast<float>(decode_le16(bytes.data() + 2 * i));
    }
    return vol;
}

void save_mask(const MaskVolume& mask, const fs::path& json_path) {
    const fs::path raw = raw_sibling(json_path);
    write_bytes_atomic(raw, mask.values.data(), mask.values.size());

    json j;
    j["format"] = "coropve.mask";
    j["tool_version"] = kToolVersion;
    geometry_to_json(j, mask);
    j["dtype"] = "uint8";
    j["data"] = raw.filename().string();
    save_json(j, json_path);
}

MaskVolume load_mask(const fs::path& json_path) {
    const json j = load_json(json_path);
    check_format_tag(j, json_path, "coropve.mask");
    check_dtype(j, json_path, "uint8");

    MaskVolume mask;
    geometry_from_json(j, json_path, mask);
    const fs::path raw =
        json_path.parent_path() / require_field(j, "data", json_path).get<std::string>();
    const std::vector<char> bytes = read_bytes(raw);
    check_payload_size(raw, bytes.size(), mask.size());
    mask.values.resize(mask.size());
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        mask.values[i] = static_cast<std::uint8_t>(bytes[i]) ? 1 : 0;
    }
    return mask;
}

void save_centerline_tree(const CenterlineTree& tree, const fs::path& path) {
    json j;
    j["format"] = "coropve.centerline_tree";
    j["tool_version"] = kToolVersion;
    j["tree_side"] = to_string(tree.tree_side);
    json branches = json::array();
    for (std::size_t b = 0; b < tree.branches.size(); ++b) {
        json jb;
        jb["ostium_index"] = 0;
        json pts = json::array();
        for (const Vec3& p : tree.branches[b].points) pts.push_back(vec3_to_json(p));
        jb["points_mm"] = pts;
        if (b < tree.parent.size() && tree.parent[b]) {
            jb["parent"] = {{"branch", tree.parent[b]->branch},
                            {"arc_length_mm", tree.parent[b]->arc_length_mm}};
        } else {
            jb["parent"] = nullptr;
        }
        branches.push_back(std::move(jb));
    }
    j["branches"] = std::move(branches);
    save_json(j, path);
}

CenterlineTree load_centerline_tree(const fs::path& path) {
    const json j = load_json(path);
    check_format_tag(j, path, "coropve.centerline_tree");

    CenterlineTree tree;
    tree.tree_side =
        tree_side_from_string(require_field(j, "tree_side", path).get<std::string>());
    const json& branches = require_field(j, "branches", path);
    if (!branches.is_array() || branches.empty()) {
        throw FormatError(path.string() + ": branches must be a non-empty array");
    }
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const json& jb = branches[b];
        const std::string ctx = "branches[" + std::to_string(b) + "]";
        const json& ostium = require_field(jb, "ostium_index", path, ctx);
        if (ostium.get<int>() != 0) {
            throw FormatError(path.string() + ": " + ctx + ".ostium_index must be 0");
        }
        const json& pts = require_field(jb, "points_mm", path, ctx);
        if (!pts.is_array() || pts.size() < 2) {
            throw FormatError(path.string() + ": " + ctx + ".points_mm needs >= 2 points");
        }
        std::vector<Vec3> points;
        points.reserve(pts.size());
        for (const json& p : pts) points.push_back(vec3_from_json(p, path, ctx + ".points_mm"));
        tree.branches.push_back(resample_centerline(make_centerline(std::move(points)), 0.5));

        const json& parent = require_field(jb, "parent", path, ctx);
        if (parent.is_null()) {
            tree.parent.emplace_back(std::nullopt);
        } else {
            ParentLink link;
            link.branch = require_field(parent, "branch", path, ctx + ".parent").get<int>();
            link.arc_length_mm =
                require_field(parent, "arc_length_mm", path, ctx + ".parent").get<double>();
            tree.parent.emplace_back(link);
        }
    }
    tree.validate_and_root();
    return tree;
}

void save_cylindrical(const CylindricalGrid& grid, const fs::path& json_path) {
    const fs::path raw = raw_sibling(json_path);
    static_assert(sizeof(double) == 8);
    // Raw float64 payload; x86-64 doubles are already little-endian IEEE 754.
    write_bytes_atomic(raw, grid.intensities.data(), grid.intensities.size() * sizeof(double));

    json j;
    j["format"] = "coropve.cylindrical";
    j["tool_version"] = kToolVersion;
    j["n_planes"] = grid.n_planes;
    j["n_angles"] = grid.n_angles;
    j["plane_spacing_mm"] = grid.plane_spacing;
    j["radii_mm"] = grid.radii;
    json centers = json::array(), axes_u = json::array(), axes_v = json::array();
    for (int i = 0; i < grid.n_planes; ++i) {
        centers.push_back(vec3_to_json(grid.plane_center[i]));
        axes_u.push_back(vec3_to_json(grid.plane_axis_u[i]));
        axes_v.push_back(vec3_to_json(grid.plane_axis_v[i]));
    }
    j["plane_center_mm"] = std::move(centers);
    j["plane_axis_u"] = std::move(axes_u);
    j["plane_axis_v"] = std::move(axes_v);
    j["n_clamped"] = grid.n_clamped;
    j["dtype"] = "float64";
    j["data"] = raw.filename().string();
    save_json(j, json_path);
}

CylindricalGrid load_cylindrical(const fs::path& json_path) {
    const json j = load_json(json_path);
    check_format_tag(j, json_path, "coropve.cylindrical");
    check_dtype(j, json_path, "float64");

    CylindricalGrid grid;
    grid.n_planes = require_field(j, "n_planes", json_path).get<int>();
    grid.n_angles = require_field(j, "n_angles", json_path).get<int>();
    grid.plane_spacing = require_field(j, "plane_spacing_mm", json_path).get<double>();
    grid.radii = require_field(j, "radii_mm", json_path).get<std::vector<double>>();
    grid.n_clamped = require_field(j, "n_clamped", json_path).get<std::int64_t>();
    if (grid.n_planes < 1 || grid.n_angles < 1 || grid.radii.empty()) {
        throw FormatError(json_path.string() + ": degenerate grid shape");
    }

    const json& centers = require_field(j, "plane_center_mm", json_path);
    const json& axes_u = require_field(j, "plane_axis_u", json_path);
    const json& axes_v = require_field(j, "plane_axis_v", json_path);
    if (static_cast<int>(centers.size()) != grid.n_planes ||
        static_cast<int>(axes_u.size()) != grid.n_planes ||
        static_cast<int>(axes_v.size()) != grid.n_planes) {
        throw FormatError(json_path.string() + ": plane array lengths do not match n_planes");
    }
    for (int i = 0; i < grid.n_planes; ++i) {
        grid.plane_center.push_back(vec3_from_json(centers[i], json_path, "plane_center_mm"));
        grid.plane_axis_u.push_back(vec3_from_json(axes_u[i], json_path, "plane_axis_u"));
        grid.plane_axis_v.push_back(vec3_from_json(axes_v[i], json_path, "plane_axis_v"));
    }

    const fs::path raw =
        json_path.parent_path() / require_field(j, "data", json_path).get<std::string>();
    const std::vector<char> bytes = read_bytes(raw);
    const std::size_t n =
        static_cast<std::size_t>(grid.n_planes) * grid.n_angles * grid.radii.size();
    check_payload_size(raw, bytes.size(), n * sizeof(double));
    grid.intensities.resize(n);
    std::memcpy(grid.intensities.data(), bytes.data(), bytes.size());
    return grid;
}

}  // namespace coropve
