#include "coropve/raydb.hpp"

#include <cstring>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "coropve/cylindrical.hpp"
#include "coropve/errors.hpp"
#include "coropve/io.hpp"

namespace coropve {

namespace {

constexpr char kMagic[8] = {'C', 'R', 'A', 'Y', 'D', 'B', '1', '\0'};

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t decode_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

void append_f32(std::string& out, float v) {
    static_assert(sizeof(float) == 4);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

float decode_f32(const char* p) {
    float v;
    std::memcpy(&v, p, 4);
    return v;
}

}  // namespace

double default_kernel_lambda(std::size_t n_radii) {
    return 1.0 / (static_cast<double>(n_radii) * 50.0 * 50.0);
}

RayDatabase build_ray_database(std::span<const LabeledVessel> vessels, const GridParams& grid,
                               double kernel_lambda, int k_neighbors) {
    const std::vector<double> radii = grid.radii();
    RayDatabase db;
    db.radii.assign(radii.begin(), radii.end());
    db.k_neighbors = k_neighbors;
    db.kernel_lambda = kernel_lambda > 0.0 ? kernel_lambda : default_kernel_lambda(radii.size());

    for (const LabeledVessel& vessel : vessels) {
        const CylindricalGrid vol_grid = warp_to_cylindrical(
            *vessel.volume, *vessel.centerline, grid.n_angles, radii, grid.plane_spacing_mm);
        std::optional<CylindricalGrid> mask_grid;
        if (!vessel.truth_spec) {
            mask_grid = warp_to_cylindrical(*vessel.mask, *vessel.centerline, grid.n_angles,
                                            radii, grid.plane_spacing_mm);
        }

        for (int i = 0; i < vol_grid.n_planes; ++i) {
            const double r_true =
                vessel.truth_spec ? vessel.truth_spec->radius_at(vol_grid.plane_arc(i)) : 0.0;
            for (int a = 0; a < vol_grid.n_angles; ++a) {
                bool inside = true;  // truncate labels at the first 0 (star shape)
                for (std::size_t r = 0; r < radii.size(); ++r) {
                    const int ri = static_cast<int>(r);
                    db.intensities.push_back(static_cast<float>(vol_grid.at(i, a, ri)));
                    if (vessel.truth_spec) {
                        if (radii[r] > r_true + 1e-9) inside = false;
                    } else if (mask_grid->at(i, a, ri) < 0.5) {
                        inside = false;
                    }
                    db.labels.push_back(inside ? 1 : 0);
                }
            }
        }
    }
    if (db.n_rays() == 0) throw EmptyDatabaseError("no rays produced from the labeled vessels");
    return db;
}

RayDatabase build_ray_database(std::span<const PhantomTruth> phantoms, const GridParams& grid,
                               double kernel_lambda, int k_neighbors) {
    std::vector<LabeledVessel> vessels;
    vessels.reserve(phantoms.size());
    for (const PhantomTruth& p : phantoms) {
        vessels.push_back({&p.volume, &p.lumen_mask, &p.centerline, &p.spec});
    }
    return build_ray_database(vessels, grid, kernel_lambda, k_neighbors);
}

void save_ray_database(const RayDatabase& db, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    append_u32(out, static_cast<std::uint32_t>(db.n_rays()));
    append_u32(out, static_cast<std::uint32_t>(db.n_radii()));
    for (const float r : db.radii) append_f32(out, r);
    for (const float v : db.intensities) append_f32(out, v);
    out.append(reinterpret_cast<const char*>(db.labels.data()), db.labels.size());

    nlohmann::json footer;
    footer["kernel_lambda"] = db.kernel_lambda;
    footer["k_neighbors"] = db.k_neighbors;
    footer["provenance"] = db.provenance;
    out += footer.dump();
    write_bytes_atomic(path, out.data(), out.size());
}

RayDatabase load_ray_database(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    const auto fail = [&](std::size_t offset, const std::string& what) -> void {
        throw FormatError(path.string() + ": " + what + " (byte offset " +
                          std::to_string(offset) + ")");
    };
    if (bytes.size() < sizeof(kMagic) + 8) fail(bytes.size(), "file truncated before header");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) fail(0, "bad magic");

    const std::size_t n_rays = decode_u32(bytes.data() + 8);
    const std::size_t n_radii = decode_u32(bytes.data() + 12);
    std::size_t off = 16;

    RayDatabase db;
    const std::size_t payload =
        n_radii * 4 + n_rays * n_radii * 4 + n_rays * n_radii;
    if (bytes.size() < off + payload) {
        fail(bytes.size(), "expected " + std::to_string(off + payload) +
                           " payload bytes, got " + std::to_string(bytes.size()));
    }
    db.radii.resize(n_radii);
    for (std::size_t i = 0; i < n_radii; ++i, off += 4) db.radii[i] = decode_f32(bytes.data() + off);
    db.intensities.resize(n_rays * n_radii);
    for (std::size_t i = 0; i < db.intensities.size(); ++i, off += 4) {
        db.intensities[i] = decode_f32(bytes.data() + off);
    }
    db.labels.resize(n_rays * n_radii);
    for (std::size_t i = 0; i < db.labels.size(); ++i, ++off) {
        db.labels[i] = static_cast<std::uint8_t>(bytes[off]);
    }

    nlohmann::json footer;
    try {
        footer = nlohmann::json::parse(bytes.substr(off));
    } catch (const nlohmann::json::parse_error& e) {
        fail(off, std::string("bad JSON footer: ") + e.what());
    }
    db.kernel_lambda = require_field(footer, "kernel_lambda", path).get<double>();
    db.k_neighbors = require_field(footer, "k_neighbors", path).get<int>();
    db.provenance = require_field(footer, "provenance", path).get<std::string>();

    // Label rays must be star-shaped (1-prefix then 0s).
    for (std::size_t k = 0; k < n_rays; ++k) {
        bool seen_zero = false;
        for (std::size_t r = 0; r < n_radii; ++r) {
            const std::uint8_t label = db.labels[k * n_radii + r];
            if (label > 1) fail(16 + n_radii * 4 + n_rays * n_radii * 4 + k * n_radii + r,
                                "label not 0/1");
            if (label == 0) seen_zero = true;
            else if (seen_zero) {
                fail(16 + n_radii * 4 + n_rays * n_radii * 4 + k * n_radii + r,
                     "label ray " + std::to_string(k) + " is not prefix-monotone");
            }
        }
    }
    return db;
}

}  // namespace coropve
