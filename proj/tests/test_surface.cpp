#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "coropve/errors.hpp"
#include "coropve/io.hpp"
#include "coropve/surface.hpp"
#include "test_util.hpp"

using namespace coropve;
using coropve::testutil::TempDir;

namespace {

LumenSurface cylinder_surface(double radius, int n_planes, int n_angles, double spacing,
                              bool swap_axes = false) {
    LumenSurface surface;
    surface.plane_spacing_mm = spacing;
    surface.n_angles = n_angles;
    for (int i = 0; i < n_planes; ++i) {
        SurfacePlane plane;
        plane.center = {0.0, 0.0, spacing * i};
        plane.axis_u = swap_axes ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0};
        plane.axis_v = swap_axes ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
        plane.r_star_mm.assign(n_angles, radius);
        plane.area_mm2 = contour_area(plane.r_star_mm);
        plane.effective_diameter_mm = 2.0 * std::sqrt(plane.area_mm2 / std::numbers::pi);
        surface.planes.push_back(std::move(plane));
    }
    return surface;
}

}  // namespace

TEST_CASE("contour_area of a uniform contour is the exact disk area") {
    for (const int n : {3, 8, 32, 257}) {
        const std::vector<double> contour(n, 1.3);
        CHECK(contour_area(contour) ==
              doctest::Approx(std::numbers::pi * 1.3 * 1.3).epsilon(1e-15));
    }
    CHECK(contour_area(std::vector<double>{}) == 0.0);
}

TEST_CASE("contour_area converges to the true area of an ellipse") {
    // r(theta) for an axis-aligned ellipse with semi-axes a, b; area = pi*a*b.
    const double a = 2.0, b = 1.0;
    const auto r_of = [&](double theta) {
        return a * b / std::hypot(b * std::cos(theta), a * std::sin(theta));
    };

    const int n = 4096;
    std::vector<double> contour(n);
    for (int i = 0; i < n; ++i) contour[i] = r_of(2.0 * std::numbers::pi * i / n);

    const double area = contour_area(contour);
    CHECK(area == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-9));

    // Cross-check against the shoelace area of the inscribed polygon, an
    // independent estimator that agrees to O(1/n^2).
    double shoelace = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t0 = 2.0 * std::numbers::pi * i / n;
        const double t1 = 2.0 * std::numbers::pi * ((i + 1) % n) / n;
        const double x0 = contour[i] * std::cos(t0), y0 = contour[i] * std::sin(t0);
        const double x1 = contour[(i + 1) % n] * std::cos(t1), y1 = contour[(i + 1) % n] * std::sin(t1);
        shoelace += x0 * y1 - x1 * y0;
    }
    shoelace *= 0.5;
    CHECK(area == doctest::Approx(shoelace).epsilon(1e-6));
}

TEST_CASE("surface_contour_points walks angles in frame coordinates") {
    LumenSurface surface;
    surface.plane_spacing_mm = 0.5;
    surface.n_angles = 4;
    SurfacePlane plane;
    plane.center = {5.0, 6.0, 7.0};
    plane.axis_u = {1.0, 0.0, 0.0};
    plane.axis_v = {0.0, 1.0, 0.0};
    plane.r_star_mm = {1.0, 2.0, 3.0, 4.0};
    surface.planes = {plane, plane};

    const std::vector<Vec3> points = surface_contour_points(surface);
    REQUIRE(points.size() == 8);
    const Vec3 expected[4] = {
        {6.0, 6.0, 7.0}, {5.0, 8.0, 7.0}, {2.0, 6.0, 7.0}, {5.0, 2.0, 7.0}};
    for (int a = 0; a < 4; ++a) {
        CAPTURE(a);
        CHECK(distance(points[a], expected[a]) < 1e-12);
        CHECK(distance(points[4 + a], expected[a]) < 1e-12);
    }
    CHECK(surface.plane_arc(3) == doctest::Approx(1.5));
}

TEST_CASE("voxelize_surface fills a cylinder of the right volume") {
    const LumenSurface surface = cylinder_surface(1.5, 21, 32, 0.5);
    const std::array<int, 3> dims = {25, 25, 41};
    const Vec3 spacing{0.25, 0.25, 0.25};
    const Vec3 origin{-3.0, -3.0, 0.0};

    const MaskVolume mask = voxelize_surface(surface, dims, spacing, origin);
    std::size_t count = 0;
    for (const std::uint8_t v : mask.values) count += v;

    // Planes extend half a slab beyond each end: z in [-0.25, 10.25].
    const double expected = std::numbers::pi * 1.5 * 1.5 * 10.5;
    const double measured = static_cast<double>(count) * 0.25 * 0.25 * 0.25;
    CHECK(measured == doctest::Approx(expected).epsilon(0.02));

    CHECK(mask.at(12, 12, 20) == 1);  // on the axis
    CHECK(mask.at(0, 0, 20) == 0);    // far corner of the slice
    CHECK(mask.at(12, 12, 40) == 1);  // last covered slab
}

TEST_CASE("the generic plane search matches the vertical fast path") {
    // Swapping the in-plane axes flips the normal to -z, which forces the
    // generic nearest-plane search while describing the same solid.
    const LumenSurface fast = cylinder_surface(1.2, 11, 16, 0.5, false);
    const LumenSurface generic = cylinder_surface(1.2, 11, 16, 0.5, true);

    const std::array<int, 3> dims = {21, 21, 23};
    const Vec3 spacing{0.25, 0.25, 0.25};
    const Vec3 origin{-2.5, -2.5, -0.25};
    const MaskVolume a = voxelize_surface(fast, dims, spacing, origin);
    const MaskVolume b = voxelize_surface(generic, dims, spacing, origin);
    CHECK(a.values == b.values);
}

TEST_CASE("surface JSON round trip preserves every field and the meta block") {
    TempDir dir("surface_roundtrip");
    LumenSurface surface = cylinder_surface(0.9, 3, 6, 0.5);
    surface.planes[1].r_star_mm = {0.5, 0.625, 0.75, 1.0, 1.25, 0.8125};
    surface.planes[1].area_mm2 = contour_area(surface.planes[1].r_star_mm);
    surface.planes[1].effective_diameter_mm =
        2.0 * std::sqrt(surface.planes[1].area_mm2 / std::numbers::pi);
    surface.planes[2].center = {0.125, -0.25, 1.0};
    surface.n_saturated_rays = 4;

    const nlohmann::json meta = {{"config", {{"graph_lambda", 1.75}, {"k_neighbors", 100}}},
                                 {"note", "round trip"}};
    const auto path = dir / "surface.json";
    save_surface(surface, meta, path);

    nlohmann::json meta_back;
    const LumenSurface loaded = load_surface(path, &meta_back);
    CHECK(meta_back == meta);
    CHECK(loaded.plane_spacing_mm == surface.plane_spacing_mm);
    CHECK(loaded.n_angles == surface.n_angles);
    CHECK(loaded.n_saturated_rays == 4);
    REQUIRE(loaded.planes.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CAPTURE(i);
        CHECK(loaded.planes[i].r_star_mm == surface.planes[i].r_star_mm);
        CHECK(loaded.planes[i].area_mm2 == surface.planes[i].area_mm2);
        CHECK(loaded.planes[i].effective_diameter_mm == surface.planes[i].effective_diameter_mm);
        CHECK(distance(loaded.planes[i].center, surface.planes[i].center) == 0.0);
        CHECK(distance(loaded.planes[i].axis_u, surface.planes[i].axis_u) == 0.0);
        CHECK(distance(loaded.planes[i].axis_v, surface.planes[i].axis_v) == 0.0);
    }

    CHECK(!coropve::testutil::has_tmp_files(dir.path()));
}

TEST_CASE("load_surface rejects malformed files") {
    TempDir dir("surface_errors");

    SUBCASE("wrong format tag") {
        const auto path = dir / "wrong.json";
        save_json({{"format", "coropve.mask"}}, path);
        try {
            load_surface(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string what = e.what();
            CHECK(what.find("coropve.mask") != std::string::npos);
            CHECK(what.find("expected 'coropve.surface'") != std::string::npos);
        }
    }

    SUBCASE("missing planes array") {
        const auto path = dir / "missing.json";
        save_json({{"format", "coropve.surface"},
                   {"plane_spacing_mm", 0.5},
                   {"n_angles", 4},
                   {"n_saturated_rays", 0}},
                  path);
        try {
            load_surface(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("planes") != std::string::npos);
        }
    }

    SUBCASE("contour length disagrees with n_angles") {
        const auto path = dir / "bad_contour.json";
        const LumenSurface surface = cylinder_surface(1.0, 1, 4, 0.5);
        save_surface(surface, nlohmann::json::object(), path);
        nlohmann::json j = load_json(path);
        j["planes"][0]["r_star_mm"] = {1.0, 1.0, 1.0};
        save_json(j, path);
        try {
            load_surface(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string what = e.what();
            CHECK(what.find("r_star_mm length does not match n_angles") != std::string::npos);
            CHECK(what.find("planes[0]") != std::string::npos);
        }
    }
}
