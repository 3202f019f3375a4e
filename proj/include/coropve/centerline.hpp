#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "coropve/geometry.hpp"

namespace coropve {

/// Ordered curve through a vessel, parameterized by cumulative arc length
/// from the ostium (arc_length[0] == 0, strictly increasing).
struct Centerline {
    std::vector<Vec3> points;
    std::vector<double> arc_length;

    std::size_t size() const { return points.size(); }
    double total_length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }

    /// Position at arc length s (clamped to [0, total]).
    Vec3 point_at(double s) const;

    /// Unit tangent at arc length s, taken from the containing polyline segment.
    Vec3 tangent_at(double s) const;
};

/// Builds a centerline from ordered points, computing arc lengths.
/// Throws DegenerateTangentError if consecutive points coincide.
Centerline make_centerline(std::vector<Vec3> points);

/// Linear resampling to at most `max_spacing` between consecutive points.
/// Returns the input unchanged when it is already dense enough.
Centerline resample_centerline(const Centerline& cl, double max_spacing);

struct ParentLink {
    int branch = -1;            // index of the parent branch
    double arc_length_mm = 0.0; // attachment point on the parent
};

enum class TreeSide { Left, Right };

std::string to_string(TreeSide side);
TreeSide tree_side_from_string(const std::string& s);

/// Branch forest for one coronary tree. parent[i] is empty for the root.
struct CenterlineTree {
    std::vector<Centerline> branches;
    std::vector<std::optional<ParentLink>> parent;
    TreeSide tree_side = TreeSide::Left;

    /// Index of the single root branch. Throws TopologyError if the parent
    /// links do not form a forest with exactly one root, or an attachment
    /// point falls outside its parent branch.
    int validate_and_root() const;
};

}  // namespace coropve
