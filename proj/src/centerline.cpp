#include "coropve/centerline.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

// Index of the polyline segment containing arc length s: largest i with
// arc_length[i] <= s, capped at the last segment start.
std::size_t segment_index(const std::vector<double>& arc, double s) {
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t i = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin() - 1);
    return std::min(i, arc.size() >= 2 ? arc.size() - 2 : std::size_t{0});
}

}  // namespace

Vec3 Centerline::point_at(double s) const {
    if (points.empty()) return {};
    if (points.size() == 1) return points.front();
    s = std::clamp(s, 0.0, total_length());
    const std::size_t i = segment_index(arc_length, s);
    const double span = arc_length[i + 1] - arc_length[i];
    const double t = span > 0.0 ? (s - arc_length[i]) / span : 0.0;
    return points[i] + (points[i + 1] - points[i]) * t;
}

Vec3 Centerline::tangent_at(double s) const {
    if (points.size() < 2) return {};
    s = std::clamp(s, 0.0, total_length());
    const std::size_t i = segment_index(arc_length, s);
    return normalized(points[i + 1] - points[i]);
}

Centerline make_centerline(std::vector<Vec3> points) {
    if (points.size() < 2) {
        throw DegenerateTangentError("a centerline needs at least two points, got " +
                                     std::to_string(points.size()));
    }
    Centerline cl;
    cl.arc_length.reserve(points.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0) {
            const double step = distance(points[i - 1], points[i]);
            if (step <= 1e-9) {
                throw DegenerateTangentError("centerline points " + std::to_string(i - 1) +
                                             " and " + std::to_string(i) + " coincide");
            }
            acc += step;
        }
        cl.arc_length.push_back(acc);
    }
    cl.points = std::move(points);
    return cl;
}

Centerline resample_centerline(const Centerline& cl, double max_spacing) {
    if (cl.points.size() < 2) return cl;
    double max_step = 0.0;
    for (std::size_t i = 1; i < cl.arc_length.size(); ++i) {
        max_step = std::max(max_step, cl.arc_length[i] - cl.arc_length[i - 1]);
    }
    if (max_step <= max_spacing) return cl;

    // Subdivide each segment in place: the original vertices are kept, so the
    // polyline geometry is unchanged and only the knot density increases.
    std::vector<Vec3> points;
    points.push_back(cl.points.front());
    for (std::size_t i = 1; i < cl.points.size(); ++i) {
        const Vec3& a = cl.points[i - 1];
        const Vec3& b = cl.points[i];
        const double len = cl.arc_length[i] - cl.arc_length[i - 1];
        const auto pieces = static_cast<std::size_t>(std::ceil(len / max_spacing - 1e-12));
        for (std::size_t k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(pieces);
            points.push_back(a + (b - a) * t);
        }
        points.push_back(b);
    }
    return make_centerline(std::move(points));
}

std::string to_string(TreeSide side) { return side == TreeSide::Left ? "left" : "right"; }

TreeSide tree_side_from_string(const std::string& s) {
    if (s == "left") return TreeSide::Left;
    if (s == "right") return TreeSide::Right;
    throw FormatError("invalid tree_side '" + s + "' (expected 'left' or 'right')");
}

int CenterlineTree::validate_and_root() const {
    if (branches.empty()) throw TopologyError("centerline tree has no branches");
    if (parent.size() != branches.size()) {
        throw TopologyError("parent link count does not match branch count");
    }
    int root = -1;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        if (!parent[b]) {
            if (root >= 0) {
                throw TopologyError("multiple root branches (" + std::to_string(root) + " and " +
                                    std::to_string(b) + ")");
            }
            root = static_cast<int>(b);
            continue;
        }
        const ParentLink& link = *parent[b];
        if (link.branch < 0 || link.branch >= static_cast<int>(branches.size())) {
            throw TopologyError("branch " + std::to_string(b) + " has dangling parent index " +
                                std::to_string(link.branch));
        }
        if (link.branch == static_cast<int>(b)) {
            throw TopologyError("branch " + std::to_string(b) + " is its own parent");
        }
        const double parent_len = branches[link.branch].total_length();
        if (link.arc_length_mm < 0.0 || link.arc_length_mm > parent_len + 1e-9) {
            throw TopologyError("branch " + std::to_string(b) + " attaches at " +
                                std::to_string(link.arc_length_mm) + " mm, outside its parent (" +
                                std::to_string(parent_len) + " mm long)");
        }
    }
    if (root < 0) throw TopologyError("no root branch (every branch has a parent)");

    // Walking up from any branch must reach the root (no cycles).
    for (std::size_t b = 0; b < branches.size(); ++b) {
        int cur = static_cast<int>(b);
        std::size_t steps = 0;
        while (parent[cur]) {
            cur = parent[cur]->branch;
            if (++steps > branches.size()) {
                throw TopologyError("parent links contain a cycle through branch " +
                                    std::to_string(b));
            }
        }
        if (cur != root) {
            throw TopologyError("branch " + std::to_string(b) + " is not connected to the root");
        }
    }
    return root;
}

}  // namespace coropve
