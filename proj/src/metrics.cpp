#include "coropve/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>

#include "coropve/errors.hpp"

namespace coropve {

namespace {

double safe_ratio(std::size_t num, std::size_t denom) {
    if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(num) / static_cast<double>(denom);
}

void check_masks(const MaskVolume& a, const MaskVolume& b) {
    if (a.dims != b.dims) {
        throw DimMismatchError("mask dims differ: " + std::to_string(a.dims[0]) + "x" +
                               std::to_string(a.dims[1]) + "x" + std::to_string(a.dims[2]) +
                               " vs " + std::to_string(b.dims[0]) + "x" +
                               std::to_string(b.dims[1]) + "x" + std::to_string(b.dims[2]));
    }
}

struct OverlapCounts {
    std::size_t a = 0, b = 0, both = 0;
};

OverlapCounts count_overlap(const MaskVolume& a, const MaskVolume& b) {
    OverlapCounts c;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const bool in_a = a.values[i] != 0;
        const bool in_b = b.values[i] != 0;
        c.a += in_a;
        c.b += in_b;
        c.both += in_a && in_b;
    }
    return c;
}

void check_scores(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw LengthMismatchError("scores and labels lengths differ (" +
                                  std::to_string(scores.size()) + " vs " +
                                  std::to_string(labels.size()) + ")");
    }
}

// Scores oriented so that higher always means "more positive".
std::vector<double> oriented(std::span<const double> scores, ScoreDirection direction) {
    std::vector<double> s(scores.begin(), scores.end());
    if (direction == ScoreDirection::LowerIsPositive) {
        for (double& v : s) v = -v;
    }
    return s;
}

// Twice the Mann-Whitney numerator as an exact integer: 2 per concordant
// positive/negative pair, 1 per tie.
std::uint64_t twice_mw_numerator(std::span<const double> s, std::span<const int> labels) {
    // Midranks via sorting: 2U = 2 * sum of positive ranks - n_pos*(n_pos+1).
    const std::size_t n = s.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

    std::uint64_t twice_pos_ranksum = 0;
    std::uint64_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && s[order[j]] == s[order[i]]) ++j;
        // Tied block spans 1-based ranks [i+1, j]; twice the midrank is their sum.
        const std::uint64_t twice_midrank = static_cast<std::uint64_t>(i + 1) + j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                twice_pos_ranksum += twice_midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    return twice_pos_ranksum - n_pos * (n_pos + 1);
}

struct ClassCounts {
    std::size_t pos = 0, neg = 0;
};

ClassCounts class_counts(std::span<const int> labels) {
    ClassCounts c;
    for (const int label : labels) {
        if (label) ++c.pos;
        else ++c.neg;
    }
    return c;
}

// Placement values for DeLong: per positive, the fraction of negatives it
// outranks (ties count half), and symmetrically per negative.
struct Placements {
    std::vector<double> v10;  // per positive
    std::vector<double> v01;  // per negative
    double auc = 0.0;
};

Placements placements(std::span<const double> s, std::span<const int> labels) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < s.size(); ++i) (labels[i] ? pos : neg).push_back(s[i]);

    Placements p;
    p.v10.reserve(pos.size());
    p.v01.reserve(neg.size());
    for (const double sp : pos) {
        std::uint64_t twice = 0;
        for (const double sn : neg) twice += sp > sn ? 2 : sp == sn ? 1 : 0;
        p.v10.push_back(static_cast<double>(twice) / (2.0 * static_cast<double>(neg.size())));
    }
    for (const double sn : neg) {
        std::uint64_t twice = 0;
        for (const double sp : pos) twice += sp > sn ? 2 : sp == sn ? 1 : 0;
        p.v01.push_back(static_cast<double>(twice) / (2.0 * static_cast<double>(pos.size())));
    }
    double acc = 0.0;
    for (const double v : p.v10) acc += v;
    p.auc = acc / static_cast<double>(pos.size());
    return p;
}

double sample_cov(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (x[i] - mx) * (y[i] - my);
    return acc / static_cast<double>(n - 1);
}

}  // namespace

double dice_coefficient(const MaskVolume& a, const MaskVolume& b) {
    check_masks(a, b);
    const OverlapCounts c = count_overlap(a, b);
    if (c.a + c.b == 0) return 1.0;
    return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double jaccard_index(const MaskVolume& a, const MaskVolume& b) {
    check_masks(a, b);
    const OverlapCounts c = count_overlap(a, b);
    const std::size_t uni = c.a + c.b - c.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.both) / static_cast<double>(uni);
}

SurfaceDistanceStats surface_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw EmptySurfaceError("surface distance needs non-empty point sets");

    auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to, double& sum,
                       double& sum_sq, double& max_d) {
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::max();
            for (const Vec3& q : to) best = std::min(best, distance(p, q));
            sum += best;
            sum_sq += best * best;
            max_d = std::max(max_d, best);
        }
    };

    double sum = 0.0, sum_sq = 0.0, max_d = 0.0;
    directed(a, b, sum, sum_sq, max_d);
    directed(b, a, sum, sum_sq, max_d);
    const double n = static_cast<double>(a.size() + b.size());

    SurfaceDistanceStats stats;
    stats.mean_mm = sum / n;
    stats.rms_mm = std::sqrt(sum_sq / n);
    stats.max_mm = max_d;
    return stats;
}

double ConfusionStats::sensitivity() const { return safe_ratio(tp, tp + fn); }
double ConfusionStats::specificity() const { return safe_ratio(tn, tn + fp); }
double ConfusionStats::accuracy() const { return safe_ratio(tp + tn, tp + fp + tn + fn); }
double ConfusionStats::ppv() const { return safe_ratio(tp, tp + fp); }
double ConfusionStats::npv() const { return safe_ratio(tn, tn + fn); }

ConfusionStats confusion_at_threshold(std::span<const double> scores,
                                      std::span<const int> labels, double threshold,
                                      ScoreDirection direction) {
    check_scores(scores, labels);
    ConfusionStats stats;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = direction == ScoreDirection::LowerIsPositive
                                   ? scores[i] <= threshold
                                   : scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual) ++stats.tp;
        else if (predicted && !actual) ++stats.fp;
        else if (!predicted && actual) ++stats.fn;
        else ++stats.tn;
    }
    return stats;
}

double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels,
                        ScoreDirection direction) {
    check_scores(scores, labels);
    const ClassCounts c = class_counts(labels);
    if (c.pos == 0 || c.neg == 0) {
        throw DegenerateLabelsError("AUC needs both classes (got " + std::to_string(c.pos) +
                                    " positives, " + std::to_string(c.neg) + " negatives)");
    }
    const std::vector<double> s = oriented(scores, direction);
    const std::uint64_t twice = twice_mw_numerator(s, labels);
    return static_cast<double>(twice) / (2.0 * static_cast<double>(c.pos * c.neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels,
                                ScoreDirection direction) {
    check_scores(scores, labels);
    const ClassCounts c = class_counts(labels);
    if (c.pos == 0 || c.neg == 0) {
        throw DegenerateLabelsError("ROC needs both classes present");
    }
    const std::vector<double> s = oriented(scores, direction);

    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && s[order[j]] == s[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) ++tp;
            else ++fp;
        }
        // Threshold reported in the caller's original score convention.
        const double oriented_threshold = s[order[i]];
        const double threshold = direction == ScoreDirection::LowerIsPositive
                                     ? -oriented_threshold
                                     : oriented_threshold;
        curve.push_back({threshold, static_cast<double>(fp) / static_cast<double>(c.neg),
                         static_cast<double>(tp) / static_cast<double>(c.pos)});
        i = j;
    }
    if (direction == ScoreDirection::LowerIsPositive) {
        curve.front().threshold = -curve.front().threshold;  // -inf sentinel
    }
    return curve;
}

DelongResult delong_paired_test(std::span<const double> scores_a,
                                std::span<const double> scores_b,
                                std::span<const int> labels, ScoreDirection direction) {
    check_scores(scores_a, labels);
    check_scores(scores_b, labels);
    const ClassCounts c = class_counts(labels);
    if (c.pos == 0 || c.neg == 0) {
        throw DegenerateLabelsError("DeLong test needs both classes present");
    }
    if (c.pos < 2 || c.neg < 2) {
        throw DegenerateVarianceError("DeLong covariance needs >= 2 cases per class");
    }

    const std::vector<double> sa = oriented(scores_a, direction);
    const std::vector<double> sb = oriented(scores_b, direction);
    const Placements pa = placements(sa, labels);
    const Placements pb = placements(sb, labels);

    const double n10 = static_cast<double>(c.pos);
    const double n01 = static_cast<double>(c.neg);

    DelongResult result;
    result.auc_a = pa.auc;
    result.auc_b = pb.auc;
    result.var_a = sample_cov(pa.v10, pa.v10) / n10 + sample_cov(pa.v01, pa.v01) / n01;
    result.var_b = sample_cov(pb.v10, pb.v10) / n10 + sample_cov(pb.v01, pb.v01) / n01;
    result.covariance = sample_cov(pa.v10, pb.v10) / n10 + sample_cov(pa.v01, pb.v01) / n01;

    const double var_diff = result.var_a + result.var_b - 2.0 * result.covariance;
    if (!(var_diff > 0.0)) {
        throw DegenerateVarianceError("variance of the AUC difference is " +
                                      std::to_string(var_diff) + " (not positive)");
    }
    result.z = (result.auc_a - result.auc_b) / std::sqrt(var_diff);
    result.p_value = normal_two_sided_p(result.z);
    return result;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

}  // namespace coropve
