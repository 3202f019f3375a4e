#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coropve/surface.hpp"
#include "coropve/volume.hpp"

namespace coropve {

/// 2*|A∩B| / (|A|+|B|). Two empty masks are a perfect match (1.0).
/// Throws DimMismatchError if the mask dims differ.
double dice_coefficient(const MaskVolume& a, const MaskVolume& b);

/// |A∩B| / |A∪B|. Two empty masks score 1.0.
double jaccard_index(const MaskVolume& a, const MaskVolume& b);

struct SurfaceDistanceStats {
    double mean_mm = 0.0;
    double max_mm = 0.0;      // symmetric Hausdorff
    double rms_mm = 0.0;
};

/// Symmetric point-to-point surface distance between two contour point sets.
/// Throws EmptySurfaceError if either set is empty.
SurfaceDistanceStats surface_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// Which direction of the score indicates the positive class.
enum class ScoreDirection : std::uint8_t {
    HigherIsPositive = 0,
    LowerIsPositive = 1,
};

struct ConfusionStats {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double sensitivity() const;
    double specificity() const;
    double accuracy() const;
    double ppv() const;
    double npv() const;
};

/// Applies a threshold to scores; for LowerIsPositive a score <= threshold
/// predicts positive, for HigherIsPositive a score >= threshold does.
ConfusionStats confusion_at_threshold(std::span<const double> scores,
                                      std::span<const int> labels, double threshold,
                                      ScoreDirection direction);

/// Mann-Whitney AUC: concordant pairs + half the ties, over all
/// positive/negative pairs. Exact dyadic arithmetic in the numerator.
/// Throws DegenerateLabelsError unless both classes are present,
/// LengthMismatchError if sizes differ.
double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels,
                        ScoreDirection direction);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Full ROC sweep over the distinct score values (plus sentinels), sorted by
/// ascending FPR. Trapezoidal area equals the Mann-Whitney AUC.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels,
                                ScoreDirection direction);

struct DelongResult {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    double covariance = 0.0;
    double z = 0.0;            // (auc_a - auc_b) / sqrt(var_a + var_b - 2 cov)
    double p_value = 0.0;      // two-sided normal
};

/// DeLong's paired test for the difference of two correlated AUCs, computed
/// from placement values (structural components). Throws
/// DegenerateVarianceError if the variance of the difference is not positive.
DelongResult delong_paired_test(std::span<const double> scores_a,
                                std::span<const double> scores_b,
                                std::span<const int> labels, ScoreDirection direction);

/// Two-sided standard normal tail: P(|Z| >= |z|).
double normal_two_sided_p(double z);

}  // namespace coropve
