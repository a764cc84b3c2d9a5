#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "duckling/embedding_store.hpp"

namespace duckling {

struct RocPoint {
  double threshold;  ///< predict positive when score >= threshold; +inf for the (0,0) endpoint
  double tpr;
  double fpr;

  bool operator==(const RocPoint&) const = default;
};

/// Points ordered from (0,0) to (1,1), one per distinct score.
struct RocCurve {
  std::vector<RocPoint> points;
};

struct KneePoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double youden = 0.0;
};

/// Throws ValidationError unless both classes are present and sizes agree.
RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Maximum Youden J = TPR - FPR; ties go to lower FPR, then lower threshold.
KneePoint knee_point(const RocCurve& curve);

struct FoldAssignment {
  std::size_t num_folds = 0;
  std::vector<int> fold;  ///< per cohort record

  std::vector<std::size_t> records_in(int f) const;
  std::vector<std::size_t> records_not_in(int f) const;
};

/**
 * @brief Patient-grouped K-fold split.
 *
 * Distinct patient ids (first-appearance order) are shuffled with a
 * seeded mt19937_64 and dealt round-robin, so fold sizes differ by at most
 * one patient and every record of a patient shares a fold.
 */
FoldAssignment group_kfold(const Cohort& cohort, std::size_t num_folds, std::uint64_t seed);

/// Throws ValidationError if a patient id appears in more than one fold.
void check_no_leakage(const Cohort& cohort, const FoldAssignment& folds);

/// Per-record weighted mean with weights normalised to sum to one.
std::vector<double> ensemble_scores(const std::vector<std::vector<double>>& score_lists,
                                    std::span<const double> weights);

struct FoldMetrics {
  int fold = 0;
  std::size_t n_records = 0;
  double auc = 0.0;
  KneePoint knee;
};

struct LesionPrediction {
  std::string lesion_id;
  double p = 0.0;
  double outlier_score = 1.0;

  bool operator==(const LesionPrediction&) const = default;
};

struct MetricsReport {
  double auc = 0.0;
  KneePoint knee;
  std::vector<FoldMetrics> folds;
  std::vector<LesionPrediction> predictions;  ///< omitted from JSON when empty
};

/// AUC and knee point in one call.
MetricsReport compute_metrics(std::span<const int> labels, std::span<const double> scores);

/// `{auc, knee_threshold, sensitivity, specificity, folds:[...]}` as pretty JSON.
/// An infinite knee threshold is written as null.
std::string metrics_json(const MetricsReport& report);

/// `threshold,tpr,fpr` with the first threshold written as "inf".
std::string roc_csv(const RocCurve& curve);

/// `lesion_id,p,outlier_score`
std::string predictions_csv(const std::vector<LesionPrediction>& predictions);
/// Reads a file with a `lesion_id` column and a `p` column (other columns ignored).
std::vector<LesionPrediction> parse_predictions_csv(const std::string& text);

}  // namespace duckling
