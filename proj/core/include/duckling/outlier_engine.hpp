#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "duckling/embedding_store.hpp"

namespace duckling {

/// Dense symmetric N x N matrix of pairwise cosine distances, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  const std::vector<double>& entries() const { return entries_; }
  double max_entry() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

enum class OutlierFlag { Normal, Outlier, NotApplicable };

/// "outlier", "normal" or "na" as written to the scores file.
const char* to_string(OutlierFlag flag);
OutlierFlag parse_flag(const std::string& text);

struct OutlierConfig {
  double k = 1.0;             ///< IQR tolerance; larger k flags fewer lesions.
  std::size_t min_context = 6;  ///< contexts smaller than this fall back to score 1
};

struct IqrResult {
  std::vector<OutlierFlag> flags;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double threshold = 0.0;
};

struct OutlierReport {
  std::string patient_id;
  std::string region;
  std::vector<std::string> lesion_ids;
  std::vector<std::size_t> record_index;
  DistanceMatrix distances;  ///< empty when `fallback` is set
  std::vector<double> scores;
  std::vector<OutlierFlag> flags;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double threshold = 0.0;
  double k = 1.0;
  bool fallback = false;
};

/// 1 - cos(g_i, g_j) for every pair. Throws ComputationError naming a zero-norm lesion.
DistanceMatrix cosine_distance_matrix(const ContextSet& ctx);
DistanceMatrix cosine_distance_matrix(std::span<const Embedding> embeddings);

/// Mean distance of each lesion to the other N-1 lesions. Requires N >= 2.
std::vector<double> outlier_scores(const DistanceMatrix& m);

/// Linear interpolation at fractional position (n-1)*q of an ascending list.
double quantile(std::span<const double> sorted_values, double q);

/**
 * @brief Tukey-style upper fence on the outlier scores.
 *
 * A score is flagged when it reaches Q3 + k*IQR. When every quartile
 * coincides (IQR == 0) the comparison becomes strict, so a context of
 * identical scores has no outliers.
 */
IqrResult iqr_flags(std::span<const double> scores, double k);

OutlierReport score_context(const ContextSet& ctx, const OutlierConfig& cfg = {});

/// Scores every context of the cohort, in group_contexts order.
std::vector<OutlierReport> score_cohort(const Cohort& cohort, const OutlierConfig& cfg = {});

// ---- scores file: patient_id,region,lesion_id,outlier_score,flag,fallback

struct ScoreEntry {
  std::string patient_id;
  std::string region;
  std::string lesion_id;
  double score = 1.0;
  OutlierFlag flag = OutlierFlag::NotApplicable;
  bool fallback = true;

  bool operator==(const ScoreEntry&) const = default;
};

/// Flattens reports back into cohort record order.
std::vector<ScoreEntry> score_entries(const std::vector<OutlierReport>& reports);

std::string serialize_scores(const std::vector<ScoreEntry>& entries);
std::vector<ScoreEntry> parse_scores(const std::string& text);
void save_scores(const std::vector<ScoreEntry>& entries, const std::filesystem::path& path);
std::vector<ScoreEntry> load_scores(const std::filesystem::path& path);

struct LesionScore {
  double score = 1.0;
  bool fallback = true;
};

/// lesion_id -> outlier score.
using ScoreLookup = std::unordered_map<std::string, LesionScore>;
ScoreLookup make_score_lookup(const std::vector<ScoreEntry>& entries);

// ---- heatmap

/// Plain PGM (P2), one pixel per entry, [0, max entry] mapped linearly onto [0, 255].
std::string heatmap_pgm(const DistanceMatrix& m);
/// Raw entries, one CSV row per matrix row, no header.
std::string heatmap_csv(const DistanceMatrix& m);

}  // namespace duckling
