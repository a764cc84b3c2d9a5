#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace duckling {

/// Global-average-pooled feature vector of one lesion.
using Embedding = std::vector<double>;

struct LesionRecord {
  std::string lesion_id;
  std::string patient_id;
  std::string region;
  Embedding embedding;
  std::optional<int> label;  ///< 1 = melanoma, 0 = benign, empty = unlabeled

  bool operator==(const LesionRecord&) const = default;
};

/**
 * @brief All lesions of one patient in one anatomical region.
 *
 * `lesions` keeps cohort file order; `record_index[i]` is the position of
 * `lesions[i]` in the originating Cohort.
 */
struct ContextSet {
  std::string patient_id;
  std::string region;
  std::vector<LesionRecord> lesions;
  std::vector<std::size_t> record_index;

  std::size_t size() const { return lesions.size(); }
};

enum class FileFormat { Csv, Jsonl };

struct LoadOptions {
  /// Permit negative feature values (embeddings not taken after a ReLU).
  bool signed_values = false;
};

/**
 * @brief A validated collection of lesion records sharing one embedding width.
 *
 * Construct through Cohort::make (or load_cohort) so the invariants hold:
 * unique lesion ids, labels in {0,1}, finite values, one dimension, and
 * nonnegative values unless `signed_values` is set.
 */
class Cohort {
 public:
  Cohort() = default;

  /// Validates and takes ownership of `records`. Throws ValidationError on violation.
  static Cohort make(std::vector<LesionRecord> records, bool signed_values = false);

  const std::vector<LesionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  /// Embedding width; 0 for an empty cohort.
  std::size_t dimension() const { return dimension_; }
  bool signed_values() const { return signed_values_; }

  bool operator==(const Cohort&) const = default;

 private:
  std::vector<LesionRecord> records_;
  std::size_t dimension_ = 0;
  bool signed_values_ = false;
};

FileFormat format_from_path(const std::filesystem::path& path);

Cohort load_cohort(const std::filesystem::path& path, FileFormat format,
                   const LoadOptions& options = {});
void save_cohort(const Cohort& cohort, const std::filesystem::path& path, FileFormat format);

/// Parse from an in-memory document; row numbers in errors are 1-based data rows.
Cohort parse_cohort(const std::string& text, FileFormat format, const LoadOptions& options = {});
std::string serialize_cohort(const Cohort& cohort, FileFormat format);

/// Partition by (patient_id, region). Sets appear in order of first occurrence.
std::vector<ContextSet> group_contexts(const Cohort& cohort);

}  // namespace duckling
