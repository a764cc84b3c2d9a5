#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "duckling/embedding_store.hpp"
#include "duckling/evaluation.hpp"
#include "duckling/network.hpp"
#include "duckling/outlier_engine.hpp"
#include "duckling/radam.hpp"

namespace duckling {

/// Where the outlier score enters the model.
enum class ScoreInjection {
  Features,  ///< x_m = o * h(f(x)); used for training and inference (default)
  Loss,      ///< loss multiplied by o during training only; inference ignores o
};

/// Ablation arm: "without" replaces every outlier score by 1.
enum class Arm { WithDucklings, WithoutDucklings };

const char* to_string(ScoreInjection injection);
const char* to_string(Arm arm);
ScoreInjection parse_injection(const std::string& text);
/// Accepts "with", "without", "with-ducklings", "without-ducklings".
Arm parse_arm(const std::string& text);

struct TrainConfig {
  double learning_rate = 3e-3;
  std::size_t epochs = 25;
  FocalParams focal;
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  std::size_t early_stop_patience = 7;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;  ///< 0 = full batch
  std::size_t d_f = 64;
  std::size_t d_h = 32;
  ScoreInjection injection = ScoreInjection::Features;
  Arm arm = Arm::WithDucklings;
  bool exclude_fallback = false;  ///< drop fallback lesions from the training/validation sets
  bool restore_best = true;       ///< return the parameters of the best monitored epoch
  bool train_adapter = true;
  bool train_head = true;
  bool train_classifier = true;
  RAdamConfig radam;

  /// Throws ValidationError on out-of-range settings.
  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  ///< NaN when there is no validation set
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  ModelParams params;
  RAdamState optimizer;
  double learning_rate = 0.0;  ///< after plateau reductions
  std::size_t best_epoch = 0;  ///< 0 when no epoch ran
  std::vector<EpochRecord> history;
};

/// Outlier score a record contributes under `cfg` (1 in the "without" arm).
double gate_score(const LesionRecord& rec, const ScoreLookup& scores, Arm arm);

/**
 * @brief Fits the gated classifier on every labeled record outside
 * `validation_fold`, minimising mean focal loss.
 *
 * The validation fold drives learning-rate reduction on plateau and early
 * stopping; with no labeled validation records the training loss is
 * monitored instead. Throws ValidationError when there are no labeled
 * training records, a labeled record has no score, or a patient crosses
 * folds.
 */
TrainResult train(const Cohort& cohort, const ScoreLookup& scores, const TrainConfig& cfg,
                  const FoldAssignment& folds, int validation_fold);

/// Mean training objective over `records` (focal loss, times o in Loss injection mode).
double mean_loss(const ModelParams& params, const Cohort& cohort, const ScoreLookup& scores,
                 const TrainConfig& cfg, const std::vector<std::size_t>& records);

/// One prediction per cohort record, in record order.
std::vector<LesionPrediction> predict(const ModelParams& params, const Cohort& cohort,
                                      const ScoreLookup& scores, const TrainConfig& cfg);

struct CrossValidationResult {
  std::vector<TrainResult> folds;
  std::vector<LesionPrediction> out_of_fold;  ///< labeled records only, cohort order
  std::vector<int> out_of_fold_labels;
  MetricsReport metrics;                      ///< pooled out-of-fold + per-fold breakdown
};

CrossValidationResult cross_validate(const Cohort& cohort, const ScoreLookup& scores,
                                     const TrainConfig& cfg, const FoldAssignment& folds);

// ---- persistence

struct Checkpoint {
  ModelParams params;
  RAdamState optimizer;
  TrainConfig config;
  double learning_rate = 0.0;
  int validation_fold = -1;
};

std::string checkpoint_json(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// `epoch,train_loss,val_loss,lr`
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace duckling
