#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "duckling/embedding_store.hpp"

namespace duckling {

/**
 * @brief Knobs for the planted-outlier cohort generator.
 *
 * Each patient gets one region and a nonnegative prototype direction.
 * Ordinary lesions are the prototype plus clamped Gaussian noise; a planted
 * outlier is drawn around its own random direction instead. Labels are the
 * outlier indicator flipped with probability `label_flip_rate`.
 */
struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t n_patients = 200;
  std::size_t min_lesions = 6;   ///< lesions for a patient with usable context
  std::size_t max_lesions = 26;  ///< centred on 16 lesions per patient
  std::size_t dimension = 16;
  double outlier_rate = 0.1;
  double label_flip_rate = 0.1;
  double noise_scale = 0.1;
  double fraction_small_context = 0.2;  ///< patients given 1..5 lesions

  /// Throws ValidationError on out-of-range settings.
  void validate() const;
};

std::string synth_config_to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const std::string& text);

struct SyntheticCohort {
  Cohort cohort;
  std::vector<bool> planted_outlier;  ///< aligned with cohort.records()
};

/// Deterministic for a given config: one mt19937_64 stream seeded with `seed`.
SyntheticCohort generate_cohort(const SynthConfig& cfg);

/// `lesion_id,planted_outlier` sidecar.
std::string planted_mask_csv(const SyntheticCohort& synth);

}  // namespace duckling
