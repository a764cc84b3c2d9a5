#include "duckling/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include <json.hpp>

#include "duckling/errors.hpp"

namespace duckling {

namespace {

constexpr std::array<const char*, 5> kRegions = {"torso", "posterior torso", "upper extremity",
                                                  "lower extremity", "head/neck"};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string padded(char prefix, std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, value);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (dimension < 2) throw ValidationError("synth dimension must be at least 2");
  if (!in_unit(outlier_rate)) throw ValidationError("outlier_rate must lie in [0, 1]");
  if (!in_unit(label_flip_rate)) throw ValidationError("label_flip_rate must lie in [0, 1]");
  if (!in_unit(fraction_small_context)) {
    throw ValidationError("fraction_small_context must lie in [0, 1]");
  }
  if (!(noise_scale > 0.0)) throw ValidationError("noise_scale must be positive");
  if (min_lesions < 1 || max_lesions < min_lesions) {
    throw ValidationError("lesion range must satisfy 1 <= min_lesions <= max_lesions");
  }
}

std::string synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["n_patients"] = c.n_patients;
  j["min_lesions"] = c.min_lesions;
  j["max_lesions"] = c.max_lesions;
  j["dimension"] = c.dimension;
  j["outlier_rate"] = c.outlier_rate;
  j["label_flip_rate"] = c.label_flip_rate;
  j["noise_scale"] = c.noise_scale;
  j["fraction_small_context"] = c.fraction_small_context;
  return j.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ValidationError("synth config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "n_patients") c.n_patients = v.get<std::size_t>();
      else if (key == "min_lesions") c.min_lesions = v.get<std::size_t>();
      else if (key == "max_lesions") c.max_lesions = v.get<std::size_t>();
      else if (key == "dimension") c.dimension = v.get<std::size_t>();
      else if (key == "outlier_rate") c.outlier_rate = v.get<double>();
      else if (key == "label_flip_rate") c.label_flip_rate = v.get<double>();
      else if (key == "noise_scale") c.noise_scale = v.get<double>();
      else if (key == "fraction_small_context") c.fraction_small_context = v.get<double>();
      else throw ValidationError("unknown synth config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SyntheticCohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_scale);
  std::uniform_int_distribution<std::size_t> region_pick(0, kRegions.size() - 1);

  auto random_direction = [&] {
    Embedding v(cfg.dimension);
    for (double& x : v) x = unit(rng);
    return v;
  };
  auto jitter = [&](const Embedding& centre) {
    Embedding v(centre.size());
    for (std::size_t d = 0; d < v.size(); ++d) v[d] = std::max(0.0, centre[d] + noise(rng));
    // all components clamped away: keep the cosine defined
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = cfg.noise_scale;
    return v;
  };

  std::vector<LesionRecord> records;
  std::vector<bool> mask;
  for (std::size_t p = 0; p < cfg.n_patients; ++p) {
    const bool small = unit(rng) < cfg.fraction_small_context;
    std::size_t n = small ? std::uniform_int_distribution<std::size_t>(1, 5)(rng)
                          : std::uniform_int_distribution<std::size_t>(cfg.min_lesions,
                                                                       cfg.max_lesions)(rng);
    const std::string patient = padded('P', p, 4);
    const std::string region = kRegions[region_pick(rng)];
    const Embedding prototype = random_direction();
    for (std::size_t l = 0; l < n; ++l) {
      const bool outlier = unit(rng) < cfg.outlier_rate;
      const bool flip = unit(rng) < cfg.label_flip_rate;
      LesionRecord rec;
      rec.patient_id = patient;
      rec.region = region;
      rec.lesion_id = patient + "_" + padded('L', l, 2);
      rec.embedding = outlier ? jitter(random_direction()) : jitter(prototype);
      rec.label = (outlier != flip) ? 1 : 0;
      records.push_back(std::move(rec));
      mask.push_back(outlier);
    }
  }
  return SyntheticCohort{Cohort::make(std::move(records)), std::move(mask)};
}

std::string planted_mask_csv(const SyntheticCohort& synth) {
  std::string out = "lesion_id,planted_outlier\n";
  for (std::size_t i = 0; i < synth.cohort.size(); ++i) {
    out += synth.cohort.records()[i].lesion_id + ',' + (synth.planted_outlier[i] ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace duckling
