#pragma once

// Brute-force reference computations for the test suites. Deliberately
// written without reusing any library code path they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "duckling/embedding_store.hpp"

namespace duckling::oracle {

inline long double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    ab += static_cast<long double>(a[d]) * b[d];
    aa += static_cast<long double>(a[d]) * a[d];
    bb += static_cast<long double>(b[d]) * b[d];
  }
  return 1.0L - ab / (std::sqrt(aa) * std::sqrt(bb));
}

/// Mean cosine distance to every other lesion, straight from the definition.
inline std::vector<double> outlier_scores(const std::vector<std::vector<double>>& g) {
  std::vector<double> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    long double sum = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j != i) sum += cosine_distance(g[i], g[j]);
    }
    out.push_back(static_cast<double>(sum / static_cast<long double>(g.size() - 1)));
  }
  return out;
}

inline double interpolated_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  double lower = std::floor(pos);
  double upper = std::ceil(pos);
  double a = values[static_cast<std::size_t>(lower)];
  double b = values[static_cast<std::size_t>(upper)];
  return a + (b - a) * (pos - lower);
}

/// Sort, interpolate quartiles, apply the upper fence (strict when IQR is zero).
inline std::vector<bool> iqr_outliers(const std::vector<double>& scores, double k) {
  double q1 = interpolated_quantile(scores, 0.25);
  double q3 = interpolated_quantile(scores, 0.75);
  double iqr = q3 - q1;
  std::vector<bool> out;
  for (double s : scores) out.push_back(iqr > 0 ? s >= q3 + k * iqr : s > q3);
  return out;
}

/// Probability a random positive outscores a random negative, ties counted 1/2.
inline double pairwise_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct OracleKnee {
  double threshold;
  double tpr;
  double fpr;
};

/// Tries every candidate threshold (+inf and each distinct score) by direct counting.
inline OracleKnee exhaustive_knee(const std::vector<int>& labels, const std::vector<double>& scores) {
  std::set<double> candidates(scores.begin(), scores.end());
  candidates.insert(std::numeric_limits<double>::infinity());
  double pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg) += 1;
  OracleKnee best{0, 0, 0};
  bool have = false;
  for (double t : candidates) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1;
    }
    OracleKnee k{t, tp / pos, fp / neg};
    double j = k.tpr - k.fpr;
    double bj = best.tpr - best.fpr;
    bool take = !have || j > bj + 1e-12 ||
                (std::abs(j - bj) <= 1e-12 &&
                 (k.fpr < best.fpr || (k.fpr == best.fpr && k.threshold < best.threshold)));
    if (take) {
      best = k;
      have = true;
    }
  }
  return best;
}

/// Context of n random embeddings in [lo, 1)^d, never all-zero.
inline ContextSet random_context(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                 double lo = 0.0) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  ContextSet ctx{"P", "torso", {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    LesionRecord r;
    r.lesion_id = "L" + std::to_string(i);
    r.patient_id = "P";
    r.region = "torso";
    r.embedding.resize(d);
    do {
      for (double& v : r.embedding) v = u(rng);
    } while (std::all_of(r.embedding.begin(), r.embedding.end(), [](double v) { return v == 0; }));
    ctx.lesions.push_back(r);
    ctx.record_index.push_back(i);
  }
  return ctx;
}

inline std::vector<std::vector<double>> embeddings_of(const ContextSet& ctx) {
  std::vector<std::vector<double>> g;
  for (const auto& r : ctx.lesions) g.push_back(r.embedding);
  return g;
}

/// Random labeled cohort over `patients` patients with 1..max_lesions lesions each.
inline Cohort random_cohort(std::mt19937_64& rng, std::size_t patients, std::size_t max_lesions,
                            std::size_t d) {
  std::uniform_int_distribution<std::size_t> count(1, max_lesions);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::bernoulli_distribution coin(0.3);
  std::vector<LesionRecord> records;
  for (std::size_t p = 0; p < patients; ++p) {
    std::size_t n = count(rng);
    for (std::size_t l = 0; l < n; ++l) {
      LesionRecord r;
      r.patient_id = "patient" + std::to_string(p);
      r.region = coin(rng) ? "arm" : "torso";
      r.lesion_id = r.patient_id + "-" + std::to_string(l);
      r.embedding.resize(d);
      for (double& v : r.embedding) v = u(rng);
      r.label = coin(rng) ? 1 : 0;
      records.push_back(std::move(r));
    }
  }
  std::shuffle(records.begin(), records.end(), rng);
  return Cohort::make(std::move(records));
}

}  // namespace duckling::oracle
