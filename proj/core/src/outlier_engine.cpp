#include "duckling/outlier_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "duckling/errors.hpp"
#include "text_io.hpp"

namespace duckling {

namespace {

double norm(const Embedding& g) {
  double sum = 0.0;
  for (double v : g) sum += v * v;
  return std::sqrt(sum);
}

double dot(const Embedding& a, const Embedding& b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) sum += a[d] * b[d];
  return sum;
}

DistanceMatrix distances_from(std::span<const Embedding> embeddings,
                              const std::vector<std::string>* ids) {
  const std::size_t n = embeddings.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm(embeddings[i]);
    if (norms[i] == 0.0) {
      std::string who = ids ? "lesion '" + (*ids)[i] + "'" : "embedding " + std::to_string(i);
      throw ComputationError("zero-norm embedding for " + who + ": cosine distance undefined");
    }
    if (i > 0 && embeddings[i].size() != embeddings[0].size()) {
      throw ValidationError("embedding dimensions differ within context");
    }
  }
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 1.0 - dot(embeddings[i], embeddings[j]) / (norms[i] * norms[j]);
      // rounding can push 1 - cos a few ulps outside [0, 2]
      d = std::clamp(d, 0.0, 2.0);
      m(i, j) = d;
      m(j, i) = d;
    }
  }
  return m;
}

}  // namespace

double DistanceMatrix::max_entry() const {
  return entries_.empty() ? 0.0 : *std::max_element(entries_.begin(), entries_.end());
}

const char* to_string(OutlierFlag flag) {
  switch (flag) {
    case OutlierFlag::Outlier: return "outlier";
    case OutlierFlag::Normal: return "normal";
    case OutlierFlag::NotApplicable: return "na";
  }
  return "na";
}

OutlierFlag parse_flag(const std::string& text) {
  if (text == "outlier") return OutlierFlag::Outlier;
  if (text == "normal") return OutlierFlag::Normal;
  if (text == "na") return OutlierFlag::NotApplicable;
  throw ValidationError("unknown outlier flag '" + text + "'");
}

DistanceMatrix cosine_distance_matrix(std::span<const Embedding> embeddings) {
  return distances_from(embeddings, nullptr);
}

DistanceMatrix cosine_distance_matrix(const ContextSet& ctx) {
  std::vector<Embedding> embeddings;
  std::vector<std::string> ids;
  embeddings.reserve(ctx.size());
  ids.reserve(ctx.size());
  for (const auto& rec : ctx.lesions) {
    embeddings.push_back(rec.embedding);
    ids.push_back(rec.lesion_id);
  }
  return distances_from(embeddings, &ids);
}

std::vector<double> outlier_scores(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  if (n < 2) throw std::invalid_argument("outlier_scores needs at least two lesions");
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum += m(i, j);
    }
    scores[i] = sum / static_cast<double>(n - 1);
  }
  return scores;
}

double quantile(std::span<const double> sorted_values, double q) {
  if (sorted_values.empty()) throw std::invalid_argument("quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile q must lie in [0, 1]");
  const double pos = static_cast<double>(sorted_values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted_values[lo];
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

IqrResult iqr_flags(std::span<const double> scores, double k) {
  if (scores.size() < 2) throw std::invalid_argument("iqr_flags needs at least two scores");
  if (!(k >= 0.0)) throw std::invalid_argument("iqr_flags needs k >= 0");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());

  IqrResult result;
  result.q1 = quantile(sorted, 0.25);
  result.q3 = quantile(sorted, 0.75);
  result.iqr = std::max(0.0, result.q3 - result.q1);
  result.threshold = result.q3 + k * result.iqr;
  result.flags.reserve(scores.size());
  for (double s : scores) {
    bool outlier = result.iqr > 0.0 ? s >= result.threshold : s > result.q3;
    result.flags.push_back(outlier ? OutlierFlag::Outlier : OutlierFlag::Normal);
  }
  return result;
}

OutlierReport score_context(const ContextSet& ctx, const OutlierConfig& cfg) {
  const std::size_t n = ctx.size();
  if (n == 0) throw ValidationError("empty context set");
  if (cfg.min_context < 2) throw std::invalid_argument("min_context must be at least 2");

  OutlierReport report;
  report.patient_id = ctx.patient_id;
  report.region = ctx.region;
  report.record_index = ctx.record_index;
  report.k = cfg.k;
  report.lesion_ids.reserve(n);
  for (const auto& rec : ctx.lesions) report.lesion_ids.push_back(rec.lesion_id);

  if (n < cfg.min_context) {
    // Too few neighbours to compare against: every lesion stays suspect.
    report.fallback = true;
    report.scores.assign(n, 1.0);
    report.flags.assign(n, OutlierFlag::NotApplicable);
    report.q1 = report.q3 = 1.0;
    report.iqr = 0.0;
    report.threshold = 1.0;
    return report;
  }

  report.distances = cosine_distance_matrix(ctx);
  report.scores = outlier_scores(report.distances);
  auto iqr = iqr_flags(report.scores, cfg.k);
  report.flags = std::move(iqr.flags);
  report.q1 = iqr.q1;
  report.q3 = iqr.q3;
  report.iqr = iqr.iqr;
  report.threshold = iqr.threshold;
  return report;
}

std::vector<OutlierReport> score_cohort(const Cohort& cohort, const OutlierConfig& cfg) {
  std::vector<OutlierReport> reports;
  for (const auto& ctx : group_contexts(cohort)) reports.push_back(score_context(ctx, cfg));
  return reports;
}

std::vector<ScoreEntry> score_entries(const std::vector<OutlierReport>& reports) {
  std::vector<std::pair<std::size_t, ScoreEntry>> indexed;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
      std::size_t order = i < r.record_index.size() ? r.record_index[i] : indexed.size();
      indexed.emplace_back(order, ScoreEntry{r.patient_id, r.region, r.lesion_ids[i], r.scores[i],
                                             r.flags[i], r.fallback});
    }
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ScoreEntry> entries;
  entries.reserve(indexed.size());
  for (auto& [order, entry] : indexed) entries.push_back(std::move(entry));
  return entries;
}

std::string serialize_scores(const std::vector<ScoreEntry>& entries) {
  std::string out = "patient_id,region,lesion_id,outlier_score,flag,fallback\n";
  for (const auto& e : entries) {
    out += text::csv_field(e.patient_id) + ',' + text::csv_field(e.region) + ',' +
           text::csv_field(e.lesion_id) + ',' + text::format_double(e.score) + ',' +
           to_string(e.flag) + ',' + (e.fallback ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<ScoreEntry> parse_scores(const std::string& text) {
  auto lines = text::split_lines(text);
  if (lines.empty() || lines[0] != "patient_id,region,lesion_id,outlier_score,flag,fallback") {
    throw ValidationError("scores file header must be "
                          "'patient_id,region,lesion_id,outlier_score,flag,fallback'");
  }
  std::vector<ScoreEntry> entries;
  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    ++row;
    auto fields = text::split_csv(lines[l]);
    if (!fields || fields->size() != 6) {
      throw ValidationError("malformed scores row " + std::to_string(row));
    }
    ScoreEntry e;
    e.patient_id = (*fields)[0];
    e.region = (*fields)[1];
    e.lesion_id = (*fields)[2];
    auto score = text::parse_double((*fields)[3]);
    if (!score || !std::isfinite(*score)) {
      throw ValidationError("non-numeric outlier_score in scores row " + std::to_string(row));
    }
    e.score = *score;
    e.flag = parse_flag((*fields)[4]);
    if ((*fields)[5] != "0" && (*fields)[5] != "1") {
      throw ValidationError("fallback must be 0 or 1 in scores row " + std::to_string(row));
    }
    e.fallback = (*fields)[5] == "1";
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_scores(const std::vector<ScoreEntry>& entries, const std::filesystem::path& path) {
  text::write_file(path, serialize_scores(entries));
}

std::vector<ScoreEntry> load_scores(const std::filesystem::path& path) {
  return parse_scores(text::read_file(path));
}

ScoreLookup make_score_lookup(const std::vector<ScoreEntry>& entries) {
  ScoreLookup lookup;
  for (const auto& e : entries) {
    if (!lookup.emplace(e.lesion_id, LesionScore{e.score, e.fallback}).second) {
      throw ValidationError("duplicate lesion_id '" + e.lesion_id + "' in scores");
    }
  }
  return lookup;
}

std::string heatmap_pgm(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  const double max = m.max_entry();
  std::string out = "P2\n" + std::to_string(n) + ' ' + std::to_string(n) + "\n255\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long level = max > 0.0 ? std::lround(m(i, j) / max * 255.0) : 0;
      if (j > 0) out += ' ';
      out += std::to_string(std::clamp(level, 0L, 255L));
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_csv(const DistanceMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j > 0) out += ',';
      out += text::format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace duckling
