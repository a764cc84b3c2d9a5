#include "duckling/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "duckling/errors.hpp"
#include "text_io.hpp"

namespace duckling {

namespace {
constexpr double kJTolerance = 1e-12;
}

RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ValidationError("roc_curve: labels and scores differ in length");
  }
  std::size_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("roc_curve: labels must be 0/1");
    if (std::isnan(scores[i])) throw ValidationError("roc_curve: NaN score");
    positives += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("roc_curve needs at least one positive and one negative label");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    // all tied scores cross the threshold together
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({threshold, static_cast<double>(tp) / static_cast<double>(positives),
                            static_cast<double>(fp) / static_cast<double>(negatives)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

KneePoint knee_point(const RocCurve& curve) {
  if (curve.points.empty()) throw ValidationError("knee_point of an empty curve");
  const RocPoint* best = &curve.points.front();
  double best_j = best->tpr - best->fpr;
  for (const auto& pt : curve.points) {
    const double j = pt.tpr - pt.fpr;
    bool better = j > best_j + kJTolerance;
    if (!better && std::abs(j - best_j) <= kJTolerance) {
      better = pt.fpr < best->fpr || (pt.fpr == best->fpr && pt.threshold < best->threshold);
    }
    if (better) {
      best = &pt;
      best_j = j;
    }
  }
  return KneePoint{best->threshold, best->tpr, 1.0 - best->fpr, best->tpr - best->fpr};
}

std::vector<std::size_t> FoldAssignment::records_in(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::records_not_in(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) out.push_back(i);
  }
  return out;
}

FoldAssignment group_kfold(const Cohort& cohort, std::size_t num_folds, std::uint64_t seed) {
  if (num_folds < 2) throw ValidationError("group_kfold needs at least 2 folds");
  std::vector<std::string> patients;
  std::map<std::string, std::size_t> patient_slot;
  for (const auto& rec : cohort.records()) {
    if (patient_slot.try_emplace(rec.patient_id, patients.size()).second) {
      patients.push_back(rec.patient_id);
    }
  }
  if (patients.size() < num_folds) {
    throw ValidationError("group_kfold: " + std::to_string(patients.size()) +
                          " patients cannot fill " + std::to_string(num_folds) + " folds");
  }
  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> patient_fold(patients.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    patient_fold[order[pos]] = static_cast<int>(pos % num_folds);
  }
  FoldAssignment folds;
  folds.num_folds = num_folds;
  folds.fold.reserve(cohort.size());
  for (const auto& rec : cohort.records()) {
    folds.fold.push_back(patient_fold[patient_slot.at(rec.patient_id)]);
  }
  return folds;
}

void check_no_leakage(const Cohort& cohort, const FoldAssignment& folds) {
  if (folds.fold.size() != cohort.size()) {
    throw ValidationError("fold assignment does not cover the cohort");
  }
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& pid = cohort.records()[i].patient_id;
    auto [it, inserted] = seen.try_emplace(pid, folds.fold[i]);
    if (!inserted && it->second != folds.fold[i]) {
      throw ValidationError("fold leakage: patient '" + pid + "' appears in folds " +
                            std::to_string(it->second) + " and " + std::to_string(folds.fold[i]));
    }
  }
}

std::vector<double> ensemble_scores(const std::vector<std::vector<double>>& score_lists,
                                    std::span<const double> weights) {
  if (score_lists.empty()) throw ValidationError("ensemble needs at least one score list");
  if (weights.size() != score_lists.size()) {
    throw ValidationError("ensemble: " + std::to_string(score_lists.size()) + " score lists but " +
                          std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("ensemble weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("ensemble weights must sum to a positive value");
  const std::size_t n = score_lists.front().size();
  for (const auto& list : score_lists) {
    if (list.size() != n) throw ValidationError("ensemble: score lists differ in length");
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t m = 0; m < score_lists.size(); ++m) {
    const double w = weights[m] / total;
    for (std::size_t i = 0; i < n; ++i) out[i] += w * score_lists[m][i];
  }
  return out;
}

MetricsReport compute_metrics(std::span<const int> labels, std::span<const double> scores) {
  auto curve = roc_curve(labels, scores);
  MetricsReport report;
  report.auc = auc(curve);
  report.knee = knee_point(curve);
  return report;
}

namespace {

nlohmann::ordered_json knee_json(nlohmann::ordered_json obj, double auc_value,
                                 const KneePoint& knee) {
  obj["auc"] = auc_value;
  if (std::isfinite(knee.threshold)) {
    obj["knee_threshold"] = knee.threshold;
  } else {
    obj["knee_threshold"] = nullptr;
  }
  obj["sensitivity"] = knee.sensitivity;
  obj["specificity"] = knee.specificity;
  obj["youden_j"] = knee.youden;
  return obj;
}

}  // namespace

std::string metrics_json(const MetricsReport& report) {
  auto doc = knee_json(nlohmann::ordered_json::object(), report.auc, report.knee);
  doc["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : report.folds) {
    nlohmann::ordered_json fold;
    fold["fold"] = f.fold;
    fold["n_records"] = f.n_records;
    doc["folds"].push_back(knee_json(std::move(fold), f.auc, f.knee));
  }
  if (!report.predictions.empty()) {
    auto& preds = doc["predictions"] = nlohmann::ordered_json::array();
    for (const auto& p : report.predictions) {
      preds.push_back({{"lesion_id", p.lesion_id}, {"p", p.p}, {"outlier_score", p.outlier_score}});
    }
  }
  return doc.dump(2) + "\n";
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "threshold,tpr,fpr\n";
  for (const auto& pt : curve.points) {
    out += std::isinf(pt.threshold) ? std::string("inf") : text::format_double(pt.threshold);
    out += ',' + text::format_double(pt.tpr) + ',' + text::format_double(pt.fpr) + '\n';
  }
  return out;
}

std::string predictions_csv(const std::vector<LesionPrediction>& predictions) {
  std::string out = "lesion_id,p,outlier_score\n";
  for (const auto& p : predictions) {
    out += text::csv_field(p.lesion_id) + ',' + text::format_double(p.p) + ',' +
           text::format_double(p.outlier_score) + '\n';
  }
  return out;
}

std::vector<LesionPrediction> parse_predictions_csv(const std::string& text) {
  auto lines = text::split_lines(text);
  auto header = lines.empty() ? std::nullopt : text::split_csv(lines[0]);
  if (!header) throw ValidationError("predictions file has no header");
  auto column = [&](const char* name) -> std::optional<std::size_t> {
    auto it = std::find(header->begin(), header->end(), name);
    if (it == header->end()) return std::nullopt;
    return static_cast<std::size_t>(it - header->begin());
  };
  auto id_col = column("lesion_id");
  auto p_col = column("p");
  auto o_col = column("outlier_score");
  if (!id_col || !p_col) throw ValidationError("predictions file needs 'lesion_id' and 'p' columns");

  std::vector<LesionPrediction> out;
  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    ++row;
    auto fields = text::split_csv(lines[l]);
    if (!fields || fields->size() != header->size()) {
      throw ValidationError("malformed predictions row " + std::to_string(row));
    }
    LesionPrediction pred;
    pred.lesion_id = (*fields)[*id_col];
    auto p = text::parse_double((*fields)[*p_col]);
    if (!p || !std::isfinite(*p)) {
      throw ValidationError("non-numeric p in predictions row " + std::to_string(row));
    }
    pred.p = *p;
    if (o_col) {
      auto o = text::parse_double((*fields)[*o_col]);
      if (!o) throw ValidationError("non-numeric outlier_score in predictions row " + std::to_string(row));
      pred.outlier_score = *o;
    }
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace duckling
