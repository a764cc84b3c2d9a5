#include "cli.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "duckling/embedding_store.hpp"
#include "duckling/errors.hpp"
#include "duckling/evaluation.hpp"
#include "duckling/outlier_engine.hpp"
#include "duckling/synthgen.hpp"
#include "duckling/trainer.hpp"

namespace duckling::cli {

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out.flush()) throw IoError("write failure on '" + path.string() + "'");
}

FileFormat resolve_format(const std::string& flag, const std::string& path) {
  if (flag == "csv") return FileFormat::Csv;
  if (flag == "jsonl") return FileFormat::Jsonl;
  if (flag == "auto") return format_from_path(path);
  throw ValidationError("unknown format '" + flag + "' (csv|jsonl|auto)");
}

Cohort read_cohort(const std::string& path, const std::string& format, bool signed_values) {
  if (!fs::exists(path)) throw IoError("input file '" + path + "' does not exist");
  return load_cohort(path, resolve_format(format, path), LoadOptions{signed_values});
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out.push_back(std::isalnum(c) || c == '-' ? static_cast<char>(c) : '_');
  return out;
}

// ---- commands

struct CohortInput {
  std::string input;
  std::string format = "auto";
  bool signed_values = false;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Cohort file (CSV or JSONL)")->required();
    app->add_option("--format", format, "csv | jsonl | auto (by extension)");
    app->add_flag("--signed", signed_values, "Allow negative feature values");
  }
};

struct ValidateArgs {
  CohortInput in;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  Cohort cohort = read_cohort(a.in.input, a.in.format, a.in.signed_values);
  auto contexts = group_contexts(cohort);
  std::size_t labeled = 0;
  std::size_t melanoma = 0;
  for (const auto& r : cohort.records()) {
    if (r.label) {
      ++labeled;
      melanoma += static_cast<std::size_t>(*r.label);
    }
  }
  std::size_t small = 0;
  for (const auto& c : contexts) small += c.size() < OutlierConfig{}.min_context ? 1 : 0;
  out << "records: " << cohort.size() << "\n"
      << "dimension: " << cohort.dimension() << "\n"
      << "contexts: " << contexts.size() << " (" << small << " below "
      << OutlierConfig{}.min_context << " lesions)\n"
      << "labeled: " << labeled << " (" << melanoma << " melanoma)\n";
  return kSuccess;
}

struct ScoreArgs {
  CohortInput in;
  double k = 1.0;
  std::size_t min_context = 6;
  std::string output;
  std::string heatmap_dir;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  Cohort cohort = read_cohort(a.in.input, a.in.format, a.in.signed_values);
  if (a.k < 0.0) throw ValidationError("--k must be >= 0");
  if (a.min_context < 2) throw ValidationError("--min-context must be >= 2");
  OutlierConfig cfg{a.k, a.min_context};
  auto reports = score_cohort(cohort, cfg);
  auto entries = score_entries(reports);
  save_scores(entries, a.output);

  std::size_t flagged = 0;
  std::size_t fallback = 0;
  for (const auto& e : entries) {
    flagged += e.flag == OutlierFlag::Outlier ? 1 : 0;
    fallback += e.fallback ? 1 : 0;
  }
  if (!a.heatmap_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.heatmap_dir, ec);
    if (ec) throw IoError("cannot create heatmap directory '" + a.heatmap_dir + "'");
    for (std::size_t c = 0; c < reports.size(); ++c) {
      const auto& r = reports[c];
      if (r.fallback) continue;
      const std::string stem = "ctx" + std::to_string(c) + "_" + safe_name(r.patient_id) + "_" +
                               safe_name(r.region);
      spill(fs::path(a.heatmap_dir) / (stem + ".pgm"), heatmap_pgm(r.distances));
      spill(fs::path(a.heatmap_dir) / (stem + ".csv"), heatmap_csv(r.distances));
    }
  }
  out << "scored " << entries.size() << " lesions in " << reports.size() << " contexts: "
      << flagged << " outliers, " << fallback << " fallback\n";
  return kSuccess;
}

struct TrainArgs {
  CohortInput in;
  std::string scores;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::string config;
  std::string ablation = "with-ducklings";
  std::string out_model;
  std::string out_history;
  std::string out_report;
};

TrainConfig read_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return train_config_from_json(slurp(path));
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Cohort cohort = read_cohort(a.in.input, a.in.format, a.in.signed_values);
  auto lookup = make_score_lookup(load_scores(a.scores));
  TrainConfig cfg = read_train_config(a.config);
  cfg.seed = a.seed;
  cfg.arm = parse_arm(a.ablation);

  bool any_label = false;
  for (const auto& r : cohort.records()) any_label = any_label || r.label.has_value();
  if (!any_label) throw ValidationError("cohort has no labeled records");

  auto folds = group_kfold(cohort, a.folds, a.seed);
  auto cv = cross_validate(cohort, lookup, cfg, folds);

  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& result = cv.folds[f];
    const int fold = static_cast<int>(f);
    if (!a.out_model.empty()) {
      Checkpoint ckpt{result.params, result.optimizer, cfg, result.learning_rate, fold};
      save_checkpoint(ckpt, fold_path(a.out_model, fold));
    }
    if (!a.out_history.empty()) spill(fold_path(a.out_history, fold), history_csv(result.history));
  }
  if (!a.out_report.empty()) spill(a.out_report, metrics_json(cv.metrics));

  out << "arm " << to_string(cfg.arm) << ", " << cv.folds.size() << " folds\n";
  for (const auto& fm : cv.metrics.folds) {
    out << "  fold " << fm.fold << ": n=" << fm.n_records << " auc=" << fm.auc << "\n";
  }
  out << "out-of-fold auc=" << cv.metrics.auc << " sensitivity=" << cv.metrics.knee.sensitivity
      << " specificity=" << cv.metrics.knee.specificity << " J=" << cv.metrics.knee.youden << "\n";
  return kSuccess;
}

struct EvalArgs {
  std::string model;
  CohortInput in;
  std::string scores;
  std::string out_report;
  std::string out_roc;
  std::string out_predictions;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  Checkpoint ckpt = parse_checkpoint(slurp(a.model));
  Cohort cohort = read_cohort(a.in.input, a.in.format, a.in.signed_values);
  if (!cohort.empty() && cohort.dimension() != ckpt.params.input_dim()) {
    err << "error: cohort dimension " << cohort.dimension() << " does not match model input width "
        << ckpt.params.input_dim() << "\n";
    return kComputationError;
  }
  ScoreLookup lookup;
  if (!a.scores.empty()) {
    lookup = make_score_lookup(load_scores(a.scores));
  } else if (ckpt.config.arm == Arm::WithDucklings) {
    throw ValidationError("--scores is required for a with-ducklings model");
  }
  auto preds = predict(ckpt.params, cohort, lookup, ckpt.config);

  std::vector<int> labels;
  std::vector<double> probs;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (const auto& label = cohort.records()[i].label) {
      labels.push_back(*label);
      probs.push_back(preds[i].p);
    }
  }
  auto curve = roc_curve(labels, probs);
  MetricsReport report;
  report.auc = auc(curve);
  report.knee = knee_point(curve);
  report.predictions = preds;

  if (!a.out_report.empty()) spill(a.out_report, metrics_json(report));
  if (!a.out_roc.empty()) spill(a.out_roc, roc_csv(curve));
  if (!a.out_predictions.empty()) spill(a.out_predictions, predictions_csv(preds));
  out << "auc=" << report.auc << " sensitivity=" << report.knee.sensitivity
      << " specificity=" << report.knee.specificity << " (" << labels.size()
      << " labeled lesions)\n";
  return kSuccess;
}

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string format = "auto";
  std::string mask_out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg = a.config.empty() ? SynthConfig{} : synth_config_from_json(slurp(a.config));
  if (a.seed) cfg.seed = *a.seed;
  auto synth = generate_cohort(cfg);
  save_cohort(synth.cohort, a.out, resolve_format(a.format, a.out));
  std::string mask = a.mask_out;
  if (mask.empty()) {
    fs::path p(a.out);
    mask = (p.parent_path() / (p.stem().string() + ".planted.csv")).string();
  }
  spill(mask, planted_mask_csv(synth));
  std::size_t planted = 0;
  for (bool b : synth.planted_outlier) planted += b ? 1 : 0;
  out << "generated " << synth.cohort.size() << " lesions for " << cfg.n_patients
      << " patients (" << planted << " planted outliers)\n";
  return kSuccess;
}

struct EnsembleArgs {
  std::vector<std::string> scores;
  std::vector<double> weights;
  std::string out;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  std::vector<std::vector<LesionPrediction>> inputs;
  for (const auto& path : a.scores) inputs.push_back(parse_predictions_csv(slurp(path)));
  std::vector<double> weights = a.weights;
  if (weights.empty()) weights.assign(inputs.size(), 1.0);

  std::vector<std::vector<double>> lists;
  for (std::size_t m = 0; m < inputs.size(); ++m) {
    if (inputs[m].size() != inputs[0].size()) {
      throw ValidationError("ensemble: '" + a.scores[m] + "' has a different number of lesions");
    }
    std::vector<double> list;
    for (std::size_t i = 0; i < inputs[m].size(); ++i) {
      if (inputs[m][i].lesion_id != inputs[0][i].lesion_id) {
        throw ValidationError("ensemble: lesion order differs in '" + a.scores[m] + "' at row " +
                              std::to_string(i + 1));
      }
      list.push_back(inputs[m][i].p);
    }
    lists.push_back(std::move(list));
  }
  auto combined = ensemble_scores(lists, weights);
  std::vector<LesionPrediction> result = inputs.empty() ? std::vector<LesionPrediction>{} : inputs[0];
  for (std::size_t i = 0; i < result.size(); ++i) result[i].p = combined[i];
  spill(a.out, predictions_csv(result));
  out << "ensembled " << inputs.size() << " score lists over " << result.size() << " lesions\n";
  return kSuccess;
}

}  // namespace

std::string fold_path(const std::string& path, int fold) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + ".fold" + std::to_string(fold) +
                             p.extension().string()))
      .string();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ugly-duckling lesion analysis: outlier scoring, gated classifier training, evaluation"};
  app.name("duckling");
  app.require_subcommand(1);

  ValidateArgs validate;
  auto* v = app.add_subcommand("validate", "Load a cohort and print a summary");
  validate.in.attach(v);

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Compute outlier scores and ugly-duckling flags");
  score.in.attach(s);
  s->add_option("--k", score.k, "IQR tolerance");
  s->add_option("--min-context", score.min_context, "Smallest context scored by comparison");
  s->add_option("--output", score.output, "Scores CSV")->required();
  s->add_option("--heatmap-dir", score.heatmap_dir, "Write per-context PGM/CSV distance maps here");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Group k-fold training of the gated classifier");
  train.in.attach(t);
  t->add_option("--scores", train.scores, "Scores CSV from `score`")->required();
  t->add_option("--folds", train.folds, "Number of patient-grouped folds");
  t->add_option("--seed", train.seed, "Seed for folds, initialisation and shuffling");
  t->add_option("--config", train.config, "Train config JSON");
  t->add_option("--ablation", train.ablation, "with-ducklings | without-ducklings");
  t->add_option("--out-model", train.out_model, "Checkpoint path; fold k goes to <stem>.fold<k><ext>");
  t->add_option("--out-history", train.out_history, "History CSV path; per fold like --out-model");
  t->add_option("--out-report", train.out_report, "Out-of-fold metrics JSON");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled cohort");
  e->add_option("--model", eval.model, "Checkpoint JSON")->required();
  eval.in.attach(e);
  e->add_option("--scores", eval.scores, "Scores CSV from `score`");
  e->add_option("--out-report", eval.out_report, "Metrics JSON with per-lesion predictions");
  e->add_option("--out-roc", eval.out_roc, "ROC curve CSV");
  e->add_option("--out-predictions", eval.out_predictions, "Per-lesion predictions CSV");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate a synthetic cohort with planted ugly ducklings");
  y->add_option("--seed", synth.seed, "Overrides the config seed");
  y->add_option("--config", synth.config, "Synth config JSON");
  y->add_option("--out", synth.out, "Cohort file")->required();
  y->add_option("--format", synth.format, "csv | jsonl | auto (by extension)");
  y->add_option("--mask-out", synth.mask_out, "Planted-outlier sidecar (default <out>.planted.csv)");

  EnsembleArgs ensemble;
  auto* n = app.add_subcommand("ensemble", "Weighted average of prediction files");
  n->add_option("--scores", ensemble.scores, "Prediction CSVs")->required()->delimiter(',');
  n->add_option("--weights", ensemble.weights, "One weight per file (default equal)")->delimiter(',');
  n->add_option("--out", ensemble.out, "Output predictions CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err) == 0 ? kSuccess : kValidationError;
  }

  try {
    if (v->parsed()) return cmd_validate(validate, out);
    if (s->parsed()) return cmd_score(score, out);
    if (t->parsed()) return cmd_train(train, out);
    if (e->parsed()) return cmd_eval(eval, out, err);
    if (y->parsed()) return cmd_synth(synth, out);
    if (n->parsed()) return cmd_ensemble(ensemble, out);
  } catch (const ValidationError& ex) {
    err << "validation error: " << ex.what() << "\n";
    return kValidationError;
  } catch (const IoError& ex) {
    err << "i/o error: " << ex.what() << "\n";
    return kIoError;
  } catch (const ComputationError& ex) {
    err << "computation error: " << ex.what() << "\n";
    return kComputationError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kComputationError;
  }
  return kValidationError;
}

}  // namespace duckling::cli
