#include "duckling/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "duckling/errors.hpp"
#include "text_io.hpp"

namespace duckling {

using nlohmann::ordered_json;

const char* to_string(ScoreInjection injection) {
  return injection == ScoreInjection::Features ? "features" : "loss";
}

const char* to_string(Arm arm) {
  return arm == Arm::WithDucklings ? "with-ducklings" : "without-ducklings";
}

ScoreInjection parse_injection(const std::string& text) {
  if (text == "features") return ScoreInjection::Features;
  if (text == "loss") return ScoreInjection::Loss;
  throw ValidationError("unknown score injection '" + text + "' (features|loss)");
}

Arm parse_arm(const std::string& text) {
  if (text == "with" || text == "with-ducklings") return Arm::WithDucklings;
  if (text == "without" || text == "without-ducklings") return Arm::WithoutDucklings;
  throw ValidationError("unknown ablation arm '" + text + "' (with-ducklings|without-ducklings)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(focal.gamma >= 0.0)) throw ValidationError("focal gamma must be >= 0");
  if (!(focal.alpha > 0.0 && focal.alpha <= 1.0)) throw ValidationError("focal alpha must be in (0, 1]");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
    throw ValidationError("plateau_factor must be in (0, 1]");
  }
  if (d_f == 0 || d_h == 0) throw ValidationError("d_f and d_h must be positive");
  if (!(radam.beta1 >= 0.0 && radam.beta1 < 1.0 && radam.beta2 > 0.0 && radam.beta2 < 1.0)) {
    throw ValidationError("RAdam betas must lie in [0, 1)");
  }
}

namespace {

ordered_json config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["focal_gamma"] = c.focal.gamma;
  j["focal_alpha"] = c.focal.alpha;
  j["plateau_patience"] = c.plateau_patience;
  j["plateau_factor"] = c.plateau_factor;
  j["early_stop_patience"] = c.early_stop_patience;
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["d_f"] = c.d_f;
  j["d_h"] = c.d_h;
  j["injection"] = to_string(c.injection);
  j["arm"] = to_string(c.arm);
  j["exclude_fallback"] = c.exclude_fallback;
  j["restore_best"] = c.restore_best;
  j["train_adapter"] = c.train_adapter;
  j["train_head"] = c.train_head;
  j["train_classifier"] = c.train_classifier;
  j["radam_beta1"] = c.radam.beta1;
  j["radam_beta2"] = c.radam.beta2;
  j["radam_epsilon"] = c.radam.epsilon;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "focal_gamma") c.focal.gamma = v.get<double>();
    else if (key == "focal_alpha") c.focal.alpha = v.get<double>();
    else if (key == "plateau_patience") c.plateau_patience = v.get<std::size_t>();
    else if (key == "plateau_factor") c.plateau_factor = v.get<double>();
    else if (key == "early_stop_patience") c.early_stop_patience = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "d_f") c.d_f = v.get<std::size_t>();
    else if (key == "d_h") c.d_h = v.get<std::size_t>();
    else if (key == "injection") c.injection = parse_injection(v.get<std::string>());
    else if (key == "arm") c.arm = parse_arm(v.get<std::string>());
    else if (key == "exclude_fallback") c.exclude_fallback = v.get<bool>();
    else if (key == "restore_best") c.restore_best = v.get<bool>();
    else if (key == "train_adapter") c.train_adapter = v.get<bool>();
    else if (key == "train_head") c.train_head = v.get<bool>();
    else if (key == "train_classifier") c.train_classifier = v.get<bool>();
    else if (key == "radam_beta1") c.radam.beta1 = v.get<double>();
    else if (key == "radam_beta2") c.radam.beta2 = v.get<double>();
    else if (key == "radam_epsilon") c.radam.epsilon = v.get<double>();
    else throw ValidationError("unknown train config key '" + key + "'");
  }
  c.validate();
  return c;
}

struct Sample {
  std::size_t record;
  int label;
  double o;
};

double loss_weight(const TrainConfig& cfg, double o) {
  return cfg.injection == ScoreInjection::Loss ? o : 1.0;
}

double feature_gate(const TrainConfig& cfg, double o) {
  return cfg.injection == ScoreInjection::Features ? o : 1.0;
}

bool include_record(const LesionRecord& rec, const ScoreLookup& scores, const TrainConfig& cfg) {
  if (!rec.label) return false;
  if (cfg.exclude_fallback && cfg.arm == Arm::WithDucklings) {
    auto it = scores.find(rec.lesion_id);
    if (it != scores.end() && it->second.fallback) return false;
  }
  return true;
}

std::vector<Sample> make_samples(const Cohort& cohort, const ScoreLookup& scores,
                                 const TrainConfig& cfg, const std::vector<std::size_t>& records) {
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (std::size_t i : records) {
    const auto& rec = cohort.records()[i];
    samples.push_back({i, *rec.label, gate_score(rec, scores, cfg.arm)});
  }
  return samples;
}

double mean_sample_loss(const ModelParams& params, const Cohort& cohort, const TrainConfig& cfg,
                        const std::vector<Sample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& s : samples) {
    auto trace = forward(params, cohort.records()[s.record].embedding, feature_gate(cfg, s.o));
    total += loss_weight(cfg, s.o) * focal_loss(s.label, trace.p, cfg.focal);
  }
  return total / static_cast<double>(samples.size());
}

void add_layer(std::vector<double>& flat, std::size_t& pos, const LayerParams& layer, bool keep) {
  for (double w : layer.weight) flat[pos++] += keep ? w : 0.0;
  for (double b : layer.bias) flat[pos++] += keep ? b : 0.0;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

TrainConfig train_config_from_json(const std::string& text) {
  try {
    return config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid train config: ") + e.what());
  }
}

double gate_score(const LesionRecord& rec, const ScoreLookup& scores, Arm arm) {
  if (arm == Arm::WithoutDucklings) return 1.0;
  auto it = scores.find(rec.lesion_id);
  if (it == scores.end()) {
    throw ValidationError("no outlier score for lesion '" + rec.lesion_id + "'");
  }
  return it->second.score;
}

double mean_loss(const ModelParams& params, const Cohort& cohort, const ScoreLookup& scores,
                 const TrainConfig& cfg, const std::vector<std::size_t>& records) {
  return mean_sample_loss(params, cohort, cfg, make_samples(cohort, scores, cfg, records));
}

TrainResult train(const Cohort& cohort, const ScoreLookup& scores, const TrainConfig& cfg,
                  const FoldAssignment& folds, int validation_fold) {
  cfg.validate();
  check_no_leakage(cohort, folds);

  std::vector<std::size_t> train_records;
  std::vector<std::size_t> val_records;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& rec = cohort.records()[i];
    if (!include_record(rec, scores, cfg)) continue;
    (folds.fold[i] == validation_fold ? val_records : train_records).push_back(i);
  }
  if (train_records.empty()) throw ValidationError("no labeled training records");
  const auto train_set = make_samples(cohort, scores, cfg, train_records);
  const auto val_set = make_samples(cohort, scores, cfg, val_records);

  TrainResult result;
  result.params = ModelParams::init(cohort.dimension(), cfg.d_f, cfg.d_h, cfg.seed);
  result.optimizer = RAdamState::zeros(result.params.parameter_count());
  result.learning_rate = cfg.learning_rate;
  if (cfg.epochs == 0) return result;

  std::seed_seq seq{cfg.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = cfg.batch_size == 0 ? train_set.size() : cfg.batch_size;

  ModelParams best = result.params;
  double best_monitor = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t since_reduce = 0;
  double lr = cfg.learning_rate;
  std::vector<double> flat = result.params.flatten();
  std::vector<double> grad(flat.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& s = train_set[order[b]];
        auto trace = forward(result.params, cohort.records()[s.record].embedding,
                             feature_gate(cfg, s.o));
        auto g = backward(result.params, trace, s.label, cfg.focal, loss_weight(cfg, s.o));
        std::size_t pos = 0;
        add_layer(grad, pos, g.params.adapter, cfg.train_adapter);
        add_layer(grad, pos, g.params.head, cfg.train_head);
        add_layer(grad, pos, g.params.classifier, cfg.train_classifier);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (double& v : grad) v *= scale;
      radam_step(result.optimizer, flat, grad, lr, cfg.radam);
      result.params.assign(flat);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = mean_sample_loss(result.params, cohort, cfg, train_set);
    rec.val_loss = mean_sample_loss(result.params, cohort, cfg, val_set);
    result.history.push_back(rec);

    const double monitor = val_set.empty() ? rec.train_loss : rec.val_loss;
    if (monitor < best_monitor) {
      best_monitor = monitor;
      best = result.params;
      result.best_epoch = epoch;
      since_best = 0;
      since_reduce = 0;
    } else {
      ++since_best;
      ++since_reduce;
      if (cfg.plateau_patience > 0 && since_reduce >= cfg.plateau_patience) {
        lr *= cfg.plateau_factor;
        since_reduce = 0;
      }
      if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
    }
  }
  result.learning_rate = lr;
  if (cfg.restore_best && result.best_epoch > 0) result.params = best;
  return result;
}

std::vector<LesionPrediction> predict(const ModelParams& params, const Cohort& cohort,
                                      const ScoreLookup& scores, const TrainConfig& cfg) {
  if (cohort.dimension() != params.input_dim() && !cohort.empty()) {
    throw ValidationError("cohort dimension " + std::to_string(cohort.dimension()) +
                          " does not match model input width " +
                          std::to_string(params.input_dim()));
  }
  std::vector<LesionPrediction> out;
  out.reserve(cohort.size());
  for (const auto& rec : cohort.records()) {
    const double o = gate_score(rec, scores, cfg.arm);
    // loss-weighted models never saw o in their forward pass
    auto trace = forward(params, rec.embedding, feature_gate(cfg, o));
    out.push_back({rec.lesion_id, trace.p, o});
  }
  return out;
}

CrossValidationResult cross_validate(const Cohort& cohort, const ScoreLookup& scores,
                                     const TrainConfig& cfg, const FoldAssignment& folds) {
  CrossValidationResult cv;
  std::vector<LesionPrediction> pooled(cohort.size());
  std::vector<bool> have(cohort.size(), false);
  for (std::size_t f = 0; f < folds.num_folds; ++f) {
    const int fold = static_cast<int>(f);
    auto result = train(cohort, scores, cfg, folds, fold);
    auto preds = predict(result.params, cohort, scores, cfg);

    std::vector<int> labels;
    std::vector<double> probs;
    for (std::size_t i : folds.records_in(fold)) {
      const auto& rec = cohort.records()[i];
      if (!rec.label) continue;
      pooled[i] = preds[i];
      have[i] = true;
      labels.push_back(*rec.label);
      probs.push_back(preds[i].p);
    }
    FoldMetrics fm;
    fm.fold = fold;
    fm.n_records = labels.size();
    const bool both_classes = std::find(labels.begin(), labels.end(), 0) != labels.end() &&
                              std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (both_classes) {
      auto m = compute_metrics(labels, probs);
      fm.auc = m.auc;
      fm.knee = m.knee;
    } else {
      fm.auc = std::numeric_limits<double>::quiet_NaN();
    }
    cv.metrics.folds.push_back(fm);
    cv.folds.push_back(std::move(result));
  }
  std::vector<double> probs;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (!have[i]) continue;
    cv.out_of_fold.push_back(pooled[i]);
    cv.out_of_fold_labels.push_back(*cohort.records()[i].label);
    probs.push_back(pooled[i].p);
  }
  auto pooled_metrics = compute_metrics(cv.out_of_fold_labels, probs);
  cv.metrics.auc = pooled_metrics.auc;
  cv.metrics.knee = pooled_metrics.knee;
  cv.metrics.predictions = cv.out_of_fold;
  return cv;
}

namespace {

ordered_json layer_json(const char* name, const LayerParams& layer) {
  ordered_json j;
  j["name"] = name;
  j["rows"] = layer.out;
  j["cols"] = layer.in;
  j["weight"] = layer.weight;
  j["bias"] = layer.bias;
  return j;
}

LayerParams layer_from_json(const nlohmann::json& j, const char* name) {
  if (j.at("name").get<std::string>() != name) {
    throw ValidationError(std::string("checkpoint layer order: expected '") + name + "'");
  }
  LayerParams layer(j.at("cols").get<std::size_t>(), j.at("rows").get<std::size_t>());
  layer.weight = j.at("weight").get<std::vector<double>>();
  layer.bias = j.at("bias").get<std::vector<double>>();
  if (layer.weight.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
    throw ValidationError(std::string("checkpoint layer '") + name + "' has inconsistent shape");
  }
  return layer;
}

}  // namespace

std::string checkpoint_json(const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = "duckling-checkpoint-v1";
  j["seed"] = ckpt.config.seed;
  j["validation_fold"] = ckpt.validation_fold;
  j["learning_rate"] = ckpt.learning_rate;
  j["config"] = config_to_json(ckpt.config);
  j["layers"] = ordered_json::array({layer_json("adapter", ckpt.params.adapter),
                                     layer_json("head", ckpt.params.head),
                                     layer_json("classifier", ckpt.params.classifier)});
  j["optimizer"] = {{"name", "radam"},
                    {"step", ckpt.optimizer.step},
                    {"m", ckpt.optimizer.m},
                    {"v", ckpt.optimizer.v}};
  return j.dump(2) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "duckling-checkpoint-v1") {
      throw ValidationError("unsupported checkpoint format");
    }
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.validation_fold = j.at("validation_fold").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != 3) {
      throw ValidationError("checkpoint must hold exactly three layers");
    }
    c.params.adapter = layer_from_json(layers[0], "adapter");
    c.params.head = layer_from_json(layers[1], "head");
    c.params.classifier = layer_from_json(layers[2], "classifier");
    if (c.params.head.in != c.params.adapter.out || c.params.classifier.in != c.params.head.out ||
        c.params.classifier.out != 1) {
      throw ValidationError("checkpoint layer shapes do not compose");
    }
    const auto& opt = j.at("optimizer");
    c.optimizer.step = opt.at("step").get<std::uint64_t>();
    c.optimizer.m = opt.at("m").get<std::vector<double>>();
    c.optimizer.v = opt.at("v").get<std::vector<double>>();
    if (c.optimizer.m.size() != c.params.parameter_count() ||
        c.optimizer.v.size() != c.params.parameter_count()) {
      throw ValidationError("checkpoint optimizer state size mismatch");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  text::write_file(path, checkpoint_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(text::read_file(path));
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + ',' + text::format_double(r.train_loss) + ',' +
           text::format_double(r.val_loss) + ',' + text::format_double(r.lr) + '\n';
  }
  return out;
}

}  // namespace duckling
