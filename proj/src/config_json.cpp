#include "adafocus/config_json.hpp"

#include <fstream>
#include <set>

#include "adafocus/errors.hpp"
#include "adafocus/focus.hpp"

namespace adafocus {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError(where + ": unknown field \"" + key + "\"");
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field \"") + key + "\" has the wrong type");
  }
}

void read_pair(const json& j, const char* key, int& lo, int& hi) {
  if (!j.contains(key)) return;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 2)
    throw ConfigError(std::string("field \"") + key +
                      "\" must be a [min, max] pair");
  try {
    lo = arr.at(0).get<int>();
    hi = arr.at(1).get<int>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field \"") + key + "\" has the wrong type");
  }
}

json parse_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + ": " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " " + path + ": " + e.what());
  }
}

void apply_focus_overlay(FocusConfig& cfg, const json& j) {
  reject_unknown_keys(j,
                      {"theta", "alpha", "beta", "weight_kind",
                       "use_action_focus", "use_clip_focus", "warmup_fraction"},
                      "focus config");
  read_field(j, "theta", cfg.theta);
  read_field(j, "alpha", cfg.alpha);
  read_field(j, "beta", cfg.beta);
  if (j.contains("weight_kind"))
    cfg.weight_kind = weight_kind_from_string(j.at("weight_kind").get<std::string>());
  read_field(j, "use_action_focus", cfg.use_action_focus);
  read_field(j, "use_clip_focus", cfg.use_clip_focus);
  read_field(j, "warmup_fraction", cfg.warmup_fraction);
}

}  // namespace

CorpusConfig corpus_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("corpus config must be a JSON object");
  reject_unknown_keys(j,
                      {"num_videos", "clips_per_video", "num_classes",
                       "feature_dim", "actions_per_video", "interval_length",
                       "feature_noise_sigma", "seed"},
                      "corpus config");
  CorpusConfig cfg;
  read_field(j, "num_videos", cfg.num_videos);
  read_field(j, "clips_per_video", cfg.clips_per_video);
  read_field(j, "num_classes", cfg.num_classes);
  read_field(j, "feature_dim", cfg.feature_dim);
  read_pair(j, "actions_per_video", cfg.actions_min, cfg.actions_max);
  read_pair(j, "interval_length", cfg.interval_min, cfg.interval_max);
  read_field(j, "feature_noise_sigma", cfg.feature_noise_sigma);
  read_field(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

json corpus_config_to_json(const CorpusConfig& cfg) {
  return json{{"num_videos", cfg.num_videos},
              {"clips_per_video", cfg.clips_per_video},
              {"num_classes", cfg.num_classes},
              {"feature_dim", cfg.feature_dim},
              {"actions_per_video", {cfg.actions_min, cfg.actions_max}},
              {"interval_length", {cfg.interval_min, cfg.interval_max}},
              {"feature_noise_sigma", cfg.feature_noise_sigma},
              {"seed", cfg.seed}};
}

void apply_train_overlay(TrainConfig& cfg, const json& j, bool require_regime) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  reject_unknown_keys(j,
                      {"name", "regime", "epochs", "iterations_per_epoch",
                       "learning_rate", "momentum", "batch_size", "hidden",
                       "eval_views_t", "seed", "focus"},
                      "train config");
  if (j.contains("regime"))
    cfg.regime = regime_from_string(j.at("regime").get<std::string>());
  else if (require_regime)
    throw ConfigError("train config: missing field \"regime\"");
  read_field(j, "epochs", cfg.epochs);
  read_field(j, "iterations_per_epoch", cfg.iterations_per_epoch);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "momentum", cfg.momentum);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "hidden", cfg.hidden);
  read_field(j, "eval_views_t", cfg.eval_views_t);
  read_field(j, "seed", cfg.seed);
  if (j.contains("focus")) apply_focus_overlay(cfg.focus, j.at("focus"));
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"regime", to_string(cfg.regime)},
              {"epochs", cfg.epochs},
              {"iterations_per_epoch", cfg.iterations_per_epoch},
              {"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"batch_size", cfg.batch_size},
              {"hidden", cfg.hidden},
              {"eval_views_t", cfg.eval_views_t},
              {"seed", cfg.seed},
              {"focus",
               {{"theta", cfg.focus.theta},
                {"alpha", cfg.focus.alpha},
                {"beta", cfg.focus.beta},
                {"weight_kind", to_string(cfg.focus.weight_kind)},
                {"use_action_focus", cfg.focus.use_action_focus},
                {"use_clip_focus", cfg.focus.use_clip_focus},
                {"warmup_fraction", cfg.focus.warmup_fraction}}}};
}

CorpusConfig load_corpus_config_file(const std::string& path) {
  return corpus_config_from_json(parse_file(path, "corpus config"));
}

ExperimentSpec experiment_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  reject_unknown_keys(
      j, {"corpus", "corpus_file", "train", "runs", "seeds", "jobs"},
      "experiment spec");

  ExperimentSpec spec;
  if (j.contains("corpus") && j.contains("corpus_file"))
    throw ConfigError("experiment spec: give either corpus or corpus_file");
  if (j.contains("corpus")) {
    spec.has_inline_corpus = true;
    spec.corpus = corpus_config_from_json(j.at("corpus"));
  } else if (j.contains("corpus_file")) {
    spec.corpus_file = j.at("corpus_file").get<std::string>();
  } else {
    throw ConfigError("experiment spec: missing corpus or corpus_file");
  }

  TrainConfig base;
  if (j.contains("train")) apply_train_overlay(base, j.at("train"));

  if (!j.contains("runs") || !j.at("runs").is_array() || j.at("runs").empty())
    throw ConfigError("experiment spec: needs a non-empty \"runs\" array");
  std::set<std::string> names;
  for (const auto& rj : j.at("runs")) {
    RunSpec run;
    run.config = base;
    apply_train_overlay(run.config, rj, /*require_regime=*/true);
    run.name = rj.contains("name") ? rj.at("name").get<std::string>()
                                   : to_string(run.config.regime);
    if (!names.insert(run.name).second)
      throw ConfigError("experiment spec: duplicate run name \"" + run.name +
                        "\"");
    spec.runs.push_back(std::move(run));
  }

  if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
    throw ConfigError("experiment spec: needs a non-empty \"seeds\" array");
  for (const auto& s : j.at("seeds"))
    spec.seeds.push_back(s.get<std::uint64_t>());

  read_field(j, "jobs", spec.jobs);
  if (spec.jobs < 1) throw ConfigError("experiment spec: jobs must be >= 1");
  return spec;
}

ExperimentSpec load_experiment_spec_file(const std::string& path) {
  return experiment_spec_from_json(parse_file(path, "experiment spec"));
}

}  // namespace adafocus
