#ifndef ADAFOCUS_CONFIG_JSON_HPP
#define ADAFOCUS_CONFIG_JSON_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "adafocus/corpus.hpp"
#include "adafocus/trainer.hpp"

namespace adafocus {

// JSON <-> config binding with strict key checking: unknown keys raise
// ConfigError naming the field, so typos in experiment files fail loudly.

CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json corpus_config_to_json(const CorpusConfig& cfg);

// Overlays partial JSON onto an existing config (defaults stay in place).
void apply_train_overlay(TrainConfig& cfg, const nlohmann::json& j,
                         bool require_regime = false);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

CorpusConfig load_corpus_config_file(const std::string& path);

// One row of a comparison grid: a named, fully resolved training config.
struct RunSpec {
  std::string name;
  TrainConfig config;
};

struct ExperimentSpec {
  bool has_inline_corpus = false;
  CorpusConfig corpus;       // when has_inline_corpus
  std::string corpus_file;   // otherwise
  std::vector<RunSpec> runs;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
ExperimentSpec load_experiment_spec_file(const std::string& path);

}  // namespace adafocus

#endif  // ADAFOCUS_CONFIG_JSON_HPP
