#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "adafocus/errors.hpp"
#include "adafocus/trainer.hpp"

using namespace adafocus;

namespace {

Corpus tiny_corpus(std::uint64_t seed = 7) {
  CorpusConfig cfg;
  cfg.num_videos = 12;
  cfg.clips_per_video = 12;
  cfg.num_classes = 4;
  cfg.feature_dim = 6;
  cfg.actions_min = 1;
  cfg.actions_max = 2;
  cfg.interval_min = 3;
  cfg.interval_max = 5;
  cfg.feature_noise_sigma = 0.5;
  cfg.seed = seed;
  return generate_corpus(cfg);
}

TrainConfig quick_config(Regime regime, int epochs = 6) {
  TrainConfig cfg;
  cfg.regime = regime;
  cfg.epochs = epochs;
  cfg.learning_rate = 0.2;
  cfg.eval_views_t = 4;
  cfg.seed = 3;
  cfg.focus.warmup_fraction = 0.5;
  return cfg;
}

bool same_params(const Model& a, const Model& b) {
  if (a.param_count() != b.param_count()) return false;
  for (std::size_t i = 0; i < a.param_count(); ++i)
    if (a.params()[i] != b.params()[i]) return false;
  return true;
}

bool same_history(const RunHistory& a, const RunHistory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const EpochRecord &x = a[i], &y = b[i];
    if (x.epoch != y.epoch || x.gamma != y.gamma ||
        x.train_map != y.train_map || x.test_map != y.test_map ||
        x.ratio_above_threshold != y.ratio_above_threshold ||
        x.top1_success != y.top1_success || x.mean_loss != y.mean_loss)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gamma schedule: endpoints, ramp and errors") {
  CHECK(gamma_schedule(0, 100, 20) == 0.0);
  CHECK(gamma_schedule(19, 100, 20) == 0.0);
  CHECK(gamma_schedule(20, 100, 20) == 0.0);
  CHECK(gamma_schedule(99, 100, 20) == 1.0);
  CHECK(gamma_schedule(59, 100, 20) == 39.0 / 79.0);

  // A single post-warm-up epoch jumps straight to full coverage.
  CHECK(gamma_schedule(4, 5, 4) == 1.0);

  CHECK_THROWS_AS(gamma_schedule(0, 10, 10), ConfigError);
  CHECK_THROWS_AS(gamma_schedule(10, 10, 2), InputError);

  double prev = -1.0;
  for (int epoch = 0; epoch < 100; ++epoch) {
    const double g = gamma_schedule(epoch, 100, 20);
    CHECK(g >= prev);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    prev = g;
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg = quick_config(Regime::weak_noisy);
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = quick_config(Regime::weak_noisy, 1);
  cfg.focus.warmup_fraction = 0.9;  // round(0.9) = 1 = epochs
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = quick_config(Regime::weak_noisy);
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = quick_config(Regime::weak_noisy);
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero learning rate leaves the model at its initialization") {
  const Corpus corpus = tiny_corpus();
  TrainConfig cfg = quick_config(Regime::weak_noisy, 3);
  cfg.learning_rate = 0.0;
  const TrainResult result = train(corpus, cfg);
  const Model fresh = Model::init(corpus.config.feature_dim,
                                  corpus.config.num_classes, 0, cfg.seed);
  CHECK(same_params(result.model, fresh));
}

TEST_CASE("identical corpus and config reproduce the run bit-for-bit") {
  const Corpus corpus = tiny_corpus();
  const TrainConfig cfg = quick_config(Regime::weak_adafocus);
  const TrainResult a = train(corpus, cfg);
  const TrainResult b = train(corpus, cfg);
  CHECK(same_params(a.model, b.model));
  CHECK(same_history(a.history, b.history));

  std::ostringstream ta, tb;
  write_table(ta, a.table);
  write_table(tb, b.table);
  CHECK(ta.str() == tb.str());
}

TEST_CASE("focusing disabled reduces weak_adafocus to weak_noisy exactly") {
  const Corpus corpus = tiny_corpus();
  TrainConfig noisy = quick_config(Regime::weak_noisy);
  TrainConfig off = quick_config(Regime::weak_adafocus);
  off.focus.use_action_focus = false;
  off.focus.use_clip_focus = false;

  const TrainResult a = train(corpus, noisy);
  const TrainResult b = train(corpus, off);
  CHECK(same_history(a.history, b.history));
  CHECK(same_params(a.model, b.model));
}

TEST_CASE("parameter trajectories coincide through the warm-up") {
  const Corpus corpus = tiny_corpus();
  TrainConfig noisy = quick_config(Regime::weak_noisy, 10);
  TrainConfig ada = quick_config(Regime::weak_adafocus, 10);
  noisy.focus.warmup_fraction = 0.4;
  ada.focus.warmup_fraction = 0.4;  // warm-up = 4 epochs

  auto capture = [&](const TrainConfig& cfg) {
    std::vector<std::vector<double>> snapshots;
    TrainHooks hooks;
    hooks.on_epoch_end = [&](const EpochRecord&, const Model& m,
                             const SaliencyTable&) {
      snapshots.emplace_back(m.params().begin(), m.params().end());
    };
    const TrainResult r = train(corpus, cfg, &hooks);
    return std::make_pair(std::move(snapshots), r.history);
  };

  const auto [noisy_params, noisy_history] = capture(noisy);
  const auto [ada_params, ada_history] = capture(ada);

  for (int epoch = 0; epoch < 4; ++epoch) {
    CHECK(noisy_params[epoch] == ada_params[epoch]);
    CHECK(noisy_history[epoch].mean_loss == ada_history[epoch].mean_loss);
    CHECK(noisy_history[epoch].test_map == ada_history[epoch].test_map);
  }
  // After warm-up the runs diverge (sanity that focusing actually engages).
  bool diverged = false;
  for (int epoch = 4; epoch < 10 && !diverged; ++epoch)
    diverged = noisy_params[epoch] != ada_params[epoch];
  CHECK(diverged);
}

TEST_CASE("saliency table growth is monotone and bounded by instances") {
  const Corpus corpus = tiny_corpus();
  std::size_t instances = 0;
  for (const LongVideo& v : corpus.train)
    for (int k = 0; k < v.num_classes; ++k) instances += v.video_labels[k];

  std::size_t prev = 0;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](const EpochRecord&, const Model&,
                           const SaliencyTable& table) {
    CHECK(table.size() >= prev);
    CHECK(table.size() <= instances);
    prev = table.size();
  };
  const TrainResult r =
      train(corpus, quick_config(Regime::weak_adafocus), &hooks);
  CHECK(r.table.size() <= instances);
  CHECK(r.table.size() > 0);

  // Every entry's spike is a score the model actually produced: in (0, 1).
  for (const auto& row : r.table.rows_sorted()) {
    CHECK(row.entry.spike_a > 0.0);
    CHECK(row.entry.spike_a < 1.0);
    CHECK(row.entry.lambda >= 1);
    CHECK(row.entry.lambda <= corpus.config.clips_per_video);
  }
}

TEST_CASE("gamma column follows the schedule in every regime") {
  const Corpus corpus = tiny_corpus();
  for (Regime regime :
       {Regime::full_clean, Regime::weak_noisy, Regime::weak_adafocus}) {
    const TrainConfig cfg = quick_config(regime, 8);
    const TrainResult r = train(corpus, cfg);
    REQUIRE(r.history.size() == 8);
    for (int epoch = 0; epoch < 8; ++epoch)
      CHECK(r.history[epoch].gamma ==
            gamma_schedule(epoch, 8, cfg.warmup_epochs()));
  }
}

TEST_CASE("an exploding step aborts with a numeric diagnostic") {
  const Corpus corpus = tiny_corpus();
  TrainConfig cfg = quick_config(Regime::weak_noisy, 4);
  // Steps this large push parameters past the double range; the resulting
  // NaN logits must surface as a NumericError, not silently train on.
  cfg.learning_rate = 1e307;
  CHECK_THROWS_AS(train(corpus, cfg), NumericError);
}

TEST_CASE("history CSV has the fixed schema and one row per epoch") {
  const Corpus corpus = tiny_corpus();
  const TrainResult r = train(corpus, quick_config(Regime::weak_noisy, 5));
  std::ostringstream out;
  write_history(out, r.history);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,gamma,train_map,test_map,ratio_above_threshold,top1_success");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}
