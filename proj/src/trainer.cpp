#include "adafocus/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adafocus/errors.hpp"
#include "adafocus/metrics.hpp"
#include "adafocus/rng.hpp"
#include "adafocus/textio.hpp"

namespace adafocus {

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::full_clean: return "full_clean";
    case Regime::weak_noisy: return "weak_noisy";
    case Regime::weak_adafocus: return "weak_adafocus";
  }
  return "weak_noisy";
}

Regime regime_from_string(const std::string& name) {
  if (name == "full_clean") return Regime::full_clean;
  if (name == "weak_noisy") return Regime::weak_noisy;
  if (name == "weak_adafocus") return Regime::weak_adafocus;
  throw ConfigError("unknown regime: " + name);
}

int TrainConfig::warmup_epochs() const {
  return static_cast<int>(std::lround(focus.warmup_fraction * epochs));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (iterations_per_epoch < 0)
    throw ConfigError("iterations_per_epoch must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("momentum must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hidden < 0) throw ConfigError("hidden must be >= 0");
  if (eval_views_t < 1) throw ConfigError("eval_views_t must be >= 1");
  focus.validate();
  if (warmup_epochs() >= epochs)
    throw ConfigError("warm-up covers every epoch; increase epochs or lower "
                      "warmup_fraction");
}

double gamma_schedule(int epoch, int total_epochs, int warmup_epochs) {
  if (total_epochs <= warmup_epochs)
    throw ConfigError("gamma_schedule: total_epochs must exceed warmup_epochs");
  if (epoch < 0 || epoch >= total_epochs)
    throw InputError("gamma_schedule: epoch out of range");
  if (epoch < warmup_epochs) return 0.0;
  const int ramp = total_epochs - 1 - warmup_epochs;
  if (ramp <= 0) return 1.0;  // a single post-warm-up epoch is the final one
  const double gamma = static_cast<double>(epoch - warmup_epochs) / ramp;
  return std::clamp(gamma, 0.0, 1.0);
}

namespace {

struct IterationDump {
  int epoch, iteration, video_id, t;
  double loss;
  std::string format(std::span<const double> scores) const {
    std::ostringstream out;
    out << "non-finite loss " << loss << " at epoch " << epoch
        << ", iteration " << iteration << " (video " << video_id << ", clip "
        << t << "); scores:";
    for (double p : scores) out << ' ' << fmt_g9(p);
    return out.str();
  }
};

std::vector<std::vector<std::uint8_t>> collect_labels(
    std::span<const LongVideo> videos) {
  std::vector<std::vector<std::uint8_t>> labels;
  labels.reserve(videos.size());
  for (const auto& v : videos) labels.push_back(v.video_labels);
  return labels;
}

double split_map(const Model& model, std::span<const LongVideo> videos,
                 const std::vector<std::vector<std::uint8_t>>& labels,
                 int views) {
  std::vector<VideoScore> scores;
  scores.reserve(videos.size());
  for (const auto& v : videos) scores.push_back(video_score(model, v, views));
  return mean_average_precision(scores, labels);
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const TrainHooks* hooks) {
  config.validate();
  if (corpus.train.empty() || corpus.test.empty())
    throw ConfigError("train: corpus must have non-empty train and test splits");
  const int T = corpus.config.clips_per_video;
  if (config.eval_views_t > T)
    throw ConfigError("eval_views_t exceeds clips_per_video");

  const int iterations = config.iterations_per_epoch > 0
                             ? config.iterations_per_epoch
                             : static_cast<int>(corpus.train.size());
  const int warmup = config.warmup_epochs();

  TrainResult result;
  result.model = Model::init(corpus.config.feature_dim,
                             corpus.config.num_classes, config.hidden,
                             config.seed);
  SaliencyTable& table = result.table;

  const auto train_labels = collect_labels(corpus.train);
  const auto test_labels = collect_labels(corpus.test);

  Rng rng(derive_seed(config.seed, /*stream=*/0x7121));
  std::vector<double> velocity(result.model.param_count(), 0.0);
  std::vector<double> grad_accum(result.model.param_count(), 0.0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double gamma = gamma_schedule(epoch, config.epochs, warmup);
    const bool focusing = config.regime == Regime::weak_adafocus &&
                          epoch >= warmup &&
                          (config.focus.use_action_focus ||
                           config.focus.use_clip_focus);

    double loss_sum = 0.0;
    std::int64_t ratio_hits = 0, ratio_total = 0;
    std::int64_t mask_on = 0, mask_total = 0;

    for (int iter = 0; iter < iterations; ++iter) {
      std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
      double batch_loss = 0.0;

      for (int b = 0; b < config.batch_size; ++b) {
        const LongVideo& video =
            corpus.train[rng.uniform_int(static_cast<int>(corpus.train.size()))];
        const int t = 1 + rng.uniform_int(T);
        const ClipSample sample = trim_clip(video, t);
        const std::vector<double> p = result.model.forward(sample.features);

        table.ensure_video(video.video_id, video.video_labels);

        // Threshold-exceedance diagnostic over this epoch's sampled clips,
        // read against the table state before this clip's own update.
        for (int k = 0; k < video.num_classes; ++k) {
          if (!video.video_labels[k]) continue;
          ++ratio_total;
          const double a = table.at(video.video_id, k).spike_a;
          if (a > 0.0 && p[k] >= config.focus.theta * a) ++ratio_hits;
        }

        double loss = 0.0;
        std::vector<double> coeffs;
        if (config.regime == Regime::full_clean) {
          NoisyLossResult r = loss_noisy(p, sample.clean_labels);
          loss = r.total();
          coeffs = std::move(r.grad_coeffs);
        } else if (!focusing) {
          NoisyLossResult r = loss_noisy(p, video.video_labels);
          loss = r.total();
          coeffs = std::move(r.grad_coeffs);
        } else {
          FocusLossResult r =
              loss_adafocus(p, video.video_labels, table, video.video_id, t, T,
                            gamma, config.focus);
          loss = r.total();
          coeffs = std::move(r.grad_coeffs);
          for (int k = 0; k < video.num_classes; ++k) {
            if (!video.video_labels[k]) continue;
            ++mask_total;
            if (r.clip_masks[k]) ++mask_on;
          }
        }

        if (!std::isfinite(loss)) {
          IterationDump dump{epoch, iter, video.video_id, t, loss};
          throw NumericError(dump.format(p));
        }

        // The estimator is fed in every regime; it only steers the loss in
        // weak_adafocus after warm-up.
        table.update_online(video.video_id, t, p, video.video_labels);

        const std::vector<double> grad =
            result.model.backward(sample.features, coeffs);
        for (std::size_t i = 0; i < grad.size(); ++i) grad_accum[i] += grad[i];
        batch_loss += loss;
      }

      if (config.batch_size > 1) {
        const double inv = 1.0 / config.batch_size;
        for (double& g : grad_accum) g *= inv;
        batch_loss *= inv;
      }

      auto params = result.model.params();
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] + grad_accum[i];
        params[i] -= config.learning_rate * velocity[i];
      }
      loss_sum += batch_loss;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.gamma = gamma;
    record.train_map =
        split_map(result.model, corpus.train, train_labels, config.eval_views_t);
    record.test_map =
        split_map(result.model, corpus.test, test_labels, config.eval_views_t);
    record.ratio_above_threshold =
        ratio_total == 0 ? 0.0
                         : static_cast<double>(ratio_hits) /
                               static_cast<double>(ratio_total);
    record.top1_success = topn_success_ratio(result.model, corpus.train, 1);
    record.mean_loss = loss_sum / iterations;
    record.mask_coverage =
        mask_total == 0 ? 1.0
                        : static_cast<double>(mask_on) /
                              static_cast<double>(mask_total);
    result.history.push_back(record);
    if (hooks && hooks->on_epoch_end)
      hooks->on_epoch_end(record, result.model, table);
  }
  return result;
}

void write_history(std::ostream& out, const RunHistory& history) {
  out << "epoch,gamma,train_map,test_map,ratio_above_threshold,top1_success\n";
  for (const auto& r : history)
    out << r.epoch << ',' << fmt_g9(r.gamma) << ',' << fmt_g9(r.train_map)
        << ',' << fmt_g9(r.test_map) << ',' << fmt_g9(r.ratio_above_threshold)
        << ',' << fmt_g9(r.top1_success) << '\n';
}

void write_history_file(const std::string& path, const RunHistory& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_history(out, history);
  if (!out) throw InputError("write failed: " + path);
}

}  // namespace adafocus
