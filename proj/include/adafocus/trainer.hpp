#ifndef ADAFOCUS_TRAINER_HPP
#define ADAFOCUS_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "adafocus/corpus.hpp"
#include "adafocus/focus.hpp"
#include "adafocus/model.hpp"

namespace adafocus {

// The three training regimes compared throughout: clean per-clip labels,
// raw video-level labels, and video-level labels with adaptive focusing.
enum class Regime { full_clean, weak_noisy, weak_adafocus };

const char* to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct TrainConfig {
  Regime regime = Regime::weak_noisy;
  int epochs = 100;
  int iterations_per_epoch = 0;  // 0 = number of training videos
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 1;
  int hidden = 0;  // 0 = linear model
  int eval_views_t = 10;
  std::uint64_t seed = 1;
  FocusConfig focus;

  int warmup_epochs() const;  // round(warmup_fraction * epochs)
  void validate() const;      // throws ConfigError
};

struct EpochRecord {
  int epoch = 0;
  double gamma = 0.0;
  double train_map = 0.0;
  double test_map = 0.0;
  double ratio_above_threshold = 0.0;
  double top1_success = 0.0;
  // In-memory diagnostics, not part of the history CSV schema.
  double mean_loss = 0.0;      // mean per-iteration loss this epoch
  double mask_coverage = 1.0;  // fraction of positive terms with mask == 1
};

using RunHistory = std::vector<EpochRecord>;

struct TrainResult {
  Model model;
  SaliencyTable table;
  RunHistory history;
};

// Mask radius schedule: 0 through the warm-up, then a linear ramp that
// reaches exactly 1 at the final epoch. Throws ConfigError when
// total_epochs <= warmup_epochs.
double gamma_schedule(int epoch, int total_epochs, int warmup_epochs);

// Optional per-epoch observer; used by diagnostics and tests.
struct TrainHooks {
  std::function<void(const EpochRecord&, const Model&, const SaliencyTable&)>
      on_epoch_end;
};

// Runs SGD-with-momentum over uniformly sampled (video, clip) pairs, one
// clip per iteration by default. The saliency table is updated online in
// every regime (it only feeds the loss in weak_adafocus after warm-up) and
// is always read for loss coefficients before the current clip's update.
// Deterministic per (corpus, config). Throws NumericError with an iteration
// dump if the loss goes non-finite.
TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const TrainHooks* hooks = nullptr);

// History CSV with the fixed schema:
// epoch,gamma,train_map,test_map,ratio_above_threshold,top1_success
void write_history(std::ostream& out, const RunHistory& history);
void write_history_file(const std::string& path, const RunHistory& history);

}  // namespace adafocus

#endif  // ADAFOCUS_TRAINER_HPP
