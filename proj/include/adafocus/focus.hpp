#ifndef ADAFOCUS_FOCUS_HPP
#define ADAFOCUS_FOCUS_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace adafocus {

enum class WeightKind { exponential, constant, linear, logarithmic };

const char* to_string(WeightKind kind);
WeightKind weight_kind_from_string(const std::string& name);

// Focusing hyperparameters. theta scales the spike-actionness into the
// actionness threshold; alpha and beta scale the upper/lower branches of the
// weighting function; gamma (the mask radius) is supplied per epoch by the
// trainer's schedule, not stored here.
struct FocusConfig {
  double theta = 0.75;
  double alpha = 5.0;
  double beta = 3.0;
  WeightKind weight_kind = WeightKind::exponential;
  bool use_action_focus = true;
  bool use_clip_focus = true;
  double warmup_fraction = 0.2;

  void validate() const;  // throws ConfigError
};

// Per (video, in-video class) state: the most salient clip position seen so
// far and its score. lambda == 0 means never observed. Two values per action
// instance is the entire memory cost of the estimator.
struct SaliencyEntry {
  int lambda = 0;       // clip position in [1, T], 0 = unset
  double spike_a = 0.0;  // running max of observed scores, in [0, 1]
};

struct ClassEstimate {
  int class_id = 0;
  int lambda = 0;
  double spike_a = 0.0;
};

// Keyed by (video_id, class); entries exist only for classes present in the
// video. Single writer (the training loop); spike_a is non-decreasing and
// lambda moves only on a strict improvement.
class SaliencyTable {
 public:
  // Creates missing entries at (0, 0.0) for every positive class of the
  // video; existing entries are left untouched.
  void ensure_video(int video_id, std::span<const std::uint8_t> video_labels);

  // Unconditional overwrite; used when loading dumps and by tests.
  void set_entry(int video_id, int class_id, SaliencyEntry entry);

  bool has_entry(int video_id, int class_id) const;

  // Throws StateError if the entry does not exist.
  const SaliencyEntry& at(int video_id, int class_id) const;

  // For each positive class k: if scores[k] > spike_a, move lambda to t and
  // raise spike_a. Strict inequality: ties never move the estimate.
  // Throws StateError if an entry is missing (call ensure_video first).
  void update_online(int video_id, int t, std::span<const double> scores,
                     std::span<const std::uint8_t> video_labels);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  struct Row {
    int video_id;
    int class_id;
    SaliencyEntry entry;
  };
  // Snapshot sorted by (video_id, class_id); used for dumps and diagnostics.
  std::vector<Row> rows_sorted() const;

 private:
  static std::uint64_t key(int video_id, int class_id) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(video_id))
            << 32) |
           static_cast<std::uint32_t>(class_id);
  }
  std::unordered_map<std::uint64_t, SaliencyEntry> entries_;
};

// Single-pass estimate over a full score matrix (clips x classes, clip-major):
// spike_a = max over t, lambda = the earliest position attaining it.
// Returns one estimate per positive class, ascending by class id.
// Throws InputError on an empty matrix or if no class is positive.
std::vector<ClassEstimate> estimate_naive(
    std::span<const double> scores, int clips, int num_classes,
    std::span<const std::uint8_t> video_labels);

// Soft weighting on the gap between a score and the actionness threshold
// a_hat. Upper branch (p >= a_hat) is worth at least alpha; lower branch
// decays below 1. The non-exponential variants use fixed lower-branch
// constants: 0.75 (constant), scale 1.0 (linear, logarithmic).
double weight_given_threshold(double p, double a_hat, const FocusConfig& cfg);

// The public weighting op: a_hat = theta * spike_a computed internally.
double weight(double p, double spike_a, const FocusConfig& cfg);

// Binary temporal mask: 1 iff 2*|t - lambda| / T <= gamma (boundary
// inclusive). lambda == 0 (never observed) masks to 0.
int mask(int t, int clips, int lambda, double gamma);

struct NoisyLossResult {
  double loss_in = 0.0;   // positives: sum of -log p_k
  double loss_out = 0.0;  // negatives: sum of -log(1 - p_k)
  std::vector<double> grad_coeffs;  // d loss / d z_k

  double total() const { return loss_in + loss_out; }
};

// Plain weak-supervision loss: every positive label taken at face value.
// grad_coeffs are p_k - 1 for positives and p_k for negatives.
NoisyLossResult loss_noisy(std::span<const double> scores,
                           std::span<const std::uint8_t> labels);

struct FocusLossResult {
  double loss_in = 0.0;   // positives, weighted and masked
  double loss_out = 0.0;  // negatives, never weighted or masked
  std::vector<double> grad_coeffs;
  // Diagnostics, one slot per class; 1.0 / 1 for negatives and disabled
  // modules. Weights and masks are coefficients only: no gradient flows
  // through them.
  std::vector<double> action_weights;
  std::vector<int> clip_masks;
  int unset_entries = 0;  // positives hit while lambda was still 0

  double total() const { return loss_in + loss_out; }
};

// Focused loss: each positive term is scaled by mask * weight (either factor
// dropping to 1 when its module is disabled). With both modules off this is
// bit-identical to loss_noisy. Entries must exist for every positive class;
// an entry with lambda == 0 contributes weight 1 and mask 0.
FocusLossResult loss_adafocus(std::span<const double> scores,
                              std::span<const std::uint8_t> video_labels,
                              const SaliencyTable& table, int video_id, int t,
                              int clips, double gamma, const FocusConfig& cfg);

// Table dump: CSV "video_id,class,lambda,spike_a", rows sorted.
void write_table(std::ostream& out, const SaliencyTable& table);
void write_table_file(const std::string& path, const SaliencyTable& table);
SaliencyTable read_table_file(const std::string& path);

}  // namespace adafocus

#endif  // ADAFOCUS_FOCUS_HPP
