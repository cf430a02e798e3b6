#ifndef ADAFOCUS_CORPUS_HPP
#define ADAFOCUS_CORPUS_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adafocus {

// Settings for one synthetic long-video corpus. Every quantity that shapes
// the data is here, so a corpus is fully reproducible from its config.
struct CorpusConfig {
  int num_videos = 200;
  int clips_per_video = 30;  // T
  int num_classes = 10;      // K
  int feature_dim = 16;
  int actions_min = 2;  // actions per video, inclusive range
  int actions_max = 4;
  int interval_min = 6;  // action interval length in clips, inclusive range
  int interval_max = 12;
  double feature_noise_sigma = 0.8;
  std::uint64_t seed = 7;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// An ordered sequence of T clips, each abstracted to one feature vector.
// Clip positions are 1-based throughout: t in [1, T]. Position 0 is reserved
// as the "never observed" sentinel for saliency estimates.
struct LongVideo {
  int video_id = 0;
  int clips = 0;        // T
  int num_classes = 0;  // K
  int feature_dim = 0;
  std::vector<double> features;     // clips * feature_dim, row-major by clip
  std::vector<std::uint8_t> active;  // clips * num_classes, 1 = class active
  std::vector<std::uint8_t> video_labels;  // K; union of per-clip active sets

  std::span<const double> clip_features(int t) const;   // t in [1, T]
  bool is_active(int t, int k) const;                   // t in [1, T]
  std::vector<int> active_set(int t) const;             // sorted class ids
  std::vector<std::uint8_t> clip_labels(int t) const;   // length-K 0/1 vector

  // Recomputes video_labels as the union of per-clip active sets.
  void derive_video_labels();
};

// One clip trimmed from a long video, carrying both label regimes.
struct ClipSample {
  int video_id = 0;
  int position = 0;  // t in [1, T]
  std::span<const double> features;
  std::vector<std::uint8_t> clean_labels;       // classes active at position
  const std::vector<std::uint8_t>* weak_labels;  // the video's labels
};

struct Corpus {
  CorpusConfig config;
  std::vector<LongVideo> train;
  std::vector<LongVideo> test;

  std::size_t total_videos() const { return train.size() + test.size(); }
};

// Deterministic 80/20 split by video id, decided by the corpus seed alone.
// Returns ascending-sorted (train_ids, test_ids).
std::pair<std::vector<int>, std::vector<int>> train_test_split(
    std::uint64_t seed, int num_videos);

// Generates a corpus: per video, a handful of action classes each occupying
// one contiguous clip interval; clip features are the mean of the active
// class prototypes (a dedicated background prototype when nothing is active)
// plus isotropic Gaussian noise. Bit-identical for identical configs.
Corpus generate_corpus(const CorpusConfig& config);

// Trims the clip at position t. Throws InputError if t is out of range.
ClipSample trim_clip(const LongVideo& video, int t);

// Fraction of (clip, positive-video-class) pairs where the class is not
// active at that clip. Throws InputError on an empty video list.
double noise_rate(std::span<const LongVideo> videos);
double noise_rate(const Corpus& corpus);

// Corpus file: one JSON header line carrying the config, then one JSON
// record per video. Floats use 9 significant digits. Split membership is
// not stored; readers recover it from the header via train_test_split.
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus_file(const std::string& path, const Corpus& corpus);
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);

}  // namespace adafocus

#endif  // ADAFOCUS_CORPUS_HPP
