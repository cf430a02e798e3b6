#ifndef ADAFOCUS_METRICS_HPP
#define ADAFOCUS_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adafocus/corpus.hpp"
#include "adafocus/focus.hpp"
#include "adafocus/model.hpp"

namespace adafocus {

struct VideoScore {
  int video_id = 0;
  std::vector<double> scores;  // K, mean of the sampled clips' sigmoid scores
};

// Evenly spaced view positions: t_i = round((i + 0.5) * T / views), clamped
// to [1, T]. Exposed so the sampling rule is testable on its own.
std::vector<int> view_positions(int clips, int views);

// Multi-view video-level score: forward at each view position, averaged.
// Throws ConfigError if views is outside [1, T].
VideoScore video_score(const Model& model, const LongVideo& video, int views);

// Mean over classes (with at least one positive video) of average precision
// of the video ranking. Ties sort by ascending video_id so results are
// reproducible. Throws InputError if empty or no class has a positive.
double mean_average_precision(
    std::span<const VideoScore> scores,
    std::span<const std::vector<std::uint8_t>> labels);

// Fraction of (clip, in-video positive class) pairs across the whole split
// whose score reaches theta * spike_a for that instance. Instances never
// observed (spike_a == 0) count as not exceeding.
double ratio_above_threshold(const Model& model,
                             std::span<const LongVideo> videos,
                             const SaliencyTable& table, double theta);

// Fraction of (video, positive class) instances whose N highest-scoring clip
// positions (earliest-first on ties) intersect the ground-truth interval.
// Throws ConfigError if n is outside [1, T].
double topn_success_ratio(const Model& model, std::span<const LongVideo> videos,
                          int n);

struct ClassTimeline {
  int class_id = 0;
  std::vector<double> prediction;     // T entries, forward() per clip
  std::vector<std::uint8_t> truth;    // T entries, 0/1 activity
};

// Aligned per-class prediction and ground-truth curves for one video,
// for the video's positive classes only (ascending class id).
std::vector<ClassTimeline> action_timeline(const Model& model,
                                           const LongVideo& video);

// Timeline CSV: "video_id,class,t,prediction,ground_truth".
void write_timeline_header(std::ostream& out);
void write_timeline(std::ostream& out, const LongVideo& video,
                    std::span<const ClassTimeline> timelines);

}  // namespace adafocus

#endif  // ADAFOCUS_METRICS_HPP
