#include "adafocus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "adafocus/errors.hpp"
#include "adafocus/textio.hpp"

namespace adafocus {

std::vector<int> view_positions(int clips, int views) {
  if (views < 1 || views > clips)
    throw ConfigError("views must be in [1, T]");
  std::vector<int> positions(views);
  for (int i = 0; i < views; ++i) {
    const long pos = std::lround((i + 0.5) * clips / views);
    positions[i] = static_cast<int>(std::clamp(pos, 1L, static_cast<long>(clips)));
  }
  return positions;
}

VideoScore video_score(const Model& model, const LongVideo& video, int views) {
  const std::vector<int> positions = view_positions(video.clips, views);
  VideoScore vs;
  vs.video_id = video.video_id;
  vs.scores.assign(video.num_classes, 0.0);
  for (int t : positions) {
    const std::vector<double> p = model.forward(video.clip_features(t));
    for (int k = 0; k < video.num_classes; ++k) vs.scores[k] += p[k];
  }
  for (double& s : vs.scores) s /= views;
  return vs;
}

double mean_average_precision(
    std::span<const VideoScore> scores,
    std::span<const std::vector<std::uint8_t>> labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw InputError("mean_average_precision: empty or mismatched inputs");
  const int num_videos = static_cast<int>(scores.size());
  const int K = static_cast<int>(scores[0].scores.size());

  double ap_sum = 0.0;
  int classes_scored = 0;
  std::vector<int> order(num_videos);
  for (int k = 0; k < K; ++k) {
    int positives = 0;
    for (int i = 0; i < num_videos; ++i) positives += labels[i][k] ? 1 : 0;
    if (positives == 0) continue;  // AP undefined without a positive video

    for (int i = 0; i < num_videos; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a].scores[k] != scores[b].scores[k])
        return scores[a].scores[k] > scores[b].scores[k];
      return scores[a].video_id < scores[b].video_id;
    });

    double ap = 0.0;
    int hits = 0;
    for (int rank = 1; rank <= num_videos; ++rank) {
      if (!labels[order[rank - 1]][k]) continue;
      ++hits;
      ap += static_cast<double>(hits) / rank;
    }
    ap_sum += ap / positives;
    ++classes_scored;
  }
  if (classes_scored == 0)
    throw InputError("mean_average_precision: no class has a positive video");
  return ap_sum / classes_scored;
}

double ratio_above_threshold(const Model& model,
                             std::span<const LongVideo> videos,
                             const SaliencyTable& table, double theta) {
  std::int64_t exceeding = 0;
  std::int64_t total = 0;
  for (const auto& video : videos) {
    for (int t = 1; t <= video.clips; ++t) {
      const std::vector<double> p = model.forward(video.clip_features(t));
      for (int k = 0; k < video.num_classes; ++k) {
        if (!video.video_labels[k]) continue;
        ++total;
        if (!table.has_entry(video.video_id, k)) continue;
        const double a = table.at(video.video_id, k).spike_a;
        if (a > 0.0 && p[k] >= theta * a) ++exceeding;
      }
    }
  }
  return total == 0 ? 0.0
                    : static_cast<double>(exceeding) / static_cast<double>(total);
}

double topn_success_ratio(const Model& model, std::span<const LongVideo> videos,
                          int n) {
  if (videos.empty()) throw InputError("topn_success_ratio: empty split");
  if (n < 1 || n > videos[0].clips)
    throw ConfigError("top-N: N must be in [1, T]");

  std::int64_t successes = 0;
  std::int64_t instances = 0;
  std::vector<std::vector<double>> clip_scores;
  std::vector<int> order;
  for (const auto& video : videos) {
    clip_scores.clear();
    for (int t = 1; t <= video.clips; ++t)
      clip_scores.push_back(model.forward(video.clip_features(t)));

    for (int k = 0; k < video.num_classes; ++k) {
      if (!video.video_labels[k]) continue;
      ++instances;
      order.resize(video.clips);
      for (int t = 0; t < video.clips; ++t) order[t] = t + 1;
      // Highest score first; earliest position wins ties.
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double pa = clip_scores[a - 1][k];
        const double pb = clip_scores[b - 1][k];
        if (pa != pb) return pa > pb;
        return a < b;
      });
      for (int i = 0; i < n; ++i) {
        if (video.is_active(order[i], k)) {
          ++successes;
          break;
        }
      }
    }
  }
  if (instances == 0) throw InputError("topn_success_ratio: no instances");
  return static_cast<double>(successes) / static_cast<double>(instances);
}

std::vector<ClassTimeline> action_timeline(const Model& model,
                                           const LongVideo& video) {
  std::vector<ClassTimeline> out;
  std::vector<std::vector<double>> clip_scores;
  for (int t = 1; t <= video.clips; ++t)
    clip_scores.push_back(model.forward(video.clip_features(t)));
  for (int k = 0; k < video.num_classes; ++k) {
    if (!video.video_labels[k]) continue;
    ClassTimeline tl;
    tl.class_id = k;
    tl.prediction.resize(video.clips);
    tl.truth.resize(video.clips);
    for (int t = 1; t <= video.clips; ++t) {
      tl.prediction[t - 1] = clip_scores[t - 1][k];
      tl.truth[t - 1] = video.is_active(t, k) ? 1 : 0;
    }
    out.push_back(std::move(tl));
  }
  return out;
}

void write_timeline_header(std::ostream& out) {
  out << "video_id,class,t,prediction,ground_truth\n";
}

void write_timeline(std::ostream& out, const LongVideo& video,
                    std::span<const ClassTimeline> timelines) {
  for (const auto& tl : timelines) {
    for (int t = 1; t <= video.clips; ++t) {
      out << video.video_id << ',' << tl.class_id << ',' << t << ','
          << fmt_g9(tl.prediction[t - 1]) << ','
          << static_cast<int>(tl.truth[t - 1]) << '\n';
    }
  }
}

}  // namespace adafocus
