#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "adafocus/corpus.hpp"
#include "adafocus/errors.hpp"
#include "adafocus/metrics.hpp"
#include "adafocus/rng.hpp"

using namespace adafocus;

namespace {

// Video whose features are sums of one-hot class indicators (feature_dim = K),
// so a diagonal model can be an exact oracle or anti-oracle.
LongVideo indicator_video(int video_id, int clips, int num_classes,
                          const std::vector<std::pair<int, std::pair<int, int>>>&
                              intervals /* class -> [start, end] */) {
  LongVideo v;
  v.video_id = video_id;
  v.clips = clips;
  v.num_classes = num_classes;
  v.feature_dim = num_classes;
  v.active.assign(static_cast<std::size_t>(clips) * num_classes, 0);
  for (const auto& [k, range] : intervals)
    for (int t = range.first; t <= range.second; ++t)
      v.active[static_cast<std::size_t>(t - 1) * num_classes + k] = 1;
  v.features.assign(static_cast<std::size_t>(clips) * num_classes, 0.0);
  for (int t = 1; t <= clips; ++t)
    for (int k = 0; k < num_classes; ++k)
      if (v.is_active(t, k))
        v.features[static_cast<std::size_t>(t - 1) * num_classes + k] = 1.0;
  v.derive_video_labels();
  return v;
}

// score = sigmoid(s * x_k - s/2): high iff class k is active at the clip.
Model diagonal_model(int num_classes, double s) {
  Model m = Model::init(num_classes, num_classes, 0, 1);
  auto p = m.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    p[static_cast<std::size_t>(k) * num_classes + k] = s;
    p[static_cast<std::size_t>(num_classes) * num_classes + k] = -s / 2.0;
  }
  return m;
}

Model constant_model(int feature_dim, int num_classes, double bias) {
  Model m = Model::init(feature_dim, num_classes, 0, 1);
  auto p = m.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.0;
  for (int k = 0; k < num_classes; ++k)
    p[static_cast<std::size_t>(num_classes) * feature_dim + k] = bias;
  return m;
}

// Prefix-recount average precision, the slow route.
double brute_force_map(std::span<const VideoScore> scores,
                       std::span<const std::vector<std::uint8_t>> labels) {
  const int n = static_cast<int>(scores.size());
  const int K = static_cast<int>(scores[0].scores.size());
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < K; ++k) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a].scores[k] != scores[b].scores[k])
        return scores[a].scores[k] > scores[b].scores[k];
      return scores[a].video_id < scores[b].video_id;
    });
    int positives = 0;
    for (int i = 0; i < n; ++i) positives += labels[i][k];
    if (positives == 0) continue;
    double ap = 0.0;
    for (int rank = 1; rank <= n; ++rank) {
      if (!labels[order[rank - 1]][k]) continue;
      int in_prefix = 0;
      for (int j = 0; j < rank; ++j) in_prefix += labels[order[j]][k];
      ap += static_cast<double>(in_prefix) / rank;
    }
    sum += ap / positives;
    ++counted;
  }
  return sum / counted;
}

}  // namespace

TEST_CASE("view positions follow the stated rounding rule") {
  CHECK(view_positions(30, 3) == std::vector<int>{5, 15, 25});
  CHECK(view_positions(10, 1) == std::vector<int>{5});

  const auto all = view_positions(8, 8);
  for (int i = 0; i < 8; ++i) CHECK(all[i] == i + 1);

  CHECK_THROWS_AS(view_positions(10, 0), ConfigError);
  CHECK_THROWS_AS(view_positions(10, 11), ConfigError);
}

TEST_CASE("video_score averages views; constants pass through") {
  const LongVideo v = indicator_video(0, 12, 3, {{0, {1, 4}}, {2, {6, 9}}});

  const Model constant = constant_model(3, 3, 0.3);
  const double expected = 1.0 / (1.0 + std::exp(-0.3));
  for (int views : {1, 3, 12}) {
    const VideoScore vs = video_score(constant, v, views);
    for (double s : vs.scores) CHECK(s == doctest::Approx(expected).epsilon(1e-15));
  }

  // views = T equals the plain mean over all clips.
  const Model oracle = diagonal_model(3, 8.0);
  const VideoScore full = video_score(oracle, v, 12);
  for (int k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (int t = 1; t <= 12; ++t) mean += oracle.forward(v.clip_features(t))[k];
    mean /= 12;
    CHECK(full.scores[k] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("mAP: perfect ranking, the [0,1] example, and error cases") {
  std::vector<VideoScore> scores(2);
  scores[0] = {0, {0.9}};
  scores[1] = {1, {0.1}};
  std::vector<std::vector<std::uint8_t>> labels{{0}, {1}};
  CHECK(mean_average_precision(scores, labels) == doctest::Approx(0.5));

  labels = {{1}, {0}};
  CHECK(mean_average_precision(scores, labels) == doctest::Approx(1.0));

  labels = {{0}, {0}};
  CHECK_THROWS_AS(mean_average_precision(scores, labels), InputError);
  CHECK_THROWS_AS(
      mean_average_precision({}, std::vector<std::vector<std::uint8_t>>{}),
      InputError);
}

TEST_CASE("mAP is 1.0 whenever positives rank above negatives everywhere") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + rng.uniform_int(6);
    const int K = 1 + rng.uniform_int(3);
    std::vector<VideoScore> scores(n);
    std::vector<std::vector<std::uint8_t>> labels(n);
    bool any_positive = false;
    for (int i = 0; i < n; ++i) {
      scores[i].video_id = i;
      scores[i].scores.resize(K);
      labels[i].resize(K);
      for (int k = 0; k < K; ++k) {
        labels[i][k] = rng.next_double() < 0.5 ? 1 : 0;
        scores[i].scores[k] = labels[i][k]
                                  ? 0.6 + 0.3 * rng.next_double()
                                  : 0.1 + 0.3 * rng.next_double();
        any_positive |= labels[i][k] != 0;
      }
    }
    if (!any_positive) continue;
    CHECK(mean_average_precision(scores, labels) == doctest::Approx(1.0));
  }
}

TEST_CASE("mAP equals the brute-force prefix recount on random instances") {
  Rng rng(67);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.uniform_int(7);   // up to 8 videos
    const int K = 1 + rng.uniform_int(3);   // up to 3 classes
    std::vector<VideoScore> scores(n);
    std::vector<std::vector<std::uint8_t>> labels(n);
    bool any_positive = false;
    for (int i = 0; i < n; ++i) {
      scores[i].video_id = i;
      scores[i].scores.resize(K);
      labels[i].resize(K);
      for (int k = 0; k < K; ++k) {
        // Quantized scores so ties actually happen.
        scores[i].scores[k] = (1 + rng.uniform_int(5)) / 6.0;
        labels[i][k] = rng.next_double() < 0.4 ? 1 : 0;
        any_positive |= labels[i][k] != 0;
      }
    }
    if (!any_positive) continue;
    CHECK(mean_average_precision(scores, labels) ==
          doctest::Approx(brute_force_map(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("mAP is invariant under strictly increasing score transforms") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + rng.uniform_int(5);
    std::vector<VideoScore> scores(n), squared(n);
    std::vector<std::vector<std::uint8_t>> labels(n);
    bool any_positive = false;
    for (int i = 0; i < n; ++i) {
      scores[i].video_id = squared[i].video_id = i;
      const double p = (1 + rng.uniform_int(8)) / 9.0;
      scores[i].scores = {p};
      squared[i].scores = {p * p};  // strictly increasing on (0, 1)
      labels[i] = {static_cast<std::uint8_t>(rng.next_double() < 0.5 ? 1 : 0)};
      any_positive |= labels[i][0] != 0;
    }
    if (!any_positive) continue;
    CHECK(mean_average_precision(scores, labels) ==
          mean_average_precision(squared, labels));
  }
}

TEST_CASE("ratio_above_threshold: saturated, starved and unset cases") {
  const LongVideo v = indicator_video(0, 10, 2, {{0, {2, 5}}, {1, {7, 9}}});
  std::vector<LongVideo> split{v};

  const Model constant = constant_model(2, 2, 0.0);  // p = 0.5 everywhere
  SaliencyTable table;
  table.set_entry(0, 0, SaliencyEntry{3, 0.5});
  table.set_entry(0, 1, SaliencyEntry{8, 0.5});
  CHECK(ratio_above_threshold(constant, split, table, 0.75) == 1.0);

  const Model starved = constant_model(2, 2, -30.0);  // p ~ 1e-13
  CHECK(ratio_above_threshold(starved, split, table, 0.75) == 0.0);

  SaliencyTable unset;
  unset.set_entry(0, 0, SaliencyEntry{});
  unset.set_entry(0, 1, SaliencyEntry{});
  CHECK(ratio_above_threshold(constant, split, unset, 0.75) == 0.0);
}

TEST_CASE("top-N success: oracle, anti-oracle and monotonicity") {
  const LongVideo v = indicator_video(0, 10, 2, {{0, {2, 4}}, {1, {6, 8}}});
  std::vector<LongVideo> split{v};

  const Model oracle = diagonal_model(2, 12.0);
  for (int n = 1; n <= 3; ++n)
    CHECK(topn_success_ratio(oracle, split, n) == 1.0);

  const Model anti = diagonal_model(2, -12.0);  // intervals cover < half
  CHECK(topn_success_ratio(anti, split, 1) == 0.0);

  CHECK_THROWS_AS(topn_success_ratio(oracle, split, 11), ConfigError);
  CHECK_THROWS_AS(topn_success_ratio(oracle, split, 0), ConfigError);

  Rng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    Model random = Model::init(2, 2, 0, 200 + trial);
    double prev = 0.0;
    for (int n = 1; n <= 10; ++n) {
      const double r = topn_success_ratio(random, split, n);
      CHECK(r >= prev);
      prev = r;
    }
    CHECK(prev == 1.0);  // N = T always succeeds
  }
}

TEST_CASE("action timeline matches forward() and the ground truth") {
  const LongVideo v = indicator_video(4, 7, 3, {{1, {2, 4}}});
  const Model m = Model::init(3, 3, 0, 5);
  const auto timelines = action_timeline(m, v);
  REQUIRE(timelines.size() == 1);  // only the in-video class
  CHECK(timelines[0].class_id == 1);
  CHECK(timelines[0].prediction.size() == 7);
  CHECK(timelines[0].truth.size() == 7);
  for (int t = 1; t <= 7; ++t) {
    CHECK(timelines[0].prediction[t - 1] ==
          m.forward(v.clip_features(t))[1]);
    CHECK(timelines[0].truth[t - 1] == (t >= 2 && t <= 4 ? 1 : 0));
  }

  std::ostringstream csv;
  write_timeline_header(csv);
  write_timeline(csv, v, timelines);
  int rows = -1;  // discount the header
  std::string line;
  std::istringstream read(csv.str());
  while (std::getline(read, line)) ++rows;
  CHECK(rows == 7);  // in-video classes x T
}
