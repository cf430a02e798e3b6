#include "adafocus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "adafocus/errors.hpp"
#include "adafocus/rng.hpp"
#include "adafocus/textio.hpp"

namespace adafocus {

namespace {

// Stream ids for deriving independent generators from the corpus seed.
constexpr std::uint64_t kStreamPrototypes = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamVideoBase = 1000;

}  // namespace

void CorpusConfig::validate() const {
  if (num_videos < 2)
    throw ConfigError("num_videos must be >= 2 (need both splits non-empty)");
  if (clips_per_video < 2) throw ConfigError("clips_per_video must be >= 2");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (actions_min < 1) throw ConfigError("actions_per_video min must be >= 1");
  if (actions_min > actions_max)
    throw ConfigError("actions_per_video range is inverted");
  if (actions_max > num_classes)
    throw ConfigError("actions_per_video max exceeds num_classes");
  if (interval_min < 1) throw ConfigError("interval_length min must be >= 1");
  if (interval_min > interval_max)
    throw ConfigError("interval_length range is inverted");
  if (interval_max > clips_per_video)
    throw ConfigError("interval_length max exceeds clips_per_video");
  if (!(feature_noise_sigma >= 0.0))
    throw ConfigError("feature_noise_sigma must be non-negative");
}

std::span<const double> LongVideo::clip_features(int t) const {
  return std::span<const double>(features.data() +
                                     static_cast<std::size_t>(t - 1) * feature_dim,
                                 static_cast<std::size_t>(feature_dim));
}

bool LongVideo::is_active(int t, int k) const {
  return active[static_cast<std::size_t>(t - 1) * num_classes + k] != 0;
}

std::vector<int> LongVideo::active_set(int t) const {
  std::vector<int> out;
  for (int k = 0; k < num_classes; ++k)
    if (is_active(t, k)) out.push_back(k);
  return out;
}

std::vector<std::uint8_t> LongVideo::clip_labels(int t) const {
  std::vector<std::uint8_t> out(num_classes, 0);
  for (int k = 0; k < num_classes; ++k) out[k] = is_active(t, k) ? 1 : 0;
  return out;
}

void LongVideo::derive_video_labels() {
  video_labels.assign(num_classes, 0);
  for (int t = 1; t <= clips; ++t)
    for (int k = 0; k < num_classes; ++k)
      if (is_active(t, k)) video_labels[k] = 1;
}

std::pair<std::vector<int>, std::vector<int>> train_test_split(
    std::uint64_t seed, int num_videos) {
  std::vector<int> ids(num_videos);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, kStreamSplit));
  for (int i = num_videos - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(ids[i], ids[j]);
  }
  int n_train = static_cast<int>(std::lround(0.8 * num_videos));
  n_train = std::clamp(n_train, 1, num_videos - 1);
  std::vector<int> train(ids.begin(), ids.begin() + n_train);
  std::vector<int> test(ids.begin() + n_train, ids.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

namespace {

LongVideo generate_video(const CorpusConfig& cfg, int video_id,
                         const std::vector<double>& prototypes) {
  const int T = cfg.clips_per_video;
  const int K = cfg.num_classes;
  const int D = cfg.feature_dim;

  LongVideo video;
  video.video_id = video_id;
  video.clips = T;
  video.num_classes = K;
  video.feature_dim = D;
  video.active.assign(static_cast<std::size_t>(T) * K, 0);
  video.features.assign(static_cast<std::size_t>(T) * D, 0.0);

  Rng rng(derive_seed(cfg.seed, kStreamVideoBase + static_cast<std::uint64_t>(video_id)));

  // Pick distinct action classes, then one contiguous interval per class.
  const int n_actions = rng.uniform_range(cfg.actions_min, cfg.actions_max);
  std::vector<int> pool(K);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n_actions; ++i) {
    const int j = i + rng.uniform_int(K - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + n_actions);
  std::sort(chosen.begin(), chosen.end());

  for (int k : chosen) {
    const int len = rng.uniform_range(cfg.interval_min, cfg.interval_max);
    const int start = rng.uniform_range(1, T - len + 1);
    for (int t = start; t < start + len; ++t)
      video.active[static_cast<std::size_t>(t - 1) * K + k] = 1;
  }

  // Clip feature = mean of active-class prototypes (background prototype for
  // empty clips) + isotropic noise.
  const double* background = prototypes.data() + static_cast<std::size_t>(K) * D;
  std::vector<double> base(D);
  for (int t = 1; t <= T; ++t) {
    int n_active = 0;
    std::fill(base.begin(), base.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      if (!video.is_active(t, k)) continue;
      ++n_active;
      const double* proto = prototypes.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) base[d] += proto[d];
    }
    double* out = video.features.data() + static_cast<std::size_t>(t - 1) * D;
    for (int d = 0; d < D; ++d) {
      const double mean = n_active > 0 ? base[d] / n_active : background[d];
      out[d] = mean + cfg.feature_noise_sigma * rng.normal();
    }
  }

  video.derive_video_labels();
  return video;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();

  // Class prototypes (plus one background prototype) drawn once per corpus.
  const std::size_t proto_count =
      static_cast<std::size_t>(config.num_classes + 1) * config.feature_dim;
  std::vector<double> prototypes(proto_count);
  Rng proto_rng(derive_seed(config.seed, kStreamPrototypes));
  for (auto& v : prototypes) v = proto_rng.normal();

  auto [train_ids, test_ids] = train_test_split(config.seed, config.num_videos);

  Corpus corpus;
  corpus.config = config;
  corpus.train.reserve(train_ids.size());
  corpus.test.reserve(test_ids.size());
  for (int id : train_ids)
    corpus.train.push_back(generate_video(config, id, prototypes));
  for (int id : test_ids)
    corpus.test.push_back(generate_video(config, id, prototypes));
  return corpus;
}

ClipSample trim_clip(const LongVideo& video, int t) {
  if (t < 1 || t > video.clips)
    throw InputError("clip position " + std::to_string(t) +
                     " out of range [1, " + std::to_string(video.clips) + "]");
  ClipSample sample;
  sample.video_id = video.video_id;
  sample.position = t;
  sample.features = video.clip_features(t);
  sample.clean_labels = video.clip_labels(t);
  sample.weak_labels = &video.video_labels;
  return sample;
}

double noise_rate(std::span<const LongVideo> videos) {
  if (videos.empty()) throw InputError("noise_rate: empty corpus");
  std::int64_t noisy = 0;
  std::int64_t total = 0;
  for (const auto& video : videos) {
    for (int k = 0; k < video.num_classes; ++k) {
      if (!video.video_labels[k]) continue;
      for (int t = 1; t <= video.clips; ++t) {
        ++total;
        if (!video.is_active(t, k)) ++noisy;
      }
    }
  }
  if (total == 0) throw InputError("noise_rate: corpus has no positive labels");
  return static_cast<double>(noisy) / static_cast<double>(total);
}

double noise_rate(const Corpus& corpus) {
  std::vector<LongVideo> all;
  all.reserve(corpus.total_videos());
  all.insert(all.end(), corpus.train.begin(), corpus.train.end());
  all.insert(all.end(), corpus.test.begin(), corpus.test.end());
  return noise_rate(std::span<const LongVideo>(all));
}

namespace {

void append_video_record(std::string& out, const LongVideo& v) {
  out += "{\"video_id\":";
  out += std::to_string(v.video_id);
  out += ",\"T\":";
  out += std::to_string(v.clips);
  out += ",\"K\":";
  out += std::to_string(v.num_classes);
  out += ",\"feature_dim\":";
  out += std::to_string(v.feature_dim);
  out += ",\"clips\":[";
  for (int t = 1; t <= v.clips; ++t) {
    if (t > 1) out += ',';
    append_g9_array(out, v.clip_features(t));
  }
  out += "],\"active\":[";
  for (int t = 1; t <= v.clips; ++t) {
    if (t > 1) out += ',';
    out += '[';
    bool first = true;
    for (int k = 0; k < v.num_classes; ++k) {
      if (!v.is_active(t, k)) continue;
      if (!first) out += ',';
      out += std::to_string(k);
      first = false;
    }
    out += ']';
  }
  out += "]}";
}

}  // namespace

void write_corpus(std::ostream& out, const Corpus& corpus) {
  const CorpusConfig& c = corpus.config;
  std::string header = "{\"format\":\"adafocus-corpus-v1\",\"num_videos\":" +
                       std::to_string(c.num_videos) +
                       ",\"clips_per_video\":" + std::to_string(c.clips_per_video) +
                       ",\"num_classes\":" + std::to_string(c.num_classes) +
                       ",\"feature_dim\":" + std::to_string(c.feature_dim) +
                       ",\"actions_per_video\":[" + std::to_string(c.actions_min) +
                       "," + std::to_string(c.actions_max) +
                       "],\"interval_length\":[" + std::to_string(c.interval_min) +
                       "," + std::to_string(c.interval_max) +
                       "],\"feature_noise_sigma\":" + fmt_g9(c.feature_noise_sigma) +
                       ",\"seed\":" + std::to_string(c.seed) + "}";
  out << header << '\n';

  // Records in ascending video id regardless of split; readers recover the
  // split from the header seed.
  std::vector<const LongVideo*> ordered;
  ordered.reserve(corpus.total_videos());
  for (const auto& v : corpus.train) ordered.push_back(&v);
  for (const auto& v : corpus.test) ordered.push_back(&v);
  std::sort(ordered.begin(), ordered.end(),
            [](const LongVideo* a, const LongVideo* b) {
              return a->video_id < b->video_id;
            });
  std::string line;
  for (const LongVideo* v : ordered) {
    line.clear();
    append_video_record(line, *v);
    out << line << '\n';
  }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_corpus(out, corpus);
  if (!out) throw InputError("write failed: " + path);
}

Corpus read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("corpus file: missing header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corpus header: ") + e.what());
  }

  Corpus corpus;
  try {
    CorpusConfig& c = corpus.config;
    c.num_videos = header.at("num_videos").get<int>();
    c.clips_per_video = header.at("clips_per_video").get<int>();
    c.num_classes = header.at("num_classes").get<int>();
    c.feature_dim = header.at("feature_dim").get<int>();
    c.actions_min = header.at("actions_per_video").at(0).get<int>();
    c.actions_max = header.at("actions_per_video").at(1).get<int>();
    c.interval_min = header.at("interval_length").at(0).get<int>();
    c.interval_max = header.at("interval_length").at(1).get<int>();
    c.feature_noise_sigma = header.at("feature_noise_sigma").get<double>();
    c.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corpus header: ") + e.what());
  }
  corpus.config.validate();

  auto [train_ids, test_ids] =
      train_test_split(corpus.config.seed, corpus.config.num_videos);
  std::vector<bool> in_train(corpus.config.num_videos, false);
  for (int id : train_ids) in_train[id] = true;

  int records = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("corpus record: ") + e.what());
    }
    LongVideo v;
    try {
      v.video_id = rec.at("video_id").get<int>();
      v.clips = rec.at("T").get<int>();
      v.num_classes = rec.at("K").get<int>();
      v.feature_dim = rec.at("feature_dim").get<int>();
      const auto& clips = rec.at("clips");
      const auto& active = rec.at("active");
      if (static_cast<int>(clips.size()) != v.clips ||
          static_cast<int>(active.size()) != v.clips)
        throw InputError("corpus record: clip count mismatch");
      v.features.reserve(static_cast<std::size_t>(v.clips) * v.feature_dim);
      for (const auto& clip : clips) {
        if (static_cast<int>(clip.size()) != v.feature_dim)
          throw InputError("corpus record: feature_dim mismatch");
        for (const auto& x : clip) v.features.push_back(x.get<double>());
      }
      v.active.assign(static_cast<std::size_t>(v.clips) * v.num_classes, 0);
      for (int t = 1; t <= v.clips; ++t) {
        for (const auto& kj : active.at(t - 1)) {
          const int k = kj.get<int>();
          if (k < 0 || k >= v.num_classes)
            throw InputError("corpus record: class index out of range");
          v.active[static_cast<std::size_t>(t - 1) * v.num_classes + k] = 1;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("corpus record: ") + e.what());
    }
    if (v.clips != corpus.config.clips_per_video ||
        v.num_classes != corpus.config.num_classes ||
        v.feature_dim != corpus.config.feature_dim)
      throw InputError("corpus record: shape disagrees with header");
    if (v.video_id < 0 || v.video_id >= corpus.config.num_videos)
      throw InputError("corpus record: video_id out of range");
    v.derive_video_labels();
    if (in_train[v.video_id])
      corpus.train.push_back(std::move(v));
    else
      corpus.test.push_back(std::move(v));
    ++records;
  }
  if (records != corpus.config.num_videos)
    throw InputError("corpus file: expected " +
                     std::to_string(corpus.config.num_videos) + " records, got " +
                     std::to_string(records));
  return corpus;
}

Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return read_corpus(in);
}

}  // namespace adafocus
