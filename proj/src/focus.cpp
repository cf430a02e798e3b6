#include "adafocus/focus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adafocus/errors.hpp"
#include "adafocus/textio.hpp"

namespace adafocus {

const char* to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::exponential: return "exponential";
    case WeightKind::constant: return "constant";
    case WeightKind::linear: return "linear";
    case WeightKind::logarithmic: return "logarithmic";
  }
  return "exponential";
}

WeightKind weight_kind_from_string(const std::string& name) {
  if (name == "exponential") return WeightKind::exponential;
  if (name == "constant") return WeightKind::constant;
  if (name == "linear") return WeightKind::linear;
  if (name == "logarithmic") return WeightKind::logarithmic;
  throw ConfigError("unknown weight_kind: " + name);
}

void FocusConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0))
    throw ConfigError("theta must be in (0, 1)");
  if (!(alpha >= 1.0)) throw ConfigError("alpha must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup_fraction must be in [0, 1)");
}

void SaliencyTable::ensure_video(int video_id,
                                 std::span<const std::uint8_t> video_labels) {
  for (int k = 0; k < static_cast<int>(video_labels.size()); ++k) {
    if (!video_labels[k]) continue;
    entries_.try_emplace(key(video_id, k));
  }
}

void SaliencyTable::set_entry(int video_id, int class_id, SaliencyEntry entry) {
  entries_[key(video_id, class_id)] = entry;
}

bool SaliencyTable::has_entry(int video_id, int class_id) const {
  return entries_.count(key(video_id, class_id)) != 0;
}

const SaliencyEntry& SaliencyTable::at(int video_id, int class_id) const {
  const auto it = entries_.find(key(video_id, class_id));
  if (it == entries_.end())
    throw StateError("saliency entry missing for video " +
                     std::to_string(video_id) + ", class " +
                     std::to_string(class_id));
  return it->second;
}

void SaliencyTable::update_online(int video_id, int t,
                                  std::span<const double> scores,
                                  std::span<const std::uint8_t> video_labels) {
  for (int k = 0; k < static_cast<int>(video_labels.size()); ++k) {
    if (!video_labels[k]) continue;
    const auto it = entries_.find(key(video_id, k));
    if (it == entries_.end())
      throw StateError("update_online: entry missing for video " +
                       std::to_string(video_id) + ", class " +
                       std::to_string(k) + " (no initialization policy)");
    SaliencyEntry& e = it->second;
    if (scores[k] > e.spike_a) {
      e.spike_a = scores[k];
      e.lambda = t;
    }
  }
}

std::vector<SaliencyTable::Row> SaliencyTable::rows_sorted() const {
  std::vector<Row> rows;
  rows.reserve(entries_.size());
  for (const auto& [k, entry] : entries_)
    rows.push_back(Row{static_cast<int>(k >> 32),
                       static_cast<int>(k & 0xffffffffULL), entry});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.video_id != b.video_id ? a.video_id < b.video_id
                                    : a.class_id < b.class_id;
  });
  return rows;
}

std::vector<ClassEstimate> estimate_naive(
    std::span<const double> scores, int clips, int num_classes,
    std::span<const std::uint8_t> video_labels) {
  if (clips < 1 || num_classes < 1 ||
      scores.size() != static_cast<std::size_t>(clips) * num_classes)
    throw InputError("estimate_naive: empty or misshapen score matrix");

  std::vector<ClassEstimate> out;
  for (int k = 0; k < num_classes; ++k) {
    if (!video_labels[k]) continue;
    ClassEstimate est;
    est.class_id = k;
    est.lambda = 1;
    est.spike_a = scores[k];
    for (int t = 2; t <= clips; ++t) {
      const double p = scores[static_cast<std::size_t>(t - 1) * num_classes + k];
      if (p > est.spike_a) {  // strict: earliest position wins ties
        est.spike_a = p;
        est.lambda = t;
      }
    }
    out.push_back(est);
  }
  if (out.empty()) throw InputError("estimate_naive: no positive class");
  return out;
}

double weight_given_threshold(double p, double a_hat, const FocusConfig& cfg) {
  const double gap = p - a_hat;
  switch (cfg.weight_kind) {
    case WeightKind::exponential:
      return gap >= 0.0 ? cfg.alpha * std::exp(gap)
                        : std::exp(cfg.beta * gap);
    case WeightKind::constant: {
      constexpr double kLowerConstant = 0.75;
      return gap >= 0.0 ? cfg.alpha : kLowerConstant;
    }
    case WeightKind::linear:
      return gap >= 0.0 ? cfg.alpha * (1.0 + gap) : 1.0 * (1.0 + gap);
    case WeightKind::logarithmic: {
      constexpr double kE = 2.718281828459045235360287471353;
      return gap >= 0.0 ? cfg.alpha * std::log(kE + gap)
                        : 1.0 * std::log(kE + gap);
    }
  }
  return 1.0;
}

double weight(double p, double spike_a, const FocusConfig& cfg) {
  return weight_given_threshold(p, cfg.theta * spike_a, cfg);
}

int mask(int t, int clips, int lambda, double gamma) {
  if (lambda <= 0) return 0;  // never observed: no focusing possible yet
  const double distance = 2.0 * std::abs(t - lambda) / clips;
  return distance <= gamma ? 1 : 0;
}

NoisyLossResult loss_noisy(std::span<const double> scores,
                           std::span<const std::uint8_t> labels) {
  NoisyLossResult r;
  const int K = static_cast<int>(scores.size());
  r.grad_coeffs.resize(K);
  for (int k = 0; k < K; ++k) {
    const double p = scores[k];
    if (labels[k]) {
      r.loss_in += -std::log(p);
      r.grad_coeffs[k] = p - 1.0;
    } else {
      r.loss_out += -std::log(1.0 - p);
      r.grad_coeffs[k] = p;
    }
  }
  return r;
}

FocusLossResult loss_adafocus(std::span<const double> scores,
                              std::span<const std::uint8_t> video_labels,
                              const SaliencyTable& table, int video_id, int t,
                              int clips, double gamma, const FocusConfig& cfg) {
  FocusLossResult r;
  const int K = static_cast<int>(scores.size());
  r.grad_coeffs.resize(K);
  r.action_weights.assign(K, 1.0);
  r.clip_masks.assign(K, 1);

  for (int k = 0; k < K; ++k) {
    const double p = scores[k];
    if (!video_labels[k]) {
      r.loss_out += -std::log(1.0 - p);
      r.grad_coeffs[k] = p;
      continue;
    }

    double w = 1.0;
    int m = 1;
    if (cfg.use_action_focus || cfg.use_clip_focus) {
      const SaliencyEntry& entry = table.at(video_id, k);
      if (entry.lambda == 0) {
        ++r.unset_entries;  // weight falls back to 1, mask to 0
        if (cfg.use_clip_focus) m = 0;
      } else {
        if (cfg.use_action_focus) w = weight(p, entry.spike_a, cfg);
        if (cfg.use_clip_focus) m = mask(t, clips, entry.lambda, gamma);
      }
    }
    r.action_weights[k] = w;
    r.clip_masks[k] = m;

    // Coefficients are constants of the step: no gradient flows through
    // the weight or the mask.
    const double coeff = m != 0 ? w : 0.0;
    r.loss_in += coeff * -std::log(p);
    r.grad_coeffs[k] = coeff * (p - 1.0);
  }
  return r;
}

void write_table(std::ostream& out, const SaliencyTable& table) {
  out << "video_id,class,lambda,spike_a\n";
  for (const auto& row : table.rows_sorted())
    out << row.video_id << ',' << row.class_id << ',' << row.entry.lambda
        << ',' << fmt_g9(row.entry.spike_a) << '\n';
}

void write_table_file(const std::string& path, const SaliencyTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path);
  write_table(out, table);
  if (!out) throw InputError("write failed: " + path);
}

SaliencyTable read_table_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open table dump: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "video_id,class,lambda,spike_a")
    throw InputError("table dump: bad header");
  SaliencyTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int video_id = 0, class_id = 0, lambda = 0;
    double spike_a = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> video_id >> c1 >> class_id >> c2 >> lambda >> c3 >> spike_a) ||
        c1 != ',' || c2 != ',' || c3 != ',')
      throw InputError("table dump: bad row: " + line);
    table.set_entry(video_id, class_id, SaliencyEntry{lambda, spike_a});
  }
  return table;
}

}  // namespace adafocus
