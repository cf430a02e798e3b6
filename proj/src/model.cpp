#include "adafocus/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "adafocus/errors.hpp"
#include "adafocus/rng.hpp"
#include "adafocus/textio.hpp"

namespace adafocus {

Model Model::init(int feature_dim, int num_classes, int hidden,
                  std::uint64_t seed) {
  if (feature_dim < 1 || num_classes < 1 || hidden < 0)
    throw ConfigError("model dimensions must be positive");

  Model m;
  m.feature_dim_ = feature_dim;
  m.num_classes_ = num_classes;
  m.hidden_ = hidden;
  m.seed_ = seed;

  Rng rng(derive_seed(seed, /*stream=*/0xADAF));
  if (hidden == 0) {
    m.params_.assign(static_cast<std::size_t>(num_classes) * feature_dim +
                         num_classes,
                     0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (std::size_t i = 0;
         i < static_cast<std::size_t>(num_classes) * feature_dim; ++i)
      m.params_[i] = scale * rng.normal();
  } else {
    const std::size_t n1 = static_cast<std::size_t>(hidden) * feature_dim;
    const std::size_t n2 = static_cast<std::size_t>(num_classes) * hidden;
    m.params_.assign(n1 + hidden + n2 + num_classes, 0.0);
    const double scale1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (std::size_t i = 0; i < n1; ++i) m.params_[i] = scale1 * rng.normal();
    const double scale2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    double* w2 = m.params_.data() + n1 + hidden;
    for (std::size_t i = 0; i < n2; ++i) w2[i] = scale2 * rng.normal();
  }
  return m;
}

std::vector<double> Model::logits(std::span<const double> features) const {
  if (static_cast<int>(features.size()) != feature_dim_)
    throw InputError("forward: feature_dim mismatch");
  for (double x : features)
    if (!std::isfinite(x)) throw InputError("forward: non-finite input");

  std::vector<double> z(num_classes_, 0.0);
  if (hidden_ == 0) {
    const double* w = params_.data();
    const double* b = params_.data() +
                      static_cast<std::size_t>(num_classes_) * feature_dim_;
    for (int k = 0; k < num_classes_; ++k) {
      double acc = b[k];
      const double* row = w + static_cast<std::size_t>(k) * feature_dim_;
      for (int d = 0; d < feature_dim_; ++d) acc += row[d] * features[d];
      z[k] = acc;
    }
  } else {
    const std::size_t n1 = static_cast<std::size_t>(hidden_) * feature_dim_;
    const double* w1 = params_.data();
    const double* b1 = params_.data() + n1;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + static_cast<std::size_t>(num_classes_) * hidden_;
    std::vector<double> h(hidden_);
    for (int i = 0; i < hidden_; ++i) {
      double acc = b1[i];
      const double* row = w1 + static_cast<std::size_t>(i) * feature_dim_;
      for (int d = 0; d < feature_dim_; ++d) acc += row[d] * features[d];
      h[i] = acc > 0.0 ? acc : 0.0;
    }
    for (int k = 0; k < num_classes_; ++k) {
      double acc = b2[k];
      const double* row = w2 + static_cast<std::size_t>(k) * hidden_;
      for (int i = 0; i < hidden_; ++i) acc += row[i] * h[i];
      z[k] = acc;
    }
  }
  return z;
}

std::vector<double> Model::forward(std::span<const double> features) const {
  std::vector<double> z = logits(features);
  for (double& v : z) v = clamped_sigmoid(v);
  return z;
}

std::vector<double> Model::backward(std::span<const double> features,
                                    std::span<const double> grad_coeffs) const {
  if (static_cast<int>(features.size()) != feature_dim_)
    throw InputError("backward: feature_dim mismatch");
  if (static_cast<int>(grad_coeffs.size()) != num_classes_)
    throw InputError("backward: grad_coeffs size mismatch");

  std::vector<double> grad(params_.size(), 0.0);
  if (hidden_ == 0) {
    double* gw = grad.data();
    double* gb = grad.data() +
                 static_cast<std::size_t>(num_classes_) * feature_dim_;
    for (int k = 0; k < num_classes_; ++k) {
      const double c = grad_coeffs[k];
      gb[k] = c;
      double* row = gw + static_cast<std::size_t>(k) * feature_dim_;
      for (int d = 0; d < feature_dim_; ++d) row[d] = c * features[d];
    }
  } else {
    const std::size_t n1 = static_cast<std::size_t>(hidden_) * feature_dim_;
    const double* w1 = params_.data();
    const double* b1 = params_.data() + n1;
    const double* w2 = b1 + hidden_;

    std::vector<double> pre(hidden_);
    for (int i = 0; i < hidden_; ++i) {
      double acc = b1[i];
      const double* row = w1 + static_cast<std::size_t>(i) * feature_dim_;
      for (int d = 0; d < feature_dim_; ++d) acc += row[d] * features[d];
      pre[i] = acc;
    }

    double* gw1 = grad.data();
    double* gb1 = grad.data() + n1;
    double* gw2 = gb1 + hidden_;
    double* gb2 = gw2 + static_cast<std::size_t>(num_classes_) * hidden_;

    for (int k = 0; k < num_classes_; ++k) {
      const double c = grad_coeffs[k];
      gb2[k] = c;
      double* row = gw2 + static_cast<std::size_t>(k) * hidden_;
      for (int i = 0; i < hidden_; ++i)
        row[i] = c * (pre[i] > 0.0 ? pre[i] : 0.0);
    }
    for (int i = 0; i < hidden_; ++i) {
      if (pre[i] <= 0.0) continue;  // rectifier inactive: no gradient
      double dh = 0.0;
      for (int k = 0; k < num_classes_; ++k)
        dh += grad_coeffs[k] * w2[static_cast<std::size_t>(k) * hidden_ + i];
      gb1[i] = dh;
      double* row = gw1 + static_cast<std::size_t>(i) * feature_dim_;
      for (int d = 0; d < feature_dim_; ++d) row[d] = dh * features[d];
    }
  }
  return grad;
}

double grad_check(const Model& model, std::span<const double> features,
                  const LossFn& loss) {
  const auto [base_value, coeffs] = loss(model.forward(features));
  const std::vector<double> analytic = model.backward(features, coeffs);

  constexpr double h = 1e-6;
  Model probe = model;
  auto params = probe.params();
  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss(probe.forward(features)).first;
    params[i] = saved - h;
    const double down = loss(probe.forward(features)).first;
    params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(fd));
    max_rel = std::max(max_rel, std::abs(analytic[i] - fd) / denom);
  }
  return max_rel;
}

namespace {

void append_params(std::string& out, const char* name,
                   std::span<const double> values) {
  out += '"';
  out += name;
  out += "\":";
  append_g9_array(out, values);
}

}  // namespace

std::string checkpoint_to_string(const Model& model) {
  const int D = model.feature_dim();
  const int K = model.num_classes();
  const int H = model.hidden();
  std::span<const double> p = model.params();

  std::string out = "{\"format\":\"adafocus-model-v1\",\"kind\":\"";
  out += H == 0 ? "linear" : "mlp1";
  out += "\",\"feature_dim\":" + std::to_string(D) +
         ",\"num_classes\":" + std::to_string(K) +
         ",\"hidden\":" + std::to_string(H) +
         ",\"seed\":" + std::to_string(model.seed()) + ",";
  if (H == 0) {
    append_params(out, "w", p.subspan(0, static_cast<std::size_t>(K) * D));
    out += ',';
    append_params(out, "b", p.subspan(static_cast<std::size_t>(K) * D, K));
  } else {
    const std::size_t n1 = static_cast<std::size_t>(H) * D;
    const std::size_t n2 = static_cast<std::size_t>(K) * H;
    append_params(out, "w1", p.subspan(0, n1));
    out += ',';
    append_params(out, "b1", p.subspan(n1, H));
    out += ',';
    append_params(out, "w2", p.subspan(n1 + H, n2));
    out += ',';
    append_params(out, "b2", p.subspan(n1 + H + n2, K));
  }
  out += "}\n";
  return out;
}

void write_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << checkpoint_to_string(model);
  if (!out) throw InputError("write failed: " + path);
}

Model read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
  try {
    const int D = j.at("feature_dim").get<int>();
    const int K = j.at("num_classes").get<int>();
    const int H = j.at("hidden").get<int>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    Model m = Model::init(D, K, H, seed);
    auto params = m.params();
    auto load = [&](const char* name, std::size_t offset, std::size_t count) {
      const auto& arr = j.at(name);
      if (arr.size() != count)
        throw InputError(std::string("checkpoint: bad size for ") + name);
      for (std::size_t i = 0; i < count; ++i)
        params[offset + i] = arr.at(i).get<double>();
    };
    if (H == 0) {
      load("w", 0, static_cast<std::size_t>(K) * D);
      load("b", static_cast<std::size_t>(K) * D, K);
    } else {
      const std::size_t n1 = static_cast<std::size_t>(H) * D;
      const std::size_t n2 = static_cast<std::size_t>(K) * H;
      load("w1", 0, n1);
      load("b1", n1, H);
      load("w2", n1 + H, n2);
      load("b2", n1 + H + n2, K);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace adafocus
