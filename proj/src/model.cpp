#include "consol/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "consol/fastmath.hpp"
#include "consol/rng.hpp"
#include "consol/textio.hpp"

namespace consol {

namespace {

void check_layer_sizes(const std::vector<int>& ls) {
  if (ls.size() < 2)
    throw std::invalid_argument("network: need at least input and output layers");
  if (ls.front() != 2)
    throw std::invalid_argument("network: first layer must accept 2 inputs (z, t)");
  if (ls.back() != 1)
    throw std::invalid_argument("network: last layer must emit 1 output");
  for (int u : ls)
    if (u < 1) throw std::invalid_argument("network: layer sizes must be >= 1");
}

}  // namespace

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<std::size_t>(layer_sizes[l + 1]) * layer_sizes[l] +
         layer_sizes[l + 1];
  return n;
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].begin(), weights[l].end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

void NetworkParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw std::invalid_argument("network: flattened parameter size mismatch");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (double& w : weights[l]) w = values[pos++];
    for (double& b : biases[l]) b = values[pos++];
  }
}

void NetworkParams::validate() const {
  check_layer_sizes(layer_sizes);
  if (weights.size() + 1 != layer_sizes.size() || biases.size() != weights.size())
    throw std::invalid_argument("network: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const std::size_t n_out = layer_sizes[l + 1], n_in = layer_sizes[l];
    if (weights[l].size() != n_out * n_in || biases[l].size() != n_out)
      throw std::invalid_argument("network: layer shape mismatch");
    for (double w : weights[l])
      if (!std::isfinite(w)) throw std::invalid_argument("network: non-finite weight");
    for (double b : biases[l])
      if (!std::isfinite(b)) throw std::invalid_argument("network: non-finite bias");
  }
}

NetworkParams init_network(const std::vector<int>& layer_sizes,
                           std::uint64_t seed) {
  check_layer_sizes(layer_sizes);
  NetworkParams p;
  p.layer_sizes = layer_sizes;
  p.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int n_in = layer_sizes[l], n_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    std::vector<double> w(static_cast<std::size_t>(n_out) * n_in);
    for (double& wi : w) wi = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(n_out, 0.0);
  }
  return p;
}

double forward(const NetworkParams& p, double z, double t) {
  // Accumulation order (bias first, then ascending input index) matches the
  // tape's affine nodes, so both paths agree to the last ulp.
  std::vector<double> cur = {z, t};
  std::vector<double> next;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const int n_in = p.layer_sizes[l], n_out = p.layer_sizes[l + 1];
    const bool hidden = l + 1 < p.weights.size();
    next.assign(n_out, 0.0);
    const double* w = p.weights[l].data();
    for (int u = 0; u < n_out; ++u) {
      double acc = p.biases[l][u];
      const double* row = w + static_cast<std::size_t>(u) * n_in;
      for (int i = 0; i < n_in; ++i) acc += row[i] * cur[i];
      next[u] = hidden ? fast_tanh(acc) : acc;
    }
    cur.swap(next);
  }
  return cur[0];
}

double cv_from_weight(double w_cv) {
  // The exponential exists to keep the coefficient positive; do not let
  // underflow defeat that for extreme weights.
  return std::max(std::exp(w_cv), std::numeric_limits<double>::min());
}

void adam_step(AdamState& s, std::span<double> params,
               std::span<const double> gradient) {
  if (params.size() != s.m.size() || gradient.size() != s.m.size())
    throw std::invalid_argument("adam_step: dimension mismatch");
  s.step += 1;
  const double b1t = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double b2t = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / b1t;
    const double v_hat = s.v[i] / b2t;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

ad::Var emit_network(ad::TapeBuilder& tb, const std::vector<int>& layer_sizes,
                     ad::Var z, ad::Var t) {
  check_layer_sizes(layer_sizes);
  std::vector<ad::Var> cur = {z, t};
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int n_in = layer_sizes[l], n_out = layer_sizes[l + 1];
    const bool hidden = l + 2 < layer_sizes.size();
    // Parameter slots in flatten() order: all weights row-major, then biases.
    std::vector<ad::Var> w(static_cast<std::size_t>(n_out) * n_in);
    for (auto& v : w) v = tb.param();
    std::vector<ad::Var> b(n_out);
    for (auto& v : b) v = tb.param();
    // All affines first, then all activations: keeps each layer's outputs on
    // consecutive node ids so the tape can pack the next layer's rows.
    std::vector<ad::Var> pre(n_out);
    for (int u = 0; u < n_out; ++u) {
      std::span<const ad::Var> row(w.data() + static_cast<std::size_t>(u) * n_in,
                                   static_cast<std::size_t>(n_in));
      pre[u] = tb.affine(row, cur, b[u]);
    }
    std::vector<ad::Var> next(n_out);
    for (int u = 0; u < n_out; ++u)
      next[u] = hidden ? tb.tanh(pre[u]) : pre[u];
    cur = std::move(next);
  }
  return cur[0];
}

ad::Tape build_network_tape(const std::vector<int>& layer_sizes) {
  ad::TapeBuilder tb;
  ad::Var z = tb.input(1.0, 0.0);
  ad::Var t = tb.input(0.0, 1.0);
  ad::Var out = emit_network(tb, layer_sizes, z, t);
  return std::move(tb).finish(out);
}

std::string model_json(const NetworkParams& p) {
  nlohmann::json j;
  j["layer_sizes"] = p.layer_sizes;
  j["weights"] = p.weights;
  j["biases"] = p.biases;
  if (p.w_cv)
    j["w_cv"] = *p.w_cv;
  else
    j["w_cv"] = nullptr;
  j["seed"] = p.seed;
  j["metadata"] = {{"initialization", "glorot_uniform"}, {"activation", "tanh"}};
  return j.dump(2) + "\n";
}

NetworkParams parse_model_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  NetworkParams p;
  p.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (j.contains("w_cv") && !j.at("w_cv").is_null())
    p.w_cv = j.at("w_cv").get<double>();
  p.seed = j.value("seed", 0ull);
  p.validate();
  return p;
}

void save_model(const std::filesystem::path& path, const NetworkParams& p) {
  write_file_atomic(path, model_json(p));
}

NetworkParams load_model(const std::filesystem::path& path) {
  return parse_model_json(read_file(path));
}

}  // namespace consol
