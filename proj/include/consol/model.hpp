#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consol/autodiff.hpp"

namespace consol {

// Fully-connected tanh network mapping (z, t) to a predicted excess pore
// pressure. The output layer is affine (no activation). For inverse problems
// an extra trainable scalar w_cv carries the log of the coefficient of
// consolidation.
struct NetworkParams {
  std::vector<int> layer_sizes;              // [2, u_1, ..., u_L, 1]
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;   // per layer
  std::optional<double> w_cv;
  std::uint64_t seed = 0;  // seed used at initialization (metadata)

  std::size_t parameter_count() const;  // network weights + biases, excl. w_cv
  // Flattening order: per layer, weights row-major then that layer's biases.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
  void validate() const;
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic for a fixed seed; the draw order is layer by layer,
// row-major.
NetworkParams init_network(const std::vector<int>& layer_sizes,
                           std::uint64_t seed);

double forward(const NetworkParams& params, double z, double t);

// c_vt = exp(w_cv); strictly positive for every finite weight.
double cv_from_weight(double w_cv);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t dim, double lr)
      : m(dim, 0.0), v(dim, 0.0), learning_rate(lr) {}
};

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> gradient);

// Emits the network computation onto a tape under construction, creating
// parameter slots in flatten() order. Returns the output variable.
ad::Var emit_network(ad::TapeBuilder& tb, const std::vector<int>& layer_sizes,
                     ad::Var z, ad::Var t);

// Tape over inputs (z, t) whose parameter slots match flatten() order.
// Replaying the value channel reproduces forward() bit for bit.
ad::Tape build_network_tape(const std::vector<int>& layer_sizes);

// JSON model file; round-trips parameters bit-exactly.
std::string model_json(const NetworkParams& params);
NetworkParams parse_model_json(const std::string& text);
void save_model(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_model(const std::filesystem::path& path);

}  // namespace consol
