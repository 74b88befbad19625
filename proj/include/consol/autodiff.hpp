#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace consol::ad {

// Width of the blocked evaluation path (8 doubles = one AVX-512 register).
inline constexpr int kBlockLanes = 8;

// Scalar value together with its exact derivatives w.r.t. the registered
// differentiable inputs: first order in z and t, second order in z.
struct DerivativeBundle {
  double value = 0.0;
  double d_dz = 0.0;
  double d_dt = 0.0;
  double d2_dz2 = 0.0;
};

// Opaque handle to a recorded quantity.
struct Var {
  std::uint32_t ref = 0;
};

class Tape;

// Records a computation as a sequence of elementary operations over
// registered inputs, trainable parameters and constants. The supported
// primitive set is fixed: {+, -, *, affine combination, tanh}.
//
// Input derivatives are obtained by forward-propagating truncated Taylor
// coefficients (value, d/dz, d/dt, d^2/dz^2) through every operation, and
// that forward propagation is itself what the reverse sweep differentiates:
// one backward pass yields the gradient w.r.t. all parameters of any scalar
// assembled from the four bundle components.
class TapeBuilder {
 public:
  // Registers a differentiable input. seed_dz/seed_dt are the input's own
  // first-order Taylor coefficients, e.g. (1, 0) for z and (0, 1) for t.
  Var input(double seed_dz, double seed_dt);
  // Registers a trainable parameter slot (bound to a value at evaluation).
  Var param();
  Var constant(double value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var tanh(Var a);
  // bias + sum_i coefs[i] * xs[i], accumulated in ascending i.
  Var affine(std::span<const Var> coefs, std::span<const Var> xs, Var bias);

  Tape finish(Var output) &&;

  std::size_t num_inputs() const { return input_seeds_.size(); }
  std::size_t num_params() const { return n_params_; }

 private:
  friend class Tape;
  void check(Var v) const;

  std::vector<std::uint32_t> ops_;  // encoded nodes, see autodiff.cpp
  std::vector<std::uint32_t> args_;
  std::vector<double> consts_;
  std::vector<std::pair<double, double>> input_seeds_;
  std::uint32_t n_params_ = 0;
  std::uint32_t n_nodes_ = 0;
};

// Scratch buffers for one evaluation. A finished tape is immutable; to
// evaluate from several threads give each thread its own workspace.
class Workspace {
 public:
  Workspace() = default;

 private:
  friend class Tape;
  std::vector<DerivativeBundle> val_, adj_;
  std::vector<double> sval_, sadj_;
  std::vector<double> bval_, badj_;  // blocked: 4 channels x kBlockLanes/node
};

class Tape {
 public:
  // Forward pass propagating derivative coefficients; returns the output
  // bundle (value, dp/dz, dp/dt, d^2p/dz^2), exact to machine precision.
  DerivativeBundle eval(Workspace& ws, std::span<const double> inputs,
                        std::span<const double> params) const;

  // Reverse sweep for the scalar  seed.value * out.value + seed.d_dz *
  // out.d_dz + seed.d_dt * out.d_dt + seed.d2_dz2 * out.d2_dz2; accumulates
  // d(scalar)/d(param) into grad. Requires a preceding eval() on `ws` with
  // the same params.
  void backward(Workspace& ws, const DerivativeBundle& seed,
                std::span<const double> params, std::span<double> grad) const;

  // Value-only fast path (no derivative coefficients); a quarter of the
  // arithmetic of eval(). Values agree with eval().value to the last ulp
  // (exactly, unless the compiler fuses multiply-adds differently between
  // the two loop shapes).
  double eval_value(Workspace& ws, std::span<const double> inputs,
                    std::span<const double> params) const;
  void backward_value(Workspace& ws, double seed,
                      std::span<const double> params,
                      std::span<double> grad) const;

  // Convenience wrapper: gradient w.r.t. every parameter of the scalar
  // <seed, bundle>. Parameters the output does not depend on get exactly 0.
  std::vector<double> parameter_gradient(std::span<const double> inputs,
                                         std::span<const double> params,
                                         const DerivativeBundle& seed) const;

  // Blocked evaluation: kBlockLanes points sweep the tape together so the
  // affine kernels run one fused multiply-add per SIMD lane. Per-point
  // bundles match eval() to the last ulp; gradient contributions meet in
  // `grad` in a different (still fixed) order than point-by-point backward.
  // `inputs` is lane-major per input slot (inputs[slot * kBlockLanes + lane])
  // and must cover all lanes; pad unused lanes with any finite value and
  // zero seeds.
  void eval_block(Workspace& ws, std::span<const double> inputs,
                  std::span<const double> params,
                  DerivativeBundle out[/*kBlockLanes*/]) const;
  void backward_block(Workspace& ws,
                      const DerivativeBundle seeds[/*kBlockLanes*/],
                      std::span<const double> params,
                      std::span<double> grad) const;

  std::size_t num_inputs() const { return input_seeds_.size(); }
  std::size_t num_params() const { return n_params_; }
  std::size_t num_nodes() const { return n_nodes_; }

 private:
  friend class TapeBuilder;
  std::vector<std::uint32_t> ops_;
  std::vector<std::uint32_t> args_;
  std::vector<double> consts_;
  std::vector<std::pair<double, double>> input_seeds_;
  std::uint32_t n_params_ = 0;
  std::uint32_t n_nodes_ = 0;
  std::uint32_t output_ = 0;
};

// Records the computation expressed by `f` and returns the finished tape.
Tape record(const std::function<Var(TapeBuilder&)>& f);

}  // namespace consol::ad
