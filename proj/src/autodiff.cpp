#include "consol/autodiff.hpp"

#include <cmath>

#include "consol/fastmath.hpp"
#include <stdexcept>

namespace consol::ad {

namespace {

using B = DerivativeBundle;

// Node encoding: three words per node in ops_: {opcode, a, b}.
//   Input:        a = input slot
//   Add/Sub/Mul:  a, b = operand refs
//   Tanh:         a = operand ref
//   Affine*:      a = offset into args_, b = term count n;
//                 args_[a] = bias ref, then n (coef ref, x ref) pairs.
// AffineScalar is an Affine whose bias and coefs are all parameter/constant
// leaves (the MLP case); it propagates coefficients as plain scalars.
enum : std::uint32_t {
  kOpInput = 0,
  kOpAdd,
  kOpSub,
  kOpMul,
  kOpTanh,
  kOpAffine,
  kOpAffineScalar,
  // AffineScalar whose coefs are consecutive parameter slots and whose xs
  // are consecutive nodes (the MLP layer pattern); args_[a] = {bias ref,
  // first param slot, first node index}. Rewritten in finish().
  kOpAffinePacked,
};

constexpr std::uint32_t kTagShift = 30;
constexpr std::uint32_t kIndexMask = (1u << kTagShift) - 1;
enum : std::uint32_t { kTagNode = 0, kTagParam = 1, kTagConst = 2 };

inline std::uint32_t make_ref(std::uint32_t tag, std::uint32_t index) {
  return (tag << kTagShift) | index;
}
inline std::uint32_t ref_tag(std::uint32_t r) { return r >> kTagShift; }
inline std::uint32_t ref_index(std::uint32_t r) { return r & kIndexMask; }

inline B jet_add(const B& a, const B& b) {
  return {a.value + b.value, a.d_dz + b.d_dz, a.d_dt + b.d_dt,
          a.d2_dz2 + b.d2_dz2};
}
inline B jet_sub(const B& a, const B& b) {
  return {a.value - b.value, a.d_dz - b.d_dz, a.d_dt - b.d_dt,
          a.d2_dz2 - b.d2_dz2};
}
inline B jet_mul(const B& a, const B& b) {
  return {a.value * b.value,
          a.d_dz * b.value + a.value * b.d_dz,
          a.d_dt * b.value + a.value * b.d_dt,
          a.d2_dz2 * b.value + 2.0 * a.d_dz * b.d_dz + a.value * b.d2_dz2};
}

// Adjoint of jet multiplication: contribution to one operand's adjoint given
// the result adjoint g and the *other* operand's coefficients.
inline B mul_adjoint(const B& g, const B& other) {
  return {g.value * other.value + g.d_dz * other.d_dz + g.d_dt * other.d_dt +
              g.d2_dz2 * other.d2_dz2,
          g.d_dz * other.value + 2.0 * g.d2_dz2 * other.d_dz,
          g.d_dt * other.value,
          g.d2_dz2 * other.value};
}

inline void jet_iadd(B& a, const B& b) {
  a.value += b.value;
  a.d_dz += b.d_dz;
  a.d_dt += b.d_dt;
  a.d2_dz2 += b.d2_dz2;
}

inline bool jet_zero(const B& a) {
  return a.value == 0.0 && a.d_dz == 0.0 && a.d_dt == 0.0 && a.d2_dz2 == 0.0;
}

}  // namespace

void TapeBuilder::check(Var v) const {
  const std::uint32_t tag = ref_tag(v.ref), idx = ref_index(v.ref);
  const bool ok = (tag == kTagNode && idx < n_nodes_) ||
                  (tag == kTagParam && idx < n_params_) ||
                  (tag == kTagConst && idx < consts_.size());
  if (!ok)
    throw std::invalid_argument("autodiff: variable not registered on this tape");
}

Var TapeBuilder::input(double seed_dz, double seed_dt) {
  const std::uint32_t slot = static_cast<std::uint32_t>(input_seeds_.size());
  input_seeds_.emplace_back(seed_dz, seed_dt);
  ops_.insert(ops_.end(), {kOpInput, slot, 0});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Var TapeBuilder::param() { return Var{make_ref(kTagParam, n_params_++)}; }

Var TapeBuilder::constant(double value) {
  consts_.push_back(value);
  return Var{make_ref(kTagConst, static_cast<std::uint32_t>(consts_.size() - 1))};
}

Var TapeBuilder::add(Var a, Var b) {
  check(a);
  check(b);
  ops_.insert(ops_.end(), {kOpAdd, a.ref, b.ref});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Var TapeBuilder::sub(Var a, Var b) {
  check(a);
  check(b);
  ops_.insert(ops_.end(), {kOpSub, a.ref, b.ref});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Var TapeBuilder::mul(Var a, Var b) {
  check(a);
  check(b);
  ops_.insert(ops_.end(), {kOpMul, a.ref, b.ref});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Var TapeBuilder::tanh(Var a) {
  check(a);
  ops_.insert(ops_.end(), {kOpTanh, a.ref, 0});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Var TapeBuilder::affine(std::span<const Var> coefs, std::span<const Var> xs,
                        Var bias) {
  if (coefs.size() != xs.size() || coefs.empty())
    throw std::invalid_argument("autodiff: affine needs matching, nonempty spans");
  check(bias);
  bool scalar_coefs = ref_tag(bias.ref) != kTagNode;
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    check(coefs[i]);
    check(xs[i]);
    if (ref_tag(coefs[i].ref) == kTagNode) scalar_coefs = false;
  }
  const std::uint32_t off = static_cast<std::uint32_t>(args_.size());
  args_.push_back(bias.ref);
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    args_.push_back(coefs[i].ref);
    args_.push_back(xs[i].ref);
  }
  ops_.insert(ops_.end(), {scalar_coefs ? kOpAffineScalar : kOpAffine, off,
                           static_cast<std::uint32_t>(coefs.size())});
  return Var{make_ref(kTagNode, n_nodes_++)};
}

Tape TapeBuilder::finish(Var output) && {
  check(output);
  if (ref_tag(output.ref) != kTagNode)
    throw std::invalid_argument("autodiff: tape output must be a computed node");
  // Rewrite MLP-shaped affines (consecutive param coefs over consecutive
  // operand nodes) into the packed form the hot kernels consume.
  for (std::uint32_t i = 0; i < n_nodes_; ++i) {
    if (ops_[3 * i] != kOpAffineScalar) continue;
    const std::uint32_t off = ops_[3 * i + 1], n = ops_[3 * i + 2];
    bool packable = true;
    const std::uint32_t c0 = args_[off + 1], x0 = args_[off + 2];
    if (ref_tag(c0) != kTagParam || ref_tag(x0) != kTagNode) packable = false;
    for (std::uint32_t k = 0; packable && k < n; ++k) {
      const std::uint32_t cr = args_[off + 1 + 2 * k], xr = args_[off + 2 + 2 * k];
      packable = ref_tag(cr) == kTagParam && ref_tag(xr) == kTagNode &&
                 ref_index(cr) == ref_index(c0) + k &&
                 ref_index(xr) == ref_index(x0) + k;
    }
    if (!packable) continue;
    const std::uint32_t packed_off = static_cast<std::uint32_t>(args_.size());
    args_.push_back(args_[off]);  // bias ref
    args_.push_back(ref_index(c0));
    args_.push_back(ref_index(x0));
    ops_[3 * i] = kOpAffinePacked;
    ops_[3 * i + 1] = packed_off;
  }
  Tape t;
  t.ops_ = std::move(ops_);
  t.args_ = std::move(args_);
  t.consts_ = std::move(consts_);
  t.input_seeds_ = std::move(input_seeds_);
  t.n_params_ = n_params_;
  t.n_nodes_ = n_nodes_;
  t.output_ = ref_index(output.ref);
  return t;
}

Tape record(const std::function<Var(TapeBuilder&)>& f) {
  TapeBuilder tb;
  Var out = f(tb);
  return std::move(tb).finish(out);
}

DerivativeBundle Tape::eval(Workspace& ws, std::span<const double> inputs,
                            std::span<const double> params) const {
  if (inputs.size() != input_seeds_.size())
    throw std::invalid_argument("autodiff: input not registered on this tape");
  if (params.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter count mismatch");
  ws.val_.resize(n_nodes_);
  ws.sval_.clear();
  ws.bval_.clear();
  B* val = ws.val_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();

  auto fetch = [&](std::uint32_t r) -> B {
    switch (ref_tag(r)) {
      case kTagNode:
        return val[ref_index(r)];
      case kTagParam:
        return {ps[ref_index(r)], 0.0, 0.0, 0.0};
      default:
        return {cs[ref_index(r)], 0.0, 0.0, 0.0};
    }
  };
  auto scalar_of = [&](std::uint32_t r) -> double {
    return ref_tag(r) == kTagParam ? ps[ref_index(r)] : cs[ref_index(r)];
  };

  for (std::uint32_t i = 0; i < n_nodes_; ++i) {
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    switch (op) {
      case kOpInput:
        val[i] = {inputs[a], input_seeds_[a].first, input_seeds_[a].second, 0.0};
        break;
      case kOpAdd:
        val[i] = jet_add(fetch(a), fetch(b));
        break;
      case kOpSub:
        val[i] = jet_sub(fetch(a), fetch(b));
        break;
      case kOpMul:
        val[i] = jet_mul(fetch(a), fetch(b));
        break;
      case kOpTanh: {
        const B av = fetch(a);
        const double u = fast_tanh(av.value);
        const double s = 1.0 - u * u;
        val[i] = {u, s * av.d_dz, s * av.d_dt,
                  s * av.d2_dz2 - 2.0 * u * s * av.d_dz * av.d_dz};
        break;
      }
      case kOpAffine: {
        const std::uint32_t* argp = args + a;
        B acc = fetch(argp[0]);
        for (std::uint32_t k = 0; k < b; ++k)
          jet_iadd(acc, jet_mul(fetch(argp[1 + 2 * k]), fetch(argp[2 + 2 * k])));
        val[i] = acc;
        break;
      }
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        B acc{scalar_of(argp[0]), 0.0, 0.0, 0.0};
        for (std::uint32_t k = 0; k < b; ++k) {
          const double c = scalar_of(argp[1 + 2 * k]);
          const std::uint32_t xr = argp[2 + 2 * k];
          if (ref_tag(xr) == kTagNode) {
            const B& x = val[ref_index(xr)];
            acc.value += c * x.value;
            acc.d_dz += c * x.d_dz;
            acc.d_dt += c * x.d_dt;
            acc.d2_dz2 += c * x.d2_dz2;
          } else {
            acc.value += c * scalar_of(xr);
          }
        }
        val[i] = acc;
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        const double* c = ps + argp[1];
        const B* x = val + argp[2];
        double av = scalar_of(argp[0]), az = 0.0, at = 0.0, aq = 0.0;
        for (std::uint32_t k = 0; k < b; ++k) {
          av += c[k] * x[k].value;
          az += c[k] * x[k].d_dz;
          at += c[k] * x[k].d_dt;
          aq += c[k] * x[k].d2_dz2;
        }
        val[i] = {av, az, at, aq};
        break;
      }
    }
  }
  return val[output_];
}

void Tape::backward(Workspace& ws, const DerivativeBundle& seed,
                    std::span<const double> params,
                    std::span<double> grad) const {
  if (ws.val_.size() != n_nodes_ || !ws.sval_.empty())
    throw std::logic_error("autodiff: backward requires a preceding eval");
  if (params.size() != n_params_ || grad.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter/gradient size mismatch");
  ws.adj_.assign(n_nodes_, B{});
  B* adj = ws.adj_.data();
  const B* val = ws.val_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();
  double* gr = grad.data();

  auto fetch = [&](std::uint32_t r) -> B {
    switch (ref_tag(r)) {
      case kTagNode:
        return val[ref_index(r)];
      case kTagParam:
        return {ps[ref_index(r)], 0.0, 0.0, 0.0};
      default:
        return {cs[ref_index(r)], 0.0, 0.0, 0.0};
    }
  };
  auto bump = [&](std::uint32_t r, const B& c) {
    switch (ref_tag(r)) {
      case kTagNode:
        jet_iadd(adj[ref_index(r)], c);
        break;
      case kTagParam:
        gr[ref_index(r)] += c.value;
        break;
      default:
        break;
    }
  };

  adj[output_] = seed;
  for (std::uint32_t i = n_nodes_; i-- > 0;) {
    const B g = adj[i];
    if (jet_zero(g)) continue;
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    switch (op) {
      case kOpInput:
        break;
      case kOpAdd:
        bump(a, g);
        bump(b, g);
        break;
      case kOpSub:
        bump(a, g);
        bump(b, {-g.value, -g.d_dz, -g.d_dt, -g.d2_dz2});
        break;
      case kOpMul:
        bump(a, mul_adjoint(g, fetch(b)));
        bump(b, mul_adjoint(g, fetch(a)));
        break;
      case kOpTanh: {
        const B av = fetch(a);
        const double u = val[i].value;
        const double s = 1.0 - u * u;
        const double sp = -2.0 * u * s;                 // d s / d value
        const double q = -2.0 * s * s + 4.0 * u * u * s;  // d(-2us)/d value
        B c;
        c.value = g.value * s +
                  sp * (g.d_dz * av.d_dz + g.d_dt * av.d_dt +
                        g.d2_dz2 * av.d2_dz2) +
                  g.d2_dz2 * q * av.d_dz * av.d_dz;
        c.d_dz = g.d_dz * s - 4.0 * u * s * g.d2_dz2 * av.d_dz;
        c.d_dt = g.d_dt * s;
        c.d2_dz2 = g.d2_dz2 * s;
        bump(a, c);
        break;
      }
      case kOpAffine: {
        const std::uint32_t* argp = args + a;
        bump(argp[0], g);
        for (std::uint32_t k = 0; k < b; ++k) {
          const std::uint32_t cr = argp[1 + 2 * k], xr = argp[2 + 2 * k];
          bump(cr, mul_adjoint(g, fetch(xr)));
          bump(xr, mul_adjoint(g, fetch(cr)));
        }
        break;
      }
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        bump(argp[0], g);
        for (std::uint32_t k = 0; k < b; ++k) {
          const std::uint32_t cr = argp[1 + 2 * k], xr = argp[2 + 2 * k];
          const double c = ref_tag(cr) == kTagParam ? ps[ref_index(cr)]
                                                    : cs[ref_index(cr)];
          const B x = fetch(xr);
          if (ref_tag(xr) == kTagNode) {
            B& xa = adj[ref_index(xr)];
            xa.value += c * g.value;
            xa.d_dz += c * g.d_dz;
            xa.d_dt += c * g.d_dt;
            xa.d2_dz2 += c * g.d2_dz2;
          } else if (ref_tag(xr) == kTagParam) {
            gr[ref_index(xr)] += c * g.value;
          }
          if (ref_tag(cr) == kTagParam)
            gr[ref_index(cr)] += g.value * x.value + g.d_dz * x.d_dz +
                                 g.d_dt * x.d_dt + g.d2_dz2 * x.d2_dz2;
        }
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        bump(argp[0], g);
        const double* c = ps + argp[1];
        double* gp = gr + argp[1];
        const B* x = val + argp[2];
        B* xa = adj + argp[2];
        const double gv = g.value, gz = g.d_dz, gt = g.d_dt, gq = g.d2_dz2;
        for (std::uint32_t k = 0; k < b; ++k) {
          gp[k] += gv * x[k].value + gz * x[k].d_dz + gt * x[k].d_dt +
                   gq * x[k].d2_dz2;
          xa[k].value += c[k] * gv;
          xa[k].d_dz += c[k] * gz;
          xa[k].d_dt += c[k] * gt;
          xa[k].d2_dz2 += c[k] * gq;
        }
        break;
      }
    }
  }
}

double Tape::eval_value(Workspace& ws, std::span<const double> inputs,
                        std::span<const double> params) const {
  if (inputs.size() != input_seeds_.size())
    throw std::invalid_argument("autodiff: input not registered on this tape");
  if (params.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter count mismatch");
  ws.sval_.resize(n_nodes_);
  ws.val_.clear();
  ws.bval_.clear();
  double* val = ws.sval_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();

  auto fetch = [&](std::uint32_t r) -> double {
    switch (ref_tag(r)) {
      case kTagNode:
        return val[ref_index(r)];
      case kTagParam:
        return ps[ref_index(r)];
      default:
        return cs[ref_index(r)];
    }
  };

  for (std::uint32_t i = 0; i < n_nodes_; ++i) {
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    switch (op) {
      case kOpInput:
        val[i] = inputs[a];
        break;
      case kOpAdd:
        val[i] = fetch(a) + fetch(b);
        break;
      case kOpSub:
        val[i] = fetch(a) - fetch(b);
        break;
      case kOpMul:
        val[i] = fetch(a) * fetch(b);
        break;
      case kOpTanh:
        val[i] = fast_tanh(fetch(a));
        break;
      case kOpAffine:
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        double acc = fetch(argp[0]);
        for (std::uint32_t k = 0; k < b; ++k)
          acc += fetch(argp[1 + 2 * k]) * fetch(argp[2 + 2 * k]);
        val[i] = acc;
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        const double* c = ps + argp[1];
        const double* x = val + argp[2];
        double acc = fetch(argp[0]);
        for (std::uint32_t k = 0; k < b; ++k) acc += c[k] * x[k];
        val[i] = acc;
        break;
      }
    }
  }
  return val[output_];
}

void Tape::backward_value(Workspace& ws, double seed,
                          std::span<const double> params,
                          std::span<double> grad) const {
  if (ws.sval_.size() != n_nodes_)
    throw std::logic_error("autodiff: backward_value requires eval_value");
  if (params.size() != n_params_ || grad.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter/gradient size mismatch");
  ws.sadj_.assign(n_nodes_, 0.0);
  double* adj = ws.sadj_.data();
  const double* val = ws.sval_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();
  double* gr = grad.data();

  auto fetch = [&](std::uint32_t r) -> double {
    switch (ref_tag(r)) {
      case kTagNode:
        return val[ref_index(r)];
      case kTagParam:
        return ps[ref_index(r)];
      default:
        return cs[ref_index(r)];
    }
  };
  auto bump = [&](std::uint32_t r, double c) {
    switch (ref_tag(r)) {
      case kTagNode:
        adj[ref_index(r)] += c;
        break;
      case kTagParam:
        gr[ref_index(r)] += c;
        break;
      default:
        break;
    }
  };

  adj[output_] = seed;
  for (std::uint32_t i = n_nodes_; i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    switch (op) {
      case kOpInput:
        break;
      case kOpAdd:
        bump(a, g);
        bump(b, g);
        break;
      case kOpSub:
        bump(a, g);
        bump(b, -g);
        break;
      case kOpMul:
        bump(a, g * fetch(b));
        bump(b, g * fetch(a));
        break;
      case kOpTanh: {
        const double u = val[i];
        bump(a, g * (1.0 - u * u));
        break;
      }
      case kOpAffine:
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        bump(argp[0], g);
        for (std::uint32_t k = 0; k < b; ++k) {
          const std::uint32_t cr = argp[1 + 2 * k], xr = argp[2 + 2 * k];
          bump(cr, g * fetch(xr));
          bump(xr, g * fetch(cr));
        }
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        bump(argp[0], g);
        const double* c = ps + argp[1];
        double* gp = gr + argp[1];
        const double* x = val + argp[2];
        double* xa = adj + argp[2];
        for (std::uint32_t k = 0; k < b; ++k) {
          gp[k] += g * x[k];
          xa[k] += g * c[k];
        }
        break;
      }
    }
  }
}

std::vector<double> Tape::parameter_gradient(std::span<const double> inputs,
                                             std::span<const double> params,
                                             const DerivativeBundle& seed) const {
  Workspace ws;
  eval(ws, inputs, params);
  std::vector<double> grad(n_params_, 0.0);
  backward(ws, seed, params, grad);
  return grad;
}

// Blocked layout: node i owns 4*kBlockLanes doubles at offset i*4*W, one
// W-wide row per channel (value, d_dz, d_dt, d2_dz2).
namespace {
constexpr int W = kBlockLanes;
constexpr int kRow = 4 * W;
enum { kChV = 0, kChZ = W, kChT = 2 * W, kChQ = 3 * W };
}  // namespace

void Tape::eval_block(Workspace& ws, std::span<const double> inputs,
                      std::span<const double> params,
                      DerivativeBundle out[]) const {
  if (inputs.size() != input_seeds_.size() * W)
    throw std::invalid_argument("autodiff: blocked input size mismatch");
  if (params.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter count mismatch");
  ws.bval_.resize(static_cast<std::size_t>(n_nodes_) * kRow);
  ws.val_.clear();
  ws.sval_.clear();
  double* bv = ws.bval_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();

  auto scalar_of = [&](std::uint32_t r) -> double {
    return ref_tag(r) == kTagParam ? ps[ref_index(r)] : cs[ref_index(r)];
  };
  // Leaf rows for params/consts are materialized on the fly into `leaf`.
  double leaf[kRow];
  auto row_of = [&](std::uint32_t r, double* scratch) -> const double* {
    if (ref_tag(r) == kTagNode) return bv + static_cast<std::size_t>(ref_index(r)) * kRow;
    const double v = scalar_of(r);
    for (int u = 0; u < W; ++u) scratch[u] = v;
    for (int u = W; u < kRow; ++u) scratch[u] = 0.0;
    return scratch;
  };

  for (std::uint32_t i = 0; i < n_nodes_; ++i) {
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    double* o = bv + static_cast<std::size_t>(i) * kRow;
    switch (op) {
      case kOpInput: {
        const double* in = inputs.data() + static_cast<std::size_t>(a) * W;
        const double sz = input_seeds_[a].first, st = input_seeds_[a].second;
        for (int u = 0; u < W; ++u) {
          o[kChV + u] = in[u];
          o[kChZ + u] = sz;
          o[kChT + u] = st;
          o[kChQ + u] = 0.0;
        }
        break;
      }
      case kOpAdd: {
        double s1[kRow], s2[kRow];
        const double* x = row_of(a, s1);
        const double* y = row_of(b, s2);
        for (int u = 0; u < kRow; ++u) o[u] = x[u] + y[u];
        break;
      }
      case kOpSub: {
        double s1[kRow], s2[kRow];
        const double* x = row_of(a, s1);
        const double* y = row_of(b, s2);
        for (int u = 0; u < kRow; ++u) o[u] = x[u] - y[u];
        break;
      }
      case kOpMul: {
        double s1[kRow], s2[kRow];
        const double* x = row_of(a, s1);
        const double* y = row_of(b, s2);
        for (int u = 0; u < W; ++u) {
          o[kChV + u] = x[kChV + u] * y[kChV + u];
          o[kChZ + u] = x[kChZ + u] * y[kChV + u] + x[kChV + u] * y[kChZ + u];
          o[kChT + u] = x[kChT + u] * y[kChV + u] + x[kChV + u] * y[kChT + u];
          o[kChQ + u] = x[kChQ + u] * y[kChV + u] +
                        2.0 * x[kChZ + u] * y[kChZ + u] +
                        x[kChV + u] * y[kChQ + u];
        }
        break;
      }
      case kOpTanh: {
        double s1[kRow];
        const double* x = row_of(a, s1);
        for (int u = 0; u < W; ++u) {
          const double tu = fast_tanh(x[kChV + u]);
          const double s = 1.0 - tu * tu;
          o[kChV + u] = tu;
          o[kChZ + u] = s * x[kChZ + u];
          o[kChT + u] = s * x[kChT + u];
          o[kChQ + u] = s * x[kChQ + u] -
                        2.0 * tu * s * x[kChZ + u] * x[kChZ + u];
        }
        break;
      }
      case kOpAffine:
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        double s1[kRow], s2[kRow], acc[kRow];
        const double* bias = row_of(argp[0], s1);
        for (int u = 0; u < kRow; ++u) acc[u] = bias[u];
        for (std::uint32_t k = 0; k < b; ++k) {
          const double* cr = row_of(argp[1 + 2 * k], s1);
          const double* xr = row_of(argp[2 + 2 * k], s2);
          for (int u = 0; u < W; ++u) {
            acc[kChV + u] += cr[kChV + u] * xr[kChV + u];
            acc[kChZ + u] +=
                cr[kChZ + u] * xr[kChV + u] + cr[kChV + u] * xr[kChZ + u];
            acc[kChT + u] +=
                cr[kChT + u] * xr[kChV + u] + cr[kChV + u] * xr[kChT + u];
            acc[kChQ + u] += cr[kChQ + u] * xr[kChV + u] +
                             2.0 * cr[kChZ + u] * xr[kChZ + u] +
                             cr[kChV + u] * xr[kChQ + u];
          }
        }
        for (int u = 0; u < kRow; ++u) o[u] = acc[u];
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        const double bias = scalar_of(argp[0]);
        const double* c = ps + argp[1];
        const double* x = bv + static_cast<std::size_t>(argp[2]) * kRow;
        double acc[kRow];
        for (int u = 0; u < W; ++u) acc[u] = bias;
        for (int u = W; u < kRow; ++u) acc[u] = 0.0;
        for (std::uint32_t k = 0; k < b; ++k) {
          const double ck = c[k];
          const double* xr = x + static_cast<std::size_t>(k) * kRow;
          for (int u = 0; u < kRow; ++u) acc[u] += ck * xr[u];
        }
        for (int u = 0; u < kRow; ++u) o[u] = acc[u];
        break;
      }
    }
  }
  const double* oo = bv + static_cast<std::size_t>(output_) * kRow;
  for (int u = 0; u < W; ++u)
    out[u] = {oo[kChV + u], oo[kChZ + u], oo[kChT + u], oo[kChQ + u]};
}

void Tape::backward_block(Workspace& ws, const DerivativeBundle seeds[],
                          std::span<const double> params,
                          std::span<double> grad) const {
  if (ws.bval_.size() != static_cast<std::size_t>(n_nodes_) * kRow)
    throw std::logic_error("autodiff: backward_block requires eval_block");
  if (params.size() != n_params_ || grad.size() != n_params_)
    throw std::invalid_argument("autodiff: parameter/gradient size mismatch");
  ws.badj_.assign(static_cast<std::size_t>(n_nodes_) * kRow, 0.0);
  double* ba = ws.badj_.data();
  const double* bv = ws.bval_.data();
  const std::uint32_t* args = args_.data();
  const double* cs = consts_.data();
  const double* ps = params.data();
  double* gr = grad.data();

  auto scalar_of = [&](std::uint32_t r) -> double {
    return ref_tag(r) == kTagParam ? ps[ref_index(r)] : cs[ref_index(r)];
  };
  double leafv[kRow];
  auto row_of = [&](std::uint32_t r, double* scratch) -> const double* {
    if (ref_tag(r) == kTagNode) return bv + static_cast<std::size_t>(ref_index(r)) * kRow;
    const double v = scalar_of(r);
    for (int u = 0; u < W; ++u) scratch[u] = v;
    for (int u = W; u < kRow; ++u) scratch[u] = 0.0;
    return scratch;
  };
  // Adjoint contribution of one operand of a jet multiplication, lane-wise.
  auto mul_bump = [&](std::uint32_t target, const double* g, const double* other) {
    if (ref_tag(target) == kTagNode) {
      double* ta = ba + static_cast<std::size_t>(ref_index(target)) * kRow;
      for (int u = 0; u < W; ++u) {
        ta[kChV + u] += g[kChV + u] * other[kChV + u] +
                        g[kChZ + u] * other[kChZ + u] +
                        g[kChT + u] * other[kChT + u] +
                        g[kChQ + u] * other[kChQ + u];
        ta[kChZ + u] +=
            g[kChZ + u] * other[kChV + u] + 2.0 * g[kChQ + u] * other[kChZ + u];
        ta[kChT + u] += g[kChT + u] * other[kChV + u];
        ta[kChQ + u] += g[kChQ + u] * other[kChV + u];
      }
    } else if (ref_tag(target) == kTagParam) {
      double acc = 0.0;
      for (int u = 0; u < W; ++u)
        acc += g[kChV + u] * other[kChV + u] + g[kChZ + u] * other[kChZ + u] +
               g[kChT + u] * other[kChT + u] + g[kChQ + u] * other[kChQ + u];
      gr[ref_index(target)] += acc;
    }
  };
  auto add_bump = [&](std::uint32_t target, const double* g, double sign) {
    if (ref_tag(target) == kTagNode) {
      double* ta = ba + static_cast<std::size_t>(ref_index(target)) * kRow;
      for (int u = 0; u < kRow; ++u) ta[u] += sign * g[u];
    } else if (ref_tag(target) == kTagParam) {
      double acc = 0.0;
      for (int u = 0; u < W; ++u) acc += g[kChV + u];
      gr[ref_index(target)] += sign * acc;
    }
  };

  {
    double* o = ba + static_cast<std::size_t>(output_) * kRow;
    for (int u = 0; u < W; ++u) {
      o[kChV + u] = seeds[u].value;
      o[kChZ + u] = seeds[u].d_dz;
      o[kChT + u] = seeds[u].d_dt;
      o[kChQ + u] = seeds[u].d2_dz2;
    }
  }

  for (std::uint32_t i = n_nodes_; i-- > 0;) {
    const double* g = ba + static_cast<std::size_t>(i) * kRow;
    const std::uint32_t op = ops_[3 * i], a = ops_[3 * i + 1],
                        b = ops_[3 * i + 2];
    switch (op) {
      case kOpInput:
        break;
      case kOpAdd:
        add_bump(a, g, 1.0);
        add_bump(b, g, 1.0);
        break;
      case kOpSub:
        add_bump(a, g, 1.0);
        add_bump(b, g, -1.0);
        break;
      case kOpMul: {
        double s1[kRow], s2[kRow];
        mul_bump(a, g, row_of(b, s1));
        mul_bump(b, g, row_of(a, s2));
        break;
      }
      case kOpTanh: {
        double s1[kRow];
        const double* x = row_of(a, s1);
        const double* uvals = bv + static_cast<std::size_t>(i) * kRow;
        if (ref_tag(a) != kTagNode) break;  // constant input, nothing to do
        double* ta = ba + static_cast<std::size_t>(ref_index(a)) * kRow;
        for (int u = 0; u < W; ++u) {
          const double tu = uvals[kChV + u];
          const double s = 1.0 - tu * tu;
          const double sp = -2.0 * tu * s;
          const double q = -2.0 * s * s + 4.0 * tu * tu * s;
          ta[kChV + u] += g[kChV + u] * s +
                          sp * (g[kChZ + u] * x[kChZ + u] +
                                g[kChT + u] * x[kChT + u] +
                                g[kChQ + u] * x[kChQ + u]) +
                          g[kChQ + u] * q * x[kChZ + u] * x[kChZ + u];
          ta[kChZ + u] +=
              g[kChZ + u] * s - 4.0 * tu * s * g[kChQ + u] * x[kChZ + u];
          ta[kChT + u] += g[kChT + u] * s;
          ta[kChQ + u] += g[kChQ + u] * s;
        }
        break;
      }
      case kOpAffine:
      case kOpAffineScalar: {
        const std::uint32_t* argp = args + a;
        add_bump(argp[0], g, 1.0);
        double s1[kRow], s2[kRow];
        for (std::uint32_t k = 0; k < b; ++k) {
          const std::uint32_t cr = argp[1 + 2 * k], xr = argp[2 + 2 * k];
          mul_bump(cr, g, row_of(xr, s1));
          mul_bump(xr, g, row_of(cr, s2));
        }
        break;
      }
      case kOpAffinePacked: {
        const std::uint32_t* argp = args + a;
        add_bump(argp[0], g, 1.0);
        const double* c = ps + argp[1];
        double* gp = gr + argp[1];
        const std::size_t base = static_cast<std::size_t>(argp[2]) * kRow;
        const double* x = bv + base;
        double* xa = ba + base;
        for (std::uint32_t k = 0; k < b; ++k) {
          const double ck = c[k];
          const double* xr = x + static_cast<std::size_t>(k) * kRow;
          double* xra = xa + static_cast<std::size_t>(k) * kRow;
          double lane[W];
          for (int u = 0; u < W; ++u)
            lane[u] = g[kChV + u] * xr[kChV + u] + g[kChZ + u] * xr[kChZ + u] +
                      g[kChT + u] * xr[kChT + u] + g[kChQ + u] * xr[kChQ + u];
          double acc = 0.0;
          for (int u = 0; u < W; ++u) acc += lane[u];
          gp[k] += acc;
          for (int u = 0; u < kRow; ++u) xra[u] += ck * g[u];
        }
        break;
      }
    }
  }
  (void)leafv;
}

}  // namespace consol::ad
