#include "consol/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "consol/rng.hpp"
#include "consol/textio.hpp"

namespace consol {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (mode == TrainMode::Forward && n_c < 1)
    throw std::invalid_argument("TrainConfig: forward mode needs n_c >= 1");
  if (mode == TrainMode::Inverse && sample_size < 1)
    throw std::invalid_argument("TrainConfig: inverse mode needs sample_size >= 1");
  if (stop_mse && !(*stop_mse > 0.0))
    throw std::invalid_argument("TrainConfig: stop_mse must be > 0");
  if (initial_series_terms < 0)
    throw std::invalid_argument("TrainConfig: initial_series_terms must be >= 0");
}

TrainingDivergence::TrainingDivergence(int epoch_, int batch_,
                                       double param_norm_,
                                       const std::string& what_)
    : std::runtime_error(what_),
      epoch(epoch_),
      batch(batch_),
      param_norm(param_norm_) {}

double residual(const ad::Tape& tape, ad::Workspace& ws,
                std::span<const double> params, double c_v, double z,
                double t) {
  const double in[2] = {z, t};
  const ad::DerivativeBundle b = tape.eval(ws, in, params);
  return b.d_dt - c_v * b.d2_dz2;
}

double residual(const NetworkParams& params, double c_v, double z, double t) {
  const ad::Tape tape = build_network_tape(params.layer_sizes);
  ad::Workspace ws;
  const std::vector<double> theta = params.flatten();
  return residual(tape, ws, theta, c_v, z, t);
}

double training_loss(const NetworkParams& params,
                     std::span<const LabeledPoint> batch) {
  if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  const ad::Tape tape = build_network_tape(params.layer_sizes);
  ad::Workspace ws;
  const std::vector<double> theta = params.flatten();
  double sse = 0.0;
  for (const auto& pt : batch) {
    const double in[2] = {pt.z, pt.t};
    if (pt.kind == LabelKind::Value) {
      const double e = tape.eval_value(ws, in, theta) - pt.p;
      sse += e * e;
    } else {
      const double dz = tape.eval(ws, in, theta).d_dz;
      sse += dz * dz;
    }
  }
  return sse / static_cast<double>(batch.size());
}

double constraint_loss(const NetworkParams& params, double c_v,
                       std::span<const CollocationPoint> batch) {
  if (batch.empty()) throw std::invalid_argument("constraint_loss: empty batch");
  const ad::Tape tape = build_network_tape(params.layer_sizes);
  ad::Workspace ws;
  const std::vector<double> theta = params.flatten();
  double sse = 0.0;
  for (const auto& pt : batch) {
    const double f = residual(tape, ws, theta, c_v, pt.z, pt.t);
    sse += f * f;
  }
  return sse / static_cast<double>(batch.size());
}

namespace {

// Persistent pool mapping chunk indices onto threads. Work is always split
// into kChunks fixed chunks and merged in chunk order, so results do not
// depend on how many threads actually run.
constexpr int kChunks = 8;

class WorkerPool {
 public:
  WorkerPool() {
    const unsigned hw = std::thread::hardware_concurrency();
    const int extra = static_cast<int>(hw > 1 ? hw - 1 : 0);
    for (int i = 0; i < std::min(extra, kChunks - 1); ++i)
      threads_.emplace_back([this] { worker(); });
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(m_);
      stop_ = true;
    }
    cv_work_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int n_tasks, const std::function<void(int)>& fn) {
    if (threads_.empty() || n_tasks == 1) {
      for (int i = 0; i < n_tasks; ++i) fn(i);
      return;
    }
    std::uint64_t gen;
    {
      std::lock_guard<std::mutex> lock(m_);
      job_ = &fn;
      n_tasks_ = n_tasks;
      next_ = 0;
      done_ = 0;
      gen = ++generation_;
    }
    cv_work_.notify_all();
    drain(fn, gen);
    {
      std::unique_lock<std::mutex> lock(m_);
      cv_main_.wait(lock, [&] { return done_ == n_tasks_; });
      job_ = nullptr;
    }
  }

 private:
  // Task indices are handed out and completion is counted under the mutex;
  // the generation check in pop() keeps a late worker from touching a job
  // object that a newer run() has already replaced.
  bool pop(std::uint64_t gen, int& index) {
    std::lock_guard<std::mutex> lock(m_);
    if (generation_ != gen || next_ >= n_tasks_) return false;
    index = next_++;
    return true;
  }

  void complete(std::uint64_t gen) {
    std::lock_guard<std::mutex> lock(m_);
    if (generation_ != gen) return;
    if (++done_ == n_tasks_) cv_main_.notify_one();
  }

  void drain(const std::function<void(int)>& fn, std::uint64_t gen) {
    int i;
    while (pop(gen, i)) {
      fn(i);
      complete(gen);
    }
  }

  void worker() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      std::uint64_t gen = 0;
      {
        std::unique_lock<std::mutex> lock(m_);
        cv_work_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = gen = generation_;
        job = job_;
      }
      if (job) drain(*job, gen);
    }
  }

  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_work_, cv_main_;
  const std::function<void(int)>* job_ = nullptr;
  int next_ = 0;
  int done_ = 0;
  int n_tasks_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

WorkerPool& pool() {
  static WorkerPool p;
  return p;
}

struct ChunkBuffers {
  ad::Workspace ws;
  std::vector<double> grad;
  double sse_p = 0.0;
  double sse_c = 0.0;
  double wcv_grad = 0.0;
};

std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, int chunk) {
  const std::size_t lo = n * static_cast<std::size_t>(chunk) / kChunks;
  const std::size_t hi = n * (static_cast<std::size_t>(chunk) + 1) / kChunks;
  return {lo, hi};
}

}  // namespace

LossTerms batch_loss_and_gradient(const ad::Tape& tape, TrainMode mode,
                                  double c_v_fixed,
                                  std::span<const double> params,
                                  std::span<const LabeledPoint> labeled,
                                  std::span<const CollocationPoint> colloc,
                                  std::span<double> grad) {
  const std::size_t n_net = tape.num_params();
  const bool inverse = mode == TrainMode::Inverse;
  if (inverse && params.size() != n_net + 1)
    throw std::invalid_argument("batch_loss_and_gradient: expected w_cv entry");
  if (!inverse && params.size() != n_net)
    throw std::invalid_argument("batch_loss_and_gradient: parameter size mismatch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params.size())
    throw std::invalid_argument("batch_loss_and_gradient: gradient size mismatch");

  const std::span<const double> net_params = params.first(n_net);
  const double c_v = inverse ? cv_from_weight(params.back()) : c_v_fixed;
  const double inv_np =
      labeled.empty() ? 0.0 : 1.0 / static_cast<double>(labeled.size());
  // In inverse mode the residual is evaluated at the labeled points.
  const std::size_t n_res = inverse ? labeled.size() : colloc.size();
  const double inv_nc = n_res == 0 ? 0.0 : 1.0 / static_cast<double>(n_res);

  // Shared with the pool's workers; one entry per chunk. Loss evaluation is
  // serialized through the singleton pool, so a single buffer set suffices.
  static std::vector<ChunkBuffers> bufs(kChunks);
  for (auto& b : bufs) {
    b.sse_p = b.sse_c = b.wcv_grad = 0.0;
    if (want_grad)
      b.grad.assign(n_net, 0.0);
    else
      b.grad.clear();
  }

  constexpr int W = ad::kBlockLanes;
  auto process_chunk = [&](int chunk) {
    ChunkBuffers& cb = bufs[chunk];
    std::span<double> g = cb.grad;
    double lanes_in[2 * W];
    ad::DerivativeBundle outs[W], seeds[W];

    const auto [l_lo, l_hi] = chunk_range(labeled.size(), chunk);
    if (inverse) {
      // Residuals are evaluated at the labeled points; jets and the value
      // loss come out of one blocked sweep.
      for (std::size_t base = l_lo; base < l_hi; base += W) {
        const std::size_t n = std::min<std::size_t>(W, l_hi - base);
        for (std::size_t u = 0; u < W; ++u) {
          const LabeledPoint& pt = labeled[base + std::min(u, n - 1)];
          lanes_in[u] = pt.z;
          lanes_in[W + u] = pt.t;
        }
        tape.eval_block(cb.ws, lanes_in, net_params, outs);
        for (std::size_t u = 0; u < W; ++u) {
          if (u >= n) {
            seeds[u] = {};
            continue;
          }
          const double e = outs[u].value - labeled[base + u].p;
          const double f = outs[u].d_dt - c_v * outs[u].d2_dz2;
          cb.sse_p += e * e;
          cb.sse_c += f * f;
          seeds[u] = {2.0 * e * inv_np, 0.0, 2.0 * f * inv_nc,
                      -2.0 * f * c_v * inv_nc};
          if (want_grad) cb.wcv_grad += 2.0 * f * inv_nc * (-outs[u].d2_dz2) * c_v;
        }
        if (want_grad) tape.backward_block(cb.ws, seeds, net_params, g);
      }
    } else {
      for (std::size_t k = l_lo; k < l_hi; ++k) {
        const LabeledPoint& pt = labeled[k];
        const double in[2] = {pt.z, pt.t};
        if (pt.kind == LabelKind::Value) {
          const double e = tape.eval_value(cb.ws, in, net_params) - pt.p;
          cb.sse_p += e * e;
          if (want_grad)
            tape.backward_value(cb.ws, 2.0 * e * inv_np, net_params, g);
        } else {  // no-flow boundary point: penalize dp/dz
          const ad::DerivativeBundle b = tape.eval(cb.ws, in, net_params);
          cb.sse_p += b.d_dz * b.d_dz;
          if (want_grad) {
            const ad::DerivativeBundle seed{0.0, 2.0 * b.d_dz * inv_np, 0.0, 0.0};
            tape.backward(cb.ws, seed, net_params, g);
          }
        }
      }
      const auto [c_lo, c_hi] = chunk_range(colloc.size(), chunk);
      for (std::size_t base = c_lo; base < c_hi; base += W) {
        const std::size_t n = std::min<std::size_t>(W, c_hi - base);
        for (std::size_t u = 0; u < W; ++u) {
          const CollocationPoint& pt = colloc[base + std::min(u, n - 1)];
          lanes_in[u] = pt.z;
          lanes_in[W + u] = pt.t;
        }
        tape.eval_block(cb.ws, lanes_in, net_params, outs);
        for (std::size_t u = 0; u < W; ++u) {
          if (u >= n) {
            seeds[u] = {};
            continue;
          }
          const double f = outs[u].d_dt - c_v * outs[u].d2_dz2;
          cb.sse_c += f * f;
          seeds[u] = {0.0, 0.0, 2.0 * f * inv_nc, -2.0 * f * c_v * inv_nc};
        }
        if (want_grad) tape.backward_block(cb.ws, seeds, net_params, g);
      }
    }
  };

  pool().run(kChunks, process_chunk);

  // Merge in fixed chunk order; results are independent of the thread count.
  LossTerms terms;
  double wcv_grad = 0.0;
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  for (int c = 0; c < kChunks; ++c) {
    terms.mse_p += bufs[c].sse_p;
    terms.mse_c += bufs[c].sse_c;
    wcv_grad += bufs[c].wcv_grad;
    if (want_grad)
      for (std::size_t i = 0; i < n_net; ++i) grad[i] += bufs[c].grad[i];
  }
  terms.mse_p *= inv_np;
  terms.mse_c *= inv_nc;
  if (want_grad && inverse) grad[n_net] = wcv_grad;
  return terms;
}

namespace {

struct EpochAggregate {
  double sse_p = 0.0;
  double sse_c = 0.0;
  std::size_t n_p = 0;
  std::size_t n_c = 0;

  void add(const LossTerms& terms, std::size_t batch_p, std::size_t batch_c) {
    sse_p += terms.mse_p * static_cast<double>(batch_p);
    sse_c += terms.mse_c * static_cast<double>(batch_c);
    n_p += batch_p;
    n_c += batch_c;
  }
  double mse_p() const { return n_p ? sse_p / static_cast<double>(n_p) : 0.0; }
  double mse_c() const { return n_c ? sse_c / static_cast<double>(n_c) : 0.0; }
};

TrainResult train_impl(const ProblemSpec& spec, const Grid& grid,
                       const std::vector<int>& layer_sizes,
                       const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  spec.validate();
  grid.validate();
  config.validate();
  const bool inverse = config.mode == TrainMode::Inverse;
  const auto t_start = std::chrono::steady_clock::now();

  Dataset dataset =
      inverse ? build_inverse_dataset(spec, grid, config.sample_size,
                                      derive_seed(config.seed, kSeedSaltSample),
                                      config.initial_series_terms)
              : build_forward_dataset(spec, grid, config.bottom_boundary,
                                      config.initial_series_terms);
  if (!inverse)
    dataset.collocation = lhs_collocation(
        dataset.bounds, config.n_c, derive_seed(config.seed, kSeedSaltCollocation));

  NetworkParams net =
      init_network(layer_sizes, derive_seed(config.seed, kSeedSaltInit));
  const ad::Tape tape = build_network_tape(layer_sizes);

  std::vector<double> params = net.flatten();
  if (inverse) params.push_back(0.0);  // w_cv = 0, i.e. c_v estimate 1.0
  std::vector<double> grad(params.size(), 0.0);
  AdamState adam(params.size(), config.learning_rate);

  TrainResult result;
  TrainReport& report = result.report;

  auto record_cv = [&]() -> std::optional<double> {
    if (!inverse) return std::nullopt;
    return cv_from_weight(params.back());
  };

  {
    // Epoch 0: full-dataset losses before any update.
    const LossTerms t0 = batch_loss_and_gradient(
        tape, config.mode, spec.c_v, params, dataset.labeled,
        dataset.collocation, {});
    report.initial = {0, t0.mse_p, t0.mse_c, t0.mse_p + t0.mse_c, record_cv()};
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const BatchPlan plan =
        make_batches(dataset, config.batch_size,
                     derive_seed(config.seed, kSeedSaltBatch,
                                 static_cast<std::uint64_t>(epoch)));
    EpochAggregate agg;
    std::vector<LabeledPoint> batch;
    std::size_t l_begin = 0, c_begin = 0;
    for (std::size_t b = 0; b < plan.num_batches(); ++b) {
      batch.clear();
      for (std::size_t k = l_begin; k < plan.labeled_ends[b]; ++k)
        batch.push_back(dataset.labeled[plan.labeled_order[k]]);
      const std::span<const CollocationPoint> chunk(
          dataset.collocation.data() + c_begin, plan.colloc_ends[b] - c_begin);
      l_begin = plan.labeled_ends[b];
      c_begin = plan.colloc_ends[b];

      const LossTerms terms = batch_loss_and_gradient(
          tape, config.mode, spec.c_v, params, batch, chunk, grad);
      const double total = terms.mse_p + terms.mse_c;
      if (!std::isfinite(total) || total > 1e6) {
        double norm = 0.0;
        for (double p : params) norm += p * p;
        throw TrainingDivergence(
            epoch, static_cast<int>(b), std::sqrt(norm),
            "training diverged: total MSE " + g17(total) + " at epoch " +
                std::to_string(epoch) + ", batch " + std::to_string(b) +
                ", parameter norm " + g17(std::sqrt(norm)));
      }
      agg.add(terms, batch.size(), inverse ? batch.size() : chunk.size());
      adam_step(adam, params, grad);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mse_p = agg.mse_p();
    rec.mse_c = agg.mse_c();
    rec.mse_total = rec.mse_p + rec.mse_c;
    rec.c_v = record_cv();
    report.history.push_back(rec);
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);
    if (config.stop_mse && rec.mse_total < *config.stop_mse) break;
  }

  net.unflatten(std::span<const double>(params.data(), net.parameter_count()));
  if (inverse) {
    net.w_cv = params.back();
    report.final_cv = cv_from_weight(params.back());
  }
  result.params = std::move(net);

  const Evaluation ev = evaluate(result.params, spec, grid);
  report.final_l2_error = ev.l2_error;
  report.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

}  // namespace

TrainResult train_forward(const ProblemSpec& spec, const Grid& grid,
                          const std::vector<int>& layer_sizes,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  if (config.mode != TrainMode::Forward)
    throw std::invalid_argument("train_forward: config.mode must be Forward");
  return train_impl(spec, grid, layer_sizes, config, on_epoch);
}

TrainResult train_inverse(const ProblemSpec& spec, const Grid& grid,
                          const std::vector<int>& layer_sizes,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  if (config.mode != TrainMode::Inverse)
    throw std::invalid_argument("train_inverse: config.mode must be Inverse");
  return train_impl(spec, grid, layer_sizes, config, on_epoch);
}

Evaluation evaluate(const NetworkParams& params, const ProblemSpec& spec,
                    const Grid& grid) {
  spec.validate();
  grid.validate();
  const GridSolution exact = solve_analytic(spec, grid);
  Evaluation ev;
  ev.predicted.depth = exact.depth;
  ev.predicted.time = exact.time;
  ev.predicted.values.resize(exact.values.size());
  for (std::size_t j = 0; j < exact.time.size(); ++j)
    for (std::size_t i = 0; i < exact.depth.size(); ++i)
      ev.predicted.values[j * exact.depth.size() + i] =
          forward(params, exact.depth[i], exact.time[j]) / spec.p0;
  ev.l2_error = l2_relative_error(ev.predicted.values, exact.values);
  return ev;
}

std::string history_csv(const TrainReport& report, bool with_cv) {
  std::string out = with_cv ? "epoch,mse_p,mse_c,mse_total,cv\n"
                            : "epoch,mse_p,mse_c,mse_total\n";
  auto row = [&](const EpochRecord& r) {
    out += std::to_string(r.epoch);
    out += ',';
    out += g17(r.mse_p);
    out += ',';
    out += g17(r.mse_c);
    out += ',';
    out += g17(r.mse_total);
    if (with_cv) {
      out += ',';
      out += g17(r.c_v.value_or(0.0));
    }
    out += '\n';
  };
  row(report.initial);
  for (const auto& r : report.history) row(r);
  return out;
}

}  // namespace consol
