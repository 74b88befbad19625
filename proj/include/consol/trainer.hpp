#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "consol/autodiff.hpp"
#include "consol/consolidation.hpp"
#include "consol/data.hpp"
#include "consol/model.hpp"

namespace consol {

enum class TrainMode { Forward, Inverse };

struct TrainConfig {
  TrainMode mode = TrainMode::Forward;
  int epochs = 20000;
  int batch_size = 100;
  double learning_rate = 1e-3;
  int n_c = 0;          // collocation points (forward mode)
  int sample_size = 0;  // labeled sample size (inverse mode)
  std::uint64_t seed = 0;
  std::optional<double> stop_mse = 1e-5;  // early stop on total MSE
  BottomBoundary bottom_boundary = BottomBoundary::ValueLabels;
  int initial_series_terms = 0;  // 0 = exact initial row, else series terms
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mse_p = 0.0;
  double mse_c = 0.0;
  double mse_total = 0.0;  // stored as the exact sum mse_p + mse_c
  std::optional<double> c_v;
};

struct TrainReport {
  EpochRecord initial;  // full-dataset losses before any update (epoch 0)
  std::vector<EpochRecord> history;
  double final_l2_error = 0.0;
  std::optional<double> final_cv;
  int epochs_run = 0;
  double duration_seconds = 0.0;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int epoch_, int batch_, double param_norm_,
                     const std::string& what_);
  int epoch;
  int batch;
  double param_norm;
};

// PDE residual f_c = dp/dt - c_v d2p/dz2 of the tape's output at (z, t).
double residual(const ad::Tape& tape, ad::Workspace& ws,
                std::span<const double> params, double c_v, double z, double t);
double residual(const NetworkParams& params, double c_v, double z, double t);

// MSE_p: mean of (p - p_hat)^2 over the batch (NoFlow points contribute
// (dp_hat/dz)^2 instead).
double training_loss(const NetworkParams& params,
                     std::span<const LabeledPoint> batch);

// MSE_c: mean of f_c^2 over the collocation batch.
double constraint_loss(const NetworkParams& params, double c_v,
                       std::span<const CollocationPoint> batch);

struct LossTerms {
  double mse_p = 0.0;
  double mse_c = 0.0;
};

// One optimizer step's losses and gradient. In forward mode `params` holds
// the network parameters and c_v is fixed; in inverse mode `params` carries
// w_cv as its last entry and c_v is derived from it, with the chain rule
// through the exponential applied to the last gradient entry. Pass an empty
// grad span to compute losses only. Point evaluations run in parallel over
// fixed chunks; the reduction order does not depend on the thread count.
LossTerms batch_loss_and_gradient(const ad::Tape& tape, TrainMode mode,
                                  double c_v_fixed,
                                  std::span<const double> params,
                                  std::span<const LabeledPoint> labeled,
                                  std::span<const CollocationPoint> colloc,
                                  std::span<double> grad);

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train_forward(const ProblemSpec& spec, const Grid& grid,
                          const std::vector<int>& layer_sizes,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

TrainResult train_inverse(const ProblemSpec& spec, const Grid& grid,
                          const std::vector<int>& layer_sizes,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

struct Evaluation {
  GridSolution predicted;  // p_hat / p0 on the grid
  double l2_error = 0.0;
};

// Forward pass on every grid node and L2 relative error against the
// analytic solution.
Evaluation evaluate(const NetworkParams& params, const ProblemSpec& spec,
                    const Grid& grid);

// CSV `epoch,mse_p,mse_c,mse_total[,cv]` including the epoch-0 row.
std::string history_csv(const TrainReport& report, bool with_cv);

}  // namespace consol
