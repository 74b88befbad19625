#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "consol/consolidation.hpp"

namespace consol {

// How the impermeable bottom boundary is presented to the trainer when only
// the top is drained: either labeled with the analytic pressure values, or
// as unlabeled no-flow points penalizing dp/dz.
enum class BottomBoundary { ValueLabels, NoFlowPenalty };

enum class LabelKind : std::uint8_t { Value, NoFlow };

struct LabeledPoint {
  double z;  // user-frame depth
  double t;
  double p;  // target pressure (ignored for NoFlow points)
  LabelKind kind = LabelKind::Value;
};

struct CollocationPoint {
  double z;
  double t;
};

struct Bounds {
  double z_lo = 0.0, z_hi = 1.0;
  double t_lo = 0.0, t_hi = 1.0;
};

struct Dataset {
  std::vector<LabeledPoint> labeled;
  std::vector<CollocationPoint> collocation;
  Bounds bounds;
};

// Initial and boundary rows of the analytic solution: all t = 0 nodes, the
// top-boundary column and the bottom-boundary column, with the two shared
// corners deduplicated. Order: initial row (z ascending), then top boundary
// (t ascending, t > 0), then bottom boundary.
//
// initial_series_terms = 0 labels the t = 0 row with the exact initial
// condition (1 interior, 0 at drained corners). A positive count labels it
// with that many terms of the series instead: a smooth eigenmode solution
// that agrees with the exact data away from the drained corners but stays
// consistent with the PDE constraint across them, the way series-generated
// datasets behave. Targets may then slightly exceed 1 near the corners.
Dataset build_forward_dataset(const ProblemSpec& spec, const Grid& grid,
                              BottomBoundary bottom = BottomBoundary::ValueLabels,
                              int initial_series_terms = 0);

// Uniform sample without replacement from the full grid solution.
// initial_series_terms applies to the t = 0 row exactly as above.
Dataset build_inverse_dataset(const ProblemSpec& spec, const Grid& grid,
                              int sample_size, std::uint64_t seed,
                              int initial_series_terms = 0);

// Latin hypercube sample: each dimension's n_c equal-width strata contain
// exactly one point; stratum pairings are randomized.
std::vector<CollocationPoint> lhs_collocation(const Bounds& bounds, int n_c,
                                              std::uint64_t seed);

// One epoch's batching: a permutation of the labeled indices split into
// batches of `batch_size` (last batch takes the remainder), plus a partition
// of the collocation indices into the same number of nearly equal chunks so
// every optimizer step sees both loss terms.
struct BatchPlan {
  std::uint64_t epoch_seed = 0;
  int batch_size = 1;
  std::vector<std::size_t> labeled_order;
  std::vector<std::size_t> labeled_ends;  // exclusive end offsets per batch
  std::vector<std::size_t> colloc_ends;

  std::size_t num_batches() const { return labeled_ends.size(); }
};

BatchPlan make_batches(const Dataset& dataset, int batch_size,
                       std::uint64_t epoch_seed);

// CSV export/import for external inspection: `z,t,p` for labeled points,
// `z,t` for collocation points.
std::string labeled_csv(const Dataset& dataset);
std::string collocation_csv(const Dataset& dataset);
std::vector<LabeledPoint> parse_labeled_csv(const std::string& text);
std::vector<CollocationPoint> parse_collocation_csv(const std::string& text);

}  // namespace consol
