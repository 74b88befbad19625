#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "consol/fd_oracle.hpp"

using namespace consol;

namespace {

ProblemSpec top_spec() { return {1.0, 0.6, Drainage::TopOnly, 1.0, 1.0}; }
ProblemSpec both_spec() { return {1.0, 0.1, Drainage::TopAndBottom, 1.0, 1.0}; }

double max_error_vs_series(const ProblemSpec& spec, const FDSolution& fd,
                           double t_start, std::size_t time_stride) {
  double worst = 0.0;
  for (std::size_t j = 0; j < fd.time.size(); j += time_stride) {
    if (fd.time[j] < t_start) continue;
    for (std::size_t i = 0; i < fd.depth.size(); ++i)
      worst = std::max(worst, std::fabs(fd.at(j, i) - pressure_ratio_at_depth(
                                                          spec, fd.depth[i],
                                                          fd.time[j])));
  }
  return worst;
}

}  // namespace

TEST_CASE("initial field is recorded unchanged") {
  const ProblemSpec spec = top_spec();
  const FDSolution fd = fd_solve(spec, {21, 0.05});
  CHECK(fd.time[0] == 0.0);
  CHECK(fd.at(0, 0) == 0.0);  // drained top
  for (std::size_t i = 1; i < fd.depth.size(); ++i) CHECK(fd.at(0, i) == 1.0);
}

TEST_CASE("full dissipation at time factor 50") {
  ProblemSpec spec{1.0, 1.0, Drainage::TopOnly, 50.0, 1.0};
  const FDSolution fd = fd_solve(spec, {41, 0.05});
  const std::size_t last = fd.time.size() - 1;
  for (std::size_t i = 0; i < fd.depth.size(); ++i)
    CHECK(std::fabs(fd.at(last, i)) < 1e-10);
}

TEST_CASE("refined grid tracks the series within 1e-3") {
  const ProblemSpec spec = top_spec();
  const FDSolution fd = fd_solve(spec, {401, 1e-4});
  CHECK(max_error_vs_series(spec, fd, 0.01, 100) <= 1e-3);
}

TEST_CASE("discrete maximum principle at moderate diffusion numbers") {
  for (const ProblemSpec& spec : {top_spec(), both_spec()}) {
    const FDGrid grid{41, 8e-4};  // mu ~ 0.77 for c_v = 0.6
    const FDSolution fd = fd_solve(spec, grid);
    CHECK(fd.diffusion_number < 1.0);
    for (double v : fd.values) {
      CHECK(v >= -1e-10);
      CHECK(v <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("discrete mass is non-increasing in time") {
  const ProblemSpec spec = top_spec();
  const FDSolution fd = fd_solve(spec, {81, 1e-3});
  const double dz = spec.height / (fd.depth.size() - 1);
  double prev = 1e300;
  for (std::size_t j = 0; j < fd.time.size(); ++j) {
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < fd.depth.size(); ++i)
      mass += 0.5 * dz * (fd.at(j, i) + fd.at(j, i + 1));
    CHECK(mass <= prev + 1e-12);
    prev = mass;
  }
}

TEST_CASE("second-order convergence toward the series") {
  for (const ProblemSpec& spec : {top_spec(), both_spec()}) {
    const double t0 = comparison_window_start(spec);
    std::vector<double> errors;
    for (int level = 0; level < 3; ++level) {
      const int stride = 1 << level;
      const FDGrid grid{50 * stride + 1, spec.t_max / (200.0 * stride)};
      const FDSolution fd = fd_solve_sampled(spec, grid, 10 * stride);
      errors.push_back(max_error_vs_series(spec, fd, t0, 1));
    }
    for (std::size_t l = 0; l + 1 < errors.size(); ++l) {
      const double ratio = errors[l] / errors[l + 1];
      CHECK(ratio > 3.0);
      CHECK(ratio < 5.0);
    }
  }
}

TEST_CASE("refine_until converges immediately for a loose tolerance") {
  const RefineResult res = refine_until(top_spec(), 0.1, {21, 0.01});
  CHECK(res.halvings == 1);
  CHECK(res.successive_diffs.size() == 1);
  CHECK(res.successive_diffs[0] < 0.1);
}

TEST_CASE("refine_until meets a 1e-4 tolerance near the series") {
  const ProblemSpec spec = top_spec();
  const RefineResult res = refine_until(spec, 1e-4, {51, spec.t_max / 100.0});
  CHECK(res.halvings <= 8);
  // Successive differences shrink monotonically under refinement.
  for (std::size_t l = 0; l + 1 < res.successive_diffs.size(); ++l)
    CHECK(res.successive_diffs[l + 1] < res.successive_diffs[l]);
  const double err = max_error_vs_series(
      spec, res.solution, comparison_window_start(spec), 1);
  CHECK(err <= 2e-4);  // within 2x tolerance of the converged answer
}

TEST_CASE("refine_until throws after eight halvings") {
  CHECK_THROWS_AS(refine_until(top_spec(), 1e-15, {5, 0.25}),
                  std::runtime_error);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(fd_solve(top_spec(), {2, 0.01}), std::invalid_argument);
  CHECK_THROWS_AS(fd_solve(top_spec(), {11, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(refine_until(top_spec(), 0.0), std::invalid_argument);
}
