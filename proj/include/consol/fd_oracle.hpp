#pragma once

#include <vector>

#include "consol/consolidation.hpp"

namespace consol {

// Discretization for the Crank-Nicolson reference solver.
struct FDGrid {
  int n_z = 3;       // nodes over [0, H] in the user frame (depth from top)
  double dt = 1e-3;  // requested time step; rounded so steps divide t_max
  void validate() const;
};

// p/p0 on the solver's nodes at a set of time levels, (t outer, z inner).
struct FDSolution {
  std::vector<double> depth;
  std::vector<double> time;
  std::vector<double> values;
  double diffusion_number = 0.0;  // c_v * dt / dz^2, recorded for diagnostics

  double at(std::size_t i_t, std::size_t i_z) const {
    return values[i_t * depth.size() + i_z];
  }
  GridSolution as_grid() const { return {depth, time, values}; }
};

/// Crank-Nicolson solve of dp/dt = c_v d2p/dz2 with p = 0 at drained
/// boundaries, a mirror-node Neumann condition at the impermeable bottom
/// (TopOnly), and p/p0 = 1 initially. The first time step is split into two
/// implicit-Euler half steps (Rannacher startup) to damp the modes excited
/// by the discontinuous corner of the initial data; afterwards plain
/// Crank-Nicolson. Every time level is recorded.
FDSolution fd_solve(const ProblemSpec& spec, const FDGrid& grid);

// fd_solve sampled only at the requested time levels (step indices must be
// multiples that land on stored levels); used by the refinement study to
// keep fine grids in memory.
FDSolution fd_solve_sampled(const ProblemSpec& spec, const FDGrid& grid,
                            int sample_every);

struct RefineResult {
  FDSolution solution;  // converged field restricted to the base nodes/times
  int n_z = 0;          // finest spatial node count used
  double dt = 0.0;      // finest time step used
  int halvings = 0;
  std::vector<double> successive_diffs;  // max-norm diff per halving
};

/// Halves dz and dt together until two successive solutions differ by less
/// than `tolerance` in max-norm. Differences are measured on the base grid's
/// nodes at base time levels with t >= 0.01 h^2 / c_v; the early transient
/// below that window is dominated by the corner discontinuity and is not
/// part of the validated regime. Throws after 8 halvings without
/// convergence.
RefineResult refine_until(const ProblemSpec& spec, double tolerance,
                          const FDGrid& base = FDGrid{101, 0.0});

// First time at or above the comparison window 0.01 h^2 / c_v.
double comparison_window_start(const ProblemSpec& spec);

}  // namespace consol
