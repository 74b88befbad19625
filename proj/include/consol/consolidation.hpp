#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace consol {

inline constexpr double kPi = 3.14159265358979323846;

enum class Drainage { TopOnly, TopAndBottom };

// Poroelastic loading constants entering the initial excess pore pressure.
struct LoadingParams {
  double alpha;        // Biot coefficient, in (0, 1]
  double storativity;  // S, 1/stress
  double m_v;          // confined compressibility, 1/stress
  double load_q;       // applied vertical load magnitude, stress
  void validate() const;
};

// One-dimensional soil column of height H under a step load held for t > 0.
// The top boundary is always drained; the bottom is either impermeable
// (TopOnly) or drained as well (TopAndBottom).
struct ProblemSpec {
  double height = 1.0;  // H, m
  double c_v = 1.0;     // coefficient of consolidation, m^2/yr
  Drainage drainage = Drainage::TopOnly;
  double t_max = 1.0;   // simulated duration, yr
  double p0 = 1.0;      // initial excess pore pressure (normalized)

  // Longest distance the pore fluid travels to a drained boundary.
  double drainage_path() const {
    return drainage == Drainage::TopOnly ? height : 0.5 * height;
  }
  void validate() const;
};

// Uniform evaluation grid over depth in [0, H] and time in [0, t_max].
struct Grid {
  int n_z = 2;
  int n_t = 2;
  void validate() const;
};

// p0 = alpha * m_v * q / (S + alpha^2 * m_v).
double initial_pressure(const LoadingParams& lp);

// Maps a user-frame coordinate (depth below the drained top boundary) to the
// series frame: signed distance from the no-flow plane, which sits at the
// bottom for TopOnly and at mid-height for TopAndBottom.
double series_coord(const ProblemSpec& spec, double depth);

/// Terzaghi series solution p/p0 at distance z from the no-flow plane.
///
/// For t > 0 sums (4/pi) * sum_k (-1)^(k-1)/(2k-1) * cos[(2k-1) pi z / (2h)]
/// * exp[-(2k-1)^2 (pi^2/4) c_v t / h^2], stopping once the term magnitude
/// bound drops below 1e-12 (hard cap 10000 terms). At t = 0 the series is
/// bypassed and the initial condition is returned directly: 1 at interior
/// points, 0 exactly at drained boundaries (closure of the boundary
/// condition at the discontinuous corner).
double pressure_ratio(const ProblemSpec& spec, double z, double t);

inline double pressure_ratio_at_depth(const ProblemSpec& spec, double depth,
                                      double t) {
  return pressure_ratio(spec, series_coord(spec, depth), t);
}

/// Partial sum of the same series with a fixed term count. A finite sum of
/// eigenmodes is itself an exact solution of the consolidation equation, so
/// at t = 0 it provides a smooth stand-in for the discontinuous initial
/// condition; for the evaluation-grid times (c_v t / h^2 >~ 1e-3 with
/// terms >= 30) it matches pressure_ratio to machine precision.
double pressure_ratio_partial_sum(const ProblemSpec& spec, double z, double t,
                                  int terms);

// ||predicted - exact||_2 / ||exact||_2 over all entries.
double l2_relative_error(std::span<const double> predicted,
                         std::span<const double> exact);

// Field sampled on the uniform grid; values are p/p0, stored row-major with
// time as the outer index.
struct GridSolution {
  std::vector<double> depth;   // n_z user-frame coordinates
  std::vector<double> time;    // n_t
  std::vector<double> values;  // n_z * n_t

  double at(std::size_t i_t, std::size_t i_z) const {
    return values[i_t * depth.size() + i_z];
  }
};

GridSolution solve_analytic(const ProblemSpec& spec, const Grid& grid);

// CSV with header `z,t,p_ratio`, 17 significant digits, (t outer, z inner).
std::string grid_csv(const GridSolution& sol);
GridSolution parse_grid_csv(const std::string& text);
void write_grid_csv(const std::filesystem::path& path, const GridSolution& sol);
GridSolution read_grid_csv(const std::filesystem::path& path);

}  // namespace consol
