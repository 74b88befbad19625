#include "consol/consolidation.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "consol/textio.hpp"

namespace consol {

void LoadingParams::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("LoadingParams: alpha must be in (0, 1]");
  if (!(storativity >= 0.0))
    throw std::invalid_argument("LoadingParams: storativity must be >= 0");
  if (!(m_v > 0.0))
    throw std::invalid_argument("LoadingParams: m_v must be > 0");
  if (!(load_q >= 0.0))
    throw std::invalid_argument("LoadingParams: load q must be >= 0");
  if (!(storativity + alpha * alpha * m_v > 0.0))
    throw std::invalid_argument("LoadingParams: S + alpha^2 m_v must be > 0");
}

void ProblemSpec::validate() const {
  if (!(height > 0.0)) throw std::invalid_argument("ProblemSpec: height must be > 0");
  if (!(c_v > 0.0)) throw std::invalid_argument("ProblemSpec: c_v must be > 0");
  if (!(t_max > 0.0)) throw std::invalid_argument("ProblemSpec: t_max must be > 0");
  if (!(p0 > 0.0)) throw std::invalid_argument("ProblemSpec: p0 must be > 0");
}

void Grid::validate() const {
  if (n_z < 2 || n_t < 2)
    throw std::invalid_argument("Grid: n_z and n_t must be >= 2");
}

double initial_pressure(const LoadingParams& lp) {
  lp.validate();
  const double denom = lp.storativity + lp.alpha * lp.alpha * lp.m_v;
  return lp.alpha * lp.m_v * lp.load_q / denom;
}

double series_coord(const ProblemSpec& spec, double depth) {
  if (spec.drainage == Drainage::TopOnly) return spec.height - depth;
  return 0.5 * spec.height - depth;
}

double pressure_ratio(const ProblemSpec& spec, double z, double t) {
  spec.validate();
  const double h = spec.drainage_path();
  const double lo = spec.drainage == Drainage::TopOnly ? 0.0 : -h;
  if (t < 0.0) throw std::domain_error("pressure_ratio: t must be >= 0");
  if (z < lo || z > h)
    throw std::domain_error("pressure_ratio: z outside the spatial interval");

  const double dist = std::fabs(z);  // series argument: |distance from no-flow plane|
  if (t == 0.0) return dist == h ? 0.0 : 1.0;
  if (dist == h) return 0.0;  // cos((2k-1) pi/2) = 0, term by term

  constexpr double kTermTol = 1e-12;
  constexpr int kMaxTerms = 10000;
  const double four_over_pi = 4.0 / kPi;
  const double decay = kPi * kPi / 4.0 * (spec.c_v * t / (h * h));
  const double arg = kPi * dist / (2.0 * h);

  double sum = 0.0;
  for (int k = 1; k <= kMaxTerms; ++k) {
    const double m = 2.0 * k - 1.0;
    const double bound = four_over_pi / m * std::exp(-m * m * decay);
    if (bound < kTermTol) break;
    const double sign = (k & 1) ? 1.0 : -1.0;
    sum += sign * bound * std::cos(m * arg);
  }
  return sum;
}

double pressure_ratio_partial_sum(const ProblemSpec& spec, double z, double t,
                                  int terms) {
  spec.validate();
  if (terms < 1)
    throw std::invalid_argument("pressure_ratio_partial_sum: terms must be >= 1");
  const double h = spec.drainage_path();
  const double lo = spec.drainage == Drainage::TopOnly ? 0.0 : -h;
  if (t < 0.0) throw std::domain_error("pressure_ratio_partial_sum: t must be >= 0");
  if (z < lo || z > h)
    throw std::domain_error("pressure_ratio_partial_sum: z outside the interval");
  const double dist = std::fabs(z);
  if (dist == h) return 0.0;
  const double four_over_pi = 4.0 / kPi;
  const double decay = kPi * kPi / 4.0 * (spec.c_v * t / (h * h));
  const double arg = kPi * dist / (2.0 * h);
  double sum = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double m = 2.0 * k - 1.0;
    const double sign = (k & 1) ? 1.0 : -1.0;
    sum += sign * four_over_pi / m * std::cos(m * arg) * std::exp(-m * m * decay);
  }
  return sum;
}

double l2_relative_error(std::span<const double> predicted,
                         std::span<const double> exact) {
  if (predicted.size() != exact.size())
    throw std::invalid_argument("l2_relative_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = predicted[i] - exact[i];
    num += d * d;
    den += exact[i] * exact[i];
  }
  if (den == 0.0)
    throw std::invalid_argument("l2_relative_error: exact field is all zeros");
  return std::sqrt(num) / std::sqrt(den);
}

GridSolution solve_analytic(const ProblemSpec& spec, const Grid& grid) {
  spec.validate();
  grid.validate();
  GridSolution sol;
  sol.depth.resize(grid.n_z);
  sol.time.resize(grid.n_t);
  for (int i = 0; i < grid.n_z; ++i)
    sol.depth[i] = spec.height * (static_cast<double>(i) / (grid.n_z - 1));
  for (int j = 0; j < grid.n_t; ++j)
    sol.time[j] = spec.t_max * (static_cast<double>(j) / (grid.n_t - 1));
  sol.values.resize(static_cast<std::size_t>(grid.n_z) * grid.n_t);
  for (int j = 0; j < grid.n_t; ++j)
    for (int i = 0; i < grid.n_z; ++i)
      sol.values[static_cast<std::size_t>(j) * grid.n_z + i] =
          pressure_ratio_at_depth(spec, sol.depth[i], sol.time[j]);
  return sol;
}

std::string grid_csv(const GridSolution& sol) {
  std::string out = "z,t,p_ratio\n";
  for (std::size_t j = 0; j < sol.time.size(); ++j)
    for (std::size_t i = 0; i < sol.depth.size(); ++i) {
      out += g17(sol.depth[i]);
      out += ',';
      out += g17(sol.time[j]);
      out += ',';
      out += g17(sol.at(j, i));
      out += '\n';
    }
  return out;
}

GridSolution parse_grid_csv(const std::string& text) {
  GridSolution sol;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.substr(0, pos) != "z,t,p_ratio")
    throw std::runtime_error("grid CSV: expected header z,t,p_ratio");
  ++pos;
  std::vector<double> zs, ts, vs;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) {
      const char* p = text.c_str() + pos;
      char* end = nullptr;
      const double z = std::strtod(p, &end);
      if (*end != ',') throw std::runtime_error("grid CSV: malformed row");
      const double t = std::strtod(end + 1, &end);
      if (*end != ',') throw std::runtime_error("grid CSV: malformed row");
      const double v = std::strtod(end + 1, &end);
      zs.push_back(z);
      ts.push_back(t);
      vs.push_back(v);
    }
    pos = eol + 1;
  }
  // Recover the grid axes from the row ordering (t outer, z inner): the
  // leading block of rows sharing the first time value spans the z axis.
  std::size_t n_z = 0;
  while (n_z < ts.size() && ts[n_z] == ts[0]) ++n_z;
  if (n_z == 0 || vs.size() % n_z != 0)
    throw std::runtime_error("grid CSV: rows do not form a grid");
  sol.depth.assign(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(n_z));
  for (std::size_t j = 0; j < vs.size() / n_z; ++j)
    sol.time.push_back(ts[j * n_z]);
  sol.values = std::move(vs);
  return sol;
}

void write_grid_csv(const std::filesystem::path& path, const GridSolution& sol) {
  write_file_atomic(path, grid_csv(sol));
}

GridSolution read_grid_csv(const std::filesystem::path& path) {
  return parse_grid_csv(read_file(path));
}

}  // namespace consol
