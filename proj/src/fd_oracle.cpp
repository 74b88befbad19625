#include "consol/fd_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace consol {

void FDGrid::validate() const {
  if (n_z < 3) throw std::invalid_argument("FDGrid: n_z must be >= 3");
  if (!(dt > 0.0)) throw std::invalid_argument("FDGrid: dt must be > 0");
}

double comparison_window_start(const ProblemSpec& spec) {
  const double h = spec.drainage_path();
  return 0.01 * h * h / spec.c_v;
}

namespace {

// Tridiagonal system with the forward-elimination coefficients precomputed,
// so repeated solves against new right-hand sides only run the two sweeps.
class Tridiag {
 public:
  Tridiag(std::vector<double> lower, std::vector<double> diag,
          std::vector<double> upper)
      : a_(std::move(lower)), b_(std::move(diag)), c_(std::move(upper)) {
    const std::size_t n = b_.size();
    cp_.resize(n);
    denom_.resize(n);
    denom_[0] = b_[0];
    if (denom_[0] == 0.0) throw std::runtime_error("tridiagonal: singular system");
    cp_[0] = c_[0] / denom_[0];
    for (std::size_t i = 1; i < n; ++i) {
      denom_[i] = b_[i] - a_[i] * cp_[i - 1];
      if (denom_[i] == 0.0)
        throw std::runtime_error("tridiagonal: singular system");
      cp_[i] = c_[i] / denom_[i];
    }
  }

  void solve(const std::vector<double>& rhs, std::vector<double>& x) const {
    const std::size_t n = b_.size();
    x.resize(n);
    x[0] = rhs[0] / denom_[0];
    for (std::size_t i = 1; i < n; ++i)
      x[i] = (rhs[i] - a_[i] * x[i - 1]) / denom_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= cp_[i] * x[i + 1];
  }

 private:
  std::vector<double> a_, b_, c_, cp_, denom_;
};

// Implicit matrix I - theta*mu*D2 with a Dirichlet row at the top, and at
// the bottom either a Dirichlet row or the mirror-node Neumann stencil
// D2 u_{n-1} = (2u_{n-2} - 2u_{n-1})/dz^2.
Tridiag implicit_matrix(int n, double theta_mu, bool bottom_neumann) {
  std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0);
  for (int i = 1; i + 1 < n; ++i) {
    a[i] = -theta_mu;
    b[i] = 1.0 + 2.0 * theta_mu;
    c[i] = -theta_mu;
  }
  if (bottom_neumann) {
    a[n - 1] = -2.0 * theta_mu;
    b[n - 1] = 1.0 + 2.0 * theta_mu;
  }
  return Tridiag(std::move(a), std::move(b), std::move(c));
}

FDSolution solve_impl(const ProblemSpec& spec, int n_z, double dt_request,
                      int sample_every) {
  spec.validate();
  const bool bottom_neumann = spec.drainage == Drainage::TopOnly;
  const int n = n_z;
  const double dz = spec.height / (n - 1);
  const long n_steps =
      std::max(1l, std::lround(spec.t_max / dt_request));
  const double dt = spec.t_max / static_cast<double>(n_steps);
  const double mu = spec.c_v * dt / (dz * dz);

  const Tridiag cn = implicit_matrix(n, 0.5 * mu, bottom_neumann);
  // Rannacher startup: the first step runs as two implicit-Euler half steps.
  const double mu_half = spec.c_v * (0.5 * dt) / (dz * dz);
  const Tridiag ie = implicit_matrix(n, mu_half, bottom_neumann);

  FDSolution sol;
  sol.diffusion_number = mu;
  sol.depth.resize(n);
  for (int i = 0; i < n; ++i)
    sol.depth[i] = spec.height * (static_cast<double>(i) / (n - 1));

  std::vector<double> u(n, 1.0), rhs(n), next(n);
  u[0] = 0.0;
  if (!bottom_neumann) u[n - 1] = 0.0;

  auto record = [&](long step) {
    sol.time.push_back(spec.t_max * (static_cast<double>(step) / n_steps));
    sol.values.insert(sol.values.end(), u.begin(), u.end());
  };
  record(0);

  auto explicit_cn_rhs = [&]() {
    rhs[0] = 0.0;
    for (int i = 1; i + 1 < n; ++i)
      rhs[i] = u[i] + 0.5 * mu * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
    if (bottom_neumann)
      rhs[n - 1] = u[n - 1] + 0.5 * mu * (2.0 * u[n - 2] - 2.0 * u[n - 1]);
    else
      rhs[n - 1] = 0.0;
  };

  for (long step = 1; step <= n_steps; ++step) {
    if (step == 1) {
      for (int half = 0; half < 2; ++half) {
        rhs = u;
        rhs[0] = 0.0;
        if (!bottom_neumann) rhs[n - 1] = 0.0;
        ie.solve(rhs, next);
        u.swap(next);
      }
    } else {
      explicit_cn_rhs();
      cn.solve(rhs, next);
      u.swap(next);
    }
    if (step % sample_every == 0 || step == n_steps) record(step);
  }
  return sol;
}

}  // namespace

FDSolution fd_solve(const ProblemSpec& spec, const FDGrid& grid) {
  grid.validate();
  return solve_impl(spec, grid.n_z, grid.dt, 1);
}

FDSolution fd_solve_sampled(const ProblemSpec& spec, const FDGrid& grid,
                            int sample_every) {
  grid.validate();
  if (sample_every < 1)
    throw std::invalid_argument("fd_solve_sampled: sample_every must be >= 1");
  return solve_impl(spec, grid.n_z, grid.dt, sample_every);
}

namespace {

// Restrict a level-L solution to the base grid's nodes (every stride-th).
FDSolution restrict_nodes(const FDSolution& fine, int stride) {
  FDSolution out;
  out.diffusion_number = fine.diffusion_number;
  out.time = fine.time;
  const std::size_t n_fine = fine.depth.size();
  for (std::size_t i = 0; i < n_fine; i += stride) out.depth.push_back(fine.depth[i]);
  out.values.reserve(out.depth.size() * out.time.size());
  for (std::size_t j = 0; j < fine.time.size(); ++j)
    for (std::size_t i = 0; i < n_fine; i += stride)
      out.values.push_back(fine.at(j, i));
  return out;
}

double window_max_diff(const FDSolution& a, const FDSolution& b, double t0) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.time.size(); ++j) {
    if (a.time[j] < t0) continue;
    for (std::size_t i = 0; i < a.depth.size(); ++i)
      m = std::max(m, std::fabs(a.at(j, i) - b.at(j, i)));
  }
  return m;
}

}  // namespace

RefineResult refine_until(const ProblemSpec& spec, double tolerance,
                          const FDGrid& base) {
  spec.validate();
  if (!(tolerance > 0.0))
    throw std::invalid_argument("refine_until: tolerance must be > 0");
  FDGrid g = base;
  if (g.dt <= 0.0) g.dt = spec.t_max / 400.0;
  g.validate();

  constexpr int kMaxHalvings = 8;
  const double t0 = comparison_window_start(spec);

  FDSolution prev = solve_impl(spec, g.n_z, g.dt, 1);
  RefineResult res;
  for (int level = 1; level <= kMaxHalvings; ++level) {
    const int stride = 1 << level;
    const int n_z = (g.n_z - 1) * stride + 1;
    const double dt = g.dt / stride;
    FDSolution fine =
        restrict_nodes(solve_impl(spec, n_z, dt, stride), stride);
    const double diff = window_max_diff(fine, prev, t0);
    res.successive_diffs.push_back(diff);
    if (diff < tolerance) {
      res.solution = std::move(fine);
      res.n_z = n_z;
      res.dt = dt;
      res.halvings = level;
      return res;
    }
    prev = std::move(fine);
  }
  throw std::runtime_error(
      "refine_until: not converged after 8 halvings of dz and dt");
}

}  // namespace consol
