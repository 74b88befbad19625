#include "consol/data.hpp"

#include <cstdlib>
#include <stdexcept>

#include "consol/rng.hpp"
#include "consol/textio.hpp"

namespace consol {

namespace {

Bounds domain_bounds(const ProblemSpec& spec) {
  return {0.0, spec.height, 0.0, spec.t_max};
}

}  // namespace

Dataset build_forward_dataset(const ProblemSpec& spec, const Grid& grid,
                              BottomBoundary bottom,
                              int initial_series_terms) {
  spec.validate();
  grid.validate();
  Dataset ds;
  ds.bounds = domain_bounds(spec);

  auto depth_at = [&](int i) {
    return spec.height * (static_cast<double>(i) / (grid.n_z - 1));
  };
  auto time_at = [&](int j) {
    return spec.t_max * (static_cast<double>(j) / (grid.n_t - 1));
  };
  auto label = [&](double depth, double t) {
    return spec.p0 * pressure_ratio_at_depth(spec, depth, t);
  };

  // Initial row: with the exact rule, the corner handling inside
  // pressure_ratio puts p = 0 at drained boundaries so targets stay
  // single-valued; the truncated-series variant is smooth there already.
  for (int i = 0; i < grid.n_z; ++i) {
    const double d = depth_at(i);
    const double p =
        initial_series_terms > 0
            ? spec.p0 * pressure_ratio_partial_sum(spec, series_coord(spec, d),
                                                   0.0, initial_series_terms)
            : label(d, 0.0);
    ds.labeled.push_back({d, 0.0, p});
  }

  const bool bottom_no_flow = spec.drainage == Drainage::TopOnly &&
                              bottom == BottomBoundary::NoFlowPenalty;
  for (int j = 1; j < grid.n_t; ++j)
    ds.labeled.push_back({0.0, time_at(j), 0.0});  // drained top, p = 0
  for (int j = 1; j < grid.n_t; ++j) {
    const double t = time_at(j);
    if (bottom_no_flow)
      ds.labeled.push_back({spec.height, t, 0.0, LabelKind::NoFlow});
    else
      ds.labeled.push_back({spec.height, t, label(spec.height, t)});
  }
  return ds;
}

Dataset build_inverse_dataset(const ProblemSpec& spec, const Grid& grid,
                              int sample_size, std::uint64_t seed,
                              int initial_series_terms) {
  spec.validate();
  grid.validate();
  const std::size_t total = static_cast<std::size_t>(grid.n_z) * grid.n_t;
  if (sample_size < 1 || static_cast<std::size_t>(sample_size) > total)
    throw std::invalid_argument("build_inverse_dataset: sample_size out of range");

  GridSolution sol = solve_analytic(spec, grid);
  if (initial_series_terms > 0)
    for (int i = 0; i < grid.n_z; ++i)
      sol.values[i] = pressure_ratio_partial_sum(
          spec, series_coord(spec, sol.depth[i]), 0.0, initial_series_terms);
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(
      total, static_cast<std::size_t>(sample_size));

  Dataset ds;
  ds.bounds = domain_bounds(spec);
  ds.labeled.reserve(picks.size());
  for (std::size_t idx : picks) {
    const std::size_t j = idx / grid.n_z, i = idx % grid.n_z;
    ds.labeled.push_back(
        {sol.depth[i], sol.time[j], spec.p0 * sol.values[idx]});
  }
  return ds;
}

std::vector<CollocationPoint> lhs_collocation(const Bounds& bounds, int n_c,
                                              std::uint64_t seed) {
  if (n_c < 1) throw std::invalid_argument("lhs_collocation: n_c must be >= 1");
  Rng rng(seed);
  // Draw order is fixed for reproducibility: stratum permutation for z, then
  // for t, then per-point in-stratum offsets (z, t interleaved).
  const auto perm_z = rng.permutation(static_cast<std::size_t>(n_c));
  const auto perm_t = rng.permutation(static_cast<std::size_t>(n_c));
  const double dz = (bounds.z_hi - bounds.z_lo) / n_c;
  const double dt = (bounds.t_hi - bounds.t_lo) / n_c;
  std::vector<CollocationPoint> pts(static_cast<std::size_t>(n_c));
  for (int i = 0; i < n_c; ++i) {
    const double uz = rng.uniform();
    const double ut = rng.uniform();
    pts[i].z = bounds.z_lo + (static_cast<double>(perm_z[i]) + uz) * dz;
    pts[i].t = bounds.t_lo + (static_cast<double>(perm_t[i]) + ut) * dt;
  }
  return pts;
}

BatchPlan make_batches(const Dataset& dataset, int batch_size,
                       std::uint64_t epoch_seed) {
  if (batch_size < 1)
    throw std::invalid_argument("make_batches: batch_size must be >= 1");
  const std::size_t n = dataset.labeled.size();
  if (n == 0) throw std::invalid_argument("make_batches: empty labeled set");

  BatchPlan plan;
  plan.epoch_seed = epoch_seed;
  plan.batch_size = batch_size;
  Rng rng(epoch_seed);
  plan.labeled_order = rng.permutation(n);

  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t num_batches = (n + bs - 1) / bs;
  for (std::size_t b = 1; b <= num_batches; ++b)
    plan.labeled_ends.push_back(std::min(b * bs, n));

  const std::size_t n_c = dataset.collocation.size();
  const std::size_t base = n_c / num_batches, extra = n_c % num_batches;
  std::size_t end = 0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    end += base + (b < extra ? 1 : 0);
    plan.colloc_ends.push_back(end);
  }
  return plan;
}

std::string labeled_csv(const Dataset& ds) {
  std::string out = "z,t,p\n";
  for (const auto& pt : ds.labeled) {
    out += g17(pt.z);
    out += ',';
    out += g17(pt.t);
    out += ',';
    out += g17(pt.p);
    out += '\n';
  }
  return out;
}

std::string collocation_csv(const Dataset& ds) {
  std::string out = "z,t\n";
  for (const auto& pt : ds.collocation) {
    out += g17(pt.z);
    out += ',';
    out += g17(pt.t);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::vector<double>> parse_csv_rows(const std::string& text,
                                                const std::string& header,
                                                std::size_t n_cols) {
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.substr(0, pos) != header)
    throw std::runtime_error("CSV: expected header " + header);
  ++pos;
  std::vector<std::vector<double>> rows;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) {
      std::vector<double> row;
      const char* p = text.c_str() + pos;
      char* end = nullptr;
      for (std::size_t c = 0; c < n_cols; ++c) {
        row.push_back(std::strtod(p, &end));
        if (c + 1 < n_cols) {
          if (*end != ',') throw std::runtime_error("CSV: malformed row");
          p = end + 1;
        }
      }
      rows.push_back(std::move(row));
    }
    pos = eol + 1;
  }
  return rows;
}

}  // namespace

std::vector<LabeledPoint> parse_labeled_csv(const std::string& text) {
  std::vector<LabeledPoint> pts;
  for (const auto& r : parse_csv_rows(text, "z,t,p", 3))
    pts.push_back({r[0], r[1], r[2]});
  return pts;
}

std::vector<CollocationPoint> parse_collocation_csv(const std::string& text) {
  std::vector<CollocationPoint> pts;
  for (const auto& r : parse_csv_rows(text, "z,t", 2))
    pts.push_back({r[0], r[1]});
  return pts;
}

}  // namespace consol
