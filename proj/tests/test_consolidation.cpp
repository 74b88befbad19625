#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "consol/consolidation.hpp"
#include "consol/fd_oracle.hpp"
#include "consol/textio.hpp"

using namespace consol;

namespace {

ProblemSpec top_spec() { return {1.0, 0.6, Drainage::TopOnly, 1.0, 1.0}; }
ProblemSpec both_spec() { return {1.0, 0.1, Drainage::TopAndBottom, 1.0, 1.0}; }

}  // namespace

TEST_CASE("initial pressure closed form") {
  // alpha = 1, S = 0 forces p0 = q.
  CHECK(initial_pressure({1.0, 0.0, 1e-3, 100.0}) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(initial_pressure({1.0, 0.0, 1e-3, 0.0}) == 0.0);
  // Direct evaluation of the closed-form expression.
  const double expected = 0.8 * 1e-3 * 100.0 / (1e-2 + 0.8 * 0.8 * 1e-3);
  CHECK(initial_pressure({0.8, 1e-2, 1e-3, 100.0}) ==
        doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("initial pressure rejects invalid parameters") {
  CHECK_THROWS_AS(initial_pressure({0.0, 0.0, 1e-3, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(initial_pressure({1.1, 0.0, 1e-3, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(initial_pressure({1.0, -1e-3, 1e-3, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(initial_pressure({1.0, 0.0, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(initial_pressure({1.0, 0.0, 1e-3, -1.0}), std::invalid_argument);
}

TEST_CASE("initial pressure is homogeneous of degree 1 in q") {
  const LoadingParams base{0.7, 2e-3, 5e-4, 37.0};
  const double p1 = initial_pressure(base);
  for (double lambda : {0.5, 2.0, 13.25}) {
    LoadingParams scaled = base;
    scaled.load_q *= lambda;
    CHECK(initial_pressure(scaled) ==
          doctest::Approx(lambda * p1).epsilon(1e-14));
  }
}

TEST_CASE("drained boundary annihilates the series exactly") {
  const ProblemSpec spec = top_spec();
  const double h = spec.drainage_path();
  for (double t : {1e-6, 0.01, 0.5 * h * h / spec.c_v, 1.0})
    CHECK(pressure_ratio(spec, h, t) == 0.0);
  const ProblemSpec both = both_spec();
  for (double t : {1e-6, 0.2, 1.0}) {
    CHECK(pressure_ratio(both, 0.5, t) == 0.0);
    CHECK(pressure_ratio(both, -0.5, t) == 0.0);
  }
}

TEST_CASE("fully dissipated at large time factor") {
  ProblemSpec spec = top_spec();
  spec.t_max = 100.0;
  const double t = 50.0 * 1.0 / spec.c_v;  // c_v t / h^2 = 50
  CHECK(std::fabs(pressure_ratio(spec, 0.0, t)) < 1e-12);
  CHECK(std::fabs(pressure_ratio(spec, 0.4, t)) < 1e-12);
}

TEST_CASE("initial condition handling at t = 0") {
  const ProblemSpec spec = top_spec();
  CHECK(pressure_ratio(spec, 0.0, 0.0) == 1.0);
  CHECK(pressure_ratio(spec, 0.5, 0.0) == 1.0);
  CHECK(pressure_ratio(spec, spec.drainage_path(), 0.0) == 0.0);
  const ProblemSpec both = both_spec();
  CHECK(pressure_ratio(both, 0.0, 0.0) == 1.0);
  CHECK(pressure_ratio(both, 0.5, 0.0) == 0.0);
  CHECK(pressure_ratio(both, -0.5, 0.0) == 0.0);
}

TEST_CASE("domain errors") {
  const ProblemSpec spec = top_spec();
  CHECK_THROWS_AS(pressure_ratio(spec, -0.01, 0.1), std::domain_error);
  CHECK_THROWS_AS(pressure_ratio(spec, 1.01, 0.1), std::domain_error);
  CHECK_THROWS_AS(pressure_ratio(spec, 0.5, -1e-9), std::domain_error);
  const ProblemSpec both = both_spec();
  CHECK_THROWS_AS(pressure_ratio(both, 0.51, 0.1), std::domain_error);
  CHECK_THROWS_AS(pressure_ratio(both, -0.51, 0.1), std::domain_error);
}

TEST_CASE("series agrees with the Crank-Nicolson oracle at T_v = 0.2") {
  // Independent check of the analytic solution on a refined grid.
  ProblemSpec spec = top_spec();
  spec.t_max = 0.2 * 1.0 / spec.c_v;  // c_v t / h^2 = 0.2 at the final level
  const FDSolution fd = fd_solve(spec, {401, 1e-4});
  const double series = pressure_ratio(spec, 0.0, spec.t_max);
  // z = 0 in the series frame is the impermeable bottom, depth H.
  const double fd_val = fd.at(fd.time.size() - 1, fd.depth.size() - 1);
  CHECK(std::fabs(series - fd_val) < 1e-3);
}

TEST_CASE("series satisfies the PDE under central differences") {
  for (const ProblemSpec& spec : {top_spec(), both_spec()}) {
    const double h = spec.drainage_path();
    const double t_ref = h * h / spec.c_v;
    const double step = 1e-4;
    const double bound = 1e-4 * spec.p0 / t_ref;
    for (double zf : {0.15, 0.45, 0.8})
      for (double tf : {0.012, 0.1, 0.4}) {
        const double z = zf * h;
        const double t = tf * t_ref + 0.01 * t_ref;
        const double pt = (pressure_ratio(spec, z, t + step) -
                           pressure_ratio(spec, z, t - step)) /
                          (2.0 * step);
        const double pzz = (pressure_ratio(spec, z + step, t) -
                            2.0 * pressure_ratio(spec, z, t) +
                            pressure_ratio(spec, z - step, t)) /
                           (step * step);
        CHECK(std::fabs(pt - spec.c_v * pzz) < bound);
      }
  }
}

TEST_CASE("no-flow symmetry for drained top and bottom") {
  const ProblemSpec both = both_spec();
  for (double z : {0.05, 0.17, 0.33, 0.49})
    for (double t : {0.01, 0.3, 0.9})
      CHECK(pressure_ratio(both, z, t) == pressure_ratio(both, -z, t));
}

TEST_CASE("range and monotone decay on the analytic grid") {
  for (const ProblemSpec& spec : {top_spec(), both_spec()}) {
    const GridSolution sol = solve_analytic(spec, {50, 50});
    for (double v : sol.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    for (std::size_t i = 0; i < sol.depth.size(); ++i)
      for (std::size_t j = 1; j + 1 < sol.time.size(); ++j)
        CHECK(sol.at(j + 1, i) <= sol.at(j, i) + 1e-9);
  }
}

TEST_CASE("l2 relative error") {
  const std::vector<double> exact{1.0, 2.0, -3.0};
  CHECK(l2_relative_error(exact, exact) == 0.0);
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(l2_relative_error(zero, exact) == 1.0);
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(l2_relative_error(two, exact), std::invalid_argument);
  CHECK_THROWS_AS(l2_relative_error(exact, zero), std::invalid_argument);
}

TEST_CASE("grid CSV round trip") {
  const GridSolution sol = solve_analytic(top_spec(), {7, 5});
  const std::string csv = grid_csv(sol);
  CHECK(csv.substr(0, 12) == "z,t,p_ratio\n");
  const GridSolution back = parse_grid_csv(csv);
  REQUIRE(back.depth.size() == sol.depth.size());
  REQUIRE(back.time.size() == sol.time.size());
  for (std::size_t i = 0; i < sol.values.size(); ++i)
    CHECK(back.values[i] == sol.values[i]);  // 17 digits round-trip exactly
  CHECK_THROWS(parse_grid_csv("nope\n1,2,3\n"));
}

TEST_CASE("corner rule in the generated grid") {
  const GridSolution sol = solve_analytic(both_spec(), {11, 11});
  CHECK(sol.at(0, 0) == 0.0);   // drained top corner at t = 0
  CHECK(sol.at(0, 10) == 0.0);  // drained bottom corner at t = 0
  CHECK(sol.at(0, 5) == 1.0);
  const GridSolution top = solve_analytic(top_spec(), {11, 11});
  CHECK(top.at(0, 0) == 0.0);
  CHECK(top.at(0, 10) == 1.0);  // impermeable bottom keeps the initial value
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((ProblemSpec{-1.0, 0.6, Drainage::TopOnly, 1.0, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((ProblemSpec{1.0, 0.0, Drainage::TopOnly, 1.0, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((Grid{1, 5}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((Grid{5, 1}).validate(), std::invalid_argument);
}
