#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "consol/consolidation.hpp"
#include "consol/data.hpp"
#include "consol/fd_oracle.hpp"
#include "consol/model.hpp"
#include "consol/trainer.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace consol;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Physics-constrained neural networks for 1D consolidation";

  py::enum_<Drainage>(m, "Drainage")
      .value("TOP_ONLY", Drainage::TopOnly)
      .value("TOP_AND_BOTTOM", Drainage::TopAndBottom);

  py::class_<LoadingParams>(m, "LoadingParams")
      .def(py::init<double, double, double, double>(), "alpha"_a,
           "storativity"_a, "m_v"_a, "load_q"_a)
      .def_readwrite("alpha", &LoadingParams::alpha)
      .def_readwrite("storativity", &LoadingParams::storativity)
      .def_readwrite("m_v", &LoadingParams::m_v)
      .def_readwrite("load_q", &LoadingParams::load_q);

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init([](double height, double c_v, Drainage drainage,
                       double t_max, double p0) {
             ProblemSpec s{height, c_v, drainage, t_max, p0};
             s.validate();
             return s;
           }),
           "height"_a, "c_v"_a, "drainage"_a, "t_max"_a, "p0"_a = 1.0)
      .def_readwrite("height", &ProblemSpec::height)
      .def_readwrite("c_v", &ProblemSpec::c_v)
      .def_readwrite("drainage", &ProblemSpec::drainage)
      .def_readwrite("t_max", &ProblemSpec::t_max)
      .def_readwrite("p0", &ProblemSpec::p0)
      .def_property_readonly("drainage_path", &ProblemSpec::drainage_path);

  py::class_<Grid>(m, "Grid")
      .def(py::init<int, int>(), "n_z"_a, "n_t"_a)
      .def_readwrite("n_z", &Grid::n_z)
      .def_readwrite("n_t", &Grid::n_t);

  py::class_<GridSolution>(m, "GridSolution")
      .def_readonly("depth", &GridSolution::depth)
      .def_readonly("time", &GridSolution::time)
      .def_readonly("values", &GridSolution::values)
      .def("at", &GridSolution::at, "i_t"_a, "i_z"_a);

  m.def("initial_pressure", &initial_pressure, "lp"_a);
  m.def("series_coord", &series_coord, "spec"_a, "depth"_a);
  m.def("pressure_ratio", &pressure_ratio, "spec"_a, "z"_a, "t"_a);
  m.def("pressure_ratio_at_depth", &pressure_ratio_at_depth, "spec"_a,
        "depth"_a, "t"_a);
  m.def("pressure_ratio_partial_sum", &pressure_ratio_partial_sum, "spec"_a,
        "z"_a, "t"_a, "terms"_a);
  m.def(
      "l2_relative_error",
      [](const std::vector<double>& predicted, const std::vector<double>& exact) {
        return l2_relative_error(predicted, exact);
      },
      "predicted"_a, "exact"_a);
  m.def("solve_analytic", &solve_analytic, "spec"_a, "grid"_a);
  m.def("write_grid_csv", &write_grid_csv, "path"_a, "solution"_a);
  m.def("read_grid_csv", &read_grid_csv, "path"_a);

  py::enum_<BottomBoundary>(m, "BottomBoundary")
      .value("VALUE_LABELS", BottomBoundary::ValueLabels)
      .value("NO_FLOW_PENALTY", BottomBoundary::NoFlowPenalty);

  py::class_<LabeledPoint>(m, "LabeledPoint")
      .def_readonly("z", &LabeledPoint::z)
      .def_readonly("t", &LabeledPoint::t)
      .def_readonly("p", &LabeledPoint::p);

  py::class_<CollocationPoint>(m, "CollocationPoint")
      .def_readonly("z", &CollocationPoint::z)
      .def_readonly("t", &CollocationPoint::t);

  py::class_<Bounds>(m, "Bounds")
      .def(py::init<double, double, double, double>(), "z_lo"_a, "z_hi"_a,
           "t_lo"_a, "t_hi"_a)
      .def_readwrite("z_lo", &Bounds::z_lo)
      .def_readwrite("z_hi", &Bounds::z_hi)
      .def_readwrite("t_lo", &Bounds::t_lo)
      .def_readwrite("t_hi", &Bounds::t_hi);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("labeled", &Dataset::labeled)
      .def_readonly("collocation", &Dataset::collocation)
      .def_readonly("bounds", &Dataset::bounds);

  m.def("build_forward_dataset", &build_forward_dataset, "spec"_a, "grid"_a,
        "bottom"_a = BottomBoundary::ValueLabels, "initial_series_terms"_a = 0);
  m.def("build_inverse_dataset", &build_inverse_dataset, "spec"_a, "grid"_a,
        "sample_size"_a, "seed"_a, "initial_series_terms"_a = 0);
  m.def("lhs_collocation", &lhs_collocation, "bounds"_a, "n_c"_a, "seed"_a);

  py::class_<NetworkParams>(m, "NetworkParams")
      .def_readonly("layer_sizes", &NetworkParams::layer_sizes)
      .def_readonly("weights", &NetworkParams::weights)
      .def_readonly("biases", &NetworkParams::biases)
      .def_readonly("w_cv", &NetworkParams::w_cv)
      .def_readonly("seed", &NetworkParams::seed)
      .def("parameter_count", &NetworkParams::parameter_count);

  m.def("init_network", &init_network, "layer_sizes"_a, "seed"_a);
  m.def("forward", &forward, "params"_a, "z"_a, "t"_a);
  m.def("cv_from_weight", &cv_from_weight, "w_cv"_a);
  m.def("save_model", &save_model, "path"_a, "params"_a);
  m.def("load_model", &load_model, "path"_a);

  py::enum_<TrainMode>(m, "TrainMode")
      .value("FORWARD", TrainMode::Forward)
      .value("INVERSE", TrainMode::Inverse);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](TrainMode mode, int epochs, int batch_size,
                       double learning_rate, int n_c, int sample_size,
                       std::uint64_t seed, std::optional<double> stop_mse,
                       int initial_series_terms) {
             TrainConfig c;
             c.mode = mode;
             c.epochs = epochs;
             c.batch_size = batch_size;
             c.learning_rate = learning_rate;
             c.n_c = n_c;
             c.sample_size = sample_size;
             c.seed = seed;
             c.stop_mse = stop_mse;
             c.initial_series_terms = initial_series_terms;
             c.validate();
             return c;
           }),
           "mode"_a, "epochs"_a, "batch_size"_a, "learning_rate"_a,
           "n_c"_a = 0, "sample_size"_a = 0, "seed"_a = 0,
           "stop_mse"_a = std::nullopt, "initial_series_terms"_a = 0)
      .def_readwrite("mode", &TrainConfig::mode)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("n_c", &TrainConfig::n_c)
      .def_readwrite("sample_size", &TrainConfig::sample_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("stop_mse", &TrainConfig::stop_mse)
      .def_readwrite("initial_series_terms", &TrainConfig::initial_series_terms);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("mse_p", &EpochRecord::mse_p)
      .def_readonly("mse_c", &EpochRecord::mse_c)
      .def_readonly("mse_total", &EpochRecord::mse_total)
      .def_readonly("c_v", &EpochRecord::c_v);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("initial", &TrainReport::initial)
      .def_readonly("history", &TrainReport::history)
      .def_readonly("final_l2_error", &TrainReport::final_l2_error)
      .def_readonly("final_cv", &TrainReport::final_cv)
      .def_readonly("epochs_run", &TrainReport::epochs_run)
      .def_readonly("duration_seconds", &TrainReport::duration_seconds);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("report", &TrainResult::report);

  m.def(
      "train_forward",
      [](const ProblemSpec& spec, const Grid& grid,
         const std::vector<int>& layer_sizes, const TrainConfig& config) {
        py::gil_scoped_release release;
        return train_forward(spec, grid, layer_sizes, config);
      },
      "spec"_a, "grid"_a, "layer_sizes"_a, "config"_a);
  m.def(
      "train_inverse",
      [](const ProblemSpec& spec, const Grid& grid,
         const std::vector<int>& layer_sizes, const TrainConfig& config) {
        py::gil_scoped_release release;
        return train_inverse(spec, grid, layer_sizes, config);
      },
      "spec"_a, "grid"_a, "layer_sizes"_a, "config"_a);

  py::class_<Evaluation>(m, "Evaluation")
      .def_readonly("predicted", &Evaluation::predicted)
      .def_readonly("l2_error", &Evaluation::l2_error);

  m.def("evaluate", &evaluate, "params"_a, "spec"_a, "grid"_a);
  m.def(
      "residual",
      [](const NetworkParams& params, double c_v, double z, double t) {
        return residual(params, c_v, z, t);
      },
      "params"_a, "c_v"_a, "z"_a, "t"_a);

  py::class_<FDGrid>(m, "FDGrid")
      .def(py::init<int, double>(), "n_z"_a, "dt"_a)
      .def_readwrite("n_z", &FDGrid::n_z)
      .def_readwrite("dt", &FDGrid::dt);

  py::class_<FDSolution>(m, "FDSolution")
      .def_readonly("depth", &FDSolution::depth)
      .def_readonly("time", &FDSolution::time)
      .def_readonly("values", &FDSolution::values)
      .def_readonly("diffusion_number", &FDSolution::diffusion_number)
      .def("at", &FDSolution::at, "i_t"_a, "i_z"_a)
      .def("as_grid", &FDSolution::as_grid);

  py::class_<RefineResult>(m, "RefineResult")
      .def_readonly("solution", &RefineResult::solution)
      .def_readonly("n_z", &RefineResult::n_z)
      .def_readonly("dt", &RefineResult::dt)
      .def_readonly("halvings", &RefineResult::halvings)
      .def_readonly("successive_diffs", &RefineResult::successive_diffs);

  m.def("fd_solve", &fd_solve, "spec"_a, "grid"_a);
  m.def("refine_until", &refine_until, "spec"_a, "tolerance"_a,
        "base"_a = FDGrid{101, 0.0});
}
