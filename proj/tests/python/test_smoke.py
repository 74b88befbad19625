"""Smoke tests for the python bindings."""

import math

import pytest

import consolnn as c


@pytest.fixture
def top_spec():
    return c.ProblemSpec(height=1.0, c_v=0.6, drainage=c.Drainage.TOP_ONLY, t_max=1.0)


def test_initial_pressure():
    lp = c.LoadingParams(alpha=1.0, storativity=0.0, m_v=1e-3, load_q=100.0)
    assert c.initial_pressure(lp) == pytest.approx(100.0)


def test_series_boundary_and_interior(top_spec):
    assert c.pressure_ratio(top_spec, 1.0, 0.5) == 0.0  # drained boundary
    mid = c.pressure_ratio(top_spec, 0.0, 0.5)
    assert 0.0 < mid < 1.0
    # depth frame: the drained top sits at depth 0
    assert c.pressure_ratio_at_depth(top_spec, 0.0, 0.5) == 0.0


def test_grid_solution_and_l2(top_spec):
    sol = c.solve_analytic(top_spec, c.Grid(n_z=20, n_t=20))
    assert len(sol.values) == 400
    assert c.l2_relative_error(sol.values, sol.values) == 0.0
    assert c.l2_relative_error([0.0] * 400, sol.values) == 1.0


def test_lhs_stratification():
    pts = c.lhs_collocation(c.Bounds(0.0, 1.0, 0.0, 1.0), 16, 3)
    z_strata = {int(p.z * 16) for p in pts}
    t_strata = {int(p.t * 16) for p in pts}
    assert len(z_strata) == 16
    assert len(t_strata) == 16


def test_network_roundtrip(tmp_path, top_spec):
    net = c.init_network([2, 8, 8, 1], seed=5)
    value = c.forward(net, 0.3, 0.4)
    assert math.isfinite(value)
    path = tmp_path / "model.json"
    c.save_model(path, net)
    back = c.load_model(path)
    assert c.forward(back, 0.3, 0.4) == value
    assert math.isfinite(c.residual(net, top_spec.c_v, 0.3, 0.4))


def test_forward_training_learns(top_spec):
    cfg = c.TrainConfig(
        mode=c.TrainMode.FORWARD,
        epochs=40,
        batch_size=32,
        learning_rate=2e-3,
        n_c=200,
        seed=11,
        stop_mse=None,
    )
    res = c.train_forward(top_spec, c.Grid(15, 15), [2, 8, 8, 1], cfg)
    assert res.report.history[-1].mse_total < res.report.initial.mse_total
    again = c.train_forward(top_spec, c.Grid(15, 15), [2, 8, 8, 1], cfg)
    assert again.report.final_l2_error == res.report.final_l2_error


def test_inverse_training_tracks_cv(top_spec):
    cfg = c.TrainConfig(
        mode=c.TrainMode.INVERSE,
        epochs=60,
        batch_size=64,
        learning_rate=3e-3,
        sample_size=200,
        seed=2,
        stop_mse=None,
    )
    res = c.train_inverse(top_spec, c.Grid(25, 25), [2, 8, 8, 1], cfg)
    assert res.report.initial.c_v == 1.0
    assert res.report.final_cv is not None
    assert res.report.final_cv != 1.0  # the weight is being trained jointly
    assert res.report.history[-1].mse_total < res.report.initial.mse_total


def test_fd_oracle_matches_series(top_spec):
    fd = c.fd_solve(top_spec, c.FDGrid(n_z=81, dt=2e-3))
    worst = 0.0
    for j in range(0, len(fd.time), 50):
        if fd.time[j] < 0.02:
            continue
        for i in range(len(fd.depth)):
            exact = c.pressure_ratio_at_depth(top_spec, fd.depth[i], fd.time[j])
            worst = max(worst, abs(fd.at(j, i) - exact))
    assert worst < 5e-3
