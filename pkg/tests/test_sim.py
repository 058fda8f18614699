import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from morphgame.config import GameConfig, ScenarioConfig
from morphgame.errors import DivergedTrajectory, MismatchedGrids, NonFiniteState
from morphgame.game import GameWeights
from morphgame.sim import (LQR_Q, LQR_R, ControlOutput, LqrController, SimLog, actuator_noise, lqr_gain, metrics,
                           overshoot, relative_cost_saving, rk4_step, run_closed_loop, saturate, settling_time)
from morphgame.solvers import is_hurwitz, solve_are
from morphgame.store import read_log
from morphgame.vehicle import DELTA_E_LIMITS, DELTA_T_LIMITS, linearize, solve_trim

TRIM = solve_trim(40.0, 5000.0, 0.2)
QUIET = ScenarioConfig(noise_std=np.zeros(2))


def lqr():
    A, B = linearize(TRIM, include_trim_input=False)
    return LqrController(lqr_gain(A, B), TRIM.xi_e)


class Hold:
    """Constant error-coordinate command."""

    def __init__(self, u, xi):
        self.u, self.xi = np.asarray(u, dtype=float), xi

    def reset(self):
        pass

    def __call__(self, x, t):
        return ControlOutput(self.u.copy(), None, self.xi)


# integrator

def test_rk4_exponential():
    x = np.array([1.0])
    for _ in range(10):
        x = rk4_step(lambda z: -z, x, 0.01)
    assert x[0] == pytest.approx(np.exp(-0.1), abs=1e-6)


def test_rk4_zero_derivative_is_exact():
    x = np.array([1.5, -2.0])
    assert np.array_equal(rk4_step(lambda z: np.zeros(2), x, 0.3), x)


def test_rk4_fourth_order():
    def run(h):
        x = np.array([1.0, 0.0])
        for _ in range(int(round(1.0 / h))):
            x = rk4_step(lambda z: np.array([z[1], -z[0]]), x, h)
        return x

    exact = np.array([np.cos(1.0), -np.sin(1.0)])
    ratio = np.linalg.norm(run(0.1) - exact) / np.linalg.norm(run(0.05) - exact)
    assert ratio == pytest.approx(16.0, rel=0.05)


def test_rk4_non_finite():
    with pytest.raises(NonFiniteState):
        rk4_step(lambda z: np.array([np.inf]), np.array([0.0]), 0.1)


# actuators

def test_saturate_example():
    np.testing.assert_array_equal(saturate(np.array([-1.0, 120.0])), [DELTA_E_LIMITS[0], DELTA_T_LIMITS[1]])
    assert DELTA_E_LIMITS[0] == -0.7 and DELTA_T_LIMITS[1] == 100.0


@given(st.floats(-10, 10), st.floats(-500, 500))
def test_saturate_idempotent_and_bounded(de, dt):
    u = saturate(np.array([de, dt]))
    assert np.array_equal(saturate(u), u)
    assert DELTA_E_LIMITS[0] <= u[0] <= DELTA_E_LIMITS[1] and DELTA_T_LIMITS[0] <= u[1] <= DELTA_T_LIMITS[1]


def test_noise_statistics():
    rng = np.random.default_rng(0)
    u = np.array([0.0, 50.0])
    samples = np.array([actuator_noise(u, np.array([0.05, 5.0]), rng) for _ in range(20000)])
    assert abs(samples[:, 0].mean()) < 0.002 and abs(samples[:, 1].mean() - 50.0) < 0.2
    np.testing.assert_allclose(samples.std(axis=0), [0.05, 5.0], rtol=0.03)


def test_noise_zero_std_is_identity(rng):
    u = np.array([-0.2, 40.0])
    assert np.array_equal(actuator_noise(u, np.zeros(2), rng), u)


# LQR

def test_lqr_scalar():
    assert lqr_gain(np.zeros((1, 1)), np.eye(1), np.eye(1), np.eye(1))[0, 0] == pytest.approx(1.0)


def test_lqr_stabilizes_trim_jacobian():
    A, B = linearize(TRIM, include_trim_input=False)
    K = lqr_gain(A, B)
    assert K.shape == (2, 5)
    assert is_hurwitz(A - B @ K)


def test_lqr_invariant_to_joint_scaling():
    A, B = linearize(TRIM, include_trim_input=False)
    np.testing.assert_allclose(lqr_gain(A, B, 7 * LQR_Q, 7 * LQR_R), lqr_gain(A, B), rtol=1e-7)


def test_linear_energy_decreases():
    # noise-free LQR on the linear model: x' P x is non-increasing along RK4 steps
    A, B = linearize(TRIM, include_trim_input=False)
    K = lqr_gain(A, B)
    P = solve_are(A, B, LQR_Q, LQR_R)
    x = np.array([-5.0, 0.07, 0.046, 0.0, -10.0])
    v = [x @ P @ x]
    for _ in range(2000):
        x = rk4_step(lambda z: (A - B @ K) @ z, x, 0.01)
        v.append(x @ P @ x)
    assert np.all(np.diff(v) <= 1e-12 * v[0])


# closed loop

def test_equilibrium_is_invariant():
    sc = dataclasses.replace(QUIET, x0=TRIM.x_e.copy(), duration=2.0)
    log = run_closed_loop(Hold(np.zeros(2), TRIM.xi_e), TRIM, sc)
    assert np.max(np.abs(log.x_err)) < 1e-9
    assert np.all(log.xi_plant == TRIM.xi_e)


def test_closed_loop_deterministic():
    sc = dataclasses.replace(ScenarioConfig(), duration=2.0, seed=3)
    a = run_closed_loop(lqr(), TRIM, sc)
    b = run_closed_loop(lqr(), TRIM, sc)
    assert np.array_equal(a.x_n, b.x_n) and np.array_equal(a.u_n, b.u_n)
    c = run_closed_loop(lqr(), TRIM, dataclasses.replace(sc, seed=4))
    assert not np.array_equal(a.u_n, c.u_n)


def test_applied_inputs_saturated():
    sc = dataclasses.replace(ScenarioConfig(), duration=3.0)
    log = run_closed_loop(Hold([5.0, 500.0], TRIM.xi_e), TRIM, sc)
    assert np.all(log.u_n[:, 0] <= DELTA_E_LIMITS[1]) and np.all(log.u_n[:, 1] <= DELTA_T_LIMITS[1])
    assert np.all(log.u_cmd == [DELTA_E_LIMITS[1], DELTA_T_LIMITS[1]])


def test_log_grid_and_costs():
    sc = dataclasses.replace(QUIET, duration=1.0)
    w = GameWeights.from_config(GameConfig())
    log = run_closed_loop(lqr(), TRIM, sc, w)
    np.testing.assert_allclose(log.t, np.arange(101) * 0.01, atol=1e-12)
    assert log.x_n.shape == (101, 5)
    x0 = sc.x0 - TRIM.x_e
    u0 = log.u_cmd[0] - TRIM.u_e
    assert log.j_u[0] == pytest.approx(0.5 * (x0 @ w.Q_u @ x0 + u0 @ w.R_u @ u0))


def test_morph_lag_and_rate_limit():
    sc = dataclasses.replace(QUIET, x0=TRIM.x_e.copy(), duration=1.0)
    log = run_closed_loop(Hold(np.zeros(2), 1.0), TRIM, sc)
    rates = np.diff(log.xi_plant) / 0.01
    assert np.all(rates <= sc.morph_rate + 1e-9) and np.all(rates > 0)
    assert log.xi_plant[-1] == pytest.approx(TRIM.xi_e + sc.morph_rate * 1.0, abs=1e-6)
    inst = run_closed_loop(Hold(np.zeros(2), 1.0), TRIM, dataclasses.replace(sc, morph_mode="instantaneous"))
    assert np.all(inst.xi_plant[1:] == 1.0)


def test_divergence_reported():
    sc = dataclasses.replace(QUIET, duration=200.0)
    with pytest.raises(DivergedTrajectory):
        run_closed_loop(Hold([0.7, -40.0], TRIM.xi_e), TRIM, sc)


def test_csv_roundtrip(tmp_path):
    sc = dataclasses.replace(ScenarioConfig(), duration=0.5)
    log = run_closed_loop(lqr(), TRIM, sc, GameWeights.from_config(GameConfig()))
    log.to_csv(tmp_path / "log.csv")
    back = read_log(tmp_path / "log.csv", TRIM.x_e)
    for name, col in log.columns().items():
        np.testing.assert_array_equal(back.columns()[name], col)


# metrics

def make_log(t, x_err, j_u):
    n = len(t)
    z = np.zeros(n)
    return SimLog(t, x_err, np.zeros((n, 2)), np.zeros((n, 2)), z, z, j_u, z, z, z, z, z)


def test_metrics_zero_log():
    t = np.linspace(0, 1, 11)
    m = metrics(make_log(t, np.zeros((11, 5)), np.zeros(11)), np.eye(5))
    assert m.cost == 0.0 and m.settling_time == 0.0
    assert np.all(m.overshoot == 0)


def test_metrics_constant_cost():
    t = np.linspace(0, 2, 21)
    x = np.ones((21, 5))
    m = metrics(make_log(t, x, np.full(21, 3.0)), np.eye(5))
    assert m.cost == pytest.approx(6.0)
    assert m.settling_time == float("inf")


def test_settling_and_overshoot():
    t = np.arange(6.0)
    x = np.zeros((6, 5))
    x[:, 0] = [1.0, 0.5, -0.2, 0.005, 0.001, 0.0]
    assert settling_time(t, x, np.eye(5)) == 3.0
    assert overshoot(x)[0] == pytest.approx(0.2)


def test_compare_self_is_zero():
    t = np.linspace(0, 1, 11)
    log = make_log(t, np.ones((11, 5)), np.linspace(1, 2, 11))
    assert relative_cost_saving(log, log, np.eye(5)) == 0.0
    half = make_log(t, np.ones((11, 5)), 0.5 * np.linspace(1, 2, 11))
    assert relative_cost_saving(half, log, np.eye(5)) == pytest.approx(50.0)


def test_compare_mismatched_grids():
    a = make_log(np.linspace(0, 1, 11), np.ones((11, 5)), np.ones(11))
    b = make_log(np.linspace(0, 1, 21), np.ones((21, 5)), np.ones(21))
    with pytest.raises(MismatchedGrids):
        relative_cost_saving(a, b, np.eye(5))
