"""Closed-loop simulation on the physical model, LQR baseline and metrics."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .errors import DivergedTrajectory, MismatchedGrids, NonFiniteState, OutOfEnvelope
from .game import stage_costs
from .solvers import solve_are
from .vehicle import (DEFAULT_PARAMS, DELTA_E_LIMITS, DELTA_T_LIMITS, STATE_NAMES, check_envelope,
                      dynamics)

# LQR baseline weights
LQR_Q = np.diag([200.0, 8000.0, 8000.0, 30000.0, 200.0])
LQR_R = np.diag([3000.0, 0.5])

_U_LO = np.array([DELTA_E_LIMITS[0], DELTA_T_LIMITS[0]])
_U_HI = np.array([DELTA_E_LIMITS[1], DELTA_T_LIMITS[1]])


def rk4_step(f, x, dt):
    """Classical Runge-Kutta step of ``x' = f(x)``."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    x_next = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteState("integration produced a non-finite state")
    return x_next


def saturate(u):
    return np.clip(u, _U_LO, _U_HI)


def actuator_noise(u, std, rng):
    """Zero-mean Gaussian per channel, then re-saturated."""
    return saturate(np.asarray(u, dtype=float) + rng.normal(0.0, 1.0, size=2) * std)


def lqr_gain(A, B, Q=LQR_Q, R=LQR_R):
    P = solve_are(A, B, Q, R)
    return np.linalg.solve(R, B.T @ P)


@dataclass
class ControlOutput:
    u: np.ndarray
    a: np.ndarray = None
    xi_hat: float = None
    iterations: int = 0
    res_u: float = float("nan")
    res_a: float = float("nan")
    wall_time: float = 0.0
    ok: bool = True


class LqrController:
    """``u = -K x`` in error coordinates, morph ratio held at trim."""

    def __init__(self, K, xi_e):
        self.K = np.asarray(K, dtype=float)
        self.xi_e = float(xi_e)

    def reset(self):
        pass

    def __call__(self, x, t):
        return ControlOutput(-self.K @ x, None, self.xi_e)


@dataclass
class SimLog:
    t: np.ndarray
    x_n: np.ndarray
    u_n: np.ndarray
    u_cmd: np.ndarray
    xi_cmd: np.ndarray
    xi_plant: np.ndarray
    j_u: np.ndarray
    j_a: np.ndarray
    iterations: np.ndarray
    res_u: np.ndarray
    res_a: np.ndarray
    wall_time: np.ndarray
    a: np.ndarray = None
    x_e: np.ndarray = field(default_factory=lambda: np.zeros(5))
    status: str = "ok"

    @property
    def x_err(self):
        return self.x_n - self.x_e

    def columns(self):
        cols = {"t": self.t}
        cols.update({n: self.x_n[:, i] for i, n in enumerate(STATE_NAMES)})
        cols.update({"delta_e": self.u_n[:, 0], "delta_t": self.u_n[:, 1],
                     "delta_e_cmd": self.u_cmd[:, 0], "delta_t_cmd": self.u_cmd[:, 1],
                     "xi_cmd": self.xi_cmd, "xi_plant": self.xi_plant, "j_u": self.j_u, "j_a": self.j_a,
                     "iterations": self.iterations, "res_u": self.res_u, "res_a": self.res_a,
                     "wall_time": self.wall_time})
        return cols

    def to_csv(self, path):
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in zip(*cols.values()):
                w.writerow([repr(float(v)) for v in row])


def _morph_rate(xi, xi_cmd, scenario):
    return float(np.clip((xi_cmd - xi) / scenario.morph_tau, -scenario.morph_rate, scenario.morph_rate))


def run_closed_loop(controller, trim, scenario=ScenarioConfig(), weights=None, params=DEFAULT_PARAMS):
    """Fly the physical model under `controller` from ``scenario.x0``.

    The controller sees the error state every ``scenario.T`` seconds and
    its command is held (zero-order) over RK4 substeps of ``scenario.dt``.
    The applied input is the saturated command plus saturated actuator
    noise. The plant morph ratio follows the commanded one through a
    rate-limited first-order lag, or instantly in ``"instantaneous"`` mode.
    Stage costs use `weights` (a `GameWeights`); they are zero when None.
    """
    rng = np.random.default_rng(scenario.seed)
    std = scenario.actuator_std(trim)
    n_sub = max(1, int(round(scenario.T / scenario.dt)))
    h = scenario.T / n_sub
    n = int(round(scenario.duration / scenario.T)) + 1
    controller.reset()

    x = np.asarray(scenario.x0, dtype=float).copy()
    xi = trim.xi_e
    rows = {k: [] for k in ("t", "x", "u", "uc", "xc", "xp", "ju", "ja", "it", "ru", "ra", "wt", "a")}
    status = "ok"
    for i in range(n):
        t = i * scenario.T
        x_err = x - trim.x_e
        out = controller(x_err, t)
        u_cmd = saturate(trim.u_e + out.u)
        u_app = actuator_noise(u_cmd, std, rng)
        xi_cmd = float(np.clip(out.xi_hat, 0.0, 1.0))
        a = out.a if out.a is not None else np.zeros(0)
        if weights is not None:
            j_u, j_a = stage_costs(x_err, u_cmd - trim.u_e, a if a.size else np.zeros(weights.R_a.shape[0]),
                                   weights)
        else:
            j_u = j_a = 0.0
        for key, val in zip(rows, (t, x.copy(), u_app, u_cmd, xi_cmd, xi, j_u, j_a, out.iterations,
                                   out.res_u, out.res_a, out.wall_time, a)):
            rows[key].append(val)
        if i == n - 1:
            break
        if scenario.morph_mode == "instantaneous":
            xi = xi_cmd

        def rhs(z):
            dx = dynamics(z[:5], u_app, z[5], params)
            dxi = 0.0 if scenario.morph_mode == "instantaneous" else _morph_rate(z[5], xi_cmd, scenario)
            return np.append(dx, dxi)

        z = np.append(x, xi)
        try:
            for _ in range(n_sub):
                z = rk4_step(rhs, z, h)
            check_envelope(z[:5])
        except OutOfEnvelope as exc:
            raise DivergedTrajectory(f"left the flight envelope at t={t:.2f}: {exc}") from exc
        x, xi = z[:5], float(np.clip(z[5], 0.0, 1.0))

    return SimLog(
        t=np.array(rows["t"]), x_n=np.array(rows["x"]), u_n=np.array(rows["u"]), u_cmd=np.array(rows["uc"]),
        xi_cmd=np.array(rows["xc"]), xi_plant=np.array(rows["xp"]), j_u=np.array(rows["ju"]),
        j_a=np.array(rows["ja"]), iterations=np.array(rows["it"]), res_u=np.array(rows["ru"]),
        res_a=np.array(rows["ra"]), wall_time=np.array(rows["wt"]),
        a=np.array(rows["a"]) if rows["a"][0].size else None, x_e=trim.x_e.copy(), status=status,
    )


@dataclass
class Metrics:
    cost: float
    settling_time: float
    overshoot: np.ndarray
    final_error: np.ndarray


def settling_time(t, x_err, Q, fraction=0.01):
    """First time after which ``sqrt(x^T Q x)`` stays below `fraction` of its initial value."""
    e = np.sqrt(np.einsum("ni,ij,nj->n", x_err, Q, x_err))
    above = np.flatnonzero(e > fraction * e[0])
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return float("inf")
    return float(t[above[-1] + 1])


def overshoot(x_err):
    """Per-channel excursion past zero on the side opposite the initial error."""
    sign = np.sign(x_err[0])
    past = -sign * x_err
    return np.where(sign != 0, np.maximum(past.max(axis=0), 0.0), np.abs(x_err).max(axis=0))


def metrics(log, Q, fraction=0.01):
    """Trapezoidal cost of the logged ``j_u``, settling time, overshoot and final error."""
    x_err = log.x_err
    return Metrics(
        cost=float(np.trapezoid(log.j_u, log.t)),
        settling_time=settling_time(log.t, x_err, Q, fraction),
        overshoot=overshoot(x_err),
        final_error=x_err[-1].copy(),
    )


def relative_cost_saving(log, baseline, Q):
    """Percent by which `log` undercuts `baseline` in cumulative cost."""
    if log.t.shape != baseline.t.shape or not np.allclose(log.t, baseline.t):
        raise MismatchedGrids("logs are on different time grids")
    c, c0 = metrics(log, Q).cost, metrics(baseline, Q).cost
    return 100.0 * (c0 - c) / c0
