"""Labelled flight data at the six canonical morph conditions.

Each condition is flown for a fixed time by an LQR around that
condition's own level-flight trim, tracking random piecewise-constant
airspeed/altitude offsets with actuator noise. Records are expressed in
error coordinates of the common scenario trim:

    x = x_n - x_e,  u = u_n - u_e,  y = x' - g(x) u  (the drift f(x, xi))

where x' is a central difference of the sampled trajectory and u the
mean of the two inputs held across that difference.
"""

from dataclasses import dataclass

import numpy as np

from .config import CollectConfig
from .errors import DivergedTrajectory, OutOfEnvelope
from .sim import LQR_Q, LQR_R, actuator_noise, lqr_gain, rk4_step, saturate
from .vehicle import DEFAULT_PARAMS, XI_GRID, dynamics, g_n, linearize, solve_trim


@dataclass
class Dataset:
    t: np.ndarray
    X: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    xi: np.ndarray
    k: np.ndarray

    def __len__(self):
        return len(self.t)

    def subset(self, idx):
        return Dataset(self.t[idx], self.X[idx], self.U[idx], self.Y[idx], self.xi[idx], self.k[idx])


def _fly_condition(trim, trim_k, seconds, T, cfg, rng, params):
    A, B = linearize(trim_k, params)
    K = lqr_gain(A, B, LQR_Q, LQR_R)
    std = cfg.actuator_noise_scale * np.abs(trim_k.u_e)
    n = int(round(seconds / T))
    hold = max(1, int(round(cfg.ref_hold / T)))
    xs = np.empty((n + 2, 5))
    us = np.empty((n + 2, 2))
    x = trim_k.x_e.copy()
    ref = np.zeros(5)
    for i in range(n + 2):
        if i % hold == 0:
            ref = rng.uniform(-1.0, 1.0, size=5) * cfg.ref_amplitude
        u = actuator_noise(saturate(trim_k.u_e - K @ (x - trim_k.x_e - ref)), std, rng)
        xs[i], us[i] = x, u
        try:
            x = rk4_step(lambda z: dynamics(z, u, trim_k.xi_e, params), x, T)
        except OutOfEnvelope as exc:
            raise DivergedTrajectory(f"collection left the envelope at xi={trim_k.xi_e}") from exc
    # central differences at samples 1..n
    xdot = (xs[2:] - xs[:-2]) / (2 * T)
    u_bar = 0.5 * (us[:-2] + us[1:-1])
    xn = xs[1:-1]
    Y = np.array([xd - g_n(xi_, params) @ (ub - trim.u_e) for xd, xi_, ub in zip(xdot, xn, u_bar)])
    return xn - trim.x_e, u_bar - trim.u_e, Y


def collect_data(trim, cfg=CollectConfig(), T=0.01, params=DEFAULT_PARAMS, grid=XI_GRID):
    """Simulate every morph condition and return the stacked `Dataset`."""
    rng = np.random.default_rng(cfg.seed)
    parts = []
    V, h = trim.x_e[0], trim.x_e[4]
    for k, xi in enumerate(grid):
        trim_k = solve_trim(V, h, float(xi), guess=trim, params=params)
        X, U, Y = _fly_condition(trim, trim_k, cfg.seconds_per_condition, T, cfg, rng, params)
        Y = Y + rng.normal(size=Y.shape) * cfg.label_noise
        n = len(X)
        parts.append(Dataset(np.arange(1, n + 1) * T, X, U, Y, np.full(n, float(xi)), np.full(n, k)))
    return Dataset(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("t", "X", "U", "Y", "xi", "k")))


def train_val_split(data, val_fraction=0.2, seed=0):
    """Random split stratified by condition."""
    rng = np.random.default_rng(seed)
    train, val = [], []
    for k in np.unique(data.k):
        ix = rng.permutation(np.flatnonzero(data.k == k))
        n_val = int(round(val_fraction * len(ix)))
        val.append(ix[:n_val])
        train.append(ix[n_val:])
    return data.subset(np.sort(np.concatenate(train))), data.subset(np.sort(np.concatenate(val)))
