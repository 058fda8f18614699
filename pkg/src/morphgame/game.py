"""Two-player Nash game between flight control u and morph coefficient a.

At each frozen state the model is ``x' = A x + B_u u + B_a a`` with
``B_u = g(x)`` and ``B_a = Phi(x)``. The feedback Nash pair solves the
coupled Riccati equations

    sym(P_u A_a) - P_u S_u P_u + Q_u = 0,   A_a = A - S_a P_a
    sym(P_a A_u) - P_a S_a P_a + Q_a = 0,   A_u = A - S_u P_u

with ``S_l = B_l R_l^-1 B_l^T`` and ``sym(M) = M + M^T``. They are solved
by Lyapunov iterations started from two decoupled Riccati solves.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierNet, estimate_xi
from .config import GameConfig
from .errors import LostStability, MaxIterations, NotHurwitz, NotStabilizable, SolverError
from .meta import PhiNet, coeff_matrix, kron_features
from .solvers import is_hurwitz, solve_are, solve_lyapunov, symmetrize
from .vehicle import DEFAULT_PARAMS, XI_GRID, shifted_input_matrix

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass
class SdModel:
    A: np.ndarray
    B_u: np.ndarray
    B_a: np.ndarray
    # coefficient the morph player's a is measured from (zero unless sdc="nominal")
    a_offset: np.ndarray = None

    def __post_init__(self):
        if self.a_offset is None:
            self.a_offset = np.zeros(self.B_a.shape[1])


@dataclass
class GameWeights:
    Q_u: np.ndarray
    Q_a: np.ndarray
    R_u: np.ndarray
    R_a: np.ndarray

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.Q_u, cfg.Q_a, cfg.R_u, cfg.R_a)


@dataclass
class RiccatiPair:
    P_u: np.ndarray
    P_a: np.ndarray


@dataclass
class IterationResult:
    pair: RiccatiPair
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    iterates: list = field(default_factory=list)


def gain_matrices(model, weights):
    S_u = model.B_u @ np.linalg.solve(weights.R_u, model.B_u.T)
    S_a = model.B_a @ np.linalg.solve(weights.R_a, model.B_a.T)
    return S_u, S_a


def closed_loop_matrix(pair, model, weights):
    S_u, S_a = gain_matrices(model, weights)
    return model.A - S_u @ pair.P_u - S_a @ pair.P_a


def nominal_drift_jacobian(phi_net, a, x):
    """Mean-value Jacobian ``int_0^1 d(Phi a)/dx (s x) ds`` by Gauss-Legendre."""
    W = coeff_matrix(a, phi_net.m)
    x = np.asarray(x, dtype=float)
    J = np.zeros((5, 5))
    for node, w in zip(_GL_NODES, _GL_WEIGHTS):
        s = 0.5 * (node + 1.0)
        J += 0.5 * w * (W.T @ phi_net.input_jacobian(s * x))
    return J


def assemble_sd_model(x, phi_net, trim, params=DEFAULT_PARAMS, sdc="zero", a_nominal=None):
    """Frozen-state model at error state `x`.

    With ``sdc="zero"`` A is identically zero and the whole drift is left to
    the morph player. With ``sdc="nominal"`` A carries the learned drift at
    the trim coefficient `a_nominal` (``A(x) x = Phi(x) a_nom - Phi(0) a_nom``)
    and the morph player's a is the deviation from `a_nominal`.
    """
    x = np.asarray(x, dtype=float)
    B_u = shifted_input_matrix(x, trim, params)
    phi = phi_net.features(x.reshape(1, 5))[0]
    B_a = kron_features(phi)
    if sdc == "zero":
        return SdModel(np.zeros((5, 5)), B_u, B_a)
    if a_nominal is None:
        raise ValueError("sdc='nominal' needs a_nominal")
    A = nominal_drift_jacobian(phi_net, a_nominal, x)
    return SdModel(A, B_u, B_a, np.asarray(a_nominal, dtype=float))


def nash_feedback(pair, model, weights, x):
    x = np.asarray(x, dtype=float)
    u = -np.linalg.solve(weights.R_u, model.B_u.T @ pair.P_u @ x)
    a = -np.linalg.solve(weights.R_a, model.B_a.T @ pair.P_a @ x)
    return u, a


def csdre_residuals(pair, model, weights):
    """Frobenius norms of the two coupled Riccati left-hand sides."""
    S_u, S_a = gain_matrices(model, weights)
    P_u, P_a = pair.P_u, pair.P_a
    A_a = model.A - S_a @ P_a
    A_u = model.A - S_u @ P_u
    res_u = P_u @ A_a + A_a.T @ P_u - P_u @ S_u @ P_u + weights.Q_u
    res_a = P_a @ A_u + A_u.T @ P_a - P_a @ S_a @ P_a + weights.Q_a
    return float(np.linalg.norm(res_u)), float(np.linalg.norm(res_a))


def init_riccati(model, weights):
    """Initial stabilizing pair from two auxiliary Riccati equations.

    The flight player is solved first with a = 0, then the morph player
    against the resulting closed loop. When ``(A, B_u)`` is not
    stabilizable (always the case for A = 0, since g(x) has two zero
    rows) the order is swapped: morph player first, then flight player.
    """
    S_u, S_a = gain_matrices(model, weights)
    try:
        P_u = solve_are(model.A, model.B_u, weights.Q_u, weights.R_u)
        P_a = solve_are(model.A - S_u @ P_u, model.B_a, weights.Q_a, weights.R_a)
    except NotStabilizable:
        P_a = solve_are(model.A, model.B_a, weights.Q_a, weights.R_a)
        P_u = solve_are(model.A - S_a @ P_a, model.B_u, weights.Q_u, weights.R_u)
    pair = RiccatiPair(P_u, P_a)
    if not is_hurwitz(closed_loop_matrix(pair, model, weights)):
        raise NotStabilizable("initial pair does not give a Hurwitz closed loop")
    return pair


def lyapunov_iterations(init, model, weights, epsilon=1e-6, max_iter=50, deadline=None,
                        raise_on_max=True, keep_iterates=False):
    """Lyapunov iterations for the coupled Riccati pair.

    Each step solves ``sym(P_l' A_c(P)) + P_l S_l P_l + Q_l = 0`` for both
    players with the closed loop of the current pair, and stops when
    ``max(||dP_u||_F, ||dP_a||_F) <= epsilon`` and both coupled Riccati
    residuals are at most ``10 epsilon``. The residual check matters for
    stiff closed loops, where a small step can leave a large residual. `deadline` is a
    ``time.perf_counter()`` value checked between iterations; when it
    passes, the latest pair is returned unconverged.
    """
    S_u, S_a = gain_matrices(model, weights)
    P_u, P_a = init.P_u, init.P_a
    history = []
    iterates = [RiccatiPair(P_u, P_a)] if keep_iterates else []
    for i in range(1, max_iter + 1):
        A_c = model.A - S_u @ P_u - S_a @ P_a
        try:
            P_u_next = solve_lyapunov(A_c, P_u @ S_u @ P_u + weights.Q_u)
            P_a_next = solve_lyapunov(A_c, P_a @ S_a @ P_a + weights.Q_a)
        except NotHurwitz as exc:
            raise LostStability(f"closed loop not Hurwitz at iteration {i}") from exc
        delta = max(np.linalg.norm(P_u_next - P_u), np.linalg.norm(P_a_next - P_a))
        P_u, P_a = P_u_next, P_a_next
        history.append(delta)
        if keep_iterates:
            iterates.append(RiccatiPair(P_u, P_a))
        if not is_hurwitz(model.A - S_u @ P_u - S_a @ P_a):
            raise LostStability(f"closed loop not Hurwitz after iteration {i}")
        if delta <= epsilon and max(csdre_residuals(RiccatiPair(P_u, P_a), model, weights)) <= 10 * epsilon:
            return IterationResult(RiccatiPair(P_u, P_a), i, True, history, iterates)
        if deadline is not None and time.perf_counter() > deadline:
            return IterationResult(RiccatiPair(P_u, P_a), i, False, history, iterates)
    if raise_on_max:
        raise MaxIterations(f"no convergence in {max_iter} iterations (last step {history[-1]:.3e})")
    return IterationResult(RiccatiPair(P_u, P_a), max_iter, False, history, iterates)


def stage_costs(x, u, a, weights):
    x, u, a = (np.asarray(v, dtype=float) for v in (x, u, a))
    j_u = 0.5 * (x @ weights.Q_u @ x + u @ weights.R_u @ u)
    j_a = 0.5 * (x @ weights.Q_a @ x + a @ weights.R_a @ a)
    return float(j_u), float(j_a)


@dataclass
class OnlineCache:
    epsilon: float = 1e-6
    T: float = 0.01
    time_budget: float = 0.01
    max_iter: int = 50
    pair: RiccatiPair = None
    t: float = None
    x: np.ndarray = None
    last: "StepResult" = None
    failures: int = 0

    def __post_init__(self):
        if self.epsilon <= 0 or self.T <= 0:
            raise ValueError("epsilon and T must be positive")


@dataclass
class StepResult:
    u: np.ndarray
    a: np.ndarray
    xi_hat: float
    f_pred: np.ndarray
    iterations: int
    converged: bool
    warm_start: bool
    res_u: float
    res_a: float
    wall_time: float
    ok: bool = True


@dataclass
class GameContext:
    """Everything the online step needs besides the cache."""
    phi_net: PhiNet
    classifier: ClassifierNet
    trim: object
    weights: GameWeights
    params: object = DEFAULT_PARAMS
    sdc: str = "zero"
    a_nominal: np.ndarray = None
    xi_grid: np.ndarray = field(default_factory=lambda: XI_GRID.copy())


def online_step(cache, x, t, ctx):
    """One sampling period of the real-time game controller.

    Warm-starts from the cached pair when it still stabilizes the current
    frozen model, otherwise re-initializes. Iterates until the epsilon
    criterion or the wall-clock budget is met, then emits the Nash
    feedback, the predicted drift ``Phi(x) a`` and the morph estimate.
    A bitwise-identical state reuses the cached result. At the zero state
    the feedback vanishes for any pair, so no Riccati solve is attempted.
    """
    start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    if cache.last is not None and cache.x is not None and np.array_equal(x, cache.x):
        cache.t = t
        prev = cache.last
        same = StepResult(prev.u.copy(), prev.a.copy(), prev.xi_hat, prev.f_pred.copy(), 0, True, True,
                          prev.res_u, prev.res_a, time.perf_counter() - start, prev.ok)
        return same, cache
    model = assemble_sd_model(x, ctx.phi_net, ctx.trim, ctx.params, ctx.sdc, ctx.a_nominal)
    if not np.any(x):
        zero_u, zero_a = np.zeros(model.B_u.shape[1]), np.zeros(model.B_a.shape[1])
        f_pred = model.B_a @ model.a_offset
        xi_hat = estimate_xi(ctx.classifier.classify(np.concatenate([f_pred, x])), ctx.xi_grid)
        return StepResult(zero_u, zero_a, xi_hat, f_pred, 0, True, False, np.nan, np.nan,
                          time.perf_counter() - start), cache
    deadline = start + cache.time_budget if cache.time_budget > 0 else None
    warm = cache.pair is not None and is_hurwitz(closed_loop_matrix(cache.pair, model, ctx.weights))
    try:
        init = cache.pair if warm else init_riccati(model, ctx.weights)
        result = lyapunov_iterations(init, model, ctx.weights, cache.epsilon, cache.max_iter,
                                     deadline=deadline, raise_on_max=False)
    except SolverError:
        cache.failures += 1
        if cache.last is None:
            raise
        prev = cache.last
        held = StepResult(prev.u.copy(), prev.a.copy(), prev.xi_hat, prev.f_pred.copy(), 0, False, warm,
                          np.nan, np.nan, time.perf_counter() - start, ok=False)
        cache.t = t
        return held, cache
    pair = result.pair
    u, a = nash_feedback(pair, model, ctx.weights, x)
    f_pred = model.B_a @ (model.a_offset + a)
    rho = ctx.classifier.classify(np.concatenate([f_pred, x]))
    xi_hat = estimate_xi(rho, ctx.xi_grid)
    res_u, res_a = csdre_residuals(pair, model, ctx.weights)
    step = StepResult(u, a, xi_hat, f_pred, result.iterations, result.converged, warm, res_u, res_a,
                      time.perf_counter() - start)
    cache.pair, cache.t, cache.x, cache.last, cache.failures = pair, t, x.copy(), step, 0
    return step, cache


def new_cache(cfg=GameConfig()):
    return OnlineCache(cfg.epsilon, cfg.T, cfg.time_budget, cfg.max_iter)


class GameController:
    """Closed-loop adapter: error state in, (u, a, xi command) out."""

    def __init__(self, ctx, cfg=GameConfig()):
        self.ctx = ctx
        self.cfg = cfg
        self.cache = new_cache(cfg)

    def reset(self):
        self.cache = new_cache(self.cfg)

    def __call__(self, x, t):
        step, self.cache = online_step(self.cache, x, t, self.ctx)
        if self.cache.failures > self.cfg.hold_limit:
            raise SolverError(f"solver failed {self.cache.failures} consecutive periods at t={t:.2f}")
        return step
