"""Longitudinal point-mass-plus-pitch model of the variable-span aircraft.

State ``x_n = [V, alpha, theta, q, h]`` (m/s, rad, rad, rad/s, m), input
``u_n = [delta_e, delta_t]`` (rad, %), morph ratio ``xi`` in [0, 1].

All fitted formulas (aerodynamic derivatives, density, speed of sound)
take altitude in kilometres; the state carries metres. Only with h in km
do the fits reproduce the reference input matrix at trim (-4.2074,
-0.0822, 0.0169).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import DegenerateState, NoConvergence, OutOfEnvelope, OutOfRange

STATE_NAMES = ("V", "alpha", "theta", "q", "h")
INPUT_NAMES = ("delta_e", "delta_t")

H_MAX = 10000.0
DELTA_E_LIMITS = (-0.7, 0.7)
DELTA_T_LIMITS = (0.0, 100.0)
# canonical morphing conditions, index order is the label order everywhere
XI_GRID = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
SPAN_GRID = np.array([10.18, 12.22, 14.25, 16.29, 18.32, 20.36])


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1247.0
    g: float = 9.8
    b_min: float = 10.18
    b_max: float = 20.36
    S_w: float = 17.09
    c_A: float = 1.74
    I_y: float = 4067.5
    T_delta_t: float = 21.3
    # lateral inertias are listed with the airframe but unused by the longitudinal model
    I_x: float = 1420.9
    I_z: float = 4786.0
    I_xy: float = 0.0
    I_yz: float = 0.0
    I_zx: float = 0.0

    def __post_init__(self):
        for name in ("m", "g", "b_min", "b_max", "S_w", "c_A", "I_y", "T_delta_t"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.b_max <= self.b_min:
            raise ValueError("b_max must exceed b_min")


DEFAULT_PARAMS = VehicleParams()


@dataclass(frozen=True)
class FlightState:
    V: float
    alpha: float
    theta: float
    q: float
    h: float

    def as_array(self):
        return np.array([self.V, self.alpha, self.theta, self.q, self.h])

    @classmethod
    def from_array(cls, x):
        return cls(*map(float, x))


@dataclass(frozen=True)
class AeroCoeffs:
    C_L: float
    C_D: float
    C_M: float


@dataclass(frozen=True)
class TrimPoint:
    x_e: np.ndarray = field(default_factory=lambda: np.array([40.0, 0.1268, 0.1259, 0.0, 5000.0]))
    u_e: np.ndarray = field(default_factory=lambda: np.array([-0.2890, 42.8188]))
    xi_e: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "x_e", np.asarray(self.x_e, dtype=float).reshape(5))
        object.__setattr__(self, "u_e", np.asarray(self.u_e, dtype=float).reshape(2))
        object.__setattr__(self, "xi_e", float(self.xi_e))


# reference equilibrium; does not zero the model exactly (h-dot = 40 sin(-0.0009))
REFERENCE_TRIM = TrimPoint()
TRIM_TOL = 1e-2


def _check_altitude(h):
    if not (0.0 <= h <= H_MAX):
        raise OutOfEnvelope(f"altitude {h} m outside [0, {H_MAX}] m")


def check_envelope(x):
    V, alpha, _, _, h = x
    if not np.all(np.isfinite(x)):
        raise OutOfEnvelope("non-finite state")
    if V <= 0:
        raise OutOfEnvelope(f"airspeed {V} must be positive")
    if abs(alpha) >= np.pi / 2:
        raise OutOfEnvelope(f"angle of attack {alpha} outside (-pi/2, pi/2)")
    _check_altitude(h)


def air_density(h):
    """Troposphere density fit, kg/m^3; `h` in metres."""
    _check_altitude(h)
    return 1.2250 * (1.0 - (h / 1000.0) / 44.3308) ** 4.2559


def speed_of_sound(h):
    _check_altitude(h)
    return 20.0468 * np.sqrt(288.15 - 6.5 * (h / 1000.0))


def mach(V, h):
    return V / speed_of_sound(h)


def aero_derivatives(h, Ma, xi):
    """Fitted longitudinal derivatives as a dict; `h` in metres."""
    hk = h / 1000.0
    return {
        "CL0": 0.0098 * Ma + 0.4890 * xi + 0.3340,
        "CLa": -0.0001 * hk - 1.0597 * Ma + 6.0872 * xi + 5.9792,
        "CLde": -0.0013 * hk + 0.0316 * Ma + 0.4099,
        "CLq": 0.8710 * Ma + 5.1386 * xi + 9.6995,
        "CD0": 0.0005 * hk - 0.0277 * Ma + 0.0142 * xi + 0.0288,
        "CDa": 0.0001 * hk + 0.0325 * Ma + 0.0906 * xi + 0.1883,
        "CDa2": -0.0011 * hk - 1.2434 * Ma + 0.1408 * xi + 2.1775,
        "CM0": -0.0001 * hk + 0.0031 * Ma - 0.2436 * xi + 0.0121,
        "CMa": -0.0001 * hk - 0.0922 * Ma - 1.4954 * xi - 1.6444,
        "CMde": 0.0030 * hk - 0.1256 * Ma - 0.9766,
        "CMq": -0.6857 * Ma - 1.0762 * xi - 18.1012,
    }


def aero_coefficients(x, xi, delta_e, params=DEFAULT_PARAMS):
    x = np.asarray(x, dtype=float)
    check_envelope(x)
    V, alpha, _, q, h = x
    d = aero_derivatives(h, mach(V, h), xi)
    qhat = params.c_A / (2.0 * V) * q
    return AeroCoeffs(
        C_L=d["CL0"] + d["CLa"] * alpha + d["CLde"] * delta_e + d["CLq"] * qhat,
        C_D=d["CD0"] + d["CDa"] * alpha + d["CDa2"] * alpha**2,
        C_M=d["CM0"] + d["CMa"] * alpha + d["CMde"] * delta_e + d["CMq"] * qhat,
    )


def f_n(x, xi, params=DEFAULT_PARAMS):
    """Input-free drift of the physical model."""
    x = np.asarray(x, dtype=float)
    check_envelope(x)
    V, alpha, theta, q, h = x
    p = params
    rho = air_density(h)
    d = aero_derivatives(h, mach(V, h), xi)
    qhat = p.c_A / (2.0 * V) * q
    gamma = theta - alpha
    return np.array([
        -rho * V**2 * p.S_w / (2 * p.m) * (d["CD0"] + d["CDa"] * alpha + d["CDa2"] * alpha**2)
        - p.g * np.sin(gamma),
        -rho * V * p.S_w / (2 * p.m) * (d["CL0"] + d["CLa"] * alpha + d["CLq"] * qhat)
        + q + p.g * np.cos(gamma) / V,
        q,
        rho * V**2 * p.S_w * p.c_A / (2 * p.I_y) * (d["CM0"] + d["CMa"] * alpha + d["CMq"] * qhat),
        V * np.sin(gamma),
    ])


def g_n(x, params=DEFAULT_PARAMS):
    """5x2 input matrix; rows for theta and h are structurally zero."""
    x = np.asarray(x, dtype=float)
    V, alpha, _, _, h = x
    if not V > 0:
        raise DegenerateState(f"airspeed {V} must be positive")
    p = params
    rho = air_density(h)
    d = aero_derivatives(h, mach(V, h), 0.0)
    G = np.zeros((5, 2))
    G[0, 1] = p.T_delta_t * np.cos(alpha) / p.m
    G[1, 0] = -rho * V * p.S_w * d["CLde"] / (2 * p.m)
    G[1, 1] = -p.T_delta_t * np.sin(alpha) / (p.m * V)
    G[3, 0] = rho * V**2 * p.S_w * p.c_A * d["CMde"] / (2 * p.I_y)
    return G


def dynamics(x, u, xi, params=DEFAULT_PARAMS):
    return f_n(x, xi, params) + g_n(x, params) @ np.asarray(u, dtype=float)


def trim_residual(trim, params=DEFAULT_PARAMS):
    return dynamics(trim.x_e, trim.u_e, trim.xi_e, params)


def shifted_drift(x, xi, trim, params=DEFAULT_PARAMS):
    """Drift in error coordinates, trim input folded in."""
    xn = np.asarray(x, dtype=float) + trim.x_e
    return f_n(xn, xi + trim.xi_e, params) + g_n(xn, params) @ trim.u_e


def shifted_input_matrix(x, trim, params=DEFAULT_PARAMS):
    return g_n(np.asarray(x, dtype=float) + trim.x_e, params)


def shifted_dynamics(x, u, xi, trim, params=DEFAULT_PARAMS):
    return shifted_drift(x, xi, trim, params) + shifted_input_matrix(x, trim, params) @ np.asarray(u, dtype=float)


def fd_steps(x):
    return 1e-3 * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def linearize(trim, params=DEFAULT_PARAMS, include_trim_input=True):
    """Jacobian linearization about a trim point at fixed xi.

    With ``include_trim_input=True`` A is the central-difference Jacobian of
    the shifted dynamics at the origin, i.e. of ``f_n + g_n u_e``. With
    False, A is the Jacobian of ``f_n`` alone with the input term held
    out; that is the convention the reference A matrix follows (its q-dot
    row carries ``2 f_n4 / V`` in the V column). B is ``g_n(x_e)`` in
    both cases.
    """
    x_e = trim.x_e
    steps = fd_steps(x_e)
    u_hold = trim.u_e if include_trim_input else np.zeros(2)
    A = np.zeros((5, 5))
    for i in range(5):
        e = np.zeros(5)
        e[i] = steps[i]
        A[:, i] = (dynamics(x_e + e, u_hold, trim.xi_e, params)
                   - dynamics(x_e - e, u_hold, trim.xi_e, params)) / (2 * steps[i])
    return A, g_n(x_e, params)


def solve_trim(V, h, xi, guess=REFERENCE_TRIM, params=DEFAULT_PARAMS, tol=1e-12):
    """Level-flight trim at airspeed `V` and altitude `h`.

    Solves for alpha, theta, delta_e, delta_t with q = 0 so that the
    V-dot, alpha-dot, q-dot and h-dot rows vanish.
    """
    def residual(z):
        alpha, theta, de, dt = z
        r = dynamics(np.array([V, alpha, theta, 0.0, h]), np.array([de, dt]), xi, params)
        return r[[0, 1, 3, 4]]

    z0 = np.array([guess.x_e[1], guess.x_e[2], guess.u_e[0], guess.u_e[1]])
    sol = scipy.optimize.root(residual, z0, method="hybr", tol=tol)
    if not sol.success or np.max(np.abs(residual(sol.x))) > 1e-9:
        raise NoConvergence(f"trim solve failed: {sol.message}")
    alpha, theta, de, dt = sol.x
    return TrimPoint(np.array([V, alpha, theta, 0.0, h]), np.array([de, dt]), xi)


def morph_ratio_from_span(b, params=DEFAULT_PARAMS):
    if not (params.b_min <= b <= params.b_max):
        raise OutOfRange(f"span {b} m outside [{params.b_min}, {params.b_max}]")
    return (b - params.b_min) / (params.b_max - params.b_min)


def span_from_morph_ratio(xi, params=DEFAULT_PARAMS):
    if not (0.0 <= xi <= 1.0):
        raise OutOfRange(f"morph ratio {xi} outside [0, 1]")
    return params.b_min + xi * (params.b_max - params.b_min)
