"""Run configuration.

Everything lives in dataclasses with the reference defaults; an INI-style
file with sections ``[vehicle] [trim] [game] [daiml] [classifier]
[scenario] [collect]`` overrides any field. Vectors are written as
comma-separated numbers; diagonal weight matrices are given by their
diagonals. Units are SI with angles in rad and altitude in m.
"""

import configparser
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .vehicle import REFERENCE_TRIM, TrimPoint, VehicleParams


def _diag(*vals):
    return field(default_factory=lambda: np.array(vals, dtype=float))


def default_r_a(h=25):
    # 20 reference entries; extra 100s are inserted ahead of the final five
    tail = [200.0, 200.0, 100.0, 1.0, 3.0]
    return np.array([100.0] * (h - len(tail)) + tail)


@dataclass
class DaimlConfig:
    alpha: float = 0.1
    eta: float = 0.5
    gamma: float = 10.0
    K: int = 32
    B: int = 224
    lr_phi: float = 1e-2
    lr_h: float = 1e-3
    ridge: float = -1.0  # negative: 1e-6 * trace(Phi^T Phi) / h
    epochs: int = 60
    seed: int = 0
    spectral_bound: float = 20.0
    hidden: tuple = (64, 64, 32)
    m: int = 5
    disc_hidden: int = 128

    def __post_init__(self):
        if self.alpha < 0 or not (0 < self.eta <= 1) or self.gamma <= 0:
            raise ConfigError("need alpha >= 0, 0 < eta <= 1, gamma > 0")
        if self.K < 1 or self.B < 1:
            raise ConfigError("batch sizes must be positive")

    @property
    def h(self):
        return 5 * self.m


@dataclass
class ClassifierConfig:
    hidden: tuple = (200, 200, 128)
    lr: float = 0.05
    epochs: int = 30
    batch: int = 64
    seed: int = 0
    val_fraction: float = 0.2
    use_noisy_labels: bool = True


@dataclass
class GameConfig:
    Q_u: np.ndarray = _diag(20, 2000, 700, 200, 2)
    Q_a: np.ndarray = _diag(20, 2000, 700, 200, 2)
    R_u: np.ndarray = _diag(1500, 0.25)
    R_a: np.ndarray = field(default_factory=default_r_a)
    epsilon: float = 1e-6
    T: float = 0.01
    max_iter: int = 50
    # wall-clock budget per step in seconds; <= 0 disables it
    time_budget: float = 0.01
    # "zero": A(x) = 0; "nominal": A(x) from the learned drift at trim
    sdc: str = "zero"
    hold_limit: int = 5

    def __post_init__(self):
        for name in ("Q_u", "Q_a", "R_u", "R_a"):
            v = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, np.diag(v) if v.ndim == 1 else v)
        if self.epsilon <= 0 or self.T <= 0:
            raise ConfigError("epsilon and T must be positive")
        if self.sdc not in ("zero", "nominal"):
            raise ConfigError(f"unknown sdc mode {self.sdc!r}")


@dataclass
class ScenarioConfig:
    x0: np.ndarray = field(default_factory=lambda: np.array([35.0, 0.1968, 0.1729, 0.0, 4990.0]))
    duration: float = 60.0
    dt: float = 0.01
    T: float = 0.01
    # per-channel actuator noise std; negative entries mean 0.3 * |u_e|
    noise_std: np.ndarray = _diag(-1, -1)
    seed: int = 0
    morph_mode: str = "lagged"
    morph_rate: float = 0.2
    morph_tau: float = 0.5
    settle_fraction: float = 0.01

    def __post_init__(self):
        if self.dt <= 0 or self.duration < self.dt:
            raise ConfigError("need dt > 0 and duration >= dt")
        if self.morph_mode not in ("lagged", "instantaneous"):
            raise ConfigError(f"unknown morph mode {self.morph_mode!r}")

    def actuator_std(self, trim):
        std = np.asarray(self.noise_std, dtype=float)
        return np.where(std < 0, 0.3 * np.abs(trim.u_e), std)


@dataclass
class CollectConfig:
    seconds_per_condition: float = 50.0
    seed: int = 0
    # random reference excursions flown by the baseline controller
    ref_amplitude: np.ndarray = _diag(6.0, 0.0, 0.0, 0.0, 15.0)
    ref_hold: float = 5.0
    # label noise std per channel, added to the finite-difference labels
    label_noise: np.ndarray = _diag(0.01, 0.001, 0.001, 0.01, 0.01)
    actuator_noise_scale: float = 0.3


@dataclass
class Config:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    trim: TrimPoint = field(default_factory=lambda: REFERENCE_TRIM)
    game: GameConfig = field(default_factory=GameConfig)
    daiml: DaimlConfig = field(default_factory=DaimlConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    collect: CollectConfig = field(default_factory=CollectConfig)


def _coerce(raw, default, key):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, str):
            return raw.strip()
        if isinstance(default, (np.ndarray, tuple, list)):
            vals = [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
            if isinstance(default, tuple):
                return tuple(int(v) for v in vals)
            return np.array(vals)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unsupported field type for {key}")


def _override(obj, section, name):
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, raw in section.items():
        if key not in fields:
            raise ConfigError(f"unknown key [{name}] {key}")
        kwargs[key] = _coerce(raw, getattr(obj, key), f"[{name}] {key}")
    try:
        return dataclasses.replace(obj, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def load_config(path=None):
    """Read an INI config; missing sections and keys keep their defaults."""
    cfg = Config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in dataclasses.fields(Config)}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")
        if name == "trim":
            sec = parser[name]
            trim = cfg.trim
            cfg.trim = TrimPoint(
                _coerce(sec["x_e"], trim.x_e, "x_e") if "x_e" in sec else trim.x_e,
                _coerce(sec["u_e"], trim.u_e, "u_e") if "u_e" in sec else trim.u_e,
                float(sec.get("xi_e", trim.xi_e)),
            )
            continue
        setattr(cfg, name, _override(getattr(cfg, name), parser[name], name))
    if cfg.game.R_a.shape[0] != cfg.daiml.h:
        if "R_a" in parser["game"] if parser.has_section("game") else False:
            raise ConfigError(f"R_a has size {cfg.game.R_a.shape[0]}, expected h = {cfg.daiml.h}")
        cfg.game = dataclasses.replace(cfg.game, R_a=np.diag(default_r_a(cfg.daiml.h)))
    return cfg
