"""Experiment configuration: JSON schema, validation and round-tripping.

The file is a JSON object with three sections:

    plant:      a_tilde, b_tilde, d, e, delta (nested arrays),
                optional disturbance {k_on, k_off, vector} or {table: {"k": vec}}
    controller: type ("robust" | "imsmc"), mu0_init, xi_t, delta_bar, N,
                compensator_mode ("one_step" | "literal_sum" | "off"),
                optional g_init (designed via the LMI when absent),
                optional lm {max_iter, tol_residual, tol_step, lambda_init,
                             lambda_up, lambda_down}
    simulation: x0, horizon, optional output_map, y_ref, seed

Validation errors carry the dotted path of the offending key.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .nlsolve import LmOptions
from .plant import Plant, DisturbanceSchedule
from .reaching import COMPENSATOR_MODES


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config key '{path}': {message}")


@dataclass(frozen=True)
class ControllerConfig:
    type: str = "imsmc"
    mu0_init: float = 0.1
    xi_t: float = 0.01
    delta_bar: float = 0.005
    n_history: int = 2
    compensator_mode: str = "one_step"
    g_init: np.ndarray | None = None
    lm: LmOptions = field(default_factory=LmOptions)


@dataclass(frozen=True)
class SimulationConfig:
    x0: np.ndarray = None
    horizon: int = 150
    output_map: np.ndarray | None = None
    y_ref: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    plant: Plant
    controller: ControllerConfig
    simulation: SimulationConfig

    def with_controller_type(self, kind: str) -> "ExperimentConfig":
        from dataclasses import replace
        return ExperimentConfig(plant=self.plant,
                                controller=replace(self.controller, type=kind),
                                simulation=self.simulation)


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}", "missing")
    return section[key]


def _matrix(section: dict, key: str, path: str) -> np.ndarray:
    raw = _require(section, key, path)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}", f"not a numeric array: {exc}") from None
    if arr.ndim > 2:
        raise ConfigError(f"{path}.{key}", "matrix literal must be at most 2-dimensional")
    return np.atleast_2d(arr)


def _vector(section: dict, key: str, path: str) -> np.ndarray:
    raw = _require(section, key, path)
    try:
        arr = np.array(raw, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}", f"not a numeric vector: {exc}") from None
    return arr


def _scalar(section: dict, key: str, path: str, default=None, kind=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing")
        return default
    raw = section[key]
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}") from None


def _parse_disturbance(raw, path: str, n: int) -> DisturbanceSchedule:
    if raw is None:
        return DisturbanceSchedule()
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    if "table" in raw:
        try:
            table = {int(k): np.array(v, dtype=float) for k, v in raw["table"].items()}
        except (TypeError, ValueError, AttributeError):
            raise ConfigError(f"{path}.table", "expected {step: vector}") from None
        for k, v in table.items():
            if v.size != n:
                raise ConfigError(f"{path}.table.{k}", f"vector length must be {n}")
        return DisturbanceSchedule(table=table)
    vec = _vector(raw, "vector", path)
    if vec.size != n:
        raise ConfigError(f"{path}.vector", f"vector length must be {n}")
    k_on = _scalar(raw, "k_on", path, kind=int)
    k_off = _scalar(raw, "k_off", path, kind=int)
    return DisturbanceSchedule(k_on=k_on, k_off=k_off, vector=vec)


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("", "top level must be an object")
    for section in ("plant", "controller", "simulation"):
        if section not in doc or not isinstance(doc[section], dict):
            raise ConfigError(section, "missing or not an object")

    p = doc["plant"]
    a_tilde = _matrix(p, "a_tilde", "plant")
    b_tilde = _matrix(p, "b_tilde", "plant")
    if b_tilde.shape[0] != a_tilde.shape[0]:
        b_tilde = b_tilde.T  # accept row-major vector literal for single-input plants
    d = _matrix(p, "d", "plant")
    if d.shape[0] != a_tilde.shape[0]:
        d = d.T
    e = _matrix(p, "e", "plant")
    if e.shape[1] != a_tilde.shape[0]:
        e = e.T
    delta = _matrix(p, "delta", "plant")
    n = a_tilde.shape[0]
    if a_tilde.shape != (n, n):
        raise ConfigError("plant.a_tilde", "must be square")
    if b_tilde.shape[0] != n:
        raise ConfigError("plant.b_tilde", f"must have {n} rows")
    if delta.shape != (d.shape[1], e.shape[0]):
        raise ConfigError("plant.delta", f"must be {d.shape[1]}x{e.shape[0]}")
    disturbance = _parse_disturbance(p.get("disturbance"), "plant.disturbance", n)
    plant = Plant(a_tilde=a_tilde, b_tilde=b_tilde, d=d, e=e, delta=delta,
                  disturbance=disturbance)

    c = doc["controller"]
    ctype = _scalar(c, "type", "controller", default="imsmc", kind=str)
    if ctype not in ("robust", "imsmc"):
        raise ConfigError("controller.type", "must be 'robust' or 'imsmc'")
    mode = _scalar(c, "compensator_mode", "controller", default="one_step", kind=str)
    if mode not in COMPENSATOR_MODES:
        raise ConfigError("controller.compensator_mode",
                          f"must be one of {COMPENSATOR_MODES}")
    mu0 = _scalar(c, "mu0_init", "controller", default=0.1)
    if not 0.0 < mu0 < 1.0:
        raise ConfigError("controller.mu0_init", "must lie in (0, 1)")
    xi_t = _scalar(c, "xi_t", "controller", default=0.01)
    if xi_t <= 0:
        raise ConfigError("controller.xi_t", "must be positive")
    delta_bar = _scalar(c, "delta_bar", "controller", default=0.005)
    n_hist = _scalar(c, "N", "controller", default=2, kind=int)
    if n_hist < 1:
        raise ConfigError("controller.N", "must be >= 1")
    g_init = None
    if c.get("g_init") is not None:
        g_init = _matrix(c, "g_init", "controller")
        nu = b_tilde.shape[1]
        if g_init.shape != (nu, n - nu):
            raise ConfigError("controller.g_init", f"must be {nu}x{n - nu}")
    lm_raw = c.get("lm", {})
    if not isinstance(lm_raw, dict):
        raise ConfigError("controller.lm", "expected an object")
    try:
        lm = LmOptions(
            max_iter=_scalar(lm_raw, "max_iter", "controller.lm", default=200, kind=int),
            tol_residual=_scalar(lm_raw, "tol_residual", "controller.lm", default=1e-10),
            tol_step=_scalar(lm_raw, "tol_step", "controller.lm", default=1e-12),
            lambda_init=_scalar(lm_raw, "lambda_init", "controller.lm", default=1e-3),
            lambda_up=_scalar(lm_raw, "lambda_up", "controller.lm", default=10.0),
            lambda_down=_scalar(lm_raw, "lambda_down", "controller.lm", default=0.1),
        )
    except ValueError as exc:
        raise ConfigError("controller.lm", str(exc)) from None
    controller = ControllerConfig(type=ctype, mu0_init=mu0, xi_t=xi_t,
                                  delta_bar=delta_bar, n_history=n_hist,
                                  compensator_mode=mode, g_init=g_init, lm=lm)

    s = doc["simulation"]
    x0 = _vector(s, "x0", "simulation")
    if x0.size != n:
        raise ConfigError("simulation.x0", f"length must be {n}")
    horizon = _scalar(s, "horizon", "simulation", default=150, kind=int)
    if horizon < 1:
        raise ConfigError("simulation.horizon", "must be >= 1")
    output_map = None
    if s.get("output_map") is not None:
        output_map = _vector(s, "output_map", "simulation")
        if output_map.size != n:
            raise ConfigError("simulation.output_map", f"length must be {n}")
    y_ref = _scalar(s, "y_ref", "simulation", default=0.0)
    seed = _scalar(s, "seed", "simulation", default=0, kind=int)
    simulation = SimulationConfig(x0=x0, horizon=horizon, output_map=output_map,
                                  y_ref=y_ref, seed=seed)
    return ExperimentConfig(plant=plant, controller=controller, simulation=simulation)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(doc)


def config_to_doc(cfg: ExperimentConfig) -> dict:
    plant = cfg.plant
    doc = {
        "plant": {
            "a_tilde": plant.a_tilde.tolist(),
            "b_tilde": plant.b_tilde.tolist(),
            "d": plant.d.tolist(),
            "e": plant.e.tolist(),
            "delta": plant.delta.tolist(),
        },
        "controller": {
            "type": cfg.controller.type,
            "mu0_init": cfg.controller.mu0_init,
            "xi_t": cfg.controller.xi_t,
            "delta_bar": cfg.controller.delta_bar,
            "N": cfg.controller.n_history,
            "compensator_mode": cfg.controller.compensator_mode,
            "lm": asdict(cfg.controller.lm),
        },
        "simulation": {
            "x0": cfg.simulation.x0.tolist(),
            "horizon": cfg.simulation.horizon,
            "y_ref": cfg.simulation.y_ref,
            "seed": cfg.simulation.seed,
        },
    }
    sched = plant.disturbance
    if sched.table is not None:
        doc["plant"]["disturbance"] = {"table": {str(k): v.tolist() for k, v in sched.table.items()}}
    elif sched.vector is not None:
        doc["plant"]["disturbance"] = {"k_on": sched.k_on, "k_off": sched.k_off,
                                       "vector": sched.vector.tolist()}
    if cfg.controller.g_init is not None:
        doc["controller"]["g_init"] = cfg.controller.g_init.tolist()
    if cfg.simulation.output_map is not None:
        doc["simulation"]["output_map"] = cfg.simulation.output_map.tolist()
    return doc


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_doc(cfg), fh, indent=2)
        fh.write("\n")
