"""
Closed-loop scenario engine.

Each control step k runs, in order: sample the plant state (plus optional
measurement noise), evaluate the reference, extract the active observer's
time-k estimate, compose and hold the control input, record, update the
observer(s) with x[k] and u[k], then advance the plant one period.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import observers as obs
from .control import (ControllerMode, PdGains, PdOnly, PdPlusCdob, PdPlusHpdob,
                      compose_control, pd_control, saturate)
from .plant import (PlantPair, ServoParams, State, build_continuous, discretize,
                    nominal_disturbance, step_discrete, step_truth)
from .signals import DisturbanceSpec, ReferenceSpec, benchmark_disturbance, tracking_reference

PLANT_MODELS = ("continuous-truth", "pure-discrete")
TRACE_COLUMNS = ("t", "q", "qdot", "q_ref", "qdot_ref", "u", "tau_d", "tau_dn", "tau_hat", "est_error")
DIVERGENCE_LIMIT = 1e9


class ConfigError(ValueError):
    pass


def baseline_plant() -> PlantPair:
    servo = ServoParams(J=0.125, b=0.045)
    return PlantPair(servo, servo)


@dataclass(frozen=True)
class ScenarioConfig:
    pair: PlantPair = field(default_factory=baseline_plant)
    Ts: float = 1e-4
    duration: float = 2.0
    substeps: int = 10
    mode: ControllerMode = field(default_factory=PdPlusCdob)
    pd: PdGains = field(default_factory=PdGains)
    disturbance: DisturbanceSpec = field(default_factory=benchmark_disturbance)
    reference: ReferenceSpec = field(default_factory=tracking_reference)
    initial_state: State = State(0.0, 0.0)
    noise_std: tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    plant_model: str = "continuous-truth"
    torque_limit: float | None = None
    settle_fraction: float = 0.2

    def __post_init__(self):
        if not (math.isfinite(self.Ts) and self.Ts > 0):
            raise ConfigError(f"Ts must be finite and > 0, got {self.Ts}")
        if not (math.isfinite(self.duration) and self.duration > self.Ts):
            raise ConfigError(f"duration must be finite and > Ts, got {self.duration}")
        if isinstance(self.substeps, bool) or not isinstance(self.substeps, int) or self.substeps < 1:
            raise ConfigError(f"substeps must be an integer >= 1, got {self.substeps!r}")
        if self.plant_model not in PLANT_MODELS:
            raise ConfigError(f"plant_model must be one of {PLANT_MODELS}, got {self.plant_model!r}")
        if len(self.noise_std) != 2 or any(not (math.isfinite(s) and s >= 0) for s in self.noise_std):
            raise ConfigError(f"noise_std must be two finite values >= 0, got {self.noise_std}")
        if self.torque_limit is not None and not (math.isfinite(self.torque_limit) and self.torque_limit > 0):
            raise ConfigError(f"torque_limit must be finite and > 0, got {self.torque_limit}")
        if not 0 <= self.settle_fraction < 1:
            raise ConfigError(f"settle_fraction must be in [0, 1), got {self.settle_fraction}")
        if not all(math.isfinite(v) for v in self.initial_state):
            raise ConfigError(f"initial_state must be finite, got {self.initial_state}")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.Ts))


@dataclass
class Trace:
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    q_ref: np.ndarray
    qdot_ref: np.ndarray
    u: np.ndarray
    tau_d: np.ndarray
    tau_dn: np.ndarray
    tau_hat: np.ndarray
    est_error: np.ndarray
    diverged: bool = False

    def __len__(self):
        return len(self.t)

    def columns(self):
        return {name: getattr(self, name) for name in TRACE_COLUMNS}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            cols = [getattr(self, name).tolist() for name in TRACE_COLUMNS]
            for row in zip(*cols):
                writer.writerow([repr(v) for v in row])

    @classmethod
    def from_csv(cls, path, diverged=False) -> "Trace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            rows = [[float(v) for v in row] for row in reader]
        data = np.array(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
        return cls(*(data[:, i].copy() for i in range(len(TRACE_COLUMNS))), diverged=diverged)


@dataclass(frozen=True)
class Metrics:
    rms_tracking: float
    rms_est_error: float
    max_est_error: float
    diverged: bool
    settle_fraction: float

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _bounded(*values) -> bool:
    return all(math.isfinite(v) and abs(v) <= DIVERGENCE_LIMIT for v in values)


def run_scenario(cfg: ScenarioConfig) -> Trace:
    if not isinstance(cfg, ScenarioConfig):
        raise ConfigError("run_scenario expects a ScenarioConfig")
    true_params = cfg.pair.true_params
    cm_true = build_continuous(true_params)
    cm_nom = build_continuous(cfg.pair.nominal_params)
    dm = discretize(cm_nom, cfg.Ts)
    Ts, mode, pd, limit = cfg.Ts, cfg.mode, cfg.pd, cfg.torque_limit
    dist, reference = cfg.disturbance, cfg.reference
    pure_discrete = cfg.plant_model == "pure-discrete"

    sigma_q, sigma_v = cfg.noise_std
    rng = np.random.default_rng(cfg.seed) if (sigma_q > 0 or sigma_v > 0) else None

    if isinstance(mode, PdPlusCdob):
        gain = obs.tune_gain(mode.g, dm.D_d)
        cdob = obs.CdobState()
    elif isinstance(mode, PdPlusHpdob):
        gain_p = obs.tune_gain(mode.g_p, dm.D_d)
        gain_o = obs.tune_gain(mode.g_o, dm.D_d)
        pred = obs.PredictorState()
        hp = obs.HpdobState(order=mode.order, coeff_mode=mode.coeff_mode)
        use_current = mode.delta_timing == "current"
    elif not isinstance(mode, PdOnly):
        raise ConfigError(f"unknown controller mode {mode!r}")

    rec = {name: [] for name in TRACE_COLUMNS}
    diverged = False
    x = State(*cfg.initial_state)
    n_steps = cfg.n_steps
    for k in range(n_steps + 1):
        t = k * Ts
        if not _bounded(*x):
            diverged = True
            break
        xm = x
        if rng is not None:
            xm = State(x[0] + sigma_q * rng.standard_normal(), x[1] + sigma_v * rng.standard_normal())

        ref = reference(t)
        u_pd = pd_control(ref, xm, pd)
        if isinstance(mode, PdPlusCdob):
            tau_hat = obs.estimate(cdob.z_hat, xm, gain)
        elif isinstance(mode, PdPlusHpdob):
            tau_hat = obs.estimate(hp.z_hat_o, xm, gain_o)
        else:
            tau_hat = 0.0
        u = saturate(compose_control(u_pd, tau_hat), limit)
        if not (_bounded(u) and math.isfinite(tau_hat)):
            diverged = True
            break

        tau_d = dist(t, x)
        tau_dn = nominal_disturbance(x, u, tau_d, cm_true, cm_nom)
        for name, value in zip(TRACE_COLUMNS, (t, x[0], x[1], ref[0], ref[1], u, tau_d,
                                               tau_dn, tau_hat, tau_dn - tau_hat)):
            rec[name].append(value)
        if k == n_steps:
            break

        if isinstance(mode, PdPlusCdob):
            cdob, _ = obs.cdob_update(cdob, xm, u, dm, gain)
        elif isinstance(mode, PdPlusHpdob):
            previous_history = pred.history
            pred, _ = obs.predictor_update(pred, xm, u, dm, gain_p)
            history = pred.history if use_current else previous_history
            delta_hat = obs.delta_estimate(history, mode.order, mode.coeff_mode)
            hp, _ = obs.hpdob_update(hp, xm, u, delta_hat, dm, gain_o)

        if pure_discrete:
            x = step_discrete(dm, x, u, tau_dn)
        else:
            x = step_truth(true_params, x, u, dist, t, Ts, cfg.substeps)

    return Trace(*(np.array(rec[name], dtype=float) for name in TRACE_COLUMNS), diverged=diverged)


def compute_metrics(trace: Trace, settle_fraction: float = 0.2) -> Metrics:
    """RMS tracking and estimation error over the samples after the settle window."""
    if not 0 <= settle_fraction < 1:
        raise ValueError(f"settle_fraction must be in [0, 1), got {settle_fraction}")
    n = len(trace)
    if n == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    start = int(math.floor(settle_fraction * n))
    tracking = trace.q_ref[start:] - trace.q[start:]
    err = trace.est_error[start:]
    return Metrics(
        rms_tracking=float(np.sqrt(np.mean(tracking**2))),
        rms_est_error=float(np.sqrt(np.mean(err**2))),
        max_est_error=float(np.max(np.abs(err))),
        diverged=bool(trace.diverged),
        settle_fraction=float(settle_fraction),
    )


def run_with_metrics(cfg: ScenarioConfig) -> tuple[Trace, Metrics]:
    trace = run_scenario(cfg)
    return trace, compute_metrics(trace, cfg.settle_fraction)


def _replace_path(obj, path: list[str], value):
    name = path[0]
    if not dataclasses.is_dataclass(obj) or name not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError(f"no parameter {name!r} on {type(obj).__name__}")
    current = getattr(obj, name)
    if len(path) > 1:
        value = _replace_path(current, path[1:], value)
    elif isinstance(current, int) and not isinstance(current, bool):
        if float(value) != int(value):
            raise ConfigError(f"parameter {name!r} needs an integer, got {value!r}")
        value = int(value)
    elif isinstance(current, float):
        value = float(value)
    try:
        return dataclasses.replace(obj, **{name: value})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def with_parameter(cfg: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    """Copy of ``cfg`` with the dotted attribute path (e.g. ``mode.g``) set to ``value``."""
    return _replace_path(cfg, parameter.split("."), value)


def sweep_runs(base: ScenarioConfig, parameter: str, values, max_workers: int | None = None):
    """Like `sweep` but keeps each run's trace: a list of (value, Trace, Metrics)."""
    values = list(values)
    configs = [with_parameter(base, parameter, v) for v in values]
    if max_workers and max_workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run_with_metrics, configs))
    else:
        results = [run_with_metrics(c) for c in configs]
    return [(v, trace, metrics) for v, (trace, metrics) in zip(values, results)]


def sweep(base: ScenarioConfig, parameter: str, values, max_workers: int | None = None):
    """Run one independent scenario per value; results follow the input order.

    ``parameter`` is a dotted attribute path into the config, e.g. ``mode.g``,
    ``pd.Kp`` or ``pair.true_params.J``. An unknown path raises ConfigError
    before anything runs.
    """
    return [(v, metrics) for v, _, metrics in sweep_runs(base, parameter, values, max_workers)]
