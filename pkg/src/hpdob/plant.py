"""
Second-order servo plant: continuous model, exact zero-order-hold
discretization, nominal disturbance variable and ground-truth integration.

The servo is

    d/dt [q, qdot] = A_c [q, qdot] + B_c u - D_c tau_d

with A_c = [[0, 1], [0, s*b/J]], B_c = D_c = [0, 1/J] and s the damping sign
(-1 for physical viscous friction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import simpson

# Below this |a*Ts| the phi-functions are evaluated from their power series.
_SERIES_THRESHOLD = 0.1
_SERIES_TERMS = 14


class State(NamedTuple):
    q: float
    qdot: float


@dataclass(frozen=True)
class ServoParams:
    J: float
    b: float
    damping_sign: int = -1

    def __post_init__(self):
        if not (math.isfinite(self.J) and self.J > 0):
            raise ValueError(f"inertia J must be finite and > 0, got {self.J}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"viscous coefficient b must be finite and >= 0, got {self.b}")
        if self.damping_sign not in (1, -1):
            raise ValueError(f"damping_sign must be +1 or -1, got {self.damping_sign}")

    @property
    def velocity_coefficient(self) -> float:
        """The A_c[1][1] entry, damping_sign * b / J."""
        return self.damping_sign * self.b / self.J


@dataclass(frozen=True)
class PlantPair:
    true_params: ServoParams
    nominal_params: ServoParams


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    A_c: np.ndarray
    B_c: np.ndarray
    D_c: np.ndarray

    @property
    def J(self) -> float:
        return 1.0 / float(self.B_c[1])


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    A_d: np.ndarray
    B_d: np.ndarray
    D_d: np.ndarray
    Ts: float


def build_continuous(params: ServoParams) -> ContinuousModel:
    A_c = np.array([[0.0, 1.0], [0.0, params.velocity_coefficient]])
    B_c = np.array([0.0, 1.0 / params.J])
    return ContinuousModel(A_c=A_c, B_c=B_c, D_c=B_c.copy())


def _phi1(x: float) -> float:
    # (1 - e^-x) / x
    if abs(x) < _SERIES_THRESHOLD:
        term, total = 1.0, 1.0
        for n in range(2, _SERIES_TERMS + 2):
            term *= -x / n
            total += term
        return total
    return -math.expm1(-x) / x


def _phi2(x: float) -> float:
    # (x - 1 + e^-x) / x^2
    if abs(x) < _SERIES_THRESHOLD:
        term, total = 0.5, 0.5
        for n in range(3, _SERIES_TERMS + 3):
            term *= -x / n
            total += term
        return total
    return (x + math.expm1(-x)) / (x * x)


def discretize(cm: ContinuousModel, Ts: float) -> DiscreteModel:
    """Exact zero-order-hold discretization of the servo model.

    With a = -A_c[1][1] and x = a*Ts the closed form is

        A_d = [[1, Ts*phi1(x)], [0, e^-x]]
        B_d = D_d = [Ts^2*phi2(x)/J, Ts*phi1(x)/J]

    where phi1(x) = (1 - e^-x)/x and phi2(x) = (x - 1 + e^-x)/x^2. Both are
    taken from their series near x = 0, where the direct forms cancel.
    """
    if not (Ts > 0 and math.isfinite(Ts)):
        raise ValueError(f"sampling period must be finite and > 0, got {Ts}")
    a = -float(cm.A_c[1, 1])
    J = cm.J
    x = a * Ts
    p1 = _phi1(x)
    p2 = _phi2(x)
    A_d = np.array([[1.0, Ts * p1], [0.0, math.exp(-x)]])
    B_d = np.array([Ts * Ts * p2 / J, Ts * p1 / J])
    return DiscreteModel(A_d=A_d, B_d=B_d, D_d=B_d.copy(), Ts=float(Ts))


def matrix_exp_oracle(A, t: float, tol: float = 1e-17) -> np.ndarray:
    """e^{A t} by scaling and squaring of a truncated Taylor series.

    Validation only; independent of the closed form in `discretize`.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    M = np.asarray(A, dtype=float) * t
    n = M.shape[0]
    norm = np.abs(M).sum(axis=1).max()
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
        M = M / 2.0**squarings
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 200):
        term = term @ M / k
        result = result + term
        if np.abs(term).max() < tol:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def input_integral_oracle(A, v, Ts: float, nodes: int = 16) -> np.ndarray:
    """Gauss-Legendre quadrature of int_0^Ts e^{A tau} v dtau using the series oracle."""
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * Ts
    v = np.asarray(v, dtype=float)
    total = np.zeros_like(v)
    for xi, wi in zip(xs, ws):
        total = total + wi * (matrix_exp_oracle(A, half * (xi + 1.0)) @ v)
    return half * total


def nominal_disturbance(x: State, u: float, tau_d: float,
                        cm_true: ContinuousModel, cm_nom: ContinuousModel) -> float:
    """Scalar disturbance that makes the nominal model reproduce the true derivative.

    Only the velocity row of D_c is nonzero, so the projection reduces to
    J_n times the velocity-row residual.
    """
    q, qdot = x
    residual = ((cm_nom.A_c[1, 0] - cm_true.A_c[1, 0]) * q
                + (cm_nom.A_c[1, 1] - cm_true.A_c[1, 1]) * qdot
                + (cm_nom.B_c[1] - cm_true.B_c[1]) * u
                + cm_true.D_c[1] * tau_d)
    return float(residual / cm_nom.D_c[1])


def exact_disturbance_input(dist: Callable[[float], float], cm_nom: ContinuousModel,
                            k: int, Ts: float, quad_points: int = 64) -> np.ndarray:
    """Discrete disturbance vector int_0^Ts e^{A tau} D tau_dn((k+1)Ts - tau) dtau.

    Composite Simpson over `quad_points` panels. `dist` maps time to the
    nominal disturbance. Used to quantify the piecewise-constant approximation.
    """
    if quad_points < 2:
        raise ValueError("quad_points must be >= 2")
    taus = np.linspace(0.0, Ts, quad_points + 1)
    t_end = (k + 1) * Ts
    samples = np.array([matrix_exp_oracle(cm_nom.A_c, tau) @ cm_nom.D_c * dist(t_end - tau)
                        for tau in taus])
    return simpson(samples, x=taus, axis=0)


def step_discrete(dm: DiscreteModel, x: State, u: float, tau_dn: float) -> State:
    (a00, a01), (a10, a11) = dm.A_d.tolist()
    b0, b1 = dm.B_d.tolist()
    d0, d1 = dm.D_d.tolist()
    q, qdot = x
    return State(a00 * q + a01 * qdot + b0 * u - d0 * tau_dn,
                 a10 * q + a11 * qdot + b1 * u - d1 * tau_dn)


def step_truth(params: ServoParams, x: State, u_zoh: float,
               dist: Callable[[float, State], float], t0: float, Ts: float,
               substeps: int = 10) -> State:
    """Advance the true continuous plant over one control period with RK4.

    The input is held constant; the disturbance is evaluated at every stage.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    inv_J = 1.0 / params.J
    c = params.velocity_coefficient
    dt = Ts / substeps

    def accel(t, q, v):
        return c * v + inv_J * (u_zoh - dist(t, State(q, v)))

    q, v = x
    for i in range(substeps):
        t = t0 + i * dt
        k1q, k1v = v, accel(t, q, v)
        k2q = v + 0.5 * dt * k1v
        k2v = accel(t + 0.5 * dt, q + 0.5 * dt * k1q, k2q)
        k3q = v + 0.5 * dt * k2v
        k3v = accel(t + 0.5 * dt, q + 0.5 * dt * k2q, k3q)
        k4q = v + dt * k3v
        k4v = accel(t + dt, q + dt * k3q, k4q)
        q = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return State(q, v)
