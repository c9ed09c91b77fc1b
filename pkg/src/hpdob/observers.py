"""
Discrete-time disturbance observers for the servo plant.

All three observers share the auxiliary-variable recursion

    z_hat[k+1] = (1 - L.D) z_hat[k] + L.(A + D L^T - I) x[k] + L.B u[k] + delta[k]
    tau_hat[k] = z_hat[k] - L.x[k]

with delta = 0 for the conventional observer and the predictor, and a
finite-difference extrapolation of the predictor output for the
high-performance observer.

The update functions are pure: old state in, new state out. They use plain
arithmetic on the model entries, so they also run on exact rationals when the
model arrays hold `fractions.Fraction` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .plant import DiscreteModel, State

HISTORY_LENGTH = 3
COEFF_MODES = ("derived", "paper-literal")

# Second-order extrapolation weights on (newest, previous, oldest).
_ORDER2_WEIGHTS = {
    "derived": (1.5, -2.0, 0.5),
    "paper-literal": (1.5, -2.0, 1.5),
}
# Weight on the oldest sample beyond the difference form d1 + (d1 - d2)/2.
_ORDER2_LEFTOVER = {mode: w[2] - 0.5 for mode, w in _ORDER2_WEIGHTS.items()}


@dataclass(frozen=True)
class ObserverGain:
    L: tuple
    g: float


@dataclass(frozen=True)
class CdobState:
    z_hat: float = 0.0


@dataclass(frozen=True)
class PredictorState:
    z_hat_p: float = 0.0
    history: tuple = ()  # newest first

    @property
    def filled_count(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class HpdobState:
    z_hat_o: float = 0.0
    order: int = 1
    coeff_mode: str = "derived"

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.coeff_mode not in COEFF_MODES:
            raise ValueError(f"coeff_mode must be one of {COEFF_MODES}, got {self.coeff_mode!r}")


def tune_gain(g, D_d) -> ObserverGain:
    """Equal-entry gain L = g / ||D_d||_1 * [1, 1]."""
    d0, d1 = (D_d.tolist() if hasattr(D_d, "tolist") else list(D_d))
    norm1 = abs(d0) + abs(d1)
    if norm1 == 0:
        raise ValueError("disturbance input vector must be nonzero")
    ell = g / norm1
    return ObserverGain(L=(ell, ell), g=g)


def contraction_factor(gain: ObserverGain, D_d) -> float:
    d0, d1 = (D_d.tolist() if hasattr(D_d, "tolist") else list(D_d))
    l0, l1 = gain.L
    return abs(1 - (l0 * d0 + l1 * d1))


def estimate(z_hat, x: State, gain: ObserverGain):
    """tau_hat = z_hat - L.x"""
    l0, l1 = gain.L
    return z_hat - (l0 * x[0] + l1 * x[1])


def _propagate(z_hat, x: State, u, dm: DiscreteModel, gain: ObserverGain):
    (a00, a01), (a10, a11) = dm.A_d.tolist()
    b0, b1 = dm.B_d.tolist()
    d0, d1 = dm.D_d.tolist()
    l0, l1 = gain.L
    decay = 1 - (l0 * d0 + l1 * d1)
    # L^T (A + D L^T - I); the identity is taken off A first so entries near 1 cancel exactly
    cq = l0 * ((a00 - 1) + d0 * l0) + l1 * (a10 + d1 * l0)
    cv = l0 * (a01 + d0 * l1) + l1 * ((a11 - 1) + d1 * l1)
    return decay * z_hat + (cq * x[0] + cv * x[1]) + (l0 * b0 + l1 * b1) * u


def cdob_update(s: CdobState, x: State, u, dm: DiscreteModel, gain: ObserverGain):
    """One conventional-observer step.

    Returns ``(next_state, tau_hat)`` where ``tau_hat`` is the time-k estimate
    taken from the pre-update auxiliary variable.
    """
    tau_hat = estimate(s.z_hat, x, gain)
    return CdobState(_propagate(s.z_hat, x, u, dm, gain)), tau_hat


def predictor_update(s: PredictorState, x: State, u, dm: DiscreteModel, gain: ObserverGain):
    """Conventional-observer step that also records its output in the history ring."""
    tau_hat_p = estimate(s.z_hat_p, x, gain)
    history = (tau_hat_p,) + s.history[:HISTORY_LENGTH - 1]
    return PredictorState(_propagate(s.z_hat_p, x, u, dm, gain), history), tau_hat_p


def derivative_estimates(history: Sequence[float], Ts: float) -> tuple[float, float]:
    """Backward-difference first and second derivatives from a newest-first history.

    A derivative without enough samples behind it is reported as 0.
    """
    d1 = d2 = 0.0
    if len(history) >= 2:
        d1 = (history[0] - history[1]) / Ts
    if len(history) >= 3:
        d2 = (history[0] - 2 * history[1] + history[2]) / (Ts * Ts)
    return d1, d2


def delta_estimate(history: Sequence[float], order: int = 1, mode: str = "derived"):
    """Predicted disturbance change over the next sampling period.

    Order 1 is the backward difference. Order 2 adds half the second
    difference; ``mode="paper-literal"`` swaps the oldest weight 1/2 for 3/2,
    which does not vanish on constant histories. Returns 0 while the history
    is too short for the requested order.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if len(history) < order + 1:
        return 0.0
    if order == 1:
        return history[0] - history[1]
    if mode not in _ORDER2_WEIGHTS:
        raise ValueError(f"mode must be one of {COEFF_MODES}, got {mode!r}")
    # difference form of the weights: exact zero on constants, exact step on affine histories
    d1 = history[0] - history[1]
    d2 = history[1] - history[2]
    value = d1 + (d1 - d2) / 2
    leftover = _ORDER2_LEFTOVER[mode]
    return value + leftover * history[2] if leftover else value


def hpdob_update(s: HpdobState, x: State, u, delta_hat, dm: DiscreteModel, gain: ObserverGain):
    """One high-performance observer step with an externally supplied change estimate."""
    tau_hat = estimate(s.z_hat_o, x, gain)
    z_next = _propagate(s.z_hat_o, x, u, dm, gain) + delta_hat
    return replace(s, z_hat_o=z_next), tau_hat
