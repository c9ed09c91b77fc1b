"""Outer-loop PD law, inner-loop disturbance compensation and controller modes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .observers import COEFF_MODES

DELTA_TIMINGS = ("current", "previous")


@dataclass(frozen=True)
class PdGains:
    Kp: float = 100.0
    Kd: float = 10.0

    def __post_init__(self):
        for name in ("Kp", "Kd"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


def _check_gain(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"observer gain {name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class PdOnly:
    pass


@dataclass(frozen=True)
class PdPlusCdob:
    g: float = 0.15

    def __post_init__(self):
        _check_gain("g", self.g)


@dataclass(frozen=True)
class PdPlusHpdob:
    """PD with the high-performance observer.

    ``delta_timing="current"`` builds the change estimate from predictor
    outputs up to and including step k; ``"previous"`` stops at k-1.
    """
    order: int = 1
    g_p: float = 0.15
    g_o: float = 0.15
    coeff_mode: str = "derived"
    delta_timing: str = "current"

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        _check_gain("g_p", self.g_p)
        _check_gain("g_o", self.g_o)
        if self.coeff_mode not in COEFF_MODES:
            raise ValueError(f"coeff_mode must be one of {COEFF_MODES}, got {self.coeff_mode!r}")
        if self.delta_timing not in DELTA_TIMINGS:
            raise ValueError(f"delta_timing must be one of {DELTA_TIMINGS}, got {self.delta_timing!r}")


ControllerMode = Union[PdOnly, PdPlusCdob, PdPlusHpdob]


def pd_control(ref: tuple[float, float], x, gains: PdGains) -> float:
    q_ref, qdot_ref = ref
    return gains.Kp * (q_ref - x[0]) + gains.Kd * (qdot_ref - x[1])


def compose_control(u_pd: float, tau_hat: float) -> float:
    # the disturbance enters the plant with a minus sign through D = B, so adding the estimate cancels it
    return u_pd + tau_hat


def saturate(u: float, limit: float | None) -> float:
    if limit is None:
        return u
    return min(max(u, -limit), limit)
