"""Disturbance and position-reference generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .plant import State

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Constant:
    level: float

    def __call__(self, t, x):
        return self.level


@dataclass(frozen=True)
class Ramp:
    offset: float
    slope: float

    def __call__(self, t, x):
        return self.offset + self.slope * t


@dataclass(frozen=True)
class Poly:
    """sum_i coefficients[i] * t**i"""
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) < 1:
            raise ValueError("Poly needs at least one coefficient")

    def __call__(self, t, x):
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc


@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class SineSum:
    terms: tuple[SineTerm, ...]
    _omegas: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("SineSum needs at least one term")
        for term in self.terms:
            if term.frequency < 0:
                raise ValueError(f"frequency must be >= 0, got {term.frequency}")
        object.__setattr__(self, "_omegas", tuple(
            (s.amplitude, TWO_PI * s.frequency, s.phase) for s in self.terms))

    def __call__(self, t, x):
        total = 0.0
        for amplitude, omega, phase in self._omegas:
            total += amplitude * math.sin(omega * t + phase)
        return total


@dataclass(frozen=True)
class StateDependent:
    extra_viscous: float = 0.0
    coulomb: float = 0.0
    quadratic_drag: float = 0.0

    def __call__(self, t, x):
        v = x[1]
        # sign(0) = 0 keeps the value deterministic at rest
        sign = (v > 0) - (v < 0)
        return self.extra_viscous * v + self.coulomb * sign + self.quadratic_drag * v * abs(v)


@dataclass(frozen=True)
class Sum:
    terms: tuple["DisturbanceSpec", ...]

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("Sum needs at least one term")

    def __call__(self, t, x):
        total = 0.0
        for term in self.terms:
            total += term(t, x)
        return total


DisturbanceSpec = Union[Constant, Ramp, Poly, SineSum, StateDependent, Sum]


@dataclass(frozen=True)
class Step:
    amplitude: float
    start: float = 0.0

    def __call__(self, t):
        return (self.amplitude if t >= self.start else 0.0), 0.0


@dataclass(frozen=True)
class Sine:
    amplitude: float
    frequency: float

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError(f"frequency must be >= 0, got {self.frequency}")

    def __call__(self, t):
        w = TWO_PI * self.frequency
        return self.amplitude * math.sin(w * t), self.amplitude * w * math.cos(w * t)


@dataclass(frozen=True)
class Hold:
    value: float = 0.0

    def __call__(self, t):
        return self.value, 0.0


ReferenceSpec = Union[Step, Sine, Hold]


def eval_disturbance(spec: DisturbanceSpec, t: float, x: State = State(0.0, 0.0)) -> float:
    return spec(t, x)


def eval_reference(spec: ReferenceSpec, t: float) -> tuple[float, float]:
    """Reference position and its analytic time derivative."""
    return spec(t)


def benchmark_disturbance() -> Sum:
    """Smooth two-tone load plus Coulomb friction and quadratic drag."""
    return Sum((
        SineSum((SineTerm(5.0, 1.0, 0.0), SineTerm(2.0, 3.0, math.pi / 4))),
        StateDependent(extra_viscous=0.0, coulomb=0.5, quadratic_drag=0.1),
    ))


def regulation_reference() -> Step:
    return Step(1.0, 0.0)


def tracking_reference() -> Sine:
    return Sine(1.0, 0.5)
