from fractions import Fraction

import numpy as np
import pytest

from hpdob import observers as obs
from hpdob.plant import DiscreteModel, ServoParams, State, build_continuous, discretize, step_discrete

BASE_SERVO = ServoParams(J=0.125, b=0.045)
BASE_TS = 1e-4


@pytest.fixture
def base_dm():
    return discretize(build_continuous(BASE_SERVO), BASE_TS)


def exact_model(dm: DiscreteModel) -> DiscreteModel:
    """Same model with every entry converted exactly to a Fraction."""
    conv = np.vectorize(Fraction, otypes=[object])
    return DiscreteModel(conv(dm.A_d), conv(dm.B_d), conv(dm.D_d), Fraction(dm.Ts))


def drive_cdob(dm, gain, tau_seq, z0=0.0, u_seq=None, x0=State(0.0, 0.0), update=None):
    """Open-loop matched plant driven by an injected tau_dn sequence.

    Returns (errors, estimates) where errors[k] = tau_seq[k] - tau_hat[k].
    """
    update = update or obs.cdob_update
    x, s = x0, obs.CdobState(z0)
    errors, estimates = [], []
    for k, tau in enumerate(tau_seq):
        u = 0 if u_seq is None else u_seq[k]
        s, tau_hat = update(s, x, u, dm, gain)
        errors.append(tau - tau_hat)
        estimates.append(tau_hat)
        x = step_discrete(dm, x, u, tau)
    return errors, estimates


_acceptance_lines = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the terminal summary."""
    def _record(name, passed, detail=""):
        _acceptance_lines.append(f"{'PASS' if passed else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
