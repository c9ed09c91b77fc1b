import dataclasses
import math

import numpy as np
import pytest

from hpdob import sim
from hpdob.control import PdOnly, PdPlusCdob, PdPlusHpdob
from hpdob.plant import State
from hpdob.signals import Constant, Hold, Ramp, SineSum, SineTerm, StateDependent, Sum
from hpdob.validation import cdob_recursion_residual

SHORT = sim.ScenarioConfig(duration=0.05)


def quiet(**kw):
    return sim.ScenarioConfig(**{"duration": 0.02, "disturbance": Constant(0.0), "reference": Hold(0.0), **kw})


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"Ts": 0.0}, {"Ts": -1e-4}, {"duration": 1e-5}, {"substeps": 0}, {"substeps": 1.5},
        {"plant_model": "magic"}, {"noise_std": (-1.0, 0.0)}, {"torque_limit": 0.0},
        {"settle_fraction": 1.0}, {"initial_state": State(float("nan"), 0.0)},
    ])
    def test_rejects(self, kw):
        with pytest.raises(sim.ConfigError):
            sim.ScenarioConfig(**kw)

    def test_defaults(self):
        cfg = sim.ScenarioConfig()
        assert cfg.pair.true_params.J == 0.125 and cfg.pair.true_params.b == 0.045
        assert cfg.Ts == 1e-4 and cfg.pd.Kp == 100.0 and cfg.pd.Kd == 10.0
        assert cfg.n_steps == 20000

    def test_run_rejects_non_config(self):
        with pytest.raises(sim.ConfigError):
            sim.run_scenario({"Ts": 1e-4})


class TestRunScenario:
    @pytest.mark.parametrize("mode", [PdOnly(), PdPlusCdob(), PdPlusHpdob(order=2)])
    def test_zero_everything_gives_zero_trace(self, mode):
        trace = sim.run_scenario(quiet(mode=mode))
        assert len(trace) == 201
        for name in sim.TRACE_COLUMNS[1:]:
            assert np.all(getattr(trace, name) == 0.0), name

    def test_uniform_grid(self):
        trace = sim.run_scenario(quiet())
        np.testing.assert_array_equal(trace.t, np.arange(201) * 1e-4)
        assert len({len(c) for c in trace.columns().values()}) == 1

    def test_pd_only_leaves_tracking_deviation(self):
        trace, m = sim.run_with_metrics(dataclasses.replace(SHORT, mode=PdOnly(), duration=1.0,
                                                            reference=Hold(0.0)))
        assert m.rms_tracking > 1e-3
        assert np.all(trace.tau_hat == 0.0)

    def test_pure_discrete_constant_halves(self):
        cfg = quiet(mode=PdPlusCdob(0.5), disturbance=Constant(2.0), plant_model="pure-discrete", duration=0.003)
        trace = sim.run_scenario(cfg)
        e = trace.est_error
        ratios = e[1:12] / e[:11]
        np.testing.assert_allclose(ratios, 0.5, rtol=1e-9)

    @pytest.mark.parametrize("dist", [Constant(1.5), Ramp(0.5, 20.0),
                                      SineSum((SineTerm(5.0, 1.0), SineTerm(2.0, 30.0, 0.3)))])
    @pytest.mark.parametrize("g", [0.15, 0.35, 1.0, 1.9])
    def test_pure_discrete_reproduces_error_recursion(self, dist, g):
        # regulation keeps L.x small, so the per-step roundoff stays far below the tolerance
        cfg = quiet(mode=PdPlusCdob(g), disturbance=dist, plant_model="pure-discrete", duration=0.1)
        assert cdob_recursion_residual(sim.run_scenario(cfg), g) <= 1e-12

    def test_est_error_column(self):
        trace = sim.run_scenario(SHORT)
        np.testing.assert_array_equal(trace.est_error, trace.tau_dn - trace.tau_hat)

    def test_matched_plant_nominal_equals_external(self):
        trace = sim.run_scenario(SHORT)
        np.testing.assert_allclose(trace.tau_dn, trace.tau_d, rtol=1e-14, atol=1e-15)

    def test_mismatched_inertia_changes_nominal(self):
        from hpdob.plant import PlantPair, ServoParams
        pair = PlantPair(ServoParams(0.25, 0.045), ServoParams(0.125, 0.045))
        trace = sim.run_scenario(dataclasses.replace(SHORT, pair=pair))
        assert np.max(np.abs(trace.tau_dn - trace.tau_d)) > 0.1

    def test_deterministic(self):
        cfg = dataclasses.replace(SHORT, mode=PdPlusHpdob(order=2), noise_std=(1e-5, 1e-3), seed=4)
        a, b = sim.run_scenario(cfg), sim.run_scenario(cfg)
        for name in sim.TRACE_COLUMNS:
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_seed_changes_noisy_run(self):
        cfg = dataclasses.replace(SHORT, noise_std=(1e-5, 1e-3))
        a = sim.run_scenario(dataclasses.replace(cfg, seed=1))
        b = sim.run_scenario(dataclasses.replace(cfg, seed=2))
        assert not np.array_equal(a.u, b.u)

    def test_noise_off_never_consults_rng(self, monkeypatch):
        def boom(*a, **k):
            raise AssertionError("random source used with noise off")
        monkeypatch.setattr(np.random, "default_rng", boom)
        sim.run_scenario(SHORT)

    def test_unstable_gain_diverges_pure_discrete(self):
        cfg = dataclasses.replace(SHORT, mode=PdPlusCdob(2.1), plant_model="pure-discrete", duration=0.2)
        trace, m = sim.run_with_metrics(cfg)
        assert m.diverged and trace.diverged
        assert len(trace) < cfg.n_steps + 1
        assert np.all(np.isfinite(trace.u))

    def test_torque_limit_contains_unstable_gain(self):
        cfg = dataclasses.replace(SHORT, mode=PdPlusCdob(2.1), plant_model="pure-discrete",
                                  duration=0.2, torque_limit=50.0)
        trace = sim.run_scenario(cfg)
        assert np.max(np.abs(trace.u)) <= 50.0

    def test_hpdob_delta_timing_variants_differ(self):
        a = sim.run_scenario(dataclasses.replace(SHORT, mode=PdPlusHpdob(delta_timing="current")))
        b = sim.run_scenario(dataclasses.replace(SHORT, mode=PdPlusHpdob(delta_timing="previous")))
        assert not np.array_equal(a.tau_hat, b.tau_hat)

    def test_substeps_insensitive_for_constant_load(self):
        base = quiet(disturbance=Constant(1.0), reference=sim.ScenarioConfig().reference, duration=0.2)
        m1 = sim.run_with_metrics(dataclasses.replace(base, substeps=1))[1]
        m10 = sim.run_with_metrics(dataclasses.replace(base, substeps=10))[1]
        assert abs(m1.rms_est_error - m10.rms_est_error) <= 1e-6
        assert abs(m1.rms_tracking - m10.rms_tracking) <= 1e-6


class TestMetrics:
    def _trace(self, n, est_error=0.0, q=0.0):
        z = np.zeros(n)
        return sim.Trace(np.arange(n) * 1e-4, z + q, z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy(),
                         z.copy(), z + est_error)

    def test_zero_trace(self):
        m = sim.compute_metrics(self._trace(10))
        assert (m.rms_tracking, m.rms_est_error, m.max_est_error, m.diverged) == (0.0, 0.0, 0.0, False)

    def test_constant_error(self):
        m = sim.compute_metrics(self._trace(10, est_error=-0.3))
        assert m.rms_est_error == pytest.approx(0.3, rel=1e-15)
        assert m.max_est_error == pytest.approx(0.3, rel=1e-15)

    def test_settle_window(self):
        tr = self._trace(10)
        tr.est_error[:2] = 100.0
        assert sim.compute_metrics(tr, 0.2).rms_est_error == 0.0
        assert sim.compute_metrics(tr, 0.0).rms_est_error > 0.0

    def test_diverged_flag_propagates(self):
        tr = self._trace(5, est_error=1.0)
        tr.diverged = True
        m = sim.compute_metrics(tr)
        assert m.diverged and m.rms_est_error == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            sim.compute_metrics(self._trace(0))
        with pytest.raises(ValueError):
            sim.compute_metrics(self._trace(3), 1.0)

    def test_json(self, tmp_path):
        import json
        m = sim.compute_metrics(self._trace(4, est_error=2.0))
        m.to_json(tmp_path / "m.json")
        assert json.loads((tmp_path / "m.json").read_text()) == m.to_dict()


class TestCsv:
    def test_round_trip_is_bitwise(self, tmp_path):
        trace = sim.run_scenario(dataclasses.replace(SHORT, mode=PdPlusHpdob(order=2)))
        trace.to_csv(tmp_path / "t.csv")
        back = sim.Trace.from_csv(tmp_path / "t.csv")
        for name in sim.TRACE_COLUMNS:
            assert getattr(back, name).tobytes() == getattr(trace, name).tobytes(), name

    def test_header(self, tmp_path):
        sim.run_scenario(quiet()).to_csv(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text().splitlines()[0] == ",".join(sim.TRACE_COLUMNS)

    def test_bad_header(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            sim.Trace.from_csv(tmp_path / "t.csv")


class TestSweep:
    def test_single_value_equals_direct_run(self):
        [(value, m)] = sim.sweep(SHORT, "mode.g", [0.25])
        direct = sim.run_with_metrics(dataclasses.replace(SHORT, mode=PdPlusCdob(0.25)))[1]
        assert value == 0.25 and m == direct

    def test_independent_and_ordered(self):
        values = [0.35, 0.15, 0.25]
        results = sim.sweep(SHORT, "mode.g", values)
        assert [v for v, _ in results] == values
        for v, m in results:
            assert m == sim.run_with_metrics(dataclasses.replace(SHORT, mode=PdPlusCdob(v)))[1]

    def test_parallel_matches_serial(self):
        values = [0.15, 0.35]
        assert sim.sweep(SHORT, "mode.g", values, max_workers=2) == sim.sweep(SHORT, "mode.g", values)

    def test_nested_paths(self):
        cfg = sim.with_parameter(SHORT, "pair.true_params.J", 0.25)
        assert cfg.pair.true_params.J == 0.25 and cfg.pair.nominal_params.J == 0.125
        assert sim.with_parameter(SHORT, "substeps", 3.0).substeps == 3
        assert sim.with_parameter(SHORT, "pd.Kp", 50).pd.Kp == 50.0

    @pytest.mark.parametrize("path, value", [("mode.gain", 0.1), ("nope", 1.0), ("substeps", 2.5),
                                             ("mode.g", -1.0), ("Ts", 0.0)])
    def test_invalid(self, path, value):
        with pytest.raises(sim.ConfigError):
            sim.sweep(SHORT, path, [value])

    def test_unstable_gain_flagged(self):
        base = dataclasses.replace(SHORT, plant_model="pure-discrete", duration=0.2)
        results = sim.sweep(base, "mode.g", [0.15, 0.25, 0.35, 2.1])
        assert [m.diverged for _, m in results] == [False, False, False, True]


def test_state_dependent_benchmark_is_finite():
    cfg = dataclasses.replace(SHORT, disturbance=Sum((Constant(1.0), StateDependent(0.1, 0.5, 0.1))))
    _, m = sim.run_with_metrics(cfg)
    assert math.isfinite(m.rms_est_error) and not m.diverged
