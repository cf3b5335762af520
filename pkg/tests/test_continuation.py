import math

import numpy as np
import pytest

from twofluid.continuation import (
    ContinuationPoint,
    Protocol,
    autocorrelation,
    classify_window,
    load_checkpoint,
    period_autocorrelation,
    period_zero_crossings,
    read_bifurcation_csv,
    squared_amplitude_slope,
    sweep,
    sweep_values,
    write_bifurcation_csv,
)
from twofluid.spectral_core import DomainConfig, SpectralState

EPARS = DomainConfig.from_dT(L1=2.0, L2=2.0, nu=9e-4, dT=0.1)
FAST = Protocol(transient_time=350.0, window_time=60.0, dt=0.05, N1=8, N2=8, seed_amplitude=1e-5)


class TestPeriodEstimation:
    def test_sine(self):
        dt, P = 0.05, 13.3
        t = np.arange(0, 200, dt)
        x = np.sin(2 * np.pi * t / P) + 0.3
        p, h = period_autocorrelation(x, dt)
        assert p == pytest.approx(P, rel=2e-3) and h > 0.95
        assert period_zero_crossings(x, dt) == pytest.approx(P, rel=1e-3)

    def test_fundamental_not_a_multiple(self):
        # a weak slow modulation makes a later multiple the tallest unbiased peak
        dt = 0.03
        t = np.arange(0, 200, dt)
        x = (1 + 0.01 * np.sin(2 * np.pi * t / 90)) * np.sin(2 * np.pi * t / 11.1)
        p, h = period_autocorrelation(x, dt)
        assert p == pytest.approx(11.1, rel=2e-3) and h > 0.98

    def test_autocorrelation_normalized(self):
        ac = autocorrelation(np.random.default_rng(0).standard_normal(500))
        assert ac[0] == pytest.approx(1.0) and np.all(np.abs(ac[:250]) <= 1 + 1e-12)

    def test_no_oscillation(self):
        assert period_autocorrelation(np.linspace(0, 1, 100), 0.1)[0] is None
        assert period_zero_crossings(np.linspace(0, 1, 100), 0.1) is None


class TestClassification:
    dt = 0.05
    t = np.arange(0, 200, 0.05)

    def test_steady_small(self):
        amp, p, _, cls, _ = classify_window(np.full(10, 1e-6), np.zeros(10), self.dt, Protocol())
        assert cls == "steady" and p is None

    def test_steady_large_but_constant_probe(self):
        assert classify_window(np.full(50, 0.3), np.full(50, 0.1), self.dt, Protocol())[3] == "steady"

    def test_periodic(self):
        x = 0.2 * np.sin(2 * np.pi * self.t / 11.1)
        amp, p, pz, cls, flags = classify_window(np.abs(x) + 0.3, x, self.dt, Protocol())
        assert cls == "periodic" and p == pytest.approx(11.1, rel=5e-3) and not flags

    def test_incommensurate_is_complex(self):
        x = np.sin(2 * np.pi * self.t / 11.1) + 0.9 * np.sin(2 * np.pi * self.t / (11.1 * math.sqrt(5)))
        assert classify_window(np.abs(x) + 0.3, x, self.dt, Protocol())[3] == "complex"


class TestSweep:
    def test_value_validation(self):
        with pytest.raises(ValueError):
            sweep_values(EPARS, [0.1, 0.05, 0.2], FAST)
        with pytest.raises(ValueError):
            sweep(EPARS, 0.0, 0.1, 0.0, FAST)
        with pytest.raises(ValueError):
            Protocol(window_time=0.0)

    def test_stable_then_unstable(self):
        pts = sweep_values(EPARS, [-0.01, 0.1], FAST)
        assert pts[0].classification == "steady" and pts[0].amplitude < FAST.zero_tol
        assert pts[1].classification == "periodic" and pts[1].amplitude > 0.01
        # lab-frame period 2 L2 / (T+ + T-) at the oscillating point
        c = EPARS.with_dT(0.1)
        assert pts[1].period == pytest.approx(2 * c.L2 / (c.T_plus + c.T_minus), rel=0.05)
        assert pts[1].period_zero_crossing == pytest.approx(pts[1].period, rel=0.02)

    def test_reseed_from_zero_state(self):
        pts = sweep_values(EPARS, [0.1], FAST, initial_state=SpectralState.zeros(8, 8))
        assert "reseeded" in pts[0].flags and pts[0].amplitude > 0.01

    def test_downward_sweep_values(self, monkeypatch):
        seen = []
        import twofluid.continuation as cont

        def fake(cfg, state, dt, protocol):
            seen.append(round(cfg.dT, 12))
            return ContinuationPoint(cfg.dT, 0.0, None, "steady", [], None, state)

        monkeypatch.setattr(cont, "_run_point", fake)
        sweep(EPARS, 0.2, 0.1, 0.05, FAST)
        assert seen == [0.2, 0.15, 0.1]

    def test_blowup_is_flagged_and_sweep_continues(self):
        proto = Protocol(transient_time=300.0, window_time=50.0, dt=2.5, N1=8, N2=8, seed_amplitude=0.5)
        pts = sweep_values(EPARS, [0.1, 0.12], proto)
        assert "blowup" in pts[0].flags and math.isinf(pts[0].amplitude)
        assert len(pts) == 2

    def test_checkpoint_resume(self, tmp_path):
        pts = sweep_values(EPARS, [-0.01, 0.1], FAST, checkpoint_dir=tmp_path)
        files = sorted(tmp_path.glob("point_*.json"))
        assert len(files) == 2
        back = load_checkpoint(files[1])
        assert back.amplitude == pts[1].amplitude
        assert np.array_equal(back.final_state.coeffs, pts[1].final_state.coeffs)
        again = sweep_values(EPARS, [-0.01, 0.1], FAST, checkpoint_dir=tmp_path)
        assert [p.to_dict() for p in again] == [p.to_dict() for p in pts]

    def test_bad_checkpoint(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"format": 1, "kind": "something_else"}')
        with pytest.raises(ValueError):
            load_checkpoint(p)


class TestOutputs:
    def test_csv_round_trip(self, tmp_path):
        pts = [ContinuationPoint(0.05, 0.0, None, "steady"),
               ContinuationPoint(0.1, 0.31, 13.3, "periodic", ["reseeded", "period_mismatch"])]
        p = tmp_path / "bifurcation.csv"
        write_bifurcation_csv(pts, p)
        assert p.read_text().splitlines()[0] == "dT,amplitude,period,classification,flags"
        back = read_bifurcation_csv(p)
        assert [b.to_dict() for b in back] == [q.to_dict() for q in pts]

    def test_squared_amplitude_slope(self):
        d1, d2 = 0.001, 0.16
        pts = [ContinuationPoint(d, math.sqrt(3.0 * (d - d1)), 10.0, "periodic") for d in (0.002, 0.003, 0.004)]
        pts += [ContinuationPoint(d, math.sqrt(0.5 * (d2 - d)), 10.0, "periodic") for d in (0.155, 0.157, 0.159)]
        pts += [ContinuationPoint(0.0, 0.0, None, "steady")]
        assert squared_amplitude_slope(pts, d1, "above") == pytest.approx(3.0)
        assert squared_amplitude_slope(pts, d2, "below") == pytest.approx(0.5)
        with pytest.raises(ValueError):
            squared_amplitude_slope(pts, 0.2, "above")
