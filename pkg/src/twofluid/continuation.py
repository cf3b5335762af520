"""Warm-started parameter sweeps in dT.

Each point integrates from the final state of the previous point, discards a
transient, then records over a measurement window:

* ``amplitude``: max over the window of ``sup |u1|``;
* ``period``: oscillation period of the midpoint probe ``u1(L1/2, L2/2)``,
  from the autocorrelation peak and cross-checked against zero crossings;
* ``classification``: ``steady`` / ``periodic`` / ``complex``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .spectral_core import FORMAT_VERSION, DomainConfig, SpectralState
from .time_integrator import (
    InitialCondition,
    IntegratorConfig,
    default_dt,
    eigenmode_state,
    simulate,
)

CSV_COLUMNS = ["dT", "amplitude", "period", "classification", "flags"]


@dataclass(frozen=True)
class Protocol:
    transient_time: float = 400.0
    window_time: float = 200.0
    dt: float | None = None  # None: integrator default for the first point's cfg
    N1: int = 32
    N2: int = 32
    seed_amplitude: float = 1e-3
    reseed_floor: float = 1e-9
    zero_tol: float = 1e-4  # amplitudes below this count as the laminar state
    sample_every: int = 1  # window sampling, in steps
    periodic_corr: float = 0.98
    period_rtol: float = 0.02
    frame: str = "lab"

    def __post_init__(self):
        if self.transient_time < 0 or self.window_time <= 0:
            raise ValueError("transient_time must be >= 0 and window_time > 0")


@dataclass
class ContinuationPoint:
    dT: float
    amplitude: float
    period: float | None
    classification: str
    flags: list = field(default_factory=list)
    period_zero_crossing: float | None = None
    final_state: SpectralState | None = field(default=None, repr=False, compare=False)

    def to_row(self) -> list:
        return [repr(self.dT), repr(self.amplitude), "" if self.period is None else repr(self.period),
                self.classification, ";".join(self.flags)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("final_state")
        return d


# ---------------------------------------------------------------------------
# period estimation


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Unbiased, normalized autocorrelation (lag 0 = 1)."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = len(x)
    f = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(f * np.conj(f))[:n]
    ac /= np.arange(n, 0, -1)
    return ac / ac[0] if ac[0] > 0 else ac


def period_autocorrelation(x, dt: float, max_fraction: float = 0.5):
    """``(period, peak_height)`` from the first prominent autocorrelation maximum past its first zero.

    Parabolic interpolation refines the peak location.  Returns ``(None, 0)``
    when no such maximum exists within ``max_fraction`` of the record.
    """
    ac = autocorrelation(x)
    n = int(len(ac) * max_fraction)
    neg = np.nonzero(ac[:n] < 0)[0]
    if len(neg) == 0:
        return None, 0.0
    start = neg[0]
    seg = ac[start:n]
    if len(seg) < 3:
        return None, 0.0
    # Every multiple of the period is a near-unit peak and the unbiased
    # estimate can rank a later one highest; take the first prominent one.
    peaks = np.nonzero((seg[1:-1] >= seg[:-2]) & (seg[1:-1] > seg[2:]))[0] + 1
    if len(peaks) == 0:
        return None, float(seg.max())
    top = seg[peaks].max()
    i = start + int(peaks[np.argmax(seg[peaks] >= 0.9 * top)])
    y0, y1, y2 = ac[i - 1], ac[i], ac[i + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return (i + shift) * dt, float(y1)


def period_zero_crossings(x, dt: float):
    """Mean spacing of upward mean-crossings (linear interpolation)."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    idx = np.nonzero((x[:-1] < 0) & (x[1:] >= 0))[0]
    if len(idx) < 2:
        return None
    tc = (idx + x[idx] / (x[idx] - x[idx + 1])) * dt
    return float(np.mean(np.diff(tc)))


def classify_window(supnorm, midpoint, dt: float, protocol: Protocol):
    amplitude = float(np.max(supnorm))
    if amplitude <= protocol.zero_tol:
        return amplitude, None, None, "steady", []
    if np.ptp(midpoint) <= 1e-6 * amplitude:
        return amplitude, None, None, "steady", []
    p_ac, height = period_autocorrelation(midpoint, dt)
    p_zc = period_zero_crossings(midpoint, dt)
    flags = []
    if p_ac is None:
        return amplitude, None, p_zc, "complex", flags
    agree = p_zc is not None and abs(p_zc - p_ac) <= protocol.period_rtol * p_ac
    if not agree:
        flags.append("period_mismatch")
    cls = "periodic" if (height >= protocol.periodic_corr and agree) else "complex"
    return amplitude, p_ac, p_zc, cls, flags


# ---------------------------------------------------------------------------


def _checkpoint_path(directory: Path, i: int) -> Path:
    return directory / f"point_{i:04d}.json"


def save_checkpoint(path, point: ContinuationPoint, cfg: DomainConfig) -> None:
    payload = {"format": FORMAT_VERSION, "kind": "continuation_checkpoint",
               "point": point.to_dict(), "state": point.final_state.to_json_dict(cfg)}
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path) -> ContinuationPoint:
    d = json.loads(Path(path).read_text())
    if d.get("format") != FORMAT_VERSION or d.get("kind") != "continuation_checkpoint":
        raise ValueError(f"{path}: not a version-{FORMAT_VERSION} continuation checkpoint")
    p = ContinuationPoint(**d["point"])
    p.final_state = SpectralState.from_json_dict(d["state"])
    return p


def sweep_values(cfg: DomainConfig, values, protocol: Protocol = Protocol(),
                 checkpoint_dir=None, initial_state: SpectralState | None = None) -> list[ContinuationPoint]:
    """Warm-started continuation along an arbitrary monotone list of dT values."""
    values = [float(v) for v in values]
    diffs = np.diff(values)
    if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("dT values must be strictly monotone")
    ckdir = Path(checkpoint_dir) if checkpoint_dir else None
    if ckdir:
        ckdir.mkdir(parents=True, exist_ok=True)
    dt = protocol.dt or default_dt(cfg.with_dT(values[0]))
    N1, N2 = protocol.N1, protocol.N2

    points: list[ContinuationPoint] = []
    state = initial_state
    for i, dT in enumerate(values):
        c = cfg.with_dT(dT)
        if ckdir and _checkpoint_path(ckdir, i).exists():
            p = load_checkpoint(_checkpoint_path(ckdir, i))
            if math.isclose(p.dT, dT, rel_tol=0, abs_tol=1e-14):
                points.append(p)
                state = p.final_state
                continue
        flags = []
        if state is None:
            state = eigenmode_state(c, N1, N2, protocol.seed_amplitude)
        elif np.max(np.abs(state.coeffs)) < protocol.reseed_floor:
            state = eigenmode_state(c, N1, N2, protocol.seed_amplitude)
            flags.append("reseeded")
        point = _run_point(c, state, dt, protocol)
        point.flags = flags + point.flags
        if "blowup" in point.flags:
            state = None
        else:
            state = point.final_state
        points.append(point)
        if ckdir and point.final_state is not None:
            save_checkpoint(_checkpoint_path(ckdir, i), point, c)
    return points


def _run_point(cfg: DomainConfig, state: SpectralState, dt: float, protocol: Protocol) -> ContinuationPoint:
    common = dict(dt=dt, N1=protocol.N1, N2=protocol.N2, frame=protocol.frame, track_energy=False)
    if protocol.transient_time >= dt:
        tr = simulate(cfg, IntegratorConfig(t_end=protocol.transient_time, record_every=1000, **common),
                      state=state, raise_on_blowup=False)
        if tr.blowup is not None:
            return ContinuationPoint(cfg.dT, math.inf, None, "complex", ["blowup"])
        state = tr.final_state
    win = simulate(cfg, IntegratorConfig(t_end=protocol.window_time, record_every=protocol.sample_every, **common),
                   state=state, t0=protocol.transient_time, raise_on_blowup=False)
    if win.blowup is not None:
        return ContinuationPoint(cfg.dT, math.inf, None, "complex", ["blowup"])
    _, sup, mid = win.arrays()
    amp, p_ac, p_zc, cls, flags = classify_window(sup, mid, dt * protocol.sample_every, protocol)
    return ContinuationPoint(cfg.dT, amp, p_ac, cls, flags, p_zc, win.final_state)


def sweep(cfg: DomainConfig, dT_start: float, dT_end: float, dT_step: float,
          protocol: Protocol = Protocol(), checkpoint_dir=None) -> list[ContinuationPoint]:
    """Uniform sweep from ``dT_start`` towards ``dT_end`` (either direction)."""
    if dT_step <= 0:
        raise ValueError("dT_step must be positive")
    n = int(math.floor(abs(dT_end - dT_start) / dT_step + 1e-9))
    sgn = 1.0 if dT_end >= dT_start else -1.0
    values = [dT_start + sgn * i * dT_step for i in range(n + 1)]
    return sweep_values(cfg, values, protocol, checkpoint_dir)


def write_bifurcation_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow(p.to_row())


def read_bifurcation_csv(path) -> list[ContinuationPoint]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ContinuationPoint(
                dT=float(row["dT"]), amplitude=float(row["amplitude"]),
                period=float(row["period"]) if row["period"] else None,
                classification=row["classification"],
                flags=[f for f in row["flags"].split(";") if f]))
    return out


def squared_amplitude_slope(points, near: float, side: str, count: int = 3) -> float:
    """Least-squares slope of amplitude^2 vs dT over the ``count`` positive-amplitude
    points nearest ``near`` on the instability side ``side`` ('above' or 'below')."""
    pts = [p for p in points if p.classification != "steady" and math.isfinite(p.amplitude)]
    if side == "above":
        pts = sorted((p for p in pts if p.dT > near), key=lambda p: p.dT)[:count]
    else:
        pts = sorted((p for p in pts if p.dT < near), key=lambda p: -p.dT)[:count]
    if len(pts) < 2:
        raise ValueError("not enough oscillating points near the threshold")
    x = np.array([p.dT for p in pts])
    y = np.array([p.amplitude**2 for p in pts])
    return float(abs(np.polyfit(x, y, 1)[0]))
