"""Semi-implicit time stepping of the Galerkin system.

Each step solves, mode by mode,

    (I - dt/2 M_k) u^{n+1}_k = (I + dt/2 M_k) u^n_k + dt N_k,

with ``N = 3/2 R(u^n) - 1/2 R(u^{n-1})`` (``cnab2``) or ``N = R(u^n)``
(``cn_euler``).  The first ``cnab2`` step falls back to the Euler form.
The 2x2 solves are done once, as precomputed inverses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .diagnostics_energy import EnergyRecord, EnergyTracker
from .spectral_core import (
    DomainConfig,
    GridField,
    SpectralState,
    enforce_reality,
    galerkin_basis,
    mode_matrices,
    point_value,
    sup_norm,
    synthesize,
    wavenumbers,
)

Scheme = Literal["cnab2", "cn_euler"]
Frame = Literal["lab", "comoving"]

BLOWUP_THRESHOLD = 1e6
DET_FLOOR = 1e-14


class BlowUpError(RuntimeError):
    def __init__(self, t: float, step: int, supnorm: float):
        super().__init__(f"solution blew up at t={t:g} (step {step}): sup|u1| = {supnorm:.3g}")
        self.t, self.step, self.supnorm = t, step, supnorm


def default_dt(cfg: DomainConfig) -> float:
    return 1e-3 * cfg.L2 / max(abs(cfg.T_plus), abs(cfg.T_minus), 1.0)


@dataclass(frozen=True)
class InitialCondition:
    """``kind``: ``eigenmode`` (critical-mode seed), ``random`` (filtered noise), ``zero``.

    ``amplitude`` is the sup-norm of u1 (eigenmode) or of the field (random).
    """

    kind: str = "eigenmode"
    amplitude: float = 1e-3
    seed: int = 0
    k2: int = 1
    cutoff: float = 4.0  # random: Gaussian filter width in mode numbers

    def __post_init__(self):
        if self.kind not in ("eigenmode", "random", "zero"):
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")


def eigenmode_state(cfg: DomainConfig, N1: int, N2: int, amplitude: float, k2: int = 1,
                    frame: Frame = "comoving") -> SpectralState:
    """``Re(v g_(1,k2))`` with ``v`` the eigenvector of the least stable eigenvalue.

    Scaled so that ``sup |u1| = amplitude``.
    """
    M = mode_matrices(cfg, 1, k2, frame)
    w, V = np.linalg.eig(M)
    v = V[:, int(np.argmax(w.real))]
    v = v * (amplitude / abs(v[0]))
    st = SpectralState.zeros(N1, N2)
    st.set_mode(1, k2, v / 2)
    st.set_mode(1, -k2, np.conj(v) / 2)
    return st


def random_state(cfg: DomainConfig, N1: int, N2: int, amplitude: float, seed: int = 0,
                 cutoff: float = 4.0) -> SpectralState:
    rng = np.random.default_rng(seed)
    k1, k2 = wavenumbers(N1, N2)
    filt = np.exp(-(k1**2 + k2**2) / cutoff**2)[..., None]
    c = (rng.standard_normal((N1, 2 * N2 + 1, 2)) + 1j * rng.standard_normal((N1, 2 * N2 + 1, 2))) * filt
    st = SpectralState(enforce_reality(c))
    s = max(sup_norm(st, cfg.L1, cfg.L2, 0), sup_norm(st, cfg.L1, cfg.L2, 1))
    return st * (amplitude / s) if s > 0 else st


def initial_state(cfg: DomainConfig, N1: int, N2: int, ic: InitialCondition) -> SpectralState:
    if ic.kind == "eigenmode":
        return eigenmode_state(cfg, N1, N2, ic.amplitude, ic.k2)
    if ic.kind == "random":
        return random_state(cfg, N1, N2, ic.amplitude, ic.seed, ic.cutoff)
    return SpectralState.zeros(N1, N2)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    scheme: Scheme = "cnab2"
    ic: InitialCondition = field(default_factory=InitialCondition)
    record_every: int = 10
    N1: int = 32
    N2: int = 32
    frame: Frame = "lab"
    nonlinear: bool = True
    snapshot_times: tuple[float, ...] = ()
    track_energy: bool = True
    stop_supnorm: float | None = None  # end the run once sup|u1| reaches this (checked every step)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be at least dt, got t_end={self.t_end}, dt={self.dt}")
        if self.scheme not in ("cnab2", "cn_euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Stepper:
    """Precomputed per-mode propagators for one ``(cfg, dt, truncation)``."""

    def __init__(self, cfg: DomainConfig, dt: float, N1: int, N2: int, scheme: Scheme = "cnab2",
                 frame: Frame = "lab", nonlinear: bool = True):
        if cfg.nu <= 0:
            raise ValueError("time integration requires nu > 0")
        self.cfg, self.dt, self.scheme, self.nonlinear = cfg, dt, scheme, nonlinear
        k1, k2 = wavenumbers(N1, N2)
        M = mode_matrices(cfg, k1, k2, frame)
        eye = np.eye(2)
        lhs = eye - 0.5 * dt * M
        det = lhs[..., 0, 0] * lhs[..., 1, 1] - lhs[..., 0, 1] * lhs[..., 1, 0]
        if np.min(np.abs(det)) < DET_FLOOR:
            raise ArithmeticError("implicit operator is singular; reduce dt")
        self.inv = np.linalg.inv(lhs)
        self.rhs = eye + 0.5 * dt * M
        self.basis = galerkin_basis(float(cfg.L1), float(cfg.L2), N1, N2)

    def nonlinear_term(self, c: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros_like(c)
        return self.basis.nonlinear_real(c)

    def advance(self, c: np.ndarray, r_now: np.ndarray, r_prev: np.ndarray | None) -> np.ndarray:
        if self.scheme == "cnab2" and r_prev is not None:
            n = 1.5 * r_now - 0.5 * r_prev
        else:
            n = r_now
        b = np.einsum("...ij,...j->...i", self.rhs, c) + self.dt * n
        return enforce_reality(np.einsum("...ij,...j->...i", self.inv, b))


def step(state: SpectralState, cfg: DomainConfig, icfg: IntegratorConfig,
         prev_nonlinear: SpectralState | None = None, stepper: Stepper | None = None):
    """One step; returns ``(new_state, R(state))`` to pass back as ``prev_nonlinear``."""
    st = stepper or Stepper(cfg, icfg.dt, state.N1, state.N2, icfg.scheme, icfg.frame, icfg.nonlinear)
    r_now = st.nonlinear_term(state.coeffs)
    r_prev = None if prev_nonlinear is None else prev_nonlinear.coeffs
    return SpectralState(st.advance(state.coeffs, r_now, r_prev)), SpectralState(r_now)


@dataclass
class Trajectory:
    cfg: DomainConfig
    times: list = field(default_factory=list)
    supnorm: list = field(default_factory=list)
    midpoint: list = field(default_factory=list)
    energy: list = field(default_factory=list)  # EnergyRecord or None
    snapshots: dict = field(default_factory=dict)  # t -> SpectralState
    final_state: SpectralState | None = None
    blowup: BlowUpError | None = None

    def arrays(self):
        return np.asarray(self.times), np.asarray(self.supnorm), np.asarray(self.midpoint)

    def l2_sq(self) -> np.ndarray:
        return np.array([e.l2_sq for e in self.energy])

    def energy_values(self) -> np.ndarray:
        return np.array([e.energy for e in self.energy])

    def write_traces(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "supnorm_u1", "midpoint_u1", "l2_sq", "grad_v_sq", "dissipation_accum", "energy"])
            for i, t in enumerate(self.times):
                e: EnergyRecord | None = self.energy[i] if self.energy else None
                extra = ["", "", "", ""] if e is None else [
                    repr(e.l2_sq), repr(e.grad_v_sq), repr(e.dissipation_accum), repr(e.energy)]
                w.writerow([repr(t), repr(self.supnorm[i]), repr(self.midpoint[i])] + extra)

    def write_snapshots(self, directory, n1: int | None = None, n2: int | None = None) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for t, st in sorted(self.snapshots.items()):
            m1 = n1 or 2 * st.N1
            m2 = n2 or 2 * (2 * st.N2 + 1)
            p = directory / f"snapshot_t{t:012.4f}.csv"
            synthesize(st, m1, m2, self.cfg.L1, self.cfg.L2).to_csv(p)
            paths.append(p)
        return paths


def simulate(cfg: DomainConfig, icfg: IntegratorConfig, state: SpectralState | None = None,
             t0: float = 0.0, raise_on_blowup: bool = True) -> Trajectory:
    """Integrate from ``state`` (or ``icfg.ic``) over ``icfg.t_end`` time units."""
    if cfg.nu <= 0:
        raise ValueError("time integration requires nu > 0")
    u = initial_state(cfg, icfg.N1, icfg.N2, icfg.ic) if state is None else state.resized(icfg.N1, icfg.N2)
    u = u.symmetrized()
    st = Stepper(cfg, icfg.dt, icfg.N1, icfg.N2, icfg.scheme, icfg.frame, icfg.nonlinear)
    traj = Trajectory(cfg)
    tracker = EnergyTracker(cfg, u, t0) if (icfg.track_energy and cfg.dT != 0) else None
    pending = sorted(icfg.snapshot_times)
    L1, L2 = cfg.L1, cfg.L2

    def record(t, c):
        s = SpectralState(c)
        traj.times.append(t)
        traj.supnorm.append(sup_norm(s, L1, L2, 0))
        traj.midpoint.append(float(point_value(s, L1, L2, 0.5 * L1, 0.5 * L2)[0]))
        traj.energy.append(tracker.record(s) if tracker else None)

    c = u.coeffs
    record(t0, c)
    n = icfg.n_steps
    with np.errstate(over="ignore", invalid="ignore"):  # a diverging run is caught below
        c = _run_steps(icfg, st, c, t0, n, traj, record, tracker, pending, raise_on_blowup)
    traj.final_state = SpectralState(c)
    return traj


def _run_steps(icfg, st, c, t0, n, traj, record, tracker, pending, raise_on_blowup):
    L1, L2 = st.cfg.L1, st.cfg.L2
    r_prev = None
    for i in range(1, n + 1):
        r_now = st.nonlinear_term(c)
        c = st.advance(c, r_now, r_prev)
        r_prev = r_now
        t = t0 + i * icfg.dt
        if tracker:
            tracker.advance(SpectralState(c), t)
        while pending and pending[0] <= t + 0.5 * icfg.dt:
            traj.snapshots[pending.pop(0)] = SpectralState(c.copy())
        escaped = False
        if icfg.stop_supnorm is not None:
            escaped = sup_norm(SpectralState(c), L1, L2, 0) >= icfg.stop_supnorm
        if i % icfg.record_every == 0 or i == n or escaped:
            record(t, c)
            if not math.isfinite(traj.supnorm[-1]) or traj.supnorm[-1] > BLOWUP_THRESHOLD:
                err = BlowUpError(t, i, traj.supnorm[-1])
                if raise_on_blowup:
                    raise err
                traj.blowup = err
                break
        if escaped:
            break
    return c


def escape_time(cfg: DomainConfig, delta: float, eta: float, dt: float, t_max: float,
                N1: int = 16, N2: int = 16, k2: int = 1) -> float:
    """First time ``sup |u1|`` reaches ``eta`` from a critical-mode seed of size ``delta``.

    The crossing is located by log-linear interpolation between the last two
    steps.  Returns ``inf`` if ``eta`` is not reached by ``t_max``.
    """
    if not 0 < delta < eta:
        raise ValueError("need 0 < delta < eta")
    icfg = IntegratorConfig(dt=dt, t_end=t_max, N1=N1, N2=N2, record_every=1, track_energy=False,
                            ic=InitialCondition("eigenmode", delta, k2=k2), stop_supnorm=eta)
    t, sup, _ = simulate(cfg, icfg).arrays()
    if sup[-1] < eta:
        return math.inf
    if len(t) < 2:
        return float(t[-1])
    y0, y1 = math.log(sup[-2]), math.log(sup[-1])
    return float(t[-2] + (t[-1] - t[-2]) * (math.log(eta) - y0) / (y1 - y0))
