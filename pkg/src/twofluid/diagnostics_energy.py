"""Energy functional, Poincare ratios and structural identities.

All integrals use Parseval on the sine/Fourier basis, ``<g_k, g_k> = L1 L2 / 2``.
With ``V = Laplacian^{-1}(u1 + u2)`` (Dirichlet in x1, periodic in x2) the
energy functional is

    E(t) = ||u||^2 - 2/(L1 dT) ||grad V||^2
           + 2 nu int_0^t [ -2/(L1 dT) ||u1 + u2||^2 + ||grad u||^2 ] ds,

which is constant along exact solutions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .spectral_core import (
    DomainConfig,
    SpectralState,
    advection_term,
    poisson_velocity,
    wavenumbers,
)


class UndefinedFunctionalError(ValueError):
    """The energy functional has a 1/dT factor."""


def _laplace_symbol(cfg: DomainConfig, N1: int, N2: int) -> np.ndarray:
    """pi^2 (k1^2/L1^2 + 4 k2^2/L2^2), the (positive) symbol of -Laplacian."""
    k1, k2 = wavenumbers(N1, N2)
    return np.pi**2 * (k1**2 / cfg.L1**2 + 4.0 * k2**2 / cfg.L2**2)


def _weight(cfg: DomainConfig) -> float:
    return 0.5 * cfg.L1 * cfg.L2


def l2_sq(state: SpectralState, cfg: DomainConfig) -> float:
    return _weight(cfg) * float(np.sum(np.abs(state.coeffs) ** 2))


def grad_sq(state: SpectralState, cfg: DomainConfig) -> float:
    lam = _laplace_symbol(cfg, state.N1, state.N2)
    return _weight(cfg) * float(np.sum(lam[..., None] * np.abs(state.coeffs) ** 2))


def sum_sq(state: SpectralState, cfg: DomainConfig) -> float:
    """||u1 + u2||^2."""
    return _weight(cfg) * float(np.sum(np.abs(state.coeffs[..., 0] + state.coeffs[..., 1]) ** 2))


def grad_v_sq(state: SpectralState, cfg: DomainConfig) -> float:
    lam = _laplace_symbol(cfg, state.N1, state.N2)
    rho = state.coeffs[..., 0] + state.coeffs[..., 1]
    return _weight(cfg) * float(np.sum(np.abs(rho) ** 2 / lam))


def dissipation_integrand(state: SpectralState, cfg: DomainConfig) -> float:
    """``-2/(L1 dT) ||u1+u2||^2 + ||grad u||^2`` (the bracket of the time integral)."""
    _require_dT(cfg)
    return -2.0 / (cfg.L1 * cfg.dT) * sum_sq(state, cfg) + grad_sq(state, cfg)


def _require_dT(cfg: DomainConfig) -> None:
    if cfg.dT == 0:
        raise UndefinedFunctionalError("the energy functional is undefined at dT = 0")


@dataclass
class EnergyRecord:
    t: float
    l2_sq: float
    grad_v_sq: float
    dissipation_accum: float
    energy: float
    lyapunov: bool  # False when 0 < dT <= dT*: the combination is sign-indefinite

    def to_dict(self) -> dict:
        return asdict(self)


def energy(state: SpectralState, cfg: DomainConfig, accumulated_dissipation: float = 0.0,
           t: float = 0.0) -> EnergyRecord:
    _require_dT(cfg)
    a = l2_sq(state, cfg)
    g = grad_v_sq(state, cfg)
    e = a - 2.0 / (cfg.L1 * cfg.dT) * g + 2.0 * cfg.nu * accumulated_dissipation
    lyap = cfg.dT < 0 or cfg.dT > cfg.dT_star
    return EnergyRecord(t, a, g, accumulated_dissipation, e, lyap)


class EnergyTracker:
    """Trapezoid-rule accumulation of the dissipation integral, one call per step."""

    def __init__(self, cfg: DomainConfig, state: SpectralState, t0: float = 0.0):
        _require_dT(cfg)
        self.cfg = cfg
        self.t = t0
        self.accum = 0.0
        self._last = dissipation_integrand(state, cfg)

    def advance(self, state: SpectralState, t: float) -> None:
        cur = dissipation_integrand(state, self.cfg)
        self.accum += 0.5 * (t - self.t) * (cur + self._last)
        self._last = cur
        self.t = t

    def record(self, state: SpectralState) -> EnergyRecord:
        return energy(state, self.cfg, self.accum, self.t)


def poincare_ratios(state: SpectralState, cfg: DomainConfig) -> tuple[float, float]:
    """``(||grad V||^2 / ||u||^2, ||u||^2 / ||grad u||^2)``.

    Bounded by ``2 L1^2 / pi^2`` and ``L1^2 / pi^2`` respectively.
    """
    a = l2_sq(state, cfg)
    if a == 0:
        raise ValueError("Poincare ratios are undefined for the zero state")
    return grad_v_sq(state, cfg) / a, a / grad_sq(state, cfg)


def poincare_bounds(cfg: DomainConfig) -> tuple[float, float]:
    return 2 * cfg.L1**2 / np.pi**2, cfg.L1**2 / np.pi**2


def cross_integrals(state: SpectralState, cfg: DomainConfig) -> tuple[complex, complex]:
    """``(int E2 conj(u1), int E2 conj(u2))`` with ``E2 = d_x2 V``."""
    pv = poisson_velocity(state.coeffs[..., 0] + state.coeffs[..., 1], cfg)
    w = _weight(cfg)
    return (complex(w * np.sum(pv.A2 * np.conj(state.coeffs[..., 0]))),
            complex(w * np.sum(pv.A2 * np.conj(state.coeffs[..., 1]))))


def cross_identity_residual(state: SpectralState, cfg: DomainConfig) -> float:
    """``|int E2 u1 + int E2 u2|`` relative to ``||E2|| ||u||`` (0 for the zero state)."""
    i1, i2 = cross_integrals(state, cfg)
    pv = poisson_velocity(state.coeffs[..., 0] + state.coeffs[..., 1], cfg)
    scale = math.sqrt(_weight(cfg) * np.sum(np.abs(pv.A2) ** 2) * l2_sq(state, cfg))
    if scale == 0:
        return 0.0
    return abs(i1 + i2) / scale


def advection_skew_residual(state: SpectralState, cfg: DomainConfig) -> float:
    """``|<E^perp . grad u, u>|`` relative to ``||E^perp . grad u|| ||u||``."""
    adv = advection_term(state, state, cfg)
    num = abs(_weight(cfg) * np.sum(adv.coeffs * np.conj(state.coeffs)))
    scale = math.sqrt(l2_sq(adv, cfg) * l2_sq(state, cfg))
    return float(num / scale) if scale else 0.0


# ---------------------------------------------------------------------------


@dataclass
class DecayResult:
    gamma_fit: float
    gamma_theory: float
    max_ratio: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def decay_rate(cfg: DomainConfig) -> float:
    return 2.0 * cfg.nu * np.pi**2 / cfg.L1**2


def decay_check(times, l2_values, cfg: DomainConfig, slack: float = 0.05) -> DecayResult:
    """Compare ``||u(t)||^2`` with ``||u(0)||^2 exp(-gamma t)``.

    ``gamma_fit`` is the least-squares slope of ``-log ||u||^2``.
    """
    if 0 <= cfg.dT <= cfg.dT_star:
        raise ValueError(f"decay is only asserted for dT < 0 or dT > {cfg.dT_star:.6g}, got {cfg.dT:g}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(l2_values, dtype=float)
    gamma = decay_rate(cfg)
    bound = y[0] * np.exp(-gamma * (t - t[0]))
    ratio = float(np.max(y / bound))
    good = y > 0
    slope = -np.polyfit(t[good], np.log(y[good]), 1)[0] if good.sum() > 1 else math.nan
    return DecayResult(float(slope), gamma, ratio, ratio <= 1.0 + slack)


def energy_report(state: SpectralState, cfg: DomainConfig, accumulated_dissipation: float = 0.0) -> dict:
    rec = energy(state, cfg, accumulated_dissipation)
    out = rec.to_dict()
    if not rec.lyapunov:
        out["note"] = "not a Lyapunov certificate here (0 <= dT <= dT*)"
    if l2_sq(state, cfg) > 0:
        r1, r2 = poincare_ratios(state, cfg)
        b1, b2 = poincare_bounds(cfg)
        out.update(poincare_r1=r1, poincare_r1_bound=b1, poincare_r2=r2, poincare_r2_bound=b2)
    out["cross_identity_residual"] = cross_identity_residual(state, cfg)
    out["advection_skew_residual"] = advection_skew_residual(state, cfg)
    return out


def save_energy_report(rep: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2)
