"""Andronov-Hopf normal form at the thresholds of a k2-instability region.

Near ``dT_c`` the critical dynamics reduce to

    z' = i omega z + a mu1 z + b z |z|^2,      mu1 = dT - dT_c,

with ``u ~ z zeta + conj(z zeta)``, ``zeta = xi g_(1,k2)``.  A critical
wavenumber ``k2 > 1`` on the domain ``(L1, L2)`` is handled as ``k2 = 1`` on
``(L1, L2 / k2)``.

Two closed forms are given for ``b``:

* :func:`coeff_b` is the value obtained by carrying the full center-manifold
  algebra through (``2 R20(zeta, conj zeta)`` has the component
  ``(s conj(xi) - conj(s) xi)`` on ``g_(2,0)``, ``s = xi1 + xi2``);
* :func:`coeff_b_printed` is the commonly quoted expression, which drops the
  ``conj(s) xi`` part and differs from the correct value by the factor
  ``(ell^2 + 4) / (4 ell^2)``.

:func:`coeff_b_numeric` assembles ``b`` from the spectral bilinear form and is
independent of both.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .linear_stability import instability_interval
from .spectral_core import (
    DomainConfig,
    SpectralState,
    bilinear_term,
    mode_matrices,
)

Which = Literal["left", "right"]


class NoBifurcationError(ValueError):
    """The requested threshold does not exist for this configuration."""


@dataclass(frozen=True)
class BifurcationPoint:
    which: Which
    dT_c: float
    k2: int
    omega: float
    c1: float
    c2: float
    c3: float
    c4: float
    cfg: DomainConfig  # original domain, at dT = dT_c

    @property
    def j(self) -> int:
        return 1 if self.which == "left" else 2

    @property
    def L1(self) -> float:
        return self.cfg.L1

    @property
    def L2_eff(self) -> float:
        """Period of the critical mode in x2."""
        return self.cfg.L2 / self.k2

    @property
    def reduced_cfg(self) -> DomainConfig:
        """The domain on which the critical wavenumber is 1."""
        return self.cfg.with_(L2=self.L2_eff)

    @property
    def c_relation_residual(self) -> float:
        return abs(self.c3**2 - self.c1 * (2 * self.c2 - self.c1)) / max(self.c3**2, 1e-300)


def hopf_constants(L1: float, L2: float, nu: float, dT: float):
    c1 = math.pi * dT / L2
    c2 = 2.0 / (math.pi * (L2 / L1 + 4.0 * L1 / L2))
    c4 = math.pi**2 * (1.0 / L1**2 + 4.0 / L2**2)
    return c1, c2, nu * c4, c4


def bifurcation_point(cfg: DomainConfig, which: Which = "right", k2: int = 1) -> BifurcationPoint:
    if which not in ("left", "right"):
        raise ValueError(f"which must be 'left' or 'right', got {which!r}")
    region = instability_interval(cfg, k2)
    if region.status == "absent":
        raise NoBifurcationError(
            f"no {k2}-instability region: nu={cfg.nu:g} > nu_crit={region.nu_crit:g}")
    dT_c = region.dT1 if which == "left" else region.dT2
    L2 = cfg.L2 / k2
    c1, c2, c3, c4 = hopf_constants(cfg.L1, L2, cfg.nu, dT_c)
    return BifurcationPoint(which, dT_c, k2, c1, c1, c2, c3, c4, cfg.with_dT(dT_c))


def eigenvectors(bp: BifurcationPoint):
    """``(xi, eta, delta)`` with ``xi . conj(eta) = 2 / (L1 L2)``."""
    c1, c2, c3 = bp.c1, bp.c2, bp.c3
    denom = (1j * c1 - c3) * (1j * c1 - 2j * c2 - c3)
    if abs(denom) == 0:
        raise ArithmeticError("degenerate normalization of the adjoint eigenvector")
    delta = (2.0 / (bp.L1 * bp.L2_eff)) / denom
    xi = np.array([1j * c2, 1j * c1 - 1j * c2 - c3])
    eta_bar = delta * np.array([-1j * c2, 1j * c1 - 1j * c2 - c3])
    return xi, np.conj(eta_bar), delta


def critical_matrix(bp: BifurcationPoint) -> np.ndarray:
    return mode_matrices(bp.reduced_cfg, 1, 1)


def eigenvector_residuals(bp: BifurcationPoint) -> dict:
    xi, eta, _ = eigenvectors(bp)
    M = critical_matrix(bp)
    scale = np.linalg.norm(M)
    return {
        "kernel": float(np.linalg.norm((M - 1j * bp.omega * np.eye(2)) @ xi) / (scale * np.linalg.norm(xi))),
        "adjoint_kernel": float(np.linalg.norm((M.conj().T + 1j * bp.omega * np.eye(2)) @ eta)
                                / (scale * np.linalg.norm(eta))),
        "normalization": float(abs(xi @ np.conj(eta) * bp.L1 * bp.L2_eff / 2 - 1)),
        "conj_orthogonality": float(abs(np.conj(xi) @ np.conj(eta)) / (np.linalg.norm(xi) * np.linalg.norm(eta))),
    }


def coeff_a(bp: BifurcationPoint) -> complex:
    """Linear unfolding coefficient, closed form.

    Equals ``(pi / L2) ((c2 - c1) / c3 + i)``; see :func:`coeff_a_adjoint`.
    """
    c1, c2, c3 = bp.c1, bp.c2, bp.c3
    return 2 * math.pi * c2**2 / (bp.L2_eff * (c1 + 1j * c3) * (1j * c1 - 2j * c2 - c3))


def coeff_a_adjoint(bp: BifurcationPoint) -> complex:
    """Same coefficient as the projection ``pi c2^2 L1 delta i``."""
    _, _, delta = eigenvectors(bp)
    return complex(math.pi * bp.c2**2 * bp.L1 * delta * 1j)


def coeff_a_printed(bp: BifurcationPoint) -> complex:
    """The quoted closed form with the factor ``(c1 - c3 i)``.

    Under the c-relation this is real and negative at both thresholds, which
    contradicts the sign law; kept for the record only.
    """
    c1, c2, c3 = bp.c1, bp.c2, bp.c3
    return 2 * math.pi * c2**2 / (bp.L2_eff * (c1 - 1j * c3) * (1j * c1 - 2j * c2 - c3))


def _require_viscous(bp: BifurcationPoint) -> None:
    if bp.cfg.nu <= 0:
        raise ZeroDivisionError("b is singular at nu = 0")


def coeff_b(bp: BifurcationPoint) -> complex:
    """Cubic coefficient ``-L1^2 (c1^2 + c3^2) / (nu pi^2 (ell + 4/ell)^2)``."""
    _require_viscous(bp)
    ell = bp.L2_eff / bp.L1
    return complex(-bp.L1**2 * (bp.c1**2 + bp.c3**2)
                   / (bp.cfg.nu * math.pi**2 * (ell + 4.0 / ell) ** 2))


def coeff_b_printed(bp: BifurcationPoint) -> complex:
    """``-(L1^3 / (4 pi^2 nu)) (c1^2 + c3^2) / (L2^2 / L1 + 4 L1)``."""
    _require_viscous(bp)
    L1, L2 = bp.L1, bp.L2_eff
    return complex(-(L1**3 / (4 * math.pi**2 * bp.cfg.nu)) * (bp.c1**2 + bp.c3**2) / (L2**2 / L1 + 4 * L1))


# ---------------------------------------------------------------------------
# numeric oracle


@dataclass
class NumericB:
    b: complex
    r20_zeta_zeta: float
    psi110_support: list
    r20_zeta_psi_support: list
    eta: np.ndarray


def _numeric_adjoint(bp: BifurcationPoint, xi: np.ndarray) -> np.ndarray:
    """Left null vector of ``M - i omega``, normalized so ``xi . conj(eta) = 2/(L1 L2)``."""
    A = critical_matrix(bp) - 1j * bp.omega * np.eye(2)
    _, _, vh = np.linalg.svd(A.conj().T)
    eta = vh[-1].conj()
    eta = eta * np.conj((2.0 / (bp.L1 * bp.L2_eff)) / (xi @ np.conj(eta)))
    return eta


def _support(state: SpectralState, tol: float) -> list:
    mag = np.abs(state.coeffs).max(axis=-1)
    if mag.max() == 0:
        return []
    idx = np.argwhere(mag > tol * mag.max())
    return sorted((int(i) + 1, int(j) - state.N2) for i, j in idx)


def coeff_b_numeric(bp: BifurcationPoint, N: int = 4, support_tol: float = 1e-12) -> NumericB:
    """Assemble ``b = <2 R20(zeta, psi110) + 2 R20(conj zeta, psi200), zeta*>``.

    ``psi110`` and ``psi200`` are obtained by per-mode 2x2 solves of
    ``-L psi110 = 2 R20(zeta, conj zeta)`` and
    ``(2 i omega - L) psi200 = R20(zeta, zeta)``.  The linear part has no
    parameter-only term, so ``psi001 = 0``.
    """
    if N < 4:
        raise ValueError("the center-manifold algebra needs N >= 4")
    cfg = bp.reduced_cfg
    xi, _, _ = eigenvectors(bp)
    eta = _numeric_adjoint(bp, xi)

    zeta = SpectralState.zeros(N, N, complexified=True).set_mode(1, 1, xi)
    zeta_bar = zeta.conj()

    K1, K2 = np.meshgrid(np.arange(1, N + 1), np.arange(-N, N + 1), indexing="ij")
    M = mode_matrices(cfg, K1, K2)
    eye = np.eye(2)

    rhs110 = bilinear_term(zeta, zeta_bar, cfg) * 2.0
    psi110 = SpectralState(np.linalg.solve(-M, rhs110.coeffs[..., None])[..., 0], True)

    r_zz = bilinear_term(zeta, zeta, cfg)
    psi200 = SpectralState(
        np.linalg.solve(2j * bp.omega * eye - M, r_zz.coeffs[..., None])[..., 0], True)

    r_zpsi = bilinear_term(zeta, psi110, cfg) * 2.0
    total = r_zpsi + bilinear_term(zeta_bar, psi200, cfg) * 2.0
    b = 0.5 * cfg.L1 * cfg.L2 * complex(total.mode(1, 1) @ np.conj(eta))
    return NumericB(
        b=b,
        r20_zeta_zeta=float(np.abs(r_zz.coeffs).max()),
        psi110_support=_support(psi110, support_tol),
        r20_zeta_psi_support=_support(r_zpsi, support_tol),
        eta=eta,
    )


# ---------------------------------------------------------------------------
# degenerate case nu = nu_crit(1)


@dataclass(frozen=True)
class DegenerateCoefficients:
    a0: float
    a1: float
    a2: float
    a3: float

    def real_part(self, mu1, mu2):
        """Leading real part ``a1 mu1 (a2 mu2 - a3 mu1)`` of the reduced linear coefficient."""
        return self.a1 * mu1 * (self.a2 * mu2 - self.a3 * mu1)


def degenerate_coeffs(cfg: DomainConfig, rtol: float = 1e-8) -> DegenerateCoefficients:
    """Coefficients of the unfolding at a point 1-instability region."""
    region = instability_interval(cfg, 1, point_rtol=rtol)
    if region.status == "absent" or abs(region.dT2 - region.dT1) > rtol * max(region.dT2, 1e-300) \
            and region.status != "point":
        raise ValueError(f"not degenerate: nu={cfg.nu:g}, nu_crit(1)={region.nu_crit:g}")
    bp = bifurcation_point(cfg, "right")
    c1, c2, c3 = bp.c1, bp.c2, bp.c3
    L1, L2 = cfg.L1, cfg.L2
    a = coeff_a(bp)
    # Re(a) pi / (L2 (c2 - c1)) simplifies to pi^2 / (L2^2 c3), finite as c2 -> c1
    a1 = math.pi**2 / (L2**2 * c3)
    return DegenerateCoefficients(a0=a.imag, a1=a1, a2=1.0 / math.sqrt(math.pi * L1 * L2), a3=math.pi / L2**2)


def a1_from_ratio(bp: BifurcationPoint) -> float:
    """``Re(a) pi / (L2 (c2 - c1))`` evaluated literally (ill-conditioned near c1 = c2)."""
    return coeff_a(bp).real * math.pi / (bp.L2_eff * (bp.c2 - bp.c1))


# ---------------------------------------------------------------------------
# predictions


@dataclass
class CyclePrediction:
    radius: float
    frequency_comoving: float
    frequency_lab: float
    speed: float
    mu1: float
    amplitude_u1: float

    def to_dict(self) -> dict:
        return asdict(self)


def predicted_cycle(bp: BifurcationPoint, mu1: float, b: complex | None = None) -> CyclePrediction:
    """Periodic orbit of the truncated normal form at ``dT = dT_c + mu1``.

    ``amplitude_u1`` is the sup of ``|u1|`` on the leading-order orbit
    ``z zeta + conj(z zeta)``, i.e. ``2 |xi_1| radius``.
    """
    a = coeff_a(bp)
    b = coeff_b(bp) if b is None else b
    growth = mu1 * a.real
    if growth < 0 or (growth == 0 and mu1 != 0):
        raise ValueError(f"mu1={mu1:g} lies on the stable side of the {bp.which} threshold")
    r = math.sqrt(-growth / b.real) if mu1 != 0 else 0.0
    xi, _, _ = eigenvectors(bp)
    w = bp.omega + mu1 * a.imag + b.imag * r * r
    shift = 2 * math.pi * bp.cfg.T_minus / bp.L2_eff
    return CyclePrediction(
        radius=r,
        frequency_comoving=w,
        frequency_lab=w + shift,
        speed=-w * bp.L2_eff / (2 * math.pi),
        mu1=mu1,
        amplitude_u1=2 * abs(xi[0]) * r,
    )


def report(cfg: DomainConfig, which: Which = "right", k2: int = 1, mu1: float | None = None,
           N: int = 4) -> dict:
    """Everything known about one bifurcation point, JSON-ready."""
    bp = bifurcation_point(cfg, which, k2)
    xi, eta, delta = eigenvectors(bp)
    a = coeff_a(bp)
    b = coeff_b(bp)
    nb = coeff_b_numeric(bp, N=N)

    def cplx(z):
        return [float(np.real(z)), float(np.imag(z))]

    out = {
        "which": which, "k2": k2, "dT_c": bp.dT_c, "omega": bp.omega,
        "c1": bp.c1, "c2": bp.c2, "c3": bp.c3, "c4": bp.c4,
        "xi": [cplx(v) for v in xi], "eta": [cplx(v) for v in eta], "delta": cplx(delta),
        "a": cplx(a), "a_adjoint": cplx(coeff_a_adjoint(bp)),
        "b": cplx(b), "b_printed": cplx(coeff_b_printed(bp)), "b_numeric": cplx(nb.b),
        "residuals": {
            "c_relation": bp.c_relation_residual,
            **eigenvector_residuals(bp),
            "a_dual": abs(a - coeff_a_adjoint(bp)) / abs(a),
            "b_numeric": abs(nb.b - b) / abs(b),
            "r20_zeta_zeta": nb.r20_zeta_zeta,
        },
    }
    if mu1 is not None:
        out["cycle"] = predicted_cycle(bp, mu1).to_dict()
    return out


def save_report(rep: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2)
