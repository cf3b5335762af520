"""Closed-form spectrum of the linearization and instability-region arithmetic.

All formulas are in the comoving frame.  The growth indicator

    d(dT, kappa2) = 4 L1^3 dT / (4 kappa2 + ell^2) - L1^2 pi^2 dT^2 / ell^2
                    - nu^2 pi^4 (4 kappa2 + ell^2)^2 / (kappa2 ell^4)

has the sign of Re lambda^+_{(1, sqrt(kappa2))}; its roots bound the
kappa2-instability region.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy import optimize

from .spectral_core import DomainConfig, ModeIndex, mode_coefficients, mode_matrices

DEGENERACY_RTOL = 1e-10


@dataclass
class ModeSpectrum:
    k: ModeIndex
    M: np.ndarray
    lambda_plus: complex
    lambda_minus: complex
    D: complex
    C1: complex
    C2: complex
    C3: float
    # eigenvalues of M from a direct 2x2 solve, ordered to match lambda_plus/minus
    direct: tuple[complex, complex] = (0j, 0j)

    @property
    def residual(self) -> float:
        scale = max(abs(self.lambda_plus), abs(self.lambda_minus), 1e-300)
        return max(abs(self.direct[0] - self.lambda_plus), abs(self.direct[1] - self.lambda_minus)) / scale


def discriminant(cfg: DomainConfig, k1, k2):
    """D_k of the closed-form eigenvalues (real for real parameters)."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    ell, L1, dT = cfg.ell, cfg.L1, cfg.dT
    return (k2**2 * dT / (ell**2 * L1)) * (4.0 / (k1**2 + 4.0 * (k2 / ell) ** 2) - np.pi**2 * dT / L1)


def eigenvalues(cfg: DomainConfig, k1, k2):
    """``(lambda_plus, lambda_minus)`` from the closed form, vectorized.

    The branch of the square root is the principal one, so ``Re sqrt(D) >= 0``.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    ell, L1, nu, dT = cfg.ell, cfg.L1, cfg.nu, cfg.dT
    centre = 1j * np.pi * k2 * dT / (ell * L1) - np.pi**2 * nu / L1**2 * (k1**2 + 4.0 * k2**2 / ell**2)
    root = np.sqrt(discriminant(cfg, k1, k2).astype(complex))
    return centre + root, centre - root


def mode_matrix(cfg: DomainConfig, k: ModeIndex | tuple[int, int]) -> ModeSpectrum:
    k = k if isinstance(k, ModeIndex) else ModeIndex(*k)
    M = mode_matrices(cfg, k.k1, k.k2)
    C1, C2, C3 = mode_coefficients(cfg, k.k1, k.k2)
    lp, lm = eigenvalues(cfg, k.k1, k.k2)
    lp, lm = complex(lp), complex(lm)
    w = np.linalg.eigvals(M)
    if abs(w[0] - lp) + abs(w[1] - lm) > abs(w[1] - lp) + abs(w[0] - lm):
        w = w[::-1]
    return ModeSpectrum(k=k, M=M, lambda_plus=lp, lambda_minus=lm,
                        D=complex(discriminant(cfg, k.k1, k.k2)),
                        C1=complex(C1), C2=complex(C2), C3=float(C3),
                        direct=(complex(w[0]), complex(w[1])))


def growth_indicator(cfg: DomainConfig, dT, kappa2):
    """d(dT, kappa2); same sign as Re lambda^+ at k = (1, sqrt(kappa2))."""
    dT = np.asarray(dT, dtype=float)
    kappa2 = np.asarray(kappa2, dtype=float)
    if np.any(kappa2 <= 0):
        raise ValueError("kappa2 must be positive")
    ell, L1, nu = cfg.ell, cfg.L1, cfg.nu
    s = 4.0 * kappa2 + ell**2
    return (4.0 * L1**3 / s * dT - L1**2 * np.pi**2 / ell**2 * dT**2
            - nu**2 * np.pi**4 * s**2 / (kappa2 * ell**4))


def growth_indicator_slope(cfg: DomainConfig, dT, kappa2):
    """Partial derivative of d with respect to dT."""
    ell, L1 = cfg.ell, cfg.L1
    return 4.0 * L1**3 / (4.0 * kappa2 + ell**2) - 2.0 * L1**2 * np.pi**2 / ell**2 * dT


def nu_crit(cfg: DomainConfig, kappa2) -> float:
    """Largest viscosity for which d(., kappa2) has real roots."""
    kappa2 = np.asarray(kappa2, dtype=float)
    if np.any(kappa2 <= 0):
        raise ValueError("kappa2 must be positive")
    ell, L1 = cfg.ell, cfg.L1
    return 2.0 * np.sqrt(kappa2) * ell**3 * L1**2 / ((4.0 * kappa2 + ell**2) ** 2 * np.pi**3)


def max_location(cfg: DomainConfig, kappa2):
    """dT at which d(., kappa2) peaks; strictly decreasing in kappa2."""
    ell, L1 = cfg.ell, cfg.L1
    return 2.0 * ell**2 * L1 / ((4.0 * kappa2 + ell**2) * np.pi**2)


def _quadratic_roots(cfg: DomainConfig, kappa2: float):
    """Roots of d(., kappa2) = 0 as ``(lo, hi, disc)``; cancellation-safe."""
    ell, L1, nu = cfg.ell, cfg.L1, cfg.nu
    a = L1**2 * np.pi**2 / ell**2
    b = 4.0 * L1**3 / (4.0 * kappa2 + ell**2)
    c = nu**2 * np.pi**4 * (4.0 * kappa2 + ell**2) ** 2 / (kappa2 * ell**4)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        # inside rounding of the double root counts as a point
        if disc > -4 * np.finfo(float).eps * b * b:
            disc = 0.0
        else:
            return None, None, disc
    q = 0.5 * (b + math.sqrt(disc))
    hi = q / a
    lo = c / q
    return lo, hi, disc


Status = Literal["absent", "point", "interval"]
Classification = Literal["locally_primary", "primary", "not_primary", "unknown"]


@dataclass
class InstabilityRegion:
    k2: int
    dT1: float | None
    dT2: float | None
    nu_crit: float
    status: Status
    max_location: float
    classification: Classification = "unknown"
    certificate: dict = field(default_factory=dict)

    @property
    def kappa2(self) -> int:
        return self.k2 * self.k2

    def contains(self, dT: float) -> bool:
        return self.status != "absent" and self.dT1 <= dT <= self.dT2

    def to_dict(self) -> dict:
        return asdict(self)


def instability_interval(cfg: DomainConfig, k2: int | float, point_rtol: float = 1e-10) -> InstabilityRegion:
    """Roots of d(., k2^2) and whether they form an interval, a point or nothing."""
    if k2 <= 0:
        raise ValueError("k2 must be positive")
    kappa2 = float(k2) ** 2
    nc = float(nu_crit(cfg, kappa2))
    lo, hi, _ = _quadratic_roots(cfg, kappa2)
    ml = float(max_location(cfg, kappa2))
    if lo is None:
        return InstabilityRegion(k2, None, None, nc, "absent", ml)
    status: Status = "point" if abs(cfg.nu - nc) <= point_rtol * nc else "interval"
    if status == "point":
        lo = hi = ml
    return InstabilityRegion(k2, float(lo), float(hi), nc, status, ml)


# ---------------------------------------------------------------------------
# classification of the 1-instability region


def primary_condition_margin(cfg: DomainConfig, dT: float, k2: int) -> float:
    """LHS - RHS of the Hypothesis inequality at ``(dT, k2)``.

    Positive margin is equivalent to d(dT, 1) > d(dT, k2^2).
    """
    ell, L1, nu = cfg.ell, cfg.L1, cfg.nu
    kap = float(k2) ** 2
    rhs = (4 + ell**2) * (4 * kap + ell**2) / (16 * ell**4 * L1**3 * kap) * (ell**4 - 16 * kap)
    if nu == 0:
        return math.inf if rhs < 0 or dT > 0 else -math.inf
    return dT / (nu**2 * np.pi**4) - rhs


def kappa2_cutoff(cfg: DomainConfig, dT: float) -> float:
    """Beyond this kappa2 the discriminant D_(1,k2) is negative at ``dT``."""
    if dT <= 0:
        return 0.0
    return cfg.ell**2 / 4.0 * (4.0 * cfg.L1 / (np.pi**2 * dT) - 1.0)


def _k2_enumeration_limit(cfg: DomainConfig, dT_values) -> int:
    """Last k2 that can possibly carry an instability region relevant to the check."""
    kstar = max(kappa2_cutoff(cfg, t) for t in dT_values)
    limit = int(math.ceil(math.sqrt(max(kstar, 0.0)))) + 2
    # nu_crit(kappa2) decreases for kappa2 > ell^2/12; regions exist only while nu <= nu_crit
    k = max(2, int(math.ceil(cfg.ell / math.sqrt(12.0))))
    if cfg.nu > 0:
        while nu_crit(cfg, k * k) >= cfg.nu:
            k += 1
        limit = max(limit, k + 1)
    return limit


def classify_primary(cfg: DomainConfig, max_k2: int | None = None) -> InstabilityRegion:
    """Classify the 1-instability region and return it with a certificate.

    The certificate lists, for each k2 >= 2 up to a finite cutoff, the margins
    of the Hypothesis inequality at both thresholds and the location of the
    k2-instability region relative to the 1-region.
    """
    region = instability_interval(cfg, 1)
    if region.status == "absent":
        raise ValueError(f"no 1-instability region: nu={cfg.nu} > nu_crit(1)={region.nu_crit}")
    if cfg.nu == 0:
        region.classification = "unknown"
        region.certificate = {"reason": "nu = 0: every k2-region shares the root dT1 = 0"}
        return region

    ell = cfg.ell
    T1, T2 = region.dT1, region.dT2
    kmax = max_k2 or _k2_enumeration_limit(cfg, [T1, T2])
    tol = DEGENERACY_RTOL * max(abs(T2), 1e-300)

    rows = []
    hyp_ok = True
    tie = False
    inside_only = True
    outside_unstable = False
    for k2 in range(2, kmax + 1):
        m1 = primary_condition_margin(cfg, T1, k2)
        m2 = primary_condition_margin(cfg, T2, k2)
        d1 = float(growth_indicator(cfg, T1, 1) - growth_indicator(cfg, T1, k2 * k2))
        d2 = float(growth_indicator(cfg, T2, 1) - growth_indicator(cfg, T2, k2 * k2))
        other = instability_interval(cfg, k2)
        rel = "absent"
        if other.status != "absent":
            a, b = other.dT1, other.dT2
            near = [abs(a - T1) <= tol, abs(a - T2) <= tol, abs(b - T1) <= tol, abs(b - T2) <= tol]
            if a < T1 - tol or b > T2 + tol:
                # part of the k2-region lies outside the 1-region
                inside_only = False
                if a < T1 - tol < b or a < T2 + tol < b or (a < T2 - tol and b > T2 + tol):
                    rel = "overlaps_endpoint"
                    outside_unstable = True
                elif any(near):
                    rel = "touches_endpoint"
                    outside_unstable = True
                else:
                    rel = "disjoint"
            elif any(near):
                rel = "touches_endpoint"
                tie = True
            else:
                rel = "inside"
        if not (m1 > 0 and m2 > 0):
            hyp_ok = False
        if min(abs(d1), abs(d2)) <= DEGENERACY_RTOL * max(abs(growth_indicator_slope(cfg, T2, 1)) * abs(T2), 1e-300):
            tie = True
        rows.append({"k2": k2, "margin_dT1": m1, "margin_dT2": m2,
                     "d_diff_dT1": d1, "d_diff_dT2": d2, "region": rel,
                     "region_dT1": other.dT1, "region_dT2": other.dT2})

    right_ok = all(r["d_diff_dT2"] > 0 for r in rows) and not any(
        r["region"] in ("disjoint", "overlaps_endpoint", "touches_endpoint")
        and r["region_dT2"] is not None and r["region_dT2"] > T2 for r in rows)

    if outside_unstable:
        cls: Classification = "not_primary"
    elif tie:
        cls = "unknown"
    elif ell <= 2 * math.sqrt(2):
        cls = "primary"
    elif hyp_ok and inside_only:
        cls = "primary"
    elif hyp_ok:
        cls = "locally_primary"
    else:
        cls = "not_primary"

    region.classification = cls
    region.certificate = {
        "ell": ell,
        "fast_path_ell_le_2sqrt2": bool(ell <= 2 * math.sqrt(2)),
        "hypothesis_holds": bool(hyp_ok),
        "k2_checked": kmax,
        "right_threshold_critical": bool(right_ok),
        "rows": rows,
    }
    return region


# ---------------------------------------------------------------------------
# special geometries


def overlap_polynomial(ell, kappa2):
    """q(ell) whose positive root puts the point 1-region on dT2(kappa2).

    The ell^4 coefficient is 4 kappa2 (the form that reproduces ell_4 ~ 5.37).
    """
    s = np.asarray(ell, dtype=float) ** 2
    return s**3 - 4 * kappa2 * s**2 - 80 * kappa2 * s - 64 * kappa2 * (2 + kappa2)


def ell_for_degenerate_overlap(kappa2: float, rtol: float = 1e-13) -> float:
    """Unique positive root ell_kappa2 of the overlap polynomial.

    Safeguarded Newton on the cubic in s = ell^2: Newton steps that leave the
    current sign-change bracket are replaced by bisection.
    """
    if kappa2 <= 1:
        raise ValueError(f"kappa2 must exceed 1, got {kappa2}")

    def q(s):
        return s**3 - 4 * kappa2 * s**2 - 80 * kappa2 * s - 64 * kappa2 * (2 + kappa2)

    def dq(s):
        return 3 * s**2 - 8 * kappa2 * s - 80 * kappa2

    lo, hi = 0.0, 1.0
    while q(hi) <= 0:
        hi *= 2.0
    s = hi
    for _ in range(200):
        step = q(s) / dq(s) if dq(s) != 0 else math.inf
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if q(s_new) > 0:
            hi = s_new
        else:
            lo = s_new
        if abs(s_new - s) <= rtol * s_new:
            s = s_new
            break
        s = s_new
    return math.sqrt(s)


def ell_star_polynomial(ell):
    s = np.asarray(ell, dtype=float) ** 2
    return 16 * (s + 4) ** 2 - (s - 8) * (s + 8) * (s + 16)


def ell_star(xtol: float = 1e-14) -> float:
    """Positive root (about 4.053) of 16(l^2+4)^2 - (l^2-8)(l^2+8)(l^2+16)."""
    return float(optimize.brentq(ell_star_polynomial, 1.0, 10.0, xtol=xtol))


def ell_equal_nu_crit(k2a: int = 1, k2b: int = 4) -> float:
    """Aspect ratio with nu_crit(k2a^2) = nu_crit(k2b^2) (kappa values as given)."""
    # sqrt(ka)/(4ka + s)^2 = sqrt(kb)/(4kb + s)^2  ->  linear in s after square root
    ra, rb = k2a ** 0.25, k2b ** 0.25
    s = 4 * (ra * k2b - rb * k2a) / (rb - ra)
    return math.sqrt(s)


# ---------------------------------------------------------------------------
# tables


def spectrum_sweep(cfg: DomainConfig, dT_values, k1_max: int = 10, k2_max: int = 10):
    """Rows ``(dT, k1, k2, Re l+, Im l+, Re l-, Im l-)`` over a dense dT grid."""
    dT_values = np.asarray(dT_values, dtype=float)
    k1 = np.arange(1, k1_max + 1)
    k2 = np.arange(-k2_max, k2_max + 1)
    T, K1, K2 = np.meshgrid(dT_values, k1, k2, indexing="ij")
    lp, lm = _eigenvalues_dT(cfg, T, K1, K2)
    return np.column_stack([T.ravel(), K1.ravel(), K2.ravel(),
                            lp.real.ravel(), lp.imag.ravel(), lm.real.ravel(), lm.imag.ravel()])


SWEEP_COLUMNS = ["dT", "k1", "k2", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus"]


def _eigenvalues_dT(cfg: DomainConfig, dT, k1, k2):
    ell, L1, nu = cfg.ell, cfg.L1, cfg.nu
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    D = (k2**2 * dT / (ell**2 * L1)) * (4.0 / (k1**2 + 4.0 * (k2 / ell) ** 2) - np.pi**2 * dT / L1)
    centre = 1j * np.pi * k2 * dT / (ell * L1) - np.pi**2 * nu / L1**2 * (k1**2 + 4.0 * k2**2 / ell**2)
    root = np.sqrt(D.astype(complex))
    return centre + root, centre - root


def strip_dispersion(cfg: DomainConfig, dT: float, wavenumbers, k1: int = 1):
    """Re/Im of lambda^+ at ``k = (k1, L2 * q)`` for continuous wavenumbers ``q``.

    ``q`` counts periods per unit length along x2 on the infinite strip.
    """
    q = np.asarray(wavenumbers, dtype=float)
    lp, _ = _eigenvalues_dT(cfg, np.full_like(q, dT), np.full_like(q, k1), cfg.L2 * q)
    return np.column_stack([q, lp.real, lp.imag])
