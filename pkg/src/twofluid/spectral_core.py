"""Sine/Fourier Galerkin machinery for the deviation system.

The deviation ``u = (u1, u2)`` from the laminar profiles is expanded as

    u_l(x) = sum_{k1=1..N1} sum_{k2=-N2..N2} c[k1, k2, l] g_k(x),
    g_k(x) = sin(k1 pi x1 / L1) exp(2 i pi k2 x2 / L2),

and the companion cosine family ``phi_k`` (``sin`` replaced by ``cos``) carries
x1-derivatives and the x1-component of the Poisson velocity.  Coefficient
arrays have shape ``(N1, 2*N2 + 1, 2)``: axis 0 is ``k1 - 1``, axis 1 is
``k2 + N2`` and axis 2 is the component ``l``.

Grid transforms use a type-I sine/cosine transform in x1 (points
``x1_j = j L1 / n1``, ``j = 0..n1``) and an FFT in x2.  Quadratic products are
formed on a grid padded by the 3/2 rule in both directions and projected back,
which makes the Galerkin projection of the advection term exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

FORMAT_VERSION = 1


class ResolutionError(ValueError):
    """A grid is too coarse to represent the requested truncation."""


@dataclass(frozen=True)
class DomainConfig:
    """Geometry, viscosity and the two advection speeds.

    ``ell`` and ``dT`` are properties so they can never go stale.
    """

    L1: float
    L2: float
    nu: float
    T_plus: float
    T_minus: float = 0.1

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError(f"L1 and L2 must be positive, got L1={self.L1}, L2={self.L2}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")

    @property
    def ell(self) -> float:
        return self.L2 / self.L1

    @property
    def dT(self) -> float:
        return self.T_plus - self.T_minus

    @property
    def dT_star(self) -> float:
        """Global stability threshold 4 L1 / pi^2."""
        return 4.0 * self.L1 / np.pi**2

    @classmethod
    def from_dT(cls, L1, L2, nu, dT, T_minus=0.1) -> "DomainConfig":
        return cls(L1=L1, L2=L2, nu=nu, T_plus=T_minus + dT, T_minus=T_minus)

    def with_dT(self, dT: float) -> "DomainConfig":
        return replace(self, T_plus=self.T_minus + dT)

    def with_(self, **changes) -> "DomainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"L1": self.L1, "L2": self.L2, "nu": self.nu,
                "T_plus": self.T_plus, "T_minus": self.T_minus}


# paper's simulation parameters (nu = 9e-4, L1 = L2 = 2, T- = 0.1)
PAPER_PARAMS = dict(L1=2.0, L2=2.0, nu=9e-4, T_minus=0.1)


@dataclass(frozen=True)
class ModeIndex:
    k1: int
    k2: int

    def __post_init__(self):
        if self.k1 < 1:
            raise ValueError(f"k1 must be >= 1, got {self.k1}")


@dataclass
class SpectralState:
    """Truncated coefficient tensor of ``(u1, u2)``.

    ``complexified`` states are exempt from the reality constraint; they are
    used for the center-manifold algebra where ``zeta`` and its conjugate are
    independent objects.
    """

    coeffs: np.ndarray
    complexified: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[2] != 2 or c.shape[1] % 2 != 1:
            raise ValueError(f"coefficient array must have shape (N1, 2*N2+1, 2), got {c.shape}")
        self.coeffs = c

    @property
    def N1(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N2(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @classmethod
    def zeros(cls, N1: int, N2: int, complexified: bool = False) -> "SpectralState":
        return cls(np.zeros((N1, 2 * N2 + 1, 2), dtype=complex), complexified)

    def copy(self) -> "SpectralState":
        return SpectralState(self.coeffs.copy(), self.complexified)

    def index(self, k1: int, k2: int) -> tuple[int, int]:
        if not (1 <= k1 <= self.N1 and -self.N2 <= k2 <= self.N2):
            raise IndexError(f"mode ({k1}, {k2}) outside truncation ({self.N1}, {self.N2})")
        return k1 - 1, k2 + self.N2

    def mode(self, k1: int, k2: int) -> np.ndarray:
        return self.coeffs[self.index(k1, k2)]

    def set_mode(self, k1: int, k2: int, q) -> "SpectralState":
        self.coeffs[self.index(k1, k2)] = q
        return self

    def reality_defect(self) -> float:
        """max |c(k1,-k2) - conj c(k1,k2)|, zero for a real field."""
        c = self.coeffs
        return float(np.max(np.abs(c - np.conj(c[:, ::-1, :])), initial=0.0))

    def symmetrized(self) -> "SpectralState":
        return SpectralState(enforce_reality(self.coeffs), False)

    def resized(self, N1: int, N2: int) -> "SpectralState":
        """Zero-pad or truncate to a new truncation order."""
        out = SpectralState.zeros(N1, N2, self.complexified)
        n1 = min(N1, self.N1)
        n2 = min(N2, self.N2)
        out.coeffs[:n1, N2 - n2:N2 + n2 + 1] = self.coeffs[:n1, self.N2 - n2:self.N2 + n2 + 1]
        return out

    def __add__(self, other):
        return SpectralState(self.coeffs + other.coeffs, self.complexified or other.complexified)

    def __sub__(self, other):
        return SpectralState(self.coeffs - other.coeffs, self.complexified or other.complexified)

    def __mul__(self, scalar):
        return SpectralState(self.coeffs * scalar, self.complexified)

    __rmul__ = __mul__

    def conj(self) -> "SpectralState":
        """Coefficients of the pointwise complex conjugate field."""
        return SpectralState(np.conj(self.coeffs[:, ::-1, :]), self.complexified)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self, cfg: DomainConfig | None = None, tol: float = 0.0) -> dict:
        modes = []
        for i1, i2 in zip(*np.nonzero(np.any(np.abs(self.coeffs) > tol, axis=2))):
            q = self.coeffs[i1, i2]
            modes.append({"k1": int(i1 + 1), "k2": int(i2 - self.N2),
                          "u1": [float(q[0].real), float(q[0].imag)],
                          "u2": [float(q[1].real), float(q[1].imag)]})
        out = {"format": FORMAT_VERSION, "kind": "spectral_state",
               "N1": self.N1, "N2": self.N2, "complexified": self.complexified,
               "modes": modes}
        if cfg is not None:
            out["domain"] = cfg.to_dict()
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpectralState":
        if d.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported spectral state format {d.get('format')!r}")
        s = cls.zeros(int(d["N1"]), int(d["N2"]), bool(d.get("complexified", False)))
        for m in d["modes"]:
            s.set_mode(m["k1"], m["k2"], [complex(*m["u1"]), complex(*m["u2"])])
        return s

    def save_json(self, path, cfg: DomainConfig | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(cfg), indent=1))

    @classmethod
    def load_json(cls, path) -> "SpectralState":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def enforce_reality(c: np.ndarray) -> np.ndarray:
    """Project onto coefficient arrays of real fields (conjugate-pair average)."""
    return 0.5 * (c + np.conj(c[:, ::-1, ...]))


@dataclass
class GridField:
    """Samples of ``(u1, u2)`` on ``x1 = j L1/n1 (j=0..n1)``, ``x2 = m L2/n2``.

    ``values`` has shape ``(n1 + 1, n2, 2)``.
    """

    values: np.ndarray
    L1: float
    L2: float

    @property
    def n1(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n2(self) -> int:
        return self.values.shape[1]

    @property
    def x1(self) -> np.ndarray:
        return np.arange(self.n1 + 1) * self.L1 / self.n1

    @property
    def x2(self) -> np.ndarray:
        return np.arange(self.n2) * self.L2 / self.n2

    def boundary_defect(self) -> float:
        return float(max(np.max(np.abs(self.values[0])), np.max(np.abs(self.values[-1]))))

    def to_csv(self, path) -> None:
        """Write ``x1,x2,u1,u2`` rows (x1 slowest)."""
        X1, X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        v = np.real(self.values)
        table = np.column_stack([X1.ravel(), X2.ravel(), v[..., 0].ravel(), v[..., 1].ravel()])
        header = f"format={FORMAT_VERSION} L1={self.L1!r} L2={self.L2!r} n1={self.n1} n2={self.n2}\nx1,x2,u1,u2"
        np.savetxt(path, table, delimiter=",", header=header, comments="# ", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "GridField":
        with open(path) as fh:
            meta = dict(tok.split("=") for tok in fh.readline()[2:].split())
        if int(meta["format"]) != FORMAT_VERSION:
            raise ValueError(f"unsupported grid format {meta['format']}")
        n1, n2 = int(meta["n1"]), int(meta["n2"])
        table = np.loadtxt(path, delimiter=",", comments="#")
        values = table[:, 2:].reshape(n1 + 1, n2, 2)
        return cls(values, float(meta["L1"]), float(meta["L2"]))


@dataclass
class VectorGridField:
    """Two real components per grid point, same layout as :class:`GridField`."""

    values: np.ndarray
    L1: float
    L2: float


# ---------------------------------------------------------------------------
# per-mode coefficients


def wavenumbers(N1: int, N2: int):
    k1 = np.arange(1, N1 + 1, dtype=float)[:, None]
    k2 = np.arange(-N2, N2 + 1, dtype=float)[None, :]
    return k1, k2


def poisson_denominator(ell, k1, k2):
    """ell k1^2 + 4 k2^2 / ell, the recurring Poisson factor."""
    return ell * k1**2 + 4.0 * k2**2 / ell


def mode_coefficients(cfg: DomainConfig, k1, k2):
    """C1 (imaginary), C2 (imaginary) and C3 (real damping) of the mode matrix.

    Accepts scalars or broadcastable arrays, and real-valued ``k2``.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    L1, L2 = cfg.L1, cfg.L2
    C1 = 2j * np.pi * k2 / L2
    C2 = (2j / np.pi) * k2 / (L2 / L1 * k1**2 + 4.0 * L1 / L2 * k2**2)
    C3 = cfg.nu * np.pi**2 * (k1**2 / L1**2 + 4.0 * k2**2 / L2**2)
    return C1, C2, C3


def mode_matrices(cfg: DomainConfig, k1, k2, frame: str = "comoving") -> np.ndarray:
    """Stack of 2x2 matrices ``M_k`` with shape ``broadcast(k1, k2) + (2, 2)``.

    ``frame="lab"`` adds the common advection ``T_minus * C1`` that the
    comoving variable removes.
    """
    C1, C2, C3 = mode_coefficients(cfg, k1, k2)
    C1, C2, C3 = np.broadcast_arrays(C1, C2, C3)
    M = np.empty(C1.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = C1 * cfg.dT - C2 - C3
    M[..., 0, 1] = -C2
    M[..., 1, 0] = C2
    M[..., 1, 1] = C2 - C3
    if frame == "lab":
        shift = cfg.T_minus * C1
        M[..., 0, 0] += shift
        M[..., 1, 1] += shift
    elif frame != "comoving":
        raise ValueError(f"unknown frame {frame!r}")
    return M


def apply_linear(state: SpectralState, cfg: DomainConfig, frame: str = "comoving") -> SpectralState:
    """Exact action of the linearization: per-mode product with ``M_k``."""
    k1, k2 = wavenumbers(state.N1, state.N2)
    M = mode_matrices(cfg, k1, k2, frame)
    return SpectralState(np.einsum("...ij,...j->...i", M, state.coeffs), state.complexified)


@dataclass(frozen=True)
class PoissonVelocity:
    """Per-mode representation of ``A f`` for a scalar coefficient array ``f``.

    ``A1`` multiplies the cosine family ``phi_k``; ``A2`` multiplies ``g_k``.
    ``A^perp f = (A2 f, -A1 f)``.
    """

    A1: np.ndarray
    A2: np.ndarray


def poisson_factors(L1: float, L2: float, N1: int, N2: int):
    k1, k2 = wavenumbers(N1, N2)
    den = poisson_denominator(L2 / L1, k1, k2)
    s1 = -(L2 / np.pi) * k1 / den
    s2 = -(2.0 * L1 * 1j / np.pi) * k2 / den
    return s1, s2


def poisson_velocity(f: np.ndarray, cfg: DomainConfig) -> PoissonVelocity:
    """``A_j f = d/dx_j (lap)^{-1} f`` mode by mode (Dirichlet in x1)."""
    f = np.asarray(f, dtype=complex)
    N1, N2 = f.shape[0], (f.shape[1] - 1) // 2
    s1, s2 = poisson_factors(cfg.L1, cfg.L2, N1, N2)
    return PoissonVelocity(A1=s1 * f, A2=s2 * f)


def potential_coefficients(f: np.ndarray, cfg: DomainConfig) -> np.ndarray:
    """Coefficients of V solving ``-lap V = f`` with V = 0 at x1 = 0, L1."""
    N1, N2 = f.shape[0], (f.shape[1] - 1) // 2
    k1, k2 = wavenumbers(N1, N2)
    return f / (np.pi**2 * (k1**2 / cfg.L1**2 + 4.0 * k2**2 / cfg.L2**2))


# ---------------------------------------------------------------------------
# transforms


def _place_k2(c: np.ndarray, n2: int) -> np.ndarray:
    """Scatter ``k2 = -N2..N2`` (axis 1) into FFT order of length ``n2``."""
    N2 = (c.shape[1] - 1) // 2
    out = np.zeros((c.shape[0], n2) + c.shape[2:], dtype=complex)
    out[:, :N2 + 1] = c[:, N2:]
    if N2:
        out[:, n2 - N2:] = c[:, :N2]
    return out


def _gather_k2(F: np.ndarray, N2: int) -> np.ndarray:
    n2 = F.shape[1]
    out = np.empty((F.shape[0], 2 * N2 + 1) + F.shape[2:], dtype=complex)
    out[:, N2:] = F[:, :N2 + 1]
    if N2:
        out[:, :N2] = F[:, n2 - N2:]
    return out


def _sin_synth(c: np.ndarray, M: int) -> np.ndarray:
    """Sine series (axis 0, modes 1..N1) at interior points ``j = 1..M-1``."""
    N1 = c.shape[0]
    buf = np.zeros((M - 1,) + c.shape[1:], dtype=complex)
    buf[:N1] = c
    return 0.5 * sfft.dst(buf, type=1, axis=0)


def _cos_synth(c: np.ndarray, M: int) -> np.ndarray:
    """Cosine series (axis 0, modes 1..N1, no constant) at ``j = 1..M-1``."""
    N1 = c.shape[0]
    buf = np.zeros((M + 1,) + c.shape[1:], dtype=complex)
    buf[1:N1 + 1] = c
    return 0.5 * sfft.dct(buf, type=1, axis=0)[1:M]


def _sin_analyze(values: np.ndarray, M: int, N1: int) -> np.ndarray:
    """Sine coefficients 1..N1 from interior samples ``j = 1..M-1``."""
    return sfft.dst(values, type=1, axis=0)[:N1] / M


def _x2_synth(c: np.ndarray, n2: int) -> np.ndarray:
    return sfft.ifft(_place_k2(c, n2), axis=1, norm="forward")


def _x2_analyze(values: np.ndarray, N2: int) -> np.ndarray:
    return _gather_k2(sfft.fft(values, axis=1, norm="forward"), N2)


def synthesize_sine(c: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Evaluate a g_k series on the full grid (boundary rows included)."""
    inner = _sin_synth(_x2_synth(c, n2), n1)
    out = np.zeros((n1 + 1,) + inner.shape[1:], dtype=complex)
    out[1:n1] = inner
    return out


def synthesize_cosine(c: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Evaluate a phi_k series on the full grid (boundary rows included)."""
    N1 = c.shape[0]
    buf = np.zeros((n1 + 1,) + c.shape[1:], dtype=complex)
    buf[1:N1 + 1] = c
    return 0.5 * sfft.dct(_x2_synth(buf, n2), type=1, axis=0)


def _check_resolution(N1, N2, n1, n2):
    if n1 < 2 * N1 or n2 < 2 * N2 + 1:
        raise ResolutionError(
            f"grid ({n1}, {n2}) too coarse for truncation ({N1}, {N2}); "
            f"need n1 >= {2 * N1}, n2 >= {2 * N2 + 1}")


def synthesize(state: SpectralState, n1: int, n2: int, L1: float = 1.0, L2: float = 1.0,
               real: bool | None = None) -> GridField:
    """Evaluate the expansion on the ``(n1 + 1) x n2`` grid.

    Real states return real samples; the discarded imaginary residue is checked
    against ``1e-12`` relative.
    """
    _check_resolution(state.N1, state.N2, n1, n2)
    values = synthesize_sine(state.coeffs, n1, n2)
    if real is None:
        real = not state.complexified
    if real:
        scale = max(float(np.max(np.abs(values), initial=0.0)), 1e-300)
        resid = float(np.max(np.abs(values.imag), initial=0.0))
        if resid > 1e-12 * scale and resid > 1e-300:
            raise ValueError(f"state is not real: imaginary residue {resid:.3e} (scale {scale:.3e})")
        values = values.real.copy()
    return GridField(values, L1, L2)


def analyze(field: GridField, N1: int, N2: int) -> SpectralState:
    """Project grid samples onto the retained ``g_k`` (exact on band-limited fields).

    Content beyond the truncation is discarded; aliasing of modes the grid
    cannot resolve is the caller's responsibility.
    """
    v = np.asarray(field.values)
    n1 = v.shape[0] - 1
    if N1 > n1 - 1:
        raise ResolutionError(f"cannot extract {N1} sine modes from {n1} intervals")
    c = _x2_analyze(_sin_analyze(v[1:n1].astype(complex), n1, N1), N2)
    return SpectralState(c, complexified=not np.isrealobj(v))


# ---------------------------------------------------------------------------
# nonlinear term


def dealiased_sizes(N1: int, N2: int) -> tuple[int, int]:
    """Interval count in x1 and point count in x2 that make quadratic products exact."""
    M1 = 3 * N1 // 2 + 1
    n2 = sfft.next_fast_len(3 * N2 + 1)
    return M1, n2


class GalerkinBasis:
    """Precomputed factors for one geometry and truncation.

    The hot path of the time integrator goes through :meth:`advection`.
    """

    def __init__(self, L1: float, L2: float, N1: int, N2: int):
        self.L1, self.L2, self.N1, self.N2 = float(L1), float(L2), int(N1), int(N2)
        self.M1, self.n2 = dealiased_sizes(N1, N2)
        k1, k2 = wavenumbers(N1, N2)
        self.dx1 = (np.pi * k1 / L1) * np.ones_like(k2)       # d/dx1 maps g_k -> phi_k
        self.dx2 = (2j * np.pi * k2 / L2) * np.ones_like(k1)  # d/dx2 keeps g_k
        self.s1, self.s2 = poisson_factors(L1, L2, N1, N2)

    def advection(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Galerkin projection of ``A^perp(v1 + v2) . grad w_l`` for ``l = 1, 2``."""
        rho = v[..., 0] + v[..., 1]
        sin_in = np.empty((self.N1, 2 * self.N2 + 1, 3), dtype=complex)
        cos_in = np.empty_like(sin_in)
        sin_in[..., 0] = self.s2 * rho
        sin_in[..., 1:] = self.dx2[..., None] * w
        cos_in[..., 0] = self.s1 * rho
        cos_in[..., 1:] = self.dx1[..., None] * w
        S = _sin_synth(_x2_synth(sin_in, self.n2), self.M1)
        C = _cos_synth(_x2_synth(cos_in, self.n2), self.M1)
        # (A2 rho) d1 w - (A1 rho) d2 w
        prod = S[..., :1] * C[..., 1:] - C[..., :1] * S[..., 1:]
        return _x2_analyze(_sin_analyze(prod, self.M1, self.N1), self.N2)

    def advection_real(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """:meth:`advection` for real fields, using only ``k2 >= 0`` and real FFTs."""
        N2 = self.N2
        h = slice(N2, None)
        rho = v[:, h, 0] + v[:, h, 1]
        sin_in = np.empty((self.N1, N2 + 1, 3), dtype=complex)
        cos_in = np.empty_like(sin_in)
        sin_in[..., 0] = self.s2[:, h] * rho
        sin_in[..., 1:] = self.dx2[:, h, None] * w[:, h]
        cos_in[..., 0] = self.s1[:, h] * rho
        cos_in[..., 1:] = self.dx1[:, h, None] * w[:, h]
        S = sfft.irfft(_sin_synth(sin_in, self.M1), n=self.n2, axis=1, norm="forward")
        C = sfft.irfft(_cos_synth(cos_in, self.M1), n=self.n2, axis=1, norm="forward")
        prod = S[..., :1] * C[..., 1:] - C[..., :1] * S[..., 1:]
        half = sfft.rfft(prod, axis=1, norm="forward")[:, :N2 + 1]
        half = _sin_analyze(half, self.M1, self.N1)
        out = np.empty((self.N1, 2 * N2 + 1, 2), dtype=complex)
        out[:, N2:] = half
        out[:, :N2] = np.conj(half[:, :0:-1])
        out[:, N2].imag = 0.0
        return out

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        return -self.advection(c, c)

    def nonlinear_real(self, c: np.ndarray) -> np.ndarray:
        """``R(c)`` for a real field; the result satisfies the reality constraint exactly."""
        return -self.advection_real(c, c)

    def bilinear(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return -0.5 * (self.advection(v, w) + self.advection(w, v))


@lru_cache(maxsize=32)
def galerkin_basis(L1: float, L2: float, N1: int, N2: int) -> GalerkinBasis:
    return GalerkinBasis(L1, L2, N1, N2)


def _basis_for(state: SpectralState, cfg: DomainConfig) -> GalerkinBasis:
    return galerkin_basis(float(cfg.L1), float(cfg.L2), state.N1, state.N2)


def nonlinear_term(state: SpectralState, cfg: DomainConfig) -> SpectralState:
    """``R(u) = -(A^perp(u1+u2) . grad u1, A^perp(u1+u2) . grad u2)`` projected."""
    out = _basis_for(state, cfg).nonlinear(state.coeffs)
    if not state.complexified:
        out = enforce_reality(out)
    return SpectralState(out, state.complexified)


def bilinear_term(v: SpectralState, w: SpectralState, cfg: DomainConfig) -> SpectralState:
    """Symmetric bilinear form ``R20[v, w]`` with ``R20[u, u] = R(u)``."""
    if (v.N1, v.N2) != (w.N1, w.N2):
        raise ValueError("bilinear_term needs equal truncations")
    complexified = v.complexified or w.complexified
    out = _basis_for(v, cfg).bilinear(v.coeffs, w.coeffs)
    if not complexified:
        out = enforce_reality(out)
    return SpectralState(out, complexified)


def advection_term(carrier: SpectralState, state: SpectralState, cfg: DomainConfig) -> SpectralState:
    """Projection of ``A^perp(carrier1 + carrier2) . grad state`` (no sign)."""
    return SpectralState(_basis_for(state, cfg).advection(carrier.coeffs, state.coeffs),
                         carrier.complexified or state.complexified)


def velocity_grid(state: SpectralState, cfg: DomainConfig, n1: int, n2: int) -> VectorGridField:
    """Drift velocity ``E^perp = A^perp(u1 + u2)`` sampled on the grid."""
    _check_resolution(state.N1, state.N2, n1, n2)
    pv = poisson_velocity(state.coeffs[..., 0] + state.coeffs[..., 1], cfg)
    vals = np.stack([synthesize_sine(pv.A2, n1, n2), -synthesize_cosine(pv.A1, n1, n2)], axis=-1)
    if not state.complexified:
        vals = vals.real
    return VectorGridField(vals, cfg.L1, cfg.L2)


def inner(a: SpectralState, b: SpectralState, cfg: DomainConfig) -> complex:
    """``<a, b>_2 = sum_l int a_l conj(b_l) dx`` via Parseval (``<g_k, g_k> = L1 L2 / 2``)."""
    return complex(0.5 * cfg.L1 * cfg.L2 * np.sum(a.coeffs * np.conj(b.coeffs)))


def point_value(state: SpectralState, L1: float, L2: float, x1: float, x2: float) -> np.ndarray:
    """Exact evaluation of ``(u1, u2)`` at one point."""
    k1, k2 = wavenumbers(state.N1, state.N2)
    g = np.sin(k1 * np.pi * x1 / L1) * np.exp(2j * np.pi * k2 * x2 / L2)
    vals = np.einsum("ij,ijl->l", g, state.coeffs)
    return vals if state.complexified else vals.real


def sup_norm(state: SpectralState, L1: float, L2: float, component: int = 0,
             n1: int | None = None, n2: int | None = None) -> float:
    """Max of ``|u_component|`` over a grid twice as fine as the truncation."""
    n1 = n1 or max(2 * state.N1, 4)
    n2 = n2 or max(4 * state.N2 + 2, 4)
    vals = synthesize_sine(state.coeffs[..., component], n1, n2)
    return float(np.max(np.abs(vals)))
