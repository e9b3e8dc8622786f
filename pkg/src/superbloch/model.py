"""Physical model: periodic potential, plane-wave fiber Hamiltonians,
driving profiles and their primitives, and the driven fiber family
h(k + G(s, a)) with analytic s-derivatives.

Units: hbar = 1, electron mass defaults to 1, lattice period defaults to
2 pi.  The letter `a` is reserved for the frequency ratio omega/epsilon;
the lattice period is called `period` (ell) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate
from scipy.linalg import toeplitz

from .errors import (
    AccuracyError,
    CapabilityError,
    NoGapError,
    TruncationError,
)
from .linalg import SpectralWindow, as_hermitian

__all__ = [
    "PeriodicPotential",
    "PlaneWaveTruncation",
    "ConstantDrive",
    "CosineDrive",
    "SmoothRampDrive",
    "TabulatedDrive",
    "drive_from_config",
    "drive_primitive",
    "fiber_hamiltonian",
    "FiberFamily",
    "driven_fiber_family",
    "uniform_k_grid",
    "band_table",
    "band_interval",
    "gap_certificate",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PeriodicPotential:
    """Real periodic potential as a finite Fourier series.

    `fourier_coeffs` maps the integer harmonic m to v_m; realness requires
    v_{-m} = conj(v_m) and a real v_0.  Missing negative harmonics are
    filled in by conjugation.
    """

    period: float = TWO_PI
    fourier_coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        coeffs = {}
        for m, v in self.fourier_coeffs.items():
            coeffs[int(m)] = complex(v)
        for m, v in list(coeffs.items()):
            if -m not in coeffs:
                coeffs[-m] = v.conjugate()
        for m, v in coeffs.items():
            if abs(coeffs[-m] - v.conjugate()) > 1e-14 * max(1.0, abs(v)):
                raise ValueError(
                    f"potential not real: v_{-m} != conj(v_{m})"
                )
        if 0 in coeffs and abs(coeffs[0].imag) > 1e-14 * max(1.0, abs(coeffs[0])):
            raise ValueError("v_0 must be real")
        object.__setattr__(self, "fourier_coeffs", dict(sorted(coeffs.items())))

    @classmethod
    def cosine(cls, v1: float, period: float = TWO_PI) -> "PeriodicPotential":
        """Single-harmonic (Mathieu-type) potential 2*v1*cos(2 pi x / period)."""
        return cls(period, {1: v1, -1: v1})

    @property
    def support(self) -> int:
        return max((abs(m) for m in self.fourier_coeffs), default=0)

    def coefficient(self, m: int) -> complex:
        return self.fourier_coeffs.get(int(m), 0.0 + 0.0j)


@dataclass(frozen=True)
class PlaneWaveTruncation:
    """Plane-wave basis e^{i (2 pi m / period + kappa) x}, m in [-cutoff, cutoff]."""

    cutoff: int = 12
    mass: float = 1.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be a positive integer")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.cutoff + 1


def fiber_hamiltonian(potential: PeriodicPotential,
                      truncation: PlaneWaveTruncation,
                      kappa: float) -> np.ndarray:
    """Plane-wave fiber matrix h(kappa).

    Entry (m, m') is delta_{mm'} (2 pi m / period + kappa)^2 / (2 mass)
    + v_{m - m'}.  Raises TruncationError if the potential couples plane
    waves outside the representable band |m - m'| <= 2*cutoff.
    """
    m_max = truncation.cutoff
    if potential.support > 2 * m_max:
        raise TruncationError(
            f"Fourier support {potential.support} exceeds representable "
            f"couplings 2*cutoff = {2 * m_max}"
        )
    m = np.arange(-m_max, m_max + 1)
    kinetic = (TWO_PI * m / potential.period + kappa) ** 2 / (2.0 * truncation.mass)
    col = np.array([potential.coefficient(j) for j in range(0, 2 * m_max + 1)])
    row = np.array([potential.coefficient(-j) for j in range(0, 2 * m_max + 1)])
    h = toeplitz(col, row) + np.diag(kinetic)
    return as_hermitian(h)


# ---------------------------------------------------------------------------
# Driving profiles: F(u), bounded with bounded derivatives.
# ---------------------------------------------------------------------------

class ConstantDrive:
    """F(u) = value; the time-independent field limit."""

    kind = "constant"
    max_derivative_order = 64

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def __call__(self, u):
        return self.value * np.ones_like(np.asarray(u, dtype=float))

    def derivative(self, u, order: int):
        if order == 0:
            return self(u)
        return np.zeros_like(np.asarray(u, dtype=float))

    def bound(self, order: int) -> float:
        return abs(self.value) if order == 0 else 0.0

    def primitive(self, s, a):
        return self.value * np.asarray(s, dtype=float)

    def params(self) -> dict:
        return {"value": self.value}


class CosineDrive:
    """F(u) = amplitude * cos(u)."""

    kind = "cosine"
    max_derivative_order = 64

    def __init__(self, amplitude: float = 1.0):
        self.amplitude = float(amplitude)

    def __call__(self, u):
        return self.amplitude * np.cos(np.asarray(u, dtype=float))

    def derivative(self, u, order: int):
        u = np.asarray(u, dtype=float)
        return self.amplitude * np.cos(u + 0.5 * np.pi * order)

    def bound(self, order: int) -> float:
        return abs(self.amplitude)

    def primitive(self, s, a):
        s = np.asarray(s, dtype=float)
        if a == 0.0:
            return self.amplitude * s
        return self.amplitude * np.sin(a * s) / a

    def params(self) -> dict:
        return {"amplitude": self.amplitude}


def _tanh_derivative_polys(max_order: int):
    # d/du tanh = 1 - tanh^2, so every derivative is a polynomial in t = tanh(u)
    polys = [np.array([0.0, 1.0])]           # t
    base = np.array([1.0, 0.0, -1.0])        # 1 - t^2
    for _ in range(max_order):
        dp = np.polynomial.polynomial.polyder(polys[-1])
        polys.append(np.polynomial.polynomial.polymul(dp, base))
    return polys


class SmoothRampDrive:
    """F(u) = tanh(u): a smooth switch with all derivatives bounded."""

    kind = "smooth-ramp"
    max_derivative_order = 6

    def __init__(self):
        self._polys = _tanh_derivative_polys(self.max_derivative_order)

    def __call__(self, u):
        return np.tanh(np.asarray(u, dtype=float))

    def derivative(self, u, order: int):
        if order > self.max_derivative_order:
            raise CapabilityError(
                f"smooth-ramp drive supports derivatives up to order "
                f"{self.max_derivative_order}"
            )
        t = np.tanh(np.asarray(u, dtype=float))
        return np.polynomial.polynomial.polyval(t, self._polys[order])

    def bound(self, order: int) -> float:
        if order > self.max_derivative_order:
            raise CapabilityError("derivative order beyond profile support")
        t = np.linspace(-1.0, 1.0, 20001)
        return float(np.max(np.abs(
            np.polynomial.polynomial.polyval(t, self._polys[order]))))

    def primitive(self, s, a):
        s = np.asarray(s, dtype=float)
        if a == 0.0:
            return np.zeros_like(s)  # F(0) = 0
        x = a * s
        # log cosh x, overflow-safe
        g = np.abs(x) + np.log1p(np.exp(-2.0 * np.abs(x))) - math.log(2.0)
        return g / a

    def params(self) -> dict:
        return {}


class TabulatedDrive:
    """Cubic-spline interpolant of sampled F values.

    Derivative bounds are estimates from the spline, not certified; the
    primitive uses adaptive quadrature to absolute tolerance 1e-12.
    """

    kind = "tabulated"
    max_derivative_order = 2

    def __init__(self, u_values, f_values):
        u = np.asarray(u_values, dtype=float)
        f = np.asarray(f_values, dtype=float)
        if u.ndim != 1 or u.size < 4 or u.size != f.size:
            raise ValueError("need matching 1-D samples, at least 4 points")
        self._spline = interpolate.CubicSpline(u, f)
        self.u_range = (float(u[0]), float(u[-1]))
        self._u = u
        self._f = f

    def _check_range(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.u_range
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            raise CapabilityError(
                f"tabulated drive evaluated outside its range [{lo}, {hi}]"
            )
        return u

    def __call__(self, u):
        return self._spline(self._check_range(u))

    def derivative(self, u, order: int):
        if order > self.max_derivative_order:
            raise CapabilityError(
                "tabulated drive exposes derivatives up to order 2"
            )
        return self._spline(self._check_range(u), nu=order)

    def bound(self, order: int) -> float:
        if order > self.max_derivative_order:
            raise CapabilityError("derivative order beyond profile support")
        dense = np.linspace(*self.u_range, 8192)
        return float(np.max(np.abs(self._spline(dense, nu=order))))

    def primitive(self, s, a):
        scalar = np.isscalar(s) or np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if a == 0.0:
            out = float(self._spline(0.0)) * s_arr
        else:
            out = np.empty_like(s_arr)
            for i, si in enumerate(s_arr):
                self._check_range(a * si)
                val, err = integrate.quad(
                    lambda u: float(self._spline(a * u)), 0.0, si,
                    epsabs=1e-12, epsrel=1e-12, limit=300)
                if err > 1e-10:
                    raise AccuracyError(
                        f"drive primitive quadrature error {err:.2e} at s={si}"
                    )
                out[i] = val
        return float(out[0]) if scalar else out

    def params(self) -> dict:
        return {"u_values": self._u.tolist(), "f_values": self._f.tolist()}


_DRIVE_KINDS = {
    "constant": ConstantDrive,
    "cosine": CosineDrive,
    "smooth-ramp": SmoothRampDrive,
    "tabulated": TabulatedDrive,
}


def drive_from_config(kind: str, **params):
    try:
        cls = _DRIVE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown drive kind {kind!r}") from None
    return cls(**params)


def drive_primitive(drive, s, a):
    """G(s, a) = integral_0^s F(a u) du for s >= 0, a >= 0."""
    if np.any(np.asarray(s) < 0):
        raise ValueError("s must be nonnegative")
    if a < 0:
        raise ValueError("a must be nonnegative")
    return drive.primitive(s, float(a))


# ---------------------------------------------------------------------------
# Driven fiber family
# ---------------------------------------------------------------------------

class FiberFamily:
    """The driven fiber Hamiltonian s -> h(k + G(s, a)) and its s-derivatives.

    The gauge transform that removes the field term acts fiberwise as the
    quasimomentum shift kappa -> k + G(s, a); since h(kappa) is quadratic in
    kappa all s-derivatives follow from the chain rule with
    G' = F(a s), G^{(j+1)} = a^j F^{(j)}(a s).
    """

    def __init__(self, potential, truncation, quasimomentum, drive,
                 ratio_a, derivative_order=4):
        bz_half = math.pi / potential.period
        if not (-bz_half - 1e-12 <= quasimomentum < bz_half + 1e-12):
            raise ValueError(
                f"quasimomentum {quasimomentum} outside [-pi/period, pi/period)"
            )
        if ratio_a < 0:
            raise ValueError("ratio a = omega/epsilon must be nonnegative")
        if derivative_order > drive.max_derivative_order + 1:
            raise CapabilityError(
                f"derivative order {derivative_order} needs drive derivatives "
                f"up to {derivative_order - 1}, profile supports "
                f"{drive.max_derivative_order}"
            )
        self.potential = potential
        self.truncation = truncation
        self.quasimomentum = float(quasimomentum)
        self.drive = drive
        self.ratio_a = float(ratio_a)
        self.derivative_order = int(derivative_order)
        m = np.arange(-truncation.cutoff, truncation.cutoff + 1)
        base = TWO_PI * m / potential.period
        self._static = fiber_hamiltonian(potential, truncation, 0.0)
        self._linear = np.diag(base / truncation.mass).astype(complex)
        self._curv = np.eye(truncation.dim, dtype=complex) / (2.0 * truncation.mass)

    @property
    def dim(self) -> int:
        return self.truncation.dim

    def kappa(self, s):
        """Shifted quasimomentum k + G(s, a)."""
        return self.quasimomentum + drive_primitive(self.drive, s, self.ratio_a)

    def kappa_derivative(self, s, order: int):
        """d^order/ds^order of kappa: F(as), a F'(as), a^2 F''(as), ..."""
        if order < 1:
            raise ValueError("order must be >= 1")
        a = self.ratio_a
        u = a * np.asarray(s, dtype=float)
        if order == 1:
            return self.drive(u)
        return a ** (order - 1) * self.drive.derivative(u, order - 1)

    def quadratic_parts(self):
        """(A, B, C) with h(kappa) = A + kappa B + kappa^2 C."""
        return self._static, self._linear, self._curv

    def fiber_matrix(self, kappa: float) -> np.ndarray:
        """h(kappa) = A + kappa B + kappa^2 C."""
        return self._static + kappa * self._linear + kappa ** 2 * self._curv

    def velocity(self, kappa: float) -> np.ndarray:
        """dh/dkappa = B + 2 kappa C."""
        return self._linear + 2.0 * kappa * self._curv

    def hamiltonian(self, s: float) -> np.ndarray:
        return self.fiber_matrix(float(self.kappa(s)))

    def derivative(self, s: float, order: int = 1) -> np.ndarray:
        """Analytic d^order H / ds^order.

        For the quadratic fiber matrix, Faa di Bruno reduces to
        kappa^{(n)} h'(kappa) + (1/2) sum_{j=1}^{n-1} C(n,j)
        kappa^{(j)} kappa^{(n-j)} h''(kappa), with h'' = 2C.
        """
        if order < 1 or order > self.derivative_order:
            raise CapabilityError(
                f"derivative order {order} outside supported range "
                f"1..{self.derivative_order}"
            )
        kap = float(self.kappa(s))
        out = float(self.kappa_derivative(s, order)) * self.velocity(kap)
        pair = 0.0
        for j in range(1, order):
            pair += (math.comb(order, j)
                     * float(self.kappa_derivative(s, j))
                     * float(self.kappa_derivative(s, order - j)))
        if pair:
            out = out + pair * self._curv
        return out


def driven_fiber_family(potential, truncation, quasimomentum, drive,
                        ratio_a, derivative_order=4) -> FiberFamily:
    """The rescaled-frame fiber family with analytic s-derivatives."""
    return FiberFamily(potential, truncation, quasimomentum, drive,
                       ratio_a, derivative_order)


# ---------------------------------------------------------------------------
# Band structure and gap certificates
# ---------------------------------------------------------------------------

def uniform_k_grid(potential: PeriodicPotential, count: int) -> np.ndarray:
    """Uniform quasimomentum grid on [-pi/period, pi/period), symmetric about 0.

    Includes both the zone center and the zone boundary (where band extrema
    of smooth 1-D potentials sit) whenever count is even.
    """
    bz_half = math.pi / potential.period
    return -bz_half + 2.0 * bz_half * np.arange(count) / count


def band_table(potential, truncation, k_grid, n_bands=None) -> np.ndarray:
    """Eigenvalues of h(k) over the k grid; shape (len(k_grid), n_bands)."""
    n_bands = truncation.dim if n_bands is None else min(n_bands, truncation.dim)
    table = np.empty((len(k_grid), n_bands))
    for i, k in enumerate(k_grid):
        table[i] = np.linalg.eigvalsh(
            fiber_hamiltonian(potential, truncation, float(k)))[:n_bands]
    return table


def band_interval(potential, truncation, window: SpectralWindow, k_grid):
    """(lo, hi) hull of the selected bands over the k grid."""
    idx = list(window.band_indices)
    table = band_table(potential, truncation, k_grid, max(idx) + 2)
    sel = table[:, idx]
    return float(np.min(sel)), float(np.max(sel))


def gap_certificate(family_or_potential, window: SpectralWindow, k_grid,
                    truncation=None, min_gap: float = 1e-6) -> float:
    """Distance between the selected bands and the rest of the spectrum.

    Minimum over the k grid of the set distance between the selected
    eigenvalue ranks and all others.  Because the driven family only slides
    the quasimomentum, this certificate is uniform in s.  Raises NoGapError
    (naming the touching bands) when the distance falls below `min_gap`.
    """
    if isinstance(family_or_potential, FiberFamily):
        potential = family_or_potential.potential
        truncation = family_or_potential.truncation
    else:
        potential = family_or_potential
        if truncation is None:
            raise ValueError("truncation required when passing a potential")
    idx = list(window.band_indices)
    if idx != list(range(idx[0], idx[-1] + 1)):
        raise ValueError("band_indices must be contiguous")
    dim = truncation.dim
    if idx[-1] >= dim:
        raise ValueError("band index beyond truncation dimension")
    table = band_table(potential, truncation, k_grid)
    inside = table[:, idx].ravel()
    mask = np.zeros(dim, dtype=bool)
    mask[idx] = True
    outside = table[:, ~mask].ravel()
    d = float(np.min(np.abs(inside[:, None] - outside[None, :])))
    if d < min_gap:
        cands = []
        if idx[0] - 1 >= 0:
            below = table[:, idx[0] - 1].ravel()
            cands.append((float(np.min(np.abs(inside[:, None] - below[None, :]))),
                          (idx[0] - 1, idx[0])))
        if idx[-1] + 1 < dim:
            above = table[:, idx[-1] + 1].ravel()
            cands.append((float(np.min(np.abs(inside[:, None] - above[None, :]))),
                          (idx[-1], idx[-1] + 1)))
        pair = min(cands)[1] if cands else (idx[0], idx[0] + 1)
        raise NoGapError(
            f"bands {pair[0]} and {pair[1]} touch: "
            f"distance {d:.3e} below tolerance {min_gap:.1e}"
        )
    return d
