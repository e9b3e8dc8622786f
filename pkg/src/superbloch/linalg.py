"""Dense complex Hermitian linear-algebra primitives.

Operator norms, contour quadrature by the trapezoidal rule, Riesz spectral
projectors, resolvents and inverse matrix square roots.  Everything here is
a pure function of immutable inputs and safe to call from any number of
workers concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    GapViolationError,
    HermiticityError,
    NotPositiveDefiniteError,
    SingularResolventError,
    AccuracyError,
)

__all__ = [
    "operator_norm",
    "as_hermitian",
    "hermiticity_defect",
    "Contour",
    "SpectralWindow",
    "contour_nodes",
    "enclosing_contour",
    "min_spectral_distance",
    "riesz_projector",
    "resolvent",
    "inv_sqrt_spd",
    "riesz_filter",
    "resolvent_pair_filter",
]


def operator_norm(m) -> float:
    """Largest singular value of a square complex matrix."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("operator_norm: matrix has non-finite entries")
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, ord=2))


def hermiticity_defect(m) -> float:
    """Max-entry deviation of m from its adjoint."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def as_hermitian(m, tol: float | None = None) -> np.ndarray:
    """Validate that m is self-adjoint and return it as a complex array.

    The default tolerance is 1e-12 * dim * max|entry|, scaled so that
    round-off from O(dim) accumulations passes but genuine asymmetry fails.
    """
    m = np.ascontiguousarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if tol is None:
        tol = 1e-12 * m.shape[0] * max(scale, 1e-30)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise HermiticityError(
            f"matrix is not self-adjoint: defect {defect:.3e} > tol {tol:.3e}"
        )
    return m


@dataclass(frozen=True)
class Contour:
    """Closed integration contour in the complex plane.

    A circle or an axis-aligned ellipse, traversed counterclockwise,
    discretized by `node_count` trapezoidal nodes (even, at least 8).
    """

    shape: str            # "circle" | "ellipse"
    center: complex
    radii: tuple          # (r,) for a circle, (rx, ry) for an ellipse
    node_count: int = 64

    def __post_init__(self):
        if self.shape not in ("circle", "ellipse"):
            raise ValueError(f"unknown contour shape {self.shape!r}")
        radii = tuple(float(r) for r in np.atleast_1d(self.radii))
        if any(r <= 0 for r in radii):
            raise ValueError("contour radii must be positive")
        if self.shape == "circle" and len(radii) != 1:
            raise ValueError("circle takes a single radius")
        if self.shape == "ellipse" and len(radii) != 2:
            raise ValueError("ellipse takes two semi-axes")
        object.__setattr__(self, "radii", radii)
        if self.node_count < 8 or self.node_count % 2:
            raise ValueError("node_count must be even and at least 8")

    @classmethod
    def circle(cls, center, radius, node_count=64):
        return cls("circle", complex(center), (radius,), node_count)

    @classmethod
    def ellipse(cls, center, rx, ry, node_count=64):
        return cls("ellipse", complex(center), (rx, ry), node_count)

    @property
    def semi_axes(self) -> tuple:
        if self.shape == "circle":
            return (self.radii[0], self.radii[0])
        return self.radii

    def points(self, count: int) -> np.ndarray:
        """`count` points on the contour (no weights), for distance checks."""
        theta = 2.0 * np.pi * np.arange(count) / count
        rx, ry = self.semi_axes
        return self.center + rx * np.cos(theta) + 1j * ry * np.sin(theta)


def contour_nodes(contour: Contour, node_count: int | None = None):
    """Trapezoidal nodes and weights (z_j, w_j) with sum_j w_j f(z_j) ~ oint f dz.

    For a circle of radius r the nodes are z_j = c + r e^{i theta_j} with
    weights w_j = (2 pi / N) i r e^{i theta_j}; an ellipse uses the same
    parametrization with w_j = (2 pi / N) z'(theta_j).  The trapezoidal rule
    on a closed analytic curve converges geometrically.
    """
    n = contour.node_count if node_count is None else int(node_count)
    if n < 8 or n % 2:
        raise ValueError("node_count must be even and at least 8")
    theta = 2.0 * np.pi * np.arange(n) / n
    rx, ry = contour.semi_axes
    z = contour.center + rx * np.cos(theta) + 1j * ry * np.sin(theta)
    dz = -rx * np.sin(theta) + 1j * ry * np.cos(theta)
    w = (2.0 * np.pi / n) * dz
    return z, w


@dataclass(frozen=True)
class SpectralWindow:
    """Which eigenvalue ranks form the isolated band, and its gap margin."""

    band_indices: tuple
    gap_margin: float

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in np.atleast_1d(self.band_indices)))
        object.__setattr__(self, "band_indices", idx)
        if not idx:
            raise ValueError("band_indices must be non-empty")
        if self.gap_margin <= 0:
            raise ValueError("gap_margin must be positive")


def enclosing_contour(interval, gap: float, node_count: int = 64) -> Contour:
    """Ellipse enclosing the band interval with uniform spectral clearance.

    Semi-axes are (half-width + gap/2, ry) centered on the interval midpoint.
    The vertical semi-axis is enlarged from gap/2 to sqrt(rx * gap/2) when
    needed so that points at the band edge, inside the contour, also keep
    distance >= gap/2 from the curve (a flat ellipse dips below that margin
    near its ends).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi < lo:
        raise ValueError("empty band interval")
    if gap <= 0:
        raise ValueError("gap must be positive")
    rx = 0.5 * (hi - lo) + 0.5 * gap
    ry = max(0.5 * gap, np.sqrt(rx * 0.5 * gap) * 1.0001)
    return Contour.ellipse(0.5 * (lo + hi), rx, ry, node_count)


def min_spectral_distance(eigenvalues, contour: Contour, resolution: int = 4096) -> float:
    """Minimum distance from any eigenvalue to the (densely sampled) contour."""
    pts = contour.points(resolution)
    eigs = np.atleast_1d(np.asarray(eigenvalues))
    return float(np.min(np.abs(eigs[:, None] - pts[None, :])))


def _riesz_fixed(h: np.ndarray, contour: Contour, node_count: int) -> np.ndarray:
    """(i/2pi) sum_j w_j (H - z_j)^{-1} at a fixed trapezoidal node count."""
    z, w = contour_nodes(contour, node_count)
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    acc = np.zeros((dim, dim), dtype=complex)
    for zj, wj in zip(z, w):
        acc += wj * np.linalg.solve(h - zj * eye, eye)
    return (0.5j / np.pi) * acc


def riesz_projector(
    h,
    contour: Contour,
    margin: float | None = None,
    adaptive: bool = True,
    tol: float = 1e-11,
    max_nodes: int = 512,
) -> np.ndarray:
    """Spectral projector onto the part of spec(H) enclosed by the contour.

    Computed as (i/2pi) oint (H - z)^{-1} dz by the trapezoidal rule; with
    `adaptive` the node count doubles until two successive evaluations differ
    by less than `tol` (or `max_nodes` is reached).  If `margin` is given,
    every eigenvalue must keep at least that distance from the contour.
    """
    h = as_hermitian(h)
    eigs = np.linalg.eigvalsh(h)
    dist = min_spectral_distance(eigs, contour)
    floor = max(margin if margin is not None else 0.0, 1e-12)
    if dist < floor:
        raise GapViolationError(
            f"eigenvalue at distance {dist:.3e} from contour (required >= {floor:.3e})"
        )
    n = contour.node_count
    p = _riesz_fixed(h, contour, n)
    if adaptive:
        while n < max_nodes:
            n *= 2
            p_next = _riesz_fixed(h, contour, n)
            delta = operator_norm(p_next - p)
            p = p_next
            if delta < tol:
                break
        else:
            delta = operator_norm(p - _riesz_fixed(h, contour, n // 2))
            if delta >= tol:
                raise AccuracyError(
                    f"Riesz quadrature did not reach {tol:.1e} at {max_nodes} nodes"
                )
    p = 0.5 * (p + p.conj().T)
    return p


def resolvent(h, z: complex, guard: float = 1e-12) -> np.ndarray:
    """(H - z)^{-1} for z off the spectrum of a Hermitian H."""
    h = as_hermitian(h)
    eigs = np.linalg.eigvalsh(h)
    dist = float(np.min(np.abs(eigs - z)))
    if dist < guard:
        raise SingularResolventError(
            f"z={z} is within {dist:.3e} of the spectrum"
        )
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    r = np.linalg.solve(h - z * eye, eye)
    residual = operator_norm((h - z * eye) @ r - eye)
    if residual > 1e-10 * max(1.0, operator_norm(r) * (abs(z) + float(np.max(np.abs(eigs))))):
        raise SingularResolventError(
            f"resolvent solve lost accuracy: residual {residual:.3e}"
        )
    return r


def inv_sqrt_spd(a, min_eig: float = 1e-8) -> np.ndarray:
    """Inverse square root of a Hermitian positive-definite matrix.

    Uses the eigendecomposition: for the dimensions in play (< 100) exactness
    beats iteration.  Raises NotPositiveDefiniteError when the smallest
    eigenvalue falls below `min_eig`.
    """
    a = as_hermitian(a)
    eigs, vecs = np.linalg.eigh(a)
    if eigs[0] < min_eig:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {eigs[0]:.3e} below tolerance {min_eig:.1e}"
        )
    inv_root = (vecs * (eigs ** -0.5)) @ vecs.conj().T
    return 0.5 * (inv_root + inv_root.conj().T)


def riesz_filter(eigenvalues, z, w) -> np.ndarray:
    """Scalar quadrature (i/2pi) sum_j w_j / (lam - z_j) per eigenvalue.

    Applied to the eigenvalues of H this is the eigenbasis representation of
    the Riesz projector: ~1 for enclosed eigenvalues, ~0 otherwise.
    """
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    return (0.5j / np.pi) * np.sum(w[None, :] / (lam[:, None] - z[None, :]), axis=1)


def resolvent_pair_filter(eigenvalues, z, w) -> np.ndarray:
    """Pair kernel K_pq = (i/2pi) sum_j w_j / ((lam_p - z_j)(lam_q - z_j)).

    This is the eigenbasis kernel of the sandwich integral
    (i/2pi) oint (H-z)^{-1} X (H-z)^{-1} dz: the result is K * (V^H X V)
    entrywise.  Exact value (residues): 1/(lam_out - lam_in) when exactly one
    of the pair is enclosed, 0 otherwise.
    """
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    a = 1.0 / (lam[:, None] - z[None, :])
    return (0.5j / np.pi) * np.einsum("pj,j,qj->pq", a, w, a)
