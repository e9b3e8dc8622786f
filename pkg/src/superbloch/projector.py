"""Deformed-band projectors from the truncated expansion.

The almost-invariant projector at order n is the spectral projector of the
partial sum T_n onto its eigenvalue cluster near 1.  Two equivalent
constructions are provided and cross-checked: the Riesz integral over the
circle |z - 1| = 1/2, and the closed algebraic formula
T + (T - 1/2) ([1 + 4 (T^2 - T)]^{-1/2} - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    EpsilonTooLargeError,
    InstabilityError,
    NotPositiveDefiniteError,
)
from .expansion import TruncatedExpansion
from .linalg import (
    Contour,
    contour_nodes,
    inv_sqrt_spd,
    operator_norm,
    resolvent_pair_filter,
    riesz_filter,
)

__all__ = [
    "DeformedBandProjector",
    "deformed_projector",
    "projector_from_matrix",
    "DefectReport",
    "invariance_defect",
    "SPLIT_WINDOW",
]

# Eigenvalues of T_n must sit in [-1/8, 1/8] or [7/8, 9/8]: margin 1/4 to the
# splitting circle keeps the inverse square root well conditioned.
SPLIT_WINDOW = 0.125

IDEMPOTENCY_TOL = 1e-9
HERMITICITY_TOL = 1e-10
METHOD_AGREEMENT_TOL = 1e-9


def _check_splitting(eigs, s):
    near_zero = np.abs(eigs) <= SPLIT_WINDOW
    near_one = np.abs(eigs - 1.0) <= SPLIT_WINDOW
    if not np.all(near_zero | near_one):
        bad = eigs[~(near_zero | near_one)]
        worst = bad[np.argmin(np.abs(bad - 0.5))]
        raise EpsilonTooLargeError(
            f"spectral splitting failed at s={s:.6g}: eigenvalue "
            f"{worst:.6f} outside [-1/8, 1/8] u [7/8, 9/8] "
            "(epsilon too large for this order)",
            s=s, eigenvalue=float(worst),
        )


def projector_from_matrix(t, method: str = "algebraic",
                          circle_nodes: int = 64, s: float = np.nan):
    """Projector onto the near-1 spectral cluster of one partial-sum matrix."""
    eigs, vecs = np.linalg.eigh(t)
    _check_splitting(eigs, s)
    if method == "algebraic":
        q = t @ t - t
        core = np.eye(t.shape[0], dtype=complex) + 4.0 * q
        try:
            root = inv_sqrt_spd(core, min_eig=0.25)
        except NotPositiveDefiniteError as exc:  # pragma: no cover - guarded above
            raise EpsilonTooLargeError(str(exc), s=s) from exc
        p = t + (t - 0.5 * np.eye(t.shape[0])) @ (root - np.eye(t.shape[0]))
    elif method == "riesz":
        circle = Contour.circle(1.0, 0.5, circle_nodes)
        z, w = contour_nodes(circle)
        filt = riesz_filter(eigs, z, w)
        p = (vecs * filt) @ vecs.conj().T
    else:
        raise ValueError(f"unknown construction method {method!r}")
    return 0.5 * (p + p.conj().T)


@dataclass
class DeformedBandProjector:
    """Projector samples P_n(s_i) with the construction diagnostics."""

    truncated: TruncatedExpansion
    samples: np.ndarray
    method: str
    rank: int
    idempotency: float
    hermiticity: float
    circle_nodes: int = 64

    @property
    def order(self) -> int:
        return self.truncated.order

    @property
    def epsilon(self) -> float:
        return self.truncated.epsilon

    @property
    def grid(self):
        return self.truncated.grid

    @property
    def expansion(self):
        return self.truncated.expansion

    def evaluate(self, s: float):
        """P_n at an arbitrary s, via the interpolated partial sum."""
        t = self.truncated.evaluate(s)
        return projector_from_matrix(t, self.method, self.circle_nodes, s)


def deformed_projector(tn: TruncatedExpansion, method: str = "algebraic",
                       circle_nodes: int = 64,
                       cross_check: bool = True) -> DeformedBandProjector:
    """Build the deformed-band projector at every grid node.

    With `cross_check`, the Riesz and algebraic constructions are compared
    at three (deterministically chosen) nodes on every build and must agree
    to 1e-9.
    """
    grid = tn.grid
    n, dim = grid.count, tn.samples.shape[1]
    samples = np.empty((n, dim, dim), dtype=complex)
    idem = 0.0
    herm = 0.0
    ranks = np.empty(n)
    for i, s in enumerate(grid.nodes):
        p = projector_from_matrix(tn.samples[i], method, circle_nodes, s)
        herm = max(herm, operator_norm(p - p.conj().T))
        idem = max(idem, operator_norm(p @ p - p))
        ranks[i] = np.trace(p).real
        samples[i] = p
    if idem > IDEMPOTENCY_TOL or herm > HERMITICITY_TOL:
        raise InstabilityError(
            f"projector exactness lost: idempotency {idem:.2e}, "
            f"hermiticity {herm:.2e}"
        )
    rank = int(round(ranks[0]))
    if np.any(np.abs(ranks - rank) > 1e-6) or rank != tn.expansion.rank:
        raise InstabilityError("projector rank differs from the band rank")
    if cross_check:
        rng = np.random.default_rng(n)
        other = "riesz" if method == "algebraic" else "algebraic"
        for i in rng.choice(n, size=min(3, n), replace=False):
            alt = projector_from_matrix(tn.samples[i], other, circle_nodes,
                                        grid.nodes[i])
            delta = operator_norm(alt - samples[i])
            if delta > METHOD_AGREEMENT_TOL:
                raise InstabilityError(
                    f"construction methods disagree by {delta:.2e} at node {i}"
                )
    return DeformedBandProjector(tn, samples, method, rank, idem, herm,
                                 circle_nodes)


@dataclass
class DefectReport:
    """Invariance defect of the projector family and its contour-formula twin.

    lhs[i] = i eps P'(s_i) - [H(s_i), P(s_i)] (spectral-derivative route);
    rhs[i] is the independent eps^{n+1} sandwich integral of E_n' over the
    splitting circle.  For a converged grid the two agree matrixwise.
    """

    lhs_norms: np.ndarray
    rhs_norms: np.ndarray
    agreement: float

    @property
    def defect_norm(self) -> float:
        return float(np.max(self.lhs_norms))

    @property
    def rhs_norm(self) -> float:
        return float(np.max(self.rhs_norms))


def invariance_defect(proj: DeformedBandProjector,
                      circle_nodes: int | None = None) -> DefectReport:
    """Compute both sides of the projector's invariance identity."""
    tn = proj.truncated
    exp = tn.expansion
    if exp.grid is not proj.grid:
        raise ConfigurationError("projector and expansion grids differ")
    nodes = circle_nodes or proj.circle_nodes
    circle = Contour.circle(1.0, 0.5, nodes)
    z, w = contour_nodes(circle)
    eps = tn.epsilon
    n_ord = tn.order
    p_deriv = proj.grid.derivative(proj.samples)
    en_deriv = exp.term_derivative(n_ord)
    count = proj.grid.count
    lhs_norms = np.empty(count)
    rhs_norms = np.empty(count)
    agree = 0.0
    factor = eps ** (n_ord + 1)
    for i in range(count):
        h = exp.hamiltonians[i]
        p = proj.samples[i]
        lhs = 1j * eps * p_deriv[i] - (h @ p - p @ h)
        t_eigs, t_vecs = np.linalg.eigh(tn.samples[i])
        kern = resolvent_pair_filter(t_eigs, z, w)
        inner = t_vecs.conj().T @ en_deriv[i] @ t_vecs
        # (1/2pi) oint (T-z)^{-1} E_n' (T-z)^{-1} dz = -i K * inner in eigenbasis
        rhs = factor * (t_vecs @ (-1j * kern * inner) @ t_vecs.conj().T)
        lhs_norms[i] = operator_norm(lhs)
        rhs_norms[i] = operator_norm(rhs)
        agree = max(agree, operator_norm(lhs - rhs))
    return DefectReport(lhs_norms, rhs_norms, agree)
