"""Order-by-order expansion of the band projector on a collocation grid.

Builds the sequence of correction terms E_0, E_1, ..., E_n for the driven
fiber family: E_0 is the Riesz projector of H(s) on the enclosing contour,
and each next term combines a contour sandwich integral of the previous
term's s-derivative with the quadratic convolution of lower terms.  The
partial sums T_n(s) = sum_j eps^j E_j(s) are almost projectors with an
O(eps^{n+1}) defect.

The s-dependence lives on a Chebyshev-Gauss-Lobatto grid with spectral
differentiation; convergence is certified by grid doubling, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cheb import CollocationGrid
from .errors import (
    BandTrackingError,
    GapViolationError,
    InstabilityError,
)
from .linalg import (
    Contour,
    contour_nodes,
    min_spectral_distance,
    operator_norm,
    resolvent_pair_filter,
    riesz_filter,
)

__all__ = [
    "SGrid",
    "AdiabaticExpansion",
    "build_expansion",
    "differentiate_grid",
    "IdentityReport",
    "recurrence_residuals",
    "TruncatedExpansion",
    "truncated_sum",
    "truncation_defects",
]

HERMITICITY_DRIFT_TOL = 1e-6


class SGrid(CollocationGrid):
    """Collocation grid in the slow time s; at least 17 Lobatto nodes."""

    MIN_COUNT = 17

    def __init__(self, s_max: float, count: int = 33):
        if count < self.MIN_COUNT:
            raise ValueError(f"SGrid needs at least {self.MIN_COUNT} nodes")
        super().__init__(s_max, count)

    def refined(self, factor: int = 2) -> "SGrid":
        return SGrid(self.s_max, factor * self.count)


def differentiate_grid(samples, grid: CollocationGrid, order: int = 1):
    """Entrywise spectral derivative of matrix-valued samples on the grid."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return grid.derivative(samples, order)


def _hermitize(m, where: str):
    drift = operator_norm(m - m.conj().T)
    if drift > HERMITICITY_DRIFT_TOL:
        raise InstabilityError(
            f"hermiticity drift {drift:.3e} in {where}; "
            "increase the s grid or contour node count"
        )
    return 0.5 * (m + m.conj().T), drift


class AdiabaticExpansion:
    """Terms E_0..E_n of the projector expansion, sampled on an s grid.

    Attributes
    ----------
    terms : list of (n_nodes, dim, dim) arrays, term j at every node
    hamiltonians, eigenvalues, eigenvectors : cached per-node spectral data
    rank : number of states in the band (trace of E_0)
    hermiticity_drift : worst pre-symmetrization drift seen while building
    """

    def __init__(self, family, contour: Contour, grid: SGrid, margin: float):
        self.family = family
        self.contour = contour
        self.grid = grid
        self.margin = float(margin)
        self.terms = []
        self._term_derivs = {}
        self.hermiticity_drift = 0.0
        n = grid.count
        dim = family.dim
        self.hamiltonians = np.empty((n, dim, dim), dtype=complex)
        self.eigenvalues = np.empty((n, dim))
        self.eigenvectors = np.empty((n, dim, dim), dtype=complex)
        z, w = contour_nodes(contour)
        for i, s in enumerate(grid.nodes):
            h = family.hamiltonian(s)
            lam, vec = np.linalg.eigh(h)
            dist = min_spectral_distance(lam, contour)
            if dist < margin:
                raise GapViolationError(
                    f"eigenvalue at distance {dist:.3e} from contour at "
                    f"s={s:.6g} (required >= {margin:.3e})"
                )
            self.hamiltonians[i] = h
            self.eigenvalues[i] = lam
            self.eigenvectors[i] = vec
        self._z = z
        self._w = w
        self._build_leading()

    # -- construction ------------------------------------------------------

    def _build_leading(self):
        n, dim = self.grid.count, self.family.dim
        e0 = np.empty((n, dim, dim), dtype=complex)
        ranks = np.empty(n)
        for i in range(n):
            vec = self.eigenvectors[i]
            filt = riesz_filter(self.eigenvalues[i], self._z, self._w)
            p = (vec * filt) @ vec.conj().T
            p, drift = _hermitize(p, f"leading projector at node {i}")
            self.hermiticity_drift = max(self.hermiticity_drift, drift)
            e0[i] = p
            ranks[i] = np.trace(p).real
        rank = int(round(ranks[0]))
        if np.any(np.abs(ranks - rank) > 1e-6):
            worst = int(np.argmax(np.abs(ranks - rank)))
            raise BandTrackingError(
                f"projector rank varies across nodes: {ranks[worst]:.8f} at "
                f"node {worst} vs {rank}"
            )
        self.rank = rank
        self.terms.append(e0)

    def extend(self, order: int):
        """Build terms up to the given order (idempotent)."""
        while len(self.terms) - 1 < order:
            self._build_next()
        return self

    def _build_next(self):
        j = len(self.terms)
        n, dim = self.grid.count, self.family.dim
        prev_deriv = self.term_derivative(j - 1)
        p0 = self.terms[0]
        new = np.empty((n, dim, dim), dtype=complex)
        for i in range(n):
            p = p0[i]
            a = prev_deriv[i]
            # (1 - P) A P - h.c. collapses to the plain commutator [A, P]
            block = a @ p - p @ a
            vec = self.eigenvectors[i]
            kern = resolvent_pair_filter(self.eigenvalues[i], self._z, self._w)
            sandwich = vec @ (1j * kern * (vec.conj().T @ block @ vec)) @ vec.conj().T
            s_total = np.zeros((dim, dim), dtype=complex)
            for m in range(1, j):
                s_total += self.terms[m][i] @ self.terms[j - m][i]
            term = sandwich + s_total - 2.0 * (p @ s_total @ p)
            term, drift = _hermitize(term, f"term {j} at node {i}")
            self.hermiticity_drift = max(self.hermiticity_drift, drift)
            new[i] = term
        self.terms.append(new)

    # -- access ------------------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def term_derivative(self, j: int):
        """Spectral d/ds of term j at every node (cached)."""
        if j not in self._term_derivs:
            self._term_derivs[j] = self.grid.derivative(self.terms[j])
        return self._term_derivs[j]

    def evaluate_term(self, j: int, s: float):
        return self.grid.evaluate(self.terms[j], s)

    def evaluate_term_derivative(self, j: int, s: float):
        return self.grid.evaluate(self.term_derivative(j), s)

    def term_norms(self, j: int) -> np.ndarray:
        return np.array([operator_norm(m) for m in self.terms[j]])

    def term_derivative_norms(self, j: int) -> np.ndarray:
        return np.array([operator_norm(m) for m in self.term_derivative(j)])


def build_expansion(family, contour, grid, order, margin) -> AdiabaticExpansion:
    """Construct the expansion up to the requested order."""
    return AdiabaticExpansion(family, contour, grid, margin).extend(order)


# ---------------------------------------------------------------------------
# Identity verification
# ---------------------------------------------------------------------------

@dataclass
class IdentityReport:
    """Per-order, per-node residuals of the two structural identities.

    convolution[j][i] = || E_j - sum_{m=0}^{j} E_m E_{j-m} ||  at node i
    commutator[j][i]  = || i E_{j-1}' - [H, E_j] ||             (j >= 1;
    the j = 0 entry holds ||[H, E_0]||, which vanishes up to quadrature).
    """

    convolution: list
    commutator: list

    @property
    def max_convolution(self) -> float:
        return max(float(np.max(r)) for r in self.convolution)

    @property
    def max_commutator(self) -> float:
        return max(float(np.max(r)) for r in self.commutator)


def recurrence_residuals(exp: AdiabaticExpansion) -> IdentityReport:
    """Residuals of the convolution and derivative-commutator identities."""
    n = exp.grid.count
    conv = []
    comm = []
    for j in range(exp.order + 1):
        conv_j = np.empty(n)
        comm_j = np.empty(n)
        for i in range(n):
            acc = np.zeros_like(exp.terms[0][i])
            for m in range(j + 1):
                acc += exp.terms[m][i] @ exp.terms[j - m][i]
            conv_j[i] = operator_norm(exp.terms[j][i] - acc)
            h = exp.hamiltonians[i]
            bracket = h @ exp.terms[j][i] - exp.terms[j][i] @ h
            if j == 0:
                comm_j[i] = operator_norm(bracket)
            else:
                deriv = exp.term_derivative(j - 1)[i]
                comm_j[i] = operator_norm(1j * deriv - bracket)
        conv.append(conv_j)
        comm.append(comm_j)
    return IdentityReport(conv, comm)


# ---------------------------------------------------------------------------
# Truncated sums
# ---------------------------------------------------------------------------

@dataclass
class TruncatedExpansion:
    """T_n(s) = sum_{j<=n} eps^j E_j(s) on the expansion's grid."""

    expansion: AdiabaticExpansion
    order: int
    epsilon: float
    samples: np.ndarray

    @property
    def grid(self) -> SGrid:
        return self.expansion.grid

    def evaluate(self, s: float):
        mats = [self.expansion.evaluate_term(j, s) for j in range(self.order + 1)]
        return sum((self.epsilon ** j) * m for j, m in enumerate(mats))


def truncated_sum(exp: AdiabaticExpansion, epsilon: float,
                  order: int | None = None) -> TruncatedExpansion:
    """Assemble the partial sum at a given epsilon (terms built on demand)."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    n = exp.order if order is None else int(order)
    exp.extend(n)
    samples = exp.terms[0].copy()
    for j in range(1, n + 1):
        samples += (epsilon ** j) * exp.terms[j]
    return TruncatedExpansion(exp, n, float(epsilon), samples)


def truncation_defects(tn: TruncatedExpansion):
    """(sup_s ||T^2 - T||, sup_s ||i eps T' - [H, T] - i eps^{n+1} E_n'||).

    The second quantity is an exact consequence of the recurrence identities,
    so it sits at the discretization-noise level; the first scales as
    eps^{n+1}.
    """
    exp = tn.expansion
    tn_deriv = tn.grid.derivative(tn.samples)
    en_deriv = exp.term_derivative(tn.order)
    eps = tn.epsilon
    idem = 0.0
    comm = 0.0
    for i in range(tn.grid.count):
        t = tn.samples[i]
        idem = max(idem, operator_norm(t @ t - t))
        h = exp.hamiltonians[i]
        resid = (1j * eps * tn_deriv[i]
                 - (h @ t - t @ h)
                 - 1j * eps ** (tn.order + 1) * en_deriv[i])
        comm = max(comm, operator_norm(resid))
    return idem, comm
