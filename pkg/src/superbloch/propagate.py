"""Unitary propagation of the rescaled Schrodinger equation
i eps dW/ds = H(s) W per fiber.

Exponential midpoint stepping: W <- exp(-i h H(s + h/2)/eps) W with the
matrix exponential taken through the Hermitian eigendecomposition, so every
step is exactly unitary.  Global accuracy is certified by halving the step
until the output stops moving, never assumed from the order of the scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceError
from .linalg import operator_norm

__all__ = ["PropagationResult", "evolve", "unitarity_defect"]

MAX_LOCAL_PHASE = 0.5


@dataclass
class PropagationResult:
    """Propagator samples W(s_i) plus step statistics."""

    family: object
    epsilon: float
    s_values: np.ndarray
    matrices: np.ndarray
    steps_taken: int
    step_size: float
    step_cap: float
    halvings: int
    error_estimate: float
    start: float = 0.0

    def at(self, s: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.s_values - s)))
        if abs(self.s_values[idx] - s) > 1e-10 * max(1.0, abs(s)):
            raise ValueError(f"s={s} is not an output node")
        return self.matrices[idx]


def _chunk_product(step_matrices: np.ndarray) -> np.ndarray:
    """Ordered product U_{n-1} ... U_1 U_0 by pairwise tree reduction."""
    mats = step_matrices
    while mats.shape[0] > 1:
        n = mats.shape[0]
        half = n // 2
        left = mats[1 : 2 * half : 2]
        right = mats[0 : 2 * half : 2]
        prod = left @ right
        if n % 2:
            mats = np.concatenate([prod, mats[-1:]], axis=0)
        else:
            mats = prod
    return mats[0]


class _Stepper:
    """Midpoint-exponential stepping for one fiber family at fixed epsilon."""

    def __init__(self, family, epsilon: float, chunk: int = 256):
        self.family = family
        self.epsilon = epsilon
        self.chunk = chunk
        self._static, self._linear, self._curv = family.quadratic_parts()

    def advance(self, w: np.ndarray, s_from: float, s_to: float, h: float):
        """Propagate w across [s_from, s_to] with substeps of size <= h."""
        span = s_to - s_from
        if span <= 0:
            return w, 0
        nsub = max(1, math.ceil(span / h - 1e-12))
        hh = span / nsub
        mids = s_from + (np.arange(nsub) + 0.5) * hh
        kappas = self.family.quasimomentum + self.family.drive.primitive(
            mids, self.family.ratio_a)
        kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
        phase_factor = -1j * hh / self.epsilon
        for lo in range(0, nsub, self.chunk):
            kap = kappas[lo : lo + self.chunk]
            hstack = (self._static[None, :, :]
                      + kap[:, None, None] * self._linear[None, :, :]
                      + (kap ** 2)[:, None, None] * self._curv[None, :, :])
            lam, vec = np.linalg.eigh(hstack)
            phases = np.exp(phase_factor * lam)
            steps = np.einsum("mij,mj,mkj->mik", vec, phases, vec.conj())
            w = _chunk_product(steps) @ w
        return w, nsub


def _estimate_norms(family, s_lo: float, s_hi: float, samples: int = 33):
    """Sampled sup of ||H||, ||[H', H]|| and ||H''|| over the span."""
    ss = np.linspace(s_lo, s_hi, samples)
    h_max = 0.0
    comm_max = 0.0
    second_max = 0.0
    has_first = family.derivative_order >= 1
    has_second = family.derivative_order >= 2
    for s in ss:
        h = family.hamiltonian(s)
        h_max = max(h_max, float(np.max(np.abs(np.linalg.eigvalsh(h)))))
        if has_first:
            dh = family.derivative(s, 1)
            comm_max = max(comm_max, operator_norm(dh @ h - h @ dh))
        if has_second:
            second_max = max(second_max, operator_norm(family.derivative(s, 2)))
    return h_max, comm_max, second_max


def evolve(family, epsilon: float, s_targets, step: float | None = None,
           tol: float | None = 1e-7, start: float = 0.0, w0=None,
           max_steps: int = 30_000_000) -> PropagationResult:
    """Solve i eps dW/ds = H(s) W from `start` through the target points.

    The step obeys the local-phase cap ||H|| h / eps <= 1/2.  When `tol` is
    set (the default), runs at h and h/2 are compared and h keeps halving
    until the outputs agree to `tol`; the halved run is returned.  Pass an
    explicit `step` with tol=None for a single uncertified run (used by the
    self-convergence tests).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    targets = np.atleast_1d(np.asarray(s_targets, dtype=float))
    if np.any(np.diff(targets) < 0):
        raise ValueError("s_targets must be nondecreasing")
    if targets.size and targets[0] < start - 1e-15:
        raise ValueError("targets must lie at or after the start point")
    dim = family.dim
    w_init = np.eye(dim, dtype=complex) if w0 is None else np.asarray(w0, complex)

    s_end = float(targets[-1]) if targets.size else start
    span = s_end - start
    h_max, comm, second = _estimate_norms(family, start, max(s_end, start + 1e-12))
    cap = MAX_LOCAL_PHASE * epsilon / max(h_max, 1e-30)

    if step is not None:
        h0 = min(float(step), cap)
    else:
        rate = comm + epsilon * second
        target = tol if tol is not None else 1e-7
        if span > 0 and rate > 0:
            h0 = epsilon * math.sqrt(12.0 * target / (span * rate))
        else:
            h0 = span if span > 0 else 1.0
        h0 = min(h0, cap)
    if span > 0:
        h0 = min(h0, span)

    stepper = _Stepper(family, epsilon)

    def run(h: float):
        budget = span / h + 2 * targets.size
        if budget > max_steps:
            raise ResourceError(
                f"propagation at step {h:.3e} needs ~{budget:.2e} steps, "
                f"budget is {max_steps:.2e}"
            )
        w = w_init.copy()
        out = np.empty((targets.size, dim, dim), dtype=complex)
        s_prev = start
        total = 0
        for i, s_t in enumerate(targets):
            w, nsub = stepper.advance(w, s_prev, float(s_t), h)
            total += nsub
            out[i] = w
            s_prev = float(s_t)
        return out, total

    halvings = 0
    if tol is None:
        mats, total = run(h0)
        err = math.nan
        h_used = h0
    else:
        prev, total_prev = run(h0)
        h_used = h0
        while True:
            h_half = 0.5 * h_used
            cur, total_cur = run(h_half)
            err = max(
                (operator_norm(a - b) for a, b in zip(prev, cur)), default=0.0
            )
            halvings += 1
            if err < tol:
                mats, total = cur, total_cur
                h_used = h_half
                break
            prev, total_prev = cur, total_cur
            h_used = h_half

    return PropagationResult(
        family=family,
        epsilon=epsilon,
        s_values=targets.copy(),
        matrices=mats,
        steps_taken=total,
        step_size=h_used,
        step_cap=cap,
        halvings=halvings,
        error_estimate=err,
        start=start,
    )


def unitarity_defect(result: PropagationResult) -> float:
    """Max over output nodes of ||W^H W - 1||."""
    dim = result.matrices.shape[-1]
    eye = np.eye(dim)
    worst = 0.0
    for w in result.matrices:
        worst = max(worst, operator_norm(w.conj().T @ w - eye))
    return worst
