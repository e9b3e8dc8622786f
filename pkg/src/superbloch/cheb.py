"""Chebyshev-Gauss-Lobatto collocation on an interval [0, s_max].

Nodes, spectral differentiation matrices, barycentric evaluation of the
interpolant at arbitrary points, and spectrally accurate cumulative
integrals.  All routines act entrywise on trailing axes, so matrix-valued
samples of shape (n_nodes, d, d) work throughout.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.fft import dct

__all__ = ["lobatto_points", "differentiation_matrix", "CollocationGrid"]


def lobatto_points(count: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points cos(j pi / (count-1)), j = 0..count-1.

    Returned in the standard (descending) order; mapping s = (1 - x)/2 * s_max
    turns them into an ascending grid on [0, s_max] with both endpoints.
    """
    if count < 2:
        raise ValueError("need at least 2 points")
    n = count - 1
    return np.cos(np.pi * np.arange(count) / n)


def differentiation_matrix(count: int) -> np.ndarray:
    """First-order spectral differentiation matrix on the Lobatto points.

    (D f)_j approximates f'(x_j); exact for polynomials of degree < count.
    Diagonal entries use the negative-sum trick for stability.
    """
    x = lobatto_points(count)
    n = count - 1
    c = np.ones(count)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(count)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(count))
    d -= np.diag(d.sum(axis=1))
    return d


class CollocationGrid:
    """Ascending Lobatto grid on [0, s_max] with differentiation and integrals."""

    def __init__(self, s_max: float, count: int):
        if s_max <= 0:
            raise ValueError("s_max must be positive")
        if count < 2:
            raise ValueError("count must be at least 2")
        self.s_max = float(s_max)
        self.count = int(count)
        self._x = lobatto_points(self.count)          # descending on [-1, 1]
        self.nodes = 0.5 * self.s_max * (1.0 - self._x)  # ascending on [0, s_max]
        self.nodes[0] = 0.0
        self.nodes[-1] = self.s_max
        self._d1 = None
        self._d2 = None

    def diff_matrix(self, order: int = 1) -> np.ndarray:
        if order == 1:
            if self._d1 is None:
                # d/ds = (dx/ds) d/dx = -(2/s_max) d/dx
                self._d1 = (-2.0 / self.s_max) * differentiation_matrix(self.count)
            return self._d1
        if order == 2:
            if self._d2 is None:
                d1 = self.diff_matrix(1)
                self._d2 = d1 @ d1
            return self._d2
        raise ValueError("only derivative orders 1 and 2 are supported")

    def derivative(self, samples, order: int = 1) -> np.ndarray:
        """Spectral derivative of samples given at the grid nodes (axis 0)."""
        samples = np.asarray(samples)
        if samples.shape[0] != self.count:
            raise ValueError("samples do not match the grid")
        return np.tensordot(self.diff_matrix(order), samples, axes=1)

    def _to_x(self, s):
        return 1.0 - 2.0 * np.asarray(s, dtype=float) / self.s_max

    def interpolation_weights(self, s: float) -> np.ndarray:
        """Barycentric weights mu with p(s) = sum_j mu_j f_j for the interpolant."""
        x = float(self._to_x(s))
        diff = x - self._x
        hit = np.argmin(np.abs(diff))
        if abs(diff[hit]) < 1e-14:
            mu = np.zeros(self.count)
            mu[hit] = 1.0
            return mu
        w = np.ones(self.count)
        w[0] = w[-1] = 0.5
        w *= (-1.0) ** np.arange(self.count)
        terms = w / diff
        return terms / terms.sum()

    def evaluate(self, samples, s: float):
        """Evaluate the interpolant of the samples at an arbitrary point s."""
        samples = np.asarray(samples)
        mu = self.interpolation_weights(s)
        return np.tensordot(mu, samples, axes=1)

    def chebyshev_coefficients(self, samples) -> np.ndarray:
        """Coefficients a_m of the interpolant sum_m a_m T_m(x(s)), axis 0."""
        samples = np.asarray(samples)
        if samples.shape[0] != self.count:
            raise ValueError("samples do not match the grid")
        if np.iscomplexobj(samples):
            coef = (dct(samples.real, type=1, axis=0)
                    + 1j * dct(samples.imag, type=1, axis=0))
        else:
            coef = dct(samples, type=1, axis=0)
        coef = coef / (self.count - 1)
        coef[0] /= 2.0
        coef[-1] /= 2.0
        return coef

    def cumulative_integral(self, samples) -> "CumulativeIntegral":
        """Spectrally accurate s -> integral from 0 to s of the interpolant."""
        coef = self.chebyshev_coefficients(np.asarray(samples, dtype=float))
        anti = npcheb.chebint(coef, lbnd=-1)
        at_one = npcheb.chebval(1.0, anti)
        return CumulativeIntegral(self, anti, at_one)


class CumulativeIntegral:
    """Evaluates integral from 0 to s of a gridded integrand; see CollocationGrid."""

    def __init__(self, grid, anti_coef, at_one):
        self._grid = grid
        self._anti = anti_coef
        self._at_one = at_one

    def __call__(self, s):
        # s ascending maps to x descending: int_0^s f ds' = (s_max/2) int_x^1 g dx
        x = self._grid._to_x(s)
        return 0.5 * self._grid.s_max * (self._at_one - npcheb.chebval(x, self._anti))

    @property
    def node_values(self) -> np.ndarray:
        return self(self._grid.nodes)
