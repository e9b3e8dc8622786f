import numpy as np
import pytest

import superbloch as sb
from superbloch.expansion import SGrid, build_expansion


@pytest.fixture(scope="session")
def mathieu():
    """Reference model pieces shared across the suite."""
    potential = sb.PeriodicPotential.cosine(0.3)
    truncation = sb.PlaneWaveTruncation(12)
    window = sb.SpectralWindow((0,), 1e-6)
    k_grid = sb.uniform_k_grid(potential, 32)
    gap = sb.gap_certificate(potential, window, k_grid, truncation)
    interval = sb.band_interval(potential, truncation, window, k_grid)
    contour = sb.enclosing_contour(interval, gap, 40)
    return {
        "potential": potential,
        "truncation": truncation,
        "window": window,
        "k_grid": k_grid,
        "gap": gap,
        "interval": interval,
        "contour": contour,
        "margin": 0.5 * gap * (1.0 - 1e-9),
    }


@pytest.fixture(scope="session")
def driven_expansion(mathieu):
    """Cosine-driven expansion to order 3 on the reference fiber k = 0.17."""
    family = sb.driven_fiber_family(
        mathieu["potential"], mathieu["truncation"], 0.17,
        sb.CosineDrive(1.0), 1.0, derivative_order=4)
    grid = SGrid(1.0, 33)
    exp = build_expansion(family, mathieu["contour"], grid, 3,
                          mathieu["margin"])
    return exp


@pytest.fixture(scope="session")
def constant_family(mathieu):
    """Zero-field limit: constant drive with value 0 freezes the family."""
    return sb.driven_fiber_family(
        mathieu["potential"], mathieu["truncation"], 0.17,
        sb.ConstantDrive(0.0), 0.0, derivative_order=4)


def random_hermitian(rng, dim, scale=1.0):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (m + m.conj().T)


def hermitian_with_spectrum(rng, eigenvalues):
    dim = len(eigenvalues)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(m)
    return (q * np.asarray(eigenvalues)) @ q.conj().T
