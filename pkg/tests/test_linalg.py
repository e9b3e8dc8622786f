import numpy as np
import pytest

from superbloch.errors import (
    GapViolationError,
    HermiticityError,
    NotPositiveDefiniteError,
    SingularResolventError,
)
from superbloch.linalg import (
    Contour,
    as_hermitian,
    contour_nodes,
    enclosing_contour,
    inv_sqrt_spd,
    min_spectral_distance,
    operator_norm,
    resolvent,
    resolvent_pair_filter,
    riesz_filter,
    riesz_projector,
)

from conftest import hermitian_with_spectrum, random_hermitian


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(5)) == pytest.approx(1.0)

    def test_zero(self):
        assert operator_norm(np.zeros((3, 3))) == 0.0

    def test_diagonal_complex(self):
        assert operator_norm(np.diag([3.0, -4.0j])) == pytest.approx(4.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            operator_norm(np.array([[np.nan, 0], [0, 1]]))

    def test_submultiplicative(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = random_hermitian(rng, 6)
            b = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            assert operator_norm(a @ b) <= (
                operator_norm(a) * operator_norm(b) + 1e-12)


class TestHermitianValidation:
    def test_accepts_hermitian(self):
        rng = np.random.default_rng(0)
        m = random_hermitian(rng, 8)
        assert np.allclose(as_hermitian(m), m)

    def test_rejects_asymmetric(self):
        m = np.array([[1.0, 1e-6], [0.0, 1.0]])
        with pytest.raises(HermiticityError):
            as_hermitian(m)


class TestContourNodes:
    def test_unit_circle_four_nodes(self):
        # nodes 1, i, -1, -i with weights (pi/2) i z
        c = Contour.circle(0.0, 1.0, 8)
        z, w = contour_nodes(c, 8)
        assert np.allclose(z[::2], [1, 1j, -1, -1j])
        z4, w4 = z[::2], w[::2] * 2  # same rule at N = 4
        assert np.allclose(w4, (np.pi / 2) * 1j * z4)

    def test_residue_theorem(self):
        c = Contour.circle(0.0, 1.0, 16)
        z, w = contour_nodes(c)
        assert abs(np.sum(w / z) - 2j * np.pi) < 1e-12

    def test_analytic_integrand_vanishes(self):
        c = Contour.circle(0.0, 1.0, 16)
        z, w = contour_nodes(c)
        assert abs(np.sum(w / (z - 5.0))) < 1e-10

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            Contour.circle(0.0, 1.0, 7)
        with pytest.raises(ValueError):
            Contour.circle(0.0, 1.0, 4)

    def test_ellipse_weights_close_curve(self):
        # eccentric ellipses converge like exp(-N atanh(ry/rx)): use N = 128
        c = Contour.ellipse(1.0, 2.0, 0.5, 128)
        z, w = contour_nodes(c)
        # integral of 1 over a closed curve vanishes, of 1/(z-c) is 2 pi i
        assert abs(np.sum(w)) < 1e-12
        assert abs(np.sum(w / (z - 1.0)) - 2j * np.pi) < 1e-10


class TestRieszProjector:
    def test_diagonal_trivial(self):
        p = riesz_projector(np.diag([0.0, 5.0]), Contour.circle(0.0, 1.0, 16))
        assert np.allclose(p, np.diag([1.0, 0.0]), atol=1e-12)

    def test_all_ones_matrix(self):
        # eigenvalues 0 and 2; enclosing 2 picks the symmetric eigenvector
        h = np.ones((2, 2), dtype=complex)
        eigs, vecs = np.linalg.eigh(h)
        expected = np.outer(vecs[:, 1], vecs[:, 1].conj())
        p = riesz_projector(h, Contour.circle(2.0, 1.0, 16))
        assert operator_norm(p - expected) < 1e-12
        assert np.allclose(p, 0.5 * np.ones((2, 2)), atol=1e-12)

    def test_node_doubling_self_convergence(self):
        # well-gapped: enclosed cluster tight around the center, rest far out
        rng = np.random.default_rng(3)
        h = hermitian_with_spectrum(
            rng, [-1.62, -1.5, -1.44, 4.5, 5.0, 6.0, 7.0, 8.0])
        p16 = riesz_projector(h, Contour.circle(-1.5, 1.0, 16), adaptive=False)
        p32 = riesz_projector(h, Contour.circle(-1.5, 1.0, 32), adaptive=False)
        assert operator_norm(p32 - p16) < 1e-12

    def test_projector_invariants(self):
        rng = np.random.default_rng(11)
        for trial in range(5):
            eigs = np.sort(rng.normal(size=9))
            eigs[3:] += 3.0  # open a gap after the third eigenvalue
            h = hermitian_with_spectrum(rng, eigs)
            mid = 0.5 * (eigs[2] + eigs[3])
            radius = mid - eigs[0] + 0.3
            p = riesz_projector(h, Contour.circle(eigs[0] - 0.1, radius, 32))
            assert operator_norm(p @ p - p) < 1e-10
            assert operator_norm(p - p.conj().T) < 1e-10
            assert abs(np.trace(p).real - 3.0) < 1e-8

    def test_geometric_quadrature_decay(self):
        rng = np.random.default_rng(5)
        h = hermitian_with_spectrum(rng, [-1.0, -0.8, 1.0, 1.3, 2.0])
        exact = riesz_projector(h, Contour.circle(-0.9, 0.9, 256), adaptive=False)
        errors = []
        for n in (16, 32, 64):
            p = riesz_projector(h, Contour.circle(-0.9, 0.9, n), adaptive=False)
            errors.append(operator_norm(p - exact))
        assert errors[1] <= 0.5 * errors[0] + 1e-15
        assert errors[2] <= 0.5 * errors[1] + 1e-15

    def test_gap_violation(self):
        with pytest.raises(GapViolationError):
            riesz_projector(np.diag([0.0, 1.0]), Contour.circle(0.0, 1.0, 16))

    def test_margin_enforced(self):
        with pytest.raises(GapViolationError):
            riesz_projector(np.diag([0.0, 5.0]), Contour.circle(0.0, 1.0, 16),
                            margin=2.0)


class TestResolvent:
    def test_scalar(self):
        assert np.allclose(resolvent(np.diag([1.0]), 0.0), [[1.0]])

    def test_diagonal(self):
        r = resolvent(np.diag([2.0, -2.0]), 1j)
        assert np.allclose(r, np.diag([1.0 / (2 - 1j), 1.0 / (-2 - 1j)]))

    def test_residual(self):
        rng = np.random.default_rng(13)
        h = random_hermitian(rng, 16)
        z = float(np.max(np.linalg.eigvalsh(h))) + 1.0
        r = resolvent(h, z)
        eye = np.eye(16)
        assert operator_norm((h - z * eye) @ r - eye) < 1e-10

    def test_singularity_error(self):
        with pytest.raises(SingularResolventError):
            resolvent(np.diag([1.0, 2.0]), 1.0 + 1e-14)


class TestInvSqrt:
    def test_identity(self):
        assert np.allclose(inv_sqrt_spd(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        assert np.allclose(inv_sqrt_spd(np.diag([4.0, 9.0])),
                           np.diag([0.5, 1.0 / 3.0]))

    def test_against_eigendecomposition(self):
        rng = np.random.default_rng(17)
        m = random_hermitian(rng, 8)
        spd = m @ m.conj().T + 0.5 * np.eye(8)
        root = inv_sqrt_spd(spd)
        eigs, vecs = np.linalg.eigh(spd)
        expected = (vecs * eigs ** -0.5) @ vecs.conj().T
        assert operator_norm(root - expected) < 1e-9
        assert operator_norm(root @ root @ spd - np.eye(8)) < 1e-8

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            inv_sqrt_spd(np.diag([1.0, 1e-12]))


class TestEigenbasisFilters:
    def test_riesz_filter_selects_enclosed(self):
        c = Contour.circle(0.0, 1.0, 64)
        z, w = contour_nodes(c)
        filt = riesz_filter(np.array([0.2, 3.0]), z, w)
        assert abs(filt[0] - 1.0) < 1e-12
        assert abs(filt[1]) < 1e-12

    def test_pair_filter_residues(self):
        # exact value 1/(lam_out - lam_in) when exactly one is enclosed
        c = Contour.circle(0.0, 1.0, 64)
        z, w = contour_nodes(c)
        lam = np.array([0.3, 2.0])
        k = resolvent_pair_filter(lam, z, w)
        assert abs(k[0, 0]) < 1e-12  # both... only lam[0] inside, pair (0,0) has a double pole
        assert abs(k[0, 1] - 1.0 / (2.0 - 0.3)) < 1e-12
        assert abs(k[1, 0] - 1.0 / (2.0 - 0.3)) < 1e-12
        assert abs(k[1, 1]) < 1e-12

    def test_pair_filter_double_pole(self):
        # equal enclosed eigenvalues: oint dz/(lam-z)^2 = 0
        c = Contour.circle(0.0, 1.0, 32)
        z, w = contour_nodes(c)
        k = resolvent_pair_filter(np.array([0.1, 0.1]), z, w)
        assert np.max(np.abs(k)) < 1e-12


class TestEnclosingContour:
    def test_margin_to_interior_and_exterior(self):
        lo, hi, gap = -0.3, 0.4, 0.5
        c = enclosing_contour((lo, hi), gap)
        # interior band points and the nearest outside spectrum keep gap/2
        for x in np.linspace(lo, hi, 9):
            assert min_spectral_distance([x], c) >= 0.5 * gap - 1e-9
        assert min_spectral_distance([hi + gap], c) >= 0.5 * gap - 1e-9
        assert min_spectral_distance([lo - gap], c) >= 0.5 * gap - 1e-9
