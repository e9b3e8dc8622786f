"""Interband transition amplitudes, their integral bounds, resolvent
derivative growth in the frequency ratio, and scaling sweeps.

The amplitude gamma_n(eps, s, a) = ||(1 - P_n(s)) W(s) P_n(0)|| is computed
in the rescaled frame; its value at lab-frame parameters (eps, omega, t) is
the same number evaluated at a = omega/eps, s = eps*t, because the frame
change is a unitary conjugation and the operator norm is unitarily
invariant.  No separate lab-frame computation exists (or is needed).
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cheb import CollocationGrid
from .config import RunConfig
from .errors import ConfigurationError, SuperblochError
from .expansion import SGrid, build_expansion, truncated_sum
from .linalg import (
    Contour,
    enclosing_contour,
    operator_norm,
)
from .model import (
    band_interval,
    driven_fiber_family,
    gap_certificate,
    uniform_k_grid,
)
from .projector import DeformedBandProjector, deformed_projector
from .propagate import PropagationResult, evolve

__all__ = [
    "ScalingFit",
    "PolynomialFit",
    "loglog_fit",
    "polynomial_fit",
    "interband_amplitude",
    "gamma_profile",
    "defect_integrand",
    "duhamel_bound",
    "gamma_lab_frame",
    "GrowthReport",
    "resolvent_derivative_growth",
    "SweepRow",
    "TransitionReport",
    "scaling_sweep",
]


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

@dataclass
class ScalingFit:
    """Least-squares power law y ~ C x^slope on log-log data."""

    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    residual: float


def loglog_fit(x, y) -> ScalingFit:
    """Fit log y = slope log x + intercept; residual is rms in log space."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("scaling fits need at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    coef, res = np.polynomial.polynomial.polyfit(lx, ly, 1, full=True)
    fitted = np.polynomial.polynomial.polyval(lx, coef)
    rms = float(np.sqrt(np.mean((ly - fitted) ** 2)))
    return ScalingFit(x, y, float(coef[1]), float(coef[0]), rms)


@dataclass
class PolynomialFit:
    """Least-squares polynomial with a relative l2 residual."""

    x: np.ndarray
    y: np.ndarray
    degree: int
    coefficients: np.ndarray
    rel_residual: float


def polynomial_fit(x, y, degree: int) -> PolynomialFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < degree + 2:
        raise ValueError("need at least degree + 2 points")
    coef = np.polynomial.polynomial.polyfit(x, y, degree)
    fitted = np.polynomial.polynomial.polyval(x, coef)
    denom = float(np.linalg.norm(y))
    rel = float(np.linalg.norm(y - fitted) / denom) if denom > 0 else 0.0
    return PolynomialFit(x, y, degree, coef, rel)


# ---------------------------------------------------------------------------
# Amplitudes and bounds
# ---------------------------------------------------------------------------

def _check_pairing(proj: DeformedBandProjector, prop: PropagationResult):
    if prop.family is not proj.expansion.family:
        raise ConfigurationError("projector and propagation use different fibers")
    if abs(prop.epsilon - proj.epsilon) > 0:
        raise ConfigurationError("projector and propagation epsilon differ")


def interband_amplitude(proj: DeformedBandProjector,
                        prop: PropagationResult, s: float) -> float:
    """gamma = ||(1 - P(s)) W(s) P(0)|| at an output node of the propagation."""
    _check_pairing(proj, prop)
    w = prop.at(s)
    node = int(np.argmin(np.abs(proj.grid.nodes - s)))
    if abs(proj.grid.nodes[node] - s) < 1e-12 * max(1.0, abs(s)):
        p_s = proj.samples[node]
    else:
        p_s = proj.evaluate(s)
    p_0 = proj.samples[0]
    eye = np.eye(p_s.shape[0])
    return _normalize_gamma(operator_norm((eye - p_s) @ w @ p_0))


def gamma_profile(proj: DeformedBandProjector,
                  prop: PropagationResult) -> np.ndarray:
    """gamma at every output node of the propagation."""
    _check_pairing(proj, prop)
    return np.array([interband_amplitude(proj, prop, s)
                     for s in prop.s_values])


def _normalize_gamma(value: float) -> float:
    # a norm of a product of contractions; allow only round-off above 1
    if value > 1.0 + 1e-6:
        raise SuperblochError(f"amplitude {value} exceeds 1 beyond round-off")
    return min(max(value, 0.0), 1.0)


def defect_integrand(proj: DeformedBandProjector) -> np.ndarray:
    """||i eps P' - [H, P]|| at every grid node."""
    exp = proj.expansion
    eps = proj.epsilon
    deriv = proj.grid.derivative(proj.samples)
    out = np.empty(proj.grid.count)
    for i in range(proj.grid.count):
        h = exp.hamiltonians[i]
        p = proj.samples[i]
        out[i] = operator_norm(1j * eps * deriv[i] - (h @ p - p @ h))
    return out


def duhamel_bound(proj: DeformedBandProjector, s=None):
    """(1/eps) integral_0^s of the invariance defect norm.

    Evaluated by Clenshaw-Curtis quadrature of the gridded integrand; the
    amplitude obeys gamma(s) <= bound(s) up to the grid's convergence
    tolerance, and the bound is monotone in s by construction.
    """
    integrand = defect_integrand(proj)
    cumulative = proj.grid.cumulative_integral(integrand)
    ss = proj.grid.nodes if s is None else s
    return np.maximum(cumulative(ss), 0.0) / proj.epsilon


def gamma_lab_frame(potential, truncation, quasimomentum, drive, contour,
                    margin: float, order: int, epsilon: float, omega: float,
                    t: float, s_count: int = 33, s_max: float | None = None,
                    w_tol: float = 1e-7) -> float:
    """Amplitude at lab-frame parameters (eps, omega, t).

    No separate lab-frame dynamics is solved: the frame change is a unitary
    conjugation, so the lab amplitude equals the rescaled-frame amplitude at
    a = omega/eps, s = eps t exactly.  This helper performs that
    substitution and runs the rescaled pipeline.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    a = omega / epsilon
    s = epsilon * t
    if t == 0.0:
        return 0.0
    family = driven_fiber_family(potential, truncation, quasimomentum,
                                 drive, a, derivative_order=1)
    grid = SGrid(s_max if s_max is not None else s, s_count)
    exp = build_expansion(family, contour, grid, order, margin)
    tn = truncated_sum(exp, epsilon, order)
    proj = deformed_projector(tn)
    prop = evolve(family, epsilon, [s], tol=w_tol)
    return interband_amplitude(proj, prop, s)


# ---------------------------------------------------------------------------
# Resolvent derivative growth in the frequency ratio
# ---------------------------------------------------------------------------

@dataclass
class GrowthReport:
    """sup_{s, z in Gamma} norms of d^n/ds^n resolvents, fitted in a.

    The values come from the closed-form route (chain rule through the
    quasimomentum shift), which involves no numerical differentiation; the
    spectral-differentiation route is compared against it matrixwise and
    must agree within `route_disagreement <= tolerance`.
    """

    orders: tuple
    a_values: np.ndarray
    sup_norms: dict            # order -> array over a_values
    fits: dict                 # order -> PolynomialFit (degree order-1)
    route_disagreement: float


def _kappa_resolvent_derivatives(family, kappa: float, z: complex, max_order: int):
    """d^j/dkappa^j of (h(kappa) - z)^{-1} for j = 0..max_order."""
    h = family.fiber_matrix(kappa)
    dim = h.shape[0]
    r = np.linalg.solve(h - z * np.eye(dim), np.eye(dim, dtype=complex))
    hp = family.velocity(kappa)
    _, _, curv = family.quadratic_parts()
    out = [r]
    if max_order >= 1:
        out.append(-r @ hp @ r)
    if max_order >= 2:
        rhp = r @ hp
        out.append(2.0 * rhp @ rhp @ r - 2.0 * r @ curv @ r)
    if max_order >= 3:
        rhp = r @ hp
        rcr = r @ curv @ r
        out.append(-6.0 * rhp @ rhp @ rhp @ r
                   + 6.0 * rcr @ hp @ r + 6.0 * rhp @ rcr)
    return out


def _explicit_s_derivatives(family, s: float, z: complex, max_order: int):
    """Closed-form d^n/ds^n of the driven resolvent via the chain rule.

    With kappa(s) = k + G(s, a): the first derivative carries F(as), the
    second a F'(as) and F^2, the third a^2 F''(as), 3 a F' F and F^3; each
    multiplies the corresponding kappa-derivative of the fiber resolvent,
    so the n-th derivative is a polynomial of degree n-1 in a.
    """
    kap = float(family.kappa(s))
    d = _kappa_resolvent_derivatives(family, kap, z, max_order)
    k1 = float(family.kappa_derivative(s, 1))
    out = {}
    if max_order >= 1:
        out[1] = k1 * d[1]
    if max_order >= 2:
        k2 = float(family.kappa_derivative(s, 2))
        out[2] = k2 * d[1] + k1 ** 2 * d[2]
    if max_order >= 3:
        k2 = float(family.kappa_derivative(s, 2))
        k3 = float(family.kappa_derivative(s, 3))
        out[3] = k3 * d[1] + 3.0 * k1 * k2 * d[2] + k1 ** 3 * d[3]
    return out


def _route_check(potential, truncation, k_values, drive, a_values, z_nodes,
                 max_order: int, s_max: float, s_count: int) -> float:
    """Worst matrix disagreement between spectral and closed-form derivatives.

    Kept on a moderate grid: high spectral derivatives amplify round-off
    roughly like the cube of the differentiation-matrix norm, so a compact,
    well-resolved window is where both routes are trustworthy.
    """
    grid = CollocationGrid(s_max, s_count)
    worst = 0.0
    for a in a_values:
        for k in k_values:
            family = driven_fiber_family(potential, truncation, float(k),
                                         drive, float(a),
                                         derivative_order=max_order)
            lams, vecs = [], []
            for s in grid.nodes:
                lam, vec = np.linalg.eigh(family.hamiltonian(s))
                lams.append(lam)
                vecs.append(vec)
            for z in z_nodes:
                samples = np.empty((grid.count, family.dim, family.dim),
                                   dtype=complex)
                for i in range(grid.count):
                    samples[i] = (vecs[i] / (lams[i] - z)) @ vecs[i].conj().T
                deriv = samples
                for n in range(1, max_order + 1):
                    deriv = grid.derivative(deriv, 1)
                    for i, s in enumerate(grid.nodes):
                        closed = _explicit_s_derivatives(family, float(s), z,
                                                         max_order)[n]
                        worst = max(worst, operator_norm(deriv[i] - closed))
    return worst


def resolvent_derivative_growth(potential, truncation, k_values, drive,
                                a_values, contour: Contour,
                                max_order: int = 3,
                                window=None, sample_count: int = 192,
                                z_count: int = 24,
                                route_check: bool = True,
                                route_tolerance: float = 1e-6,
                                route_k=None) -> GrowthReport:
    """Growth of sup_{s, z, fiber} ||d^n R/ds^n|| in the frequency ratio a.

    The supremum values come from the closed-form chain-rule route sampled
    densely over the window (no numerical differentiation, so any sampling
    density is safe); `window(a)` returns the s-interval length per ratio,
    defaulting to one drive period 2 pi / a so the supremum over all s is
    computed exactly for periodic drives.  The full-space operator norm is
    the supremum of the fiber norms, hence the supremum over `k_values`.

    With `route_check`, spectral differentiation of resolvent samples must
    reproduce the closed forms to `route_tolerance` on a compact window.
    """
    if max_order < 1 or max_order > 3:
        raise ValueError("max_order must be 1, 2, or 3")
    if drive.max_derivative_order < max_order - 1:
        raise ValueError("drive does not support the required derivatives")
    a_values = np.asarray(sorted(float(a) for a in a_values))
    k_values = np.atleast_1d(np.asarray(k_values, dtype=float))
    orders = tuple(range(1, max_order + 1))
    if window is None:
        window = lambda a: 2.0 * np.pi / a if a > 0 else 1.0
    z_nodes = contour.points(z_count)
    sup_norms = {n: np.zeros(a_values.size) for n in orders}
    for ia, a in enumerate(a_values):
        ss = np.linspace(0.0, window(a), sample_count, endpoint=False)
        for k in k_values:
            family = driven_fiber_family(potential, truncation, float(k),
                                         drive, a, derivative_order=max_order)
            for s in ss:
                for z in z_nodes:
                    ders = _explicit_s_derivatives(family, float(s), z,
                                                   max_order)
                    for n in orders:
                        sup_norms[n][ia] = max(sup_norms[n][ia],
                                               operator_norm(ders[n]))
    disagreement = 0.0
    if route_check:
        check_k = (k_values[:1] if route_k is None
                   else np.atleast_1d(np.asarray(route_k, dtype=float)))
        disagreement = _route_check(potential, truncation, check_k, drive,
                                    a_values, contour.points(8), max_order,
                                    s_max=1.0, s_count=49)
        if disagreement > route_tolerance:
            raise SuperblochError(
                f"resolvent derivative routes disagree by {disagreement:.3e} "
                f"(tolerance {route_tolerance:.1e})"
            )
    fits = {n: polynomial_fit(a_values, sup_norms[n], max(n - 1, 0))
            for n in orders}
    return GrowthReport(orders, a_values, sup_norms, fits, disagreement)


# ---------------------------------------------------------------------------
# Scaling sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    n: int
    epsilon: float
    a: float
    omega: float
    t_phys: float
    s: float
    k: float
    gamma: float | None
    bound: float | None
    error: str = ""

    @property
    def staying_prob_lb(self) -> float | None:
        if self.gamma is None:
            return None
        return 1.0 - self.gamma ** 2


@dataclass
class TransitionReport:
    """Everything a sweep produced: rows, sup aggregates, and fits."""

    config_hash: str
    mode: str
    model: dict
    rows: list = field(default_factory=list)
    sup_gamma: dict = field(default_factory=dict)    # (n, eps, a) -> float
    sup_bound: dict = field(default_factory=dict)
    epsilon_fits: list = field(default_factory=list)  # (n, a, ScalingFit) on gamma
    bound_fits: list = field(default_factory=list)    # (n, a, ScalingFit) on bound
    a_fits: list = field(default_factory=list)        # (n, eps, PolynomialFit)
    failed_rows: int = 0

    @property
    def total_rows(self) -> int:
        return len(self.rows)

    def ok_fraction(self) -> float:
        if not self.rows:
            return 1.0
        return 1.0 - self.failed_rows / len(self.rows)


def _eval_point(config: RunConfig, epsilon: float) -> float:
    if config.mode == "fixed-t":
        return epsilon * config.t_value
    return float(config.s_eval if config.s_eval is not None else config.s_max)


def _sweep_job(payload) -> list:
    """All rows for one (k, a) pair; runs in a worker process."""
    (config, k, a, contour, margin) = payload
    potential = config.make_potential()
    truncation = config.make_truncation()
    drive = config.make_drive()
    rows = []
    base = dict(a=a, k=k)
    try:
        family = driven_fiber_family(potential, truncation, k, drive, a,
                                     derivative_order=min(
                                         config.n_max + 1,
                                         drive.max_derivative_order + 1))
        grid = SGrid(config.s_max, config.s_count)
        exp = build_expansion(family, contour, grid, config.n_max, margin)
    except SuperblochError as exc:
        for eps in config.epsilons:
            s_star = _eval_point(config, eps)
            for n in range(config.n_max + 1):
                rows.append(_error_row(config, n, eps, s_star, str(exc), **base))
        return rows
    for eps in config.epsilons:
        s_star = _eval_point(config, eps)
        try:
            prop = evolve(family, eps, [s_star], tol=config.w_tol)
        except SuperblochError as exc:
            for n in range(config.n_max + 1):
                rows.append(_error_row(config, n, eps, s_star, str(exc), **base))
            continue
        for n in range(config.n_max + 1):
            try:
                tn = truncated_sum(exp, eps, n)
                proj = deformed_projector(tn, circle_nodes=config.circle_nodes)
                gamma = interband_amplitude(proj, prop, s_star)
                bound = float(duhamel_bound(proj, s_star))
                rows.append(SweepRow(
                    n=n, epsilon=eps, a=a, omega=a * eps,
                    t_phys=s_star / eps, s=s_star, k=k,
                    gamma=gamma, bound=bound))
            except SuperblochError as exc:
                rows.append(_error_row(config, n, eps, s_star, str(exc), **base))
    return rows


def _error_row(config, n, eps, s_star, message, a, k) -> SweepRow:
    return SweepRow(n=n, epsilon=eps, a=a, omega=a * eps,
                    t_phys=s_star / eps, s=s_star, k=k,
                    gamma=None, bound=None, error=message)


def scaling_sweep(config: RunConfig, workers: int | None = None) -> TransitionReport:
    """Sweep epsilon and the frequency ratio, reduce over the k grid, fit.

    Jobs are one (k, a) pair each and are pure, so the output is
    deterministic for a fixed config no matter how many workers run them.
    Failed parameter points are recorded in their rows and the sweep
    completes the rest.
    """
    workers = config.workers if workers is None else workers
    potential = config.make_potential()
    truncation = config.make_truncation()
    window = config.make_window()
    k_grid = uniform_k_grid(potential, config.k_points)
    gap = gap_certificate(potential, window, k_grid, truncation,
                          min_gap=config.gap_min)
    interval = band_interval(potential, truncation, window, k_grid)
    contour = enclosing_contour(interval, gap, config.contour_nodes)
    margin = 0.5 * gap * (1.0 - 1e-9)
    payloads = [(config, float(k), float(a), contour, margin)
                for a in config.a_values for k in k_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, payloads))
    else:
        results = [_sweep_job(p) for p in payloads]
    rows = [row for chunk in results for row in chunk]
    rows.sort(key=lambda r: (r.n, r.epsilon, r.a, r.k))
    report = TransitionReport(
        config_hash=config.hash, mode=config.mode,
        model=config.to_dict()["model"], rows=rows,
        failed_rows=sum(1 for r in rows if r.error),
    )
    _aggregate(report, config)
    return report


def _aggregate(report: TransitionReport, config: RunConfig):
    for row in report.rows:
        if row.error:
            continue
        key = (row.n, row.epsilon, row.a)
        report.sup_gamma[key] = max(report.sup_gamma.get(key, 0.0), row.gamma)
        report.sup_bound[key] = max(report.sup_bound.get(key, 0.0), row.bound)
    # slope in epsilon at fixed (n, a)
    for n in range(config.n_max + 1):
        for a in config.a_values:
            eps = [e for e in config.epsilons
                   if (n, e, a) in report.sup_gamma]
            gam = [report.sup_gamma[(n, e, a)] for e in eps]
            bnd = [report.sup_bound[(n, e, a)] for e in eps]
            if len(eps) >= 4 and min(gam) > 0:
                report.epsilon_fits.append((n, a, loglog_fit(eps, gam)))
            if len(eps) >= 4 and min(bnd) > 0:
                report.bound_fits.append((n, a, loglog_fit(eps, bnd)))
    # growth in a at fixed (n, eps): degree-n polynomial
    for n in range(config.n_max + 1):
        for e in config.epsilons:
            avals = [a for a in config.a_values
                     if (n, e, a) in report.sup_gamma]
            if len(avals) >= n + 2:
                gam = [report.sup_gamma[(n, e, a)] for a in avals]
                report.a_fits.append((n, e, polynomial_fit(avals, gam, n)))


# ---------------------------------------------------------------------------
# CSV emission (deterministic, header carries schema version + config hash)
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_rows_csv(report: TransitionReport, path, schema: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(f"# config: sha256:{report.config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "epsilon", "a", "omega", "t_phys", "s", "k",
                         "gamma", "lemma1_bound", "staying_prob_lb", "error"])
        for r in report.rows:
            writer.writerow([
                r.n, _fmt(r.epsilon), _fmt(r.a), _fmt(r.omega),
                _fmt(r.t_phys), _fmt(r.s), _fmt(r.k), _fmt(r.gamma),
                _fmt(r.bound), _fmt(r.staying_prob_lb), r.error,
            ])


def write_fits_csv(report: TransitionReport, path, schema: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(f"# config: sha256:{report.config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "a", "slope", "intercept", "residual"])
        for n, a, fit in report.epsilon_fits:
            writer.writerow([n, _fmt(a), _fmt(fit.slope), _fmt(fit.intercept),
                             _fmt(fit.residual)])
