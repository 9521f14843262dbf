"""Per-class location/dispersion estimators.

Four estimators live here: Gaussian moments, the coupled FEMDA fixed point
(weights inversely proportional to the squared Mahalanobis distance),
Student t maximum likelihood by ECME, and a fixed-dof Student M-estimator
used as the robust plug-in for RGQDA.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln
from scipy.stats import chi2

from .errors import DimensionMismatch, NotPositiveDefinite, NumericalBreakdown, TooFewPoints
from .linalg import SPDMatrix, mahalanobis_sq, symmetrize

logger = logging.getLogger(__name__)

RIDGE_DELTA = 1e-8
# relative floor on squared distances before they are inverted into weights
CLAMP_REL = 1e-12
NU_BOUNDS = (0.1, 1e6)

FEMDA_TOL = 1e-6
FEMDA_MAX_ITER = 200
STUDENT_TOL = 1e-6
STUDENT_MAX_ITER = 500


@dataclass(frozen=True)
class ClusterParams:
    """Location and dispersion of one class."""

    mean: np.ndarray
    dispersion: SPDMatrix

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        if not isinstance(self.dispersion, SPDMatrix):
            object.__setattr__(self, "dispersion", SPDMatrix(self.dispersion))
        if mean.shape != (self.dispersion.dim,):
            raise DimensionMismatch("mean and dispersion dimensions disagree")

    def mahalanobis_sq(self, x):
        return mahalanobis_sq(x, self.mean, self.dispersion)


@dataclass(frozen=True)
class StudentParams(ClusterParams):
    nu: float = np.inf


@dataclass
class FixedPointDiagnostics:
    iterations: int
    final_delta: float
    converged: bool
    loglik: list = field(default_factory=list)


def _check_points(points, minimum, extra=None):
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("points must be an (n, m) array")
    if extra is not None:
        minimum = x.shape[1] + extra
    if x.shape[0] < minimum:
        raise TooFewPoints(f"{x.shape[0]} points given, at least {minimum} needed")
    if not np.all(np.isfinite(x)):
        raise ValueError("points contain NaN or Inf")
    return x


def regularized_spd(a):
    """Wrap ``a`` as an SPDMatrix, adding a ridge once if it is not PD.

    The ridge is ``1e-8 * trace(a)/m * I`` (``1e-8 * I`` for a zero trace).
    """
    a = symmetrize(a)
    try:
        return SPDMatrix(a)
    except NotPositiveDefinite:
        pass
    m = a.shape[0]
    level = np.trace(a) / m
    if not np.isfinite(level) or level <= 0:
        level = 1.0
    try:
        return SPDMatrix(a + RIDGE_DELTA * level * np.eye(m))
    except NotPositiveDefinite as exc:
        raise NumericalBreakdown("dispersion still singular after ridge") from exc


def unit_det(s):
    """Rescale an SPD matrix to determinant one."""
    s = s if isinstance(s, SPDMatrix) else SPDMatrix(s)
    return SPDMatrix(s.entries * np.exp(-s.log_det() / s.dim))


def estimate_gaussian(points):
    """Sample mean and 1/n sample covariance (ridge on a singular scatter)."""
    x = _check_points(points, 2)
    mean = x.mean(axis=0)
    d = x - mean
    return ClusterParams(mean, regularized_spd(d.T @ d / x.shape[0]))


def _clamp(t):
    floor = CLAMP_REL * max(float(np.mean(t)), np.finfo(float).tiny)
    return np.maximum(t, floor)


def femda_mean_update(points, mean, dispersion):
    w = 1.0 / _clamp(mahalanobis_sq(points, mean, dispersion))
    return w @ points / w.sum()


def femda_scatter_update(points, mean, dispersion):
    """One scatter step ``(m/n) sum_i (x_i - mean)(x_i - mean)^T / t_i``.

    Homogeneous of degree one in ``dispersion``; no normalisation applied.
    """
    n, m = points.shape
    w = 1.0 / _clamp(mahalanobis_sq(points, mean, dispersion))
    d = points - mean
    return symmetrize((m / n) * (d * w[:, None]).T @ d)


def femda_init(points):
    """Coordinatewise median and unit-determinant sample covariance."""
    x = np.asarray(points, dtype=float)
    mean = np.median(x, axis=0)
    d = x - x.mean(axis=0)
    return ClusterParams(mean, unit_det(regularized_spd(d.T @ d / x.shape[0])))


def _relative_changes(mean_old, mean_new, s_old, s_new, t):
    shift = float(mahalanobis_sq(mean_new, mean_old, s_new))
    typical = max(float(np.median(t)), np.finfo(float).tiny)
    d_mean = np.sqrt(shift / typical)
    d_scatter = np.linalg.norm(s_new.entries - s_old.entries) / np.linalg.norm(s_old.entries)
    return max(d_mean, d_scatter)


def femda_fixed_point(points, init=None, tol=FEMDA_TOL, max_iter=FEMDA_MAX_ITER):
    """Coupled fixed point for the FEMDA mean and dispersion.

    Each sweep updates the mean with weights ``1/t_i`` (``t_i`` the squared
    Mahalanobis distance to the current estimate), then the scatter with
    weights recomputed at the new mean, and finally rescales the scatter to
    unit determinant. The scatter is only identified up to a positive
    factor, so the determinant gauge does not affect the decision rule.

    The change measured at each sweep is the larger of the mean shift
    (in Mahalanobis units, relative to the median distance of the points)
    and the relative Frobenius change of the scatter.

    Returns
    -------
    params : ClusterParams
    diagnostics : FixedPointDiagnostics
    """
    x = _check_points(points, 2, extra=1)
    params = init if init is not None else femda_init(x)
    mean, scatter = params.mean, unit_det(params.dispersion)
    delta = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new_mean = femda_mean_update(x, mean, scatter)
        new_scatter = unit_det(regularized_spd(femda_scatter_update(x, new_mean, scatter)))
        t = mahalanobis_sq(x, new_mean, new_scatter)
        delta = _relative_changes(mean, new_mean, scatter, new_scatter, t)
        mean, scatter = new_mean, new_scatter
        if delta < tol:
            break
    converged = bool(delta < tol)
    if not converged:
        logger.info("FEMDA fixed point stopped after %d sweeps (delta=%.3g)", it, delta)
    return ClusterParams(mean, scatter), FixedPointDiagnostics(it, float(delta), converged)


def student_loglik(points, mean, scatter, nu):
    """Observed log-likelihood of a multivariate t sample."""
    n, m = points.shape
    t = mahalanobis_sq(points, mean, scatter)
    return float(_t_loglik_terms(t, m, nu).sum() - 0.5 * n * scatter.log_det())


def _t_loglik_terms(t, m, nu):
    if np.isinf(nu):
        return -0.5 * m * np.log(2 * np.pi) - 0.5 * t
    return (
        gammaln((nu + m) / 2)
        - gammaln(nu / 2)
        - 0.5 * m * np.log(nu * np.pi)
        - 0.5 * (nu + m) * np.log1p(t / nu)
    )


def _nu_score(nu, t, m):
    # derivative of the observed log-likelihood in nu, times 2/n
    u = (nu + m) / (nu + t)
    return (
        -digamma(nu / 2)
        + np.log(nu / 2)
        + 1.0
        + np.mean(np.log(u) - u)
        + digamma((nu + m) / 2)
        - np.log((nu + m) / 2)
    )


def solve_nu(t, m, bounds=NU_BOUNDS, iters=100):
    """Root of the degrees-of-freedom stationarity equation by bisection.

    Works on ``log(nu)``; returns a bound when the score keeps one sign over
    the whole bracket.
    """
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    f_lo, f_hi = _nu_score(bounds[0], t, m), _nu_score(bounds[1], t, m)
    if f_hi >= 0:
        return bounds[1]
    if f_lo <= 0:
        return bounds[0]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _nu_score(np.exp(mid), t, m) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return float(np.exp(0.5 * (lo + hi)))


def student_em(points, tol=STUDENT_TOL, max_iter=STUDENT_MAX_ITER, nu=None, nu_init=10.0):
    """Maximum-likelihood fit of a multivariate t distribution (ECME).

    E-step weights ``u_i = (nu + m)/(nu + t_i)``; the mean and 1/n scatter
    are weighted moments; ``nu`` then maximises the observed likelihood
    with the new mean and scatter held fixed, so the log-likelihood never
    decreases. Pass ``nu`` to keep the degrees of freedom fixed.
    """
    x = _check_points(points, 2, extra=2)
    n, m = x.shape
    fixed = nu is not None
    nu = float(nu if fixed else nu_init)
    mean = x.mean(axis=0)
    d = x - mean
    scatter = regularized_spd(d.T @ d / n)
    history = [student_loglik(x, mean, scatter, nu)]
    delta = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        t = mahalanobis_sq(x, mean, scatter)
        u = (nu + m) / (nu + t)
        new_mean = u @ x / u.sum()
        d = x - new_mean
        new_scatter = regularized_spd((d * u[:, None]).T @ d / n)
        new_nu = nu
        if not fixed:
            t_new = mahalanobis_sq(x, new_mean, new_scatter)
            cand = solve_nu(t_new, m)
            ll_old = _t_loglik_terms(t_new, m, nu).sum()
            if _t_loglik_terms(t_new, m, cand).sum() >= ll_old:
                new_nu = cand
        t = mahalanobis_sq(x, new_mean, new_scatter)
        delta = max(
            _relative_changes(mean, new_mean, scatter, new_scatter, t),
            abs(np.log(new_nu / nu)),
        )
        mean, scatter, nu = new_mean, new_scatter, new_nu
        history.append(student_loglik(x, mean, scatter, nu))
        if delta < tol:
            break
    converged = bool(delta < tol)
    if not converged:
        logger.info("Student EM stopped after %d iterations (delta=%.3g)", it, delta)
    diag = FixedPointDiagnostics(it, float(delta), converged, history)
    return StudentParams(mean, scatter, nu), diag


def robust_plugin(points, tol=STUDENT_TOL, max_iter=STUDENT_MAX_ITER, nu=3.0,
                  normalize="consistent"):
    """Student M-estimator with fixed ``nu`` as a robust covariance plug-in.

    ``normalize="consistent"`` rescales the scatter so the median squared
    distance equals the chi-square median (a covariance estimate at the
    Gaussian); ``"unit_det"`` rescales it to determinant one instead.
    """
    params, diag = student_em(points, tol=tol, max_iter=max_iter, nu=nu)
    scatter = params.dispersion
    if normalize == "unit_det":
        scatter = unit_det(scatter)
    elif normalize == "consistent":
        x = np.asarray(points, dtype=float)
        t = mahalanobis_sq(x, params.mean, scatter)
        factor = np.median(t) / chi2.ppf(0.5, x.shape[1])
        scatter = scatter.scaled(factor)
    else:
        raise ValueError(f"unknown normalisation {normalize!r}")
    return ClusterParams(params.mean, scatter), diag
