"""Dense symmetric linear algebra and random matrix constructors.

Every quadratic form against an inverse dispersion goes through a triangular
solve on the Cholesky factor; nothing here forms an explicit inverse.
"""

from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, InvalidRange, NotPositiveDefinite

SYMMETRY_RTOL = 1e-12


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


class SPDMatrix:
    """Symmetric positive-definite matrix with a lazily cached Cholesky factor.

    Parameters
    ----------
    entries : array_like, shape (m, m)
        Matrix entries. Must be symmetric to ``1e-12`` relative tolerance.
    check : bool
        Factorise immediately so that a non positive-definite input fails
        at construction rather than on first use.
    """

    __slots__ = ("entries", "__dict__")

    def __init__(self, entries, check=True):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        scale = max(np.abs(a).max(), np.finfo(float).tiny)
        if np.abs(a - a.T).max() > SYMMETRY_RTOL * scale:
            raise ValueError("matrix is not symmetric")
        a.setflags(write=False)
        self.entries = a
        if check:
            self.chol

    @property
    def dim(self):
        return self.entries.shape[0]

    @cached_property
    def chol(self):
        return cholesky(self.entries)

    def log_det(self):
        return float(2.0 * np.log(np.diag(self.chol)).sum())

    def mahalanobis_sq(self, x, mean):
        return mahalanobis_sq(x, mean, self)

    def scaled(self, c):
        return SPDMatrix(c * self.entries)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"SPDMatrix(dim={self.dim})"


def _as_array(s):
    return s.entries if isinstance(s, SPDMatrix) else np.asarray(s, dtype=float)


def _factor(s):
    if isinstance(s, SPDMatrix):
        return s.chol
    return cholesky(s)


def cholesky(s):
    """Lower-triangular ``L`` with positive diagonal and ``L @ L.T == s``.

    Raises
    ------
    NotPositiveDefinite
        When a pivot is not strictly positive (or the input is not finite).
    """
    a = _as_array(s)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if not np.all(np.diag(L) > 0):
        raise NotPositiveDefinite("non-positive pivot")
    return L


def log_det(s):
    """Log-determinant of an SPD matrix, ``sum(2 log L_ii)``."""
    return float(2.0 * np.log(np.diag(_factor(s))).sum())


def mahalanobis_sq(x, mean, s):
    """Squared Mahalanobis distance ``(x - mean)^T s^{-1} (x - mean)``.

    ``x`` may be a single vector of length m or an ``(n, m)`` array, in which
    case an array of ``n`` distances is returned.
    """
    L = _factor(s)
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    m = L.shape[0]
    if x.shape[-1] != m or mean.shape != (m,):
        raise DimensionMismatch(
            f"dimensions disagree: x {x.shape}, mean {mean.shape}, matrix {m}x{m}"
        )
    d = (x - mean).T
    z = solve_triangular(L, d, lower=True, check_finite=False)
    return np.sum(z * z, axis=0)


def sample_unit_sphere(m, rng, size=None):
    """Uniform draw(s) on the unit sphere of R^m (normalised Gaussian)."""
    if m < 1:
        raise InvalidRange("dimension must be >= 1")
    shape = (m,) if size is None else (size, m)
    g = rng.standard_normal(shape)
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norms


def random_orthogonal(m, rng):
    """Haar-distributed orthogonal matrix from a sign-corrected QR."""
    if m < 1:
        raise InvalidRange("dimension must be >= 1")
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_spd(m, eig_range, rng):
    """``Q diag(lam) Q^T`` with ``lam ~ Uniform[lo, hi]`` and Haar ``Q``."""
    lo, hi = eig_range
    if not (0 < lo <= hi):
        raise InvalidRange(f"need 0 < lo <= hi, got {eig_range}")
    q = random_orthogonal(m, rng)
    lam = rng.uniform(lo, hi, size=m)
    return SPDMatrix(symmetrize((q * lam) @ q.T))
