"""Samplers for generalized Gaussian and Student t laws, and the synthetic
scenario generator used by the simulation benchmark."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .errors import ConfigInvalid, InvalidShape
from .estimators import ClusterParams
from .linalg import SPDMatrix, random_spd, sample_unit_sphere

GG = "GG"
T = "T"
GREEN = "green"  # shape parameter shared by all points of a cluster
RED = "red"  # fresh shape parameter for every point


def _factor(dispersion):
    if not isinstance(dispersion, SPDMatrix):
        dispersion = SPDMatrix(dispersion)
    return dispersion.chol


def _broadcast(value, size, name):
    v = np.asarray(value, dtype=float)
    if np.any(v <= 0):
        raise InvalidShape(f"{name} must be positive")
    if size is None:
        if v.ndim:
            raise ValueError(f"{name} must be scalar for a single draw")
        return float(v)
    return np.broadcast_to(v, (size,))


def sample_generalized_gaussian(mean, dispersion, beta, tau=1.0, rng=None, size=None):
    """Draw from the generalized Gaussian law with a per-point scale ``tau``.

    Uses the stochastic representation
    ``mean + sqrt(tau) * G**(1/(2 beta)) * L u`` with
    ``G ~ Gamma(m/(2 beta), scale=2)``, ``u`` uniform on the unit sphere and
    ``L`` the Cholesky factor of ``dispersion``. ``beta = 1`` is the Gaussian.

    ``beta`` and ``tau`` may be arrays of length ``size`` (one per draw).
    """
    mean = np.asarray(mean, dtype=float)
    L = _factor(dispersion)
    m = L.shape[0]
    beta = _broadcast(beta, size, "beta")
    tau = _broadcast(tau, size, "tau")
    g = rng.gamma(m / (2.0 * beta), 2.0, size=size)
    radius = np.sqrt(tau) * g ** (1.0 / (2.0 * beta))
    u = sample_unit_sphere(m, rng, size=size)
    if size is None:
        return mean + radius * (L @ u)
    return mean + radius[:, None] * (u @ L.T)


def sample_multivariate_t(mean, dispersion, nu, tau=1.0, rng=None, size=None):
    """Draw from a multivariate Student t with ``nu`` degrees of freedom.

    ``mean + sqrt(tau) * z / sqrt(g)`` with ``z ~ N(0, dispersion)`` and
    ``g ~ Gamma(nu/2, scale=2/nu)``.
    """
    mean = np.asarray(mean, dtype=float)
    L = _factor(dispersion)
    m = L.shape[0]
    nu = _broadcast(nu, size, "nu")
    tau = _broadcast(tau, size, "tau")
    g = rng.gamma(nu / 2.0, 2.0 / nu, size=size)
    if size is None:
        z = L @ rng.standard_normal(m)
        return mean + math.sqrt(tau / g) * z
    z = rng.standard_normal((size, m)) @ L.T
    return mean + np.sqrt(tau / g)[:, None] * z


_SCENARIO_RE = re.compile(
    r"^\s*(?P<color>green|red)\s*:\s*(?P<pgg>[0-9.]+(?:/[0-9]+)?)\s*GG\s*-\s*"
    r"(?P<pt>[0-9.]+(?:/[0-9]+)?)\s*T\s*$",
    re.IGNORECASE,
)


def _fraction(text):
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def parse_scenario(text):
    """Parse ``<color>:<pGG>GG-<pT>T`` into ``(sharing, p_gg)``.

    >>> parse_scenario("green:0.6GG-0.4T")
    ('green', 0.6)
    """
    match = _SCENARIO_RE.match(text)
    if not match:
        raise ConfigInvalid(f"bad scenario string {text!r}; expected e.g. green:0.6GG-0.4T")
    p_gg, p_t = _fraction(match["pgg"]), _fraction(match["pt"])
    if not (0 <= p_gg <= 1) or abs(p_gg + p_t - 1) > 1e-9:
        raise ConfigInvalid(f"fractions in {text!r} must lie in [0, 1] and sum to 1")
    return match["color"].lower(), p_gg


def _fmt(x):
    return repr(float(x)) if x != int(x) else str(int(x))


@dataclass(frozen=True)
class ScenarioConfig:
    """Description of one synthetic experiment.

    ``tau_range`` defaults to ``(1, m)``. ``eig_range`` is the interval the
    eigenvalues of each cluster dispersion are drawn from.
    """

    m: int = 10
    K: int = 5
    n_train: int = 5000
    n_test: int = 20000
    p_gg: float = 1.0
    sharing: str = GREEN
    beta_range: tuple = (0.25, 10.0)
    nu_range: tuple = (1.0, 10.0)
    tau_range: tuple | None = None
    eig_range: tuple = (0.16, 1.6)
    seed: int = 0

    def __post_init__(self):
        if self.tau_range is None:
            object.__setattr__(self, "tau_range", (1.0, float(self.m)))
        for name in ("beta_range", "nu_range", "tau_range", "eig_range"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    def validate(self):
        if self.m < 1 or self.K < 1:
            raise ConfigInvalid("m and K must be >= 1")
        need = self.K * (self.m + 2)
        if self.n_train < need or self.n_test < need:
            raise ConfigInvalid(f"n_train and n_test must be >= K*(m+2) = {need}")
        if not 0 <= self.p_gg <= 1:
            raise ConfigInvalid("p_gg must lie in [0, 1]")
        if self.sharing not in (GREEN, RED):
            raise ConfigInvalid(f"sharing must be {GREEN!r} or {RED!r}")
        for name in ("beta_range", "nu_range", "tau_range", "eig_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigInvalid(f"{name} must satisfy 0 < lo <= hi")

    @property
    def scenario_id(self):
        return f"{self.sharing}:{_fmt(self.p_gg)}GG-{_fmt(1 - self.p_gg)}T"

    @classmethod
    def from_scenario(cls, text, **kwargs):
        sharing, p_gg = parse_scenario(text)
        return cls(sharing=sharing, p_gg=p_gg, **kwargs)

    def replace(self, **changes):
        if "m" in changes and "tau_range" not in changes:
            changes["tau_range"] = None
        return dataclasses.replace(self, **changes)

    def to_kv(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = ",".join(repr(x) for x in v) if isinstance(v, tuple) else str(v)
        return out

    @classmethod
    def from_kv(cls, kv):
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in kv:
                continue
            raw = str(kv[f.name]).strip()
            if f.name in ("m", "K", "n_train", "n_test", "seed"):
                kwargs[f.name] = int(raw)
            elif f.name == "p_gg":
                kwargs[f.name] = float(raw)
            elif f.name == "sharing":
                kwargs[f.name] = raw.lower()
            else:
                kwargs[f.name] = tuple(float(x) for x in raw.split(","))
        unknown = set(kv) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass
class SyntheticDataset:
    train: LabeledDataset
    test: LabeledDataset
    truth: list
    # per-cluster (beta, nu) when sharing is green, else None
    shapes: list = field(default_factory=list)
    # per split: point-level family flags, scale factors and shape parameters
    meta: dict = field(default_factory=dict)


def generate_cluster_params(config, rng):
    """Means uniform on the unit sphere, dispersions from ``random_spd``."""
    params = []
    for _ in range(config.K):
        mean = sample_unit_sphere(config.m, rng)
        params.append(ClusterParams(mean, random_spd(config.m, config.eig_range, rng)))
    return params


def _balanced_counts(n, K):
    base, extra = divmod(n, K)
    return [base + (1 if k < extra else 0) for k in range(K)]


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _sample_cluster(params, n, config, shared, rng):
    """Draw ``n`` points of one cluster with an exact GG/T split."""
    n_gg = _round_half_up(config.p_gg * n)
    is_gg = np.zeros(n, dtype=bool)
    is_gg[:n_gg] = True
    is_gg = rng.permutation(is_gg)
    tau = rng.uniform(*config.tau_range, size=n)
    if shared is None:
        beta = rng.uniform(*config.beta_range, size=n)
        nu = rng.uniform(*config.nu_range, size=n)
    else:
        beta = np.full(n, shared[0])
        nu = np.full(n, shared[1])
    out = np.empty((n, config.m))
    shape = np.where(is_gg, beta, nu)
    k_gg = int(is_gg.sum())
    if k_gg:
        out[is_gg] = sample_generalized_gaussian(
            params.mean, params.dispersion, beta[is_gg], tau[is_gg], rng, size=k_gg
        )
    if n - k_gg:
        out[~is_gg] = sample_multivariate_t(
            params.mean, params.dispersion, nu[~is_gg], tau[~is_gg], rng, size=n - k_gg
        )
    return out, {"is_gg": is_gg, "tau": tau, "shape": shape}


def generate_scenario(config, rng, truth=None):
    """Generate train and test sets for one scenario.

    Parameters
    ----------
    config : ScenarioConfig
    rng : numpy.random.Generator
    truth : list of ClusterParams, optional
        Reuse fixed cluster parameters instead of drawing new ones.

    Returns
    -------
    SyntheticDataset
        Labels run from 1 to K, classes balanced to within one point. Every
        point carries its own scale factor drawn from ``tau_range``.
    """
    config.validate()
    if truth is None:
        truth = generate_cluster_params(config, rng)
    elif len(truth) != config.K:
        raise ConfigInvalid("truth must contain K cluster parameter sets")
    if config.sharing == GREEN:
        shapes = [
            (rng.uniform(*config.beta_range), rng.uniform(*config.nu_range))
            for _ in range(config.K)
        ]
    else:
        shapes = [None] * config.K

    splits, meta = [], {}
    for name, n in (("train", config.n_train), ("test", config.n_test)):
        xs, ys, infos = [], [], []
        for k, n_k in enumerate(_balanced_counts(n, config.K)):
            x, info = _sample_cluster(truth[k], n_k, config, shapes[k], rng)
            xs.append(x)
            ys.append(np.full(n_k, k + 1))
            infos.append(info)
        splits.append(LabeledDataset(np.vstack(xs), np.concatenate(ys)))
        meta[name] = {key: np.concatenate([i[key] for i in infos]) for key in infos[0]}
    return SyntheticDataset(splits[0], splits[1], truth, shapes, meta)
