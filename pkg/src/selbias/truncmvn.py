"""Multivariate normal truncated from above.

For ``Y ~ N(theta, Omega)`` restricted to ``Y <= b`` we work in centred
coordinates ``W = Y - theta``, truncated at ``b - theta``.  The public
functions follow that convention: ``marginal_density(spec, k, w)`` takes
``w`` on the centred scale, and the first moments are

    E(Y_i | Y <= b) = theta_i - sum_k omega_ki g_k(b_k - theta_k).

Each marginal density is the univariate normal density of ``W_k`` times
the orthant probability of the remaining coordinates conditional on
``W_k = w``, divided by ``alpha = Pr(W <= b - theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateTruncationError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)
from .model import GaussianSpec
from .mvn import (
    DEFAULT_QMC,
    DEFAULT_QUADRATURE,
    QmcConfig,
    QuadratureConfig,
    mvn_cdf_equicorr,
    mvn_cdf_general,
    normal_pdf,
)

__all__ = [
    "MAX_DIM",
    "TruncatedAboveSpec",
    "normalizing_constant",
    "marginal_density",
    "marginal_densities_at_bounds",
    "truncated_mean",
]

MAX_DIM = 25
ALPHA_FLOOR = 1e-300


@dataclass(frozen=True)
class TruncatedAboveSpec:
    """A Gaussian ``base`` truncated to ``{y <= upper}``.

    ``alpha`` is computed once, at construction.
    """

    base: GaussianSpec
    upper: np.ndarray
    quad: QuadratureConfig = DEFAULT_QUADRATURE
    qmc: QmcConfig = DEFAULT_QMC
    alpha: float = field(init=False)

    def __post_init__(self):
        n = self.base.dim
        upper = np.asarray(self.upper, dtype=float)
        if upper.ndim == 0:
            upper = np.full(n, float(upper))
        upper = upper.reshape(-1).copy()
        if upper.shape[0] != n:
            raise DimensionMismatchError(
                f"upper has length {upper.shape[0]}, base dimension is {n}")
        if n > MAX_DIM:
            raise DimensionMismatchError(f"dimension {n} exceeds the cap of {MAX_DIM}")
        if self.base.equicorr is None:
            try:
                linalg.cholesky(self.base.cov, lower=True)
            except linalg.LinAlgError:
                raise NotPositiveDefiniteError("base covariance is not positive definite") from None
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)
        alpha = _compute_alpha(self)
        if not alpha >= ALPHA_FLOOR:
            raise DegenerateTruncationError(
                f"truncation region has probability {alpha:.3g} < {ALPHA_FLOOR}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def theta(self) -> np.ndarray:
        return self.base.mean

    @property
    def omega(self) -> np.ndarray:
        return self.base.cov

    @property
    def centered_upper(self) -> np.ndarray:
        return self.upper - self.base.mean

    @property
    def exchangeable(self) -> bool:
        """Equal means, equal bounds and equicorrelated covariance."""
        cb = self.centered_upper
        return self.base.equicorr is not None and bool(np.all(cb == cb[0]))

    @classmethod
    def equicorrelated(cls, theta, c, d, upper, n=None, **kwargs) -> "TruncatedAboveSpec":
        return cls(GaussianSpec.equicorrelated(theta, c, d, n=n), upper, **kwargs)


def _orthant(spec: TruncatedAboveSpec, cov_tag, cov, bounds) -> float:
    """Centred orthant probability ``Pr(V <= bounds)``, ``V ~ N(0, cov)``."""
    n = bounds.shape[0]
    if cov_tag is not None:
        return mvn_cdf_equicorr(n, 0.0, cov_tag[0], cov_tag[1], bounds, spec.quad)
    return mvn_cdf_general(GaussianSpec(np.zeros(n), cov), bounds, spec.qmc)[0]


def _compute_alpha(spec: TruncatedAboveSpec) -> float:
    return _orthant(spec, spec.base.equicorr, spec.base.cov, spec.centered_upper)


def normalizing_constant(spec: TruncatedAboveSpec) -> float:
    """``alpha = Pr(Y <= b)``; cached on the spec."""
    return spec.alpha


def _density_one(spec: TruncatedAboveSpec, k: int, w: float) -> float:
    bounds = spec.centered_upper
    if w > bounds[k]:
        return 0.0
    n = spec.dim
    tag = spec.base.equicorr
    if tag is not None:
        c, d = tag
        var_k = c + d
    else:
        var_k = spec.omega[k, k]
    dens = normal_pdf(w, var_k)
    if n == 1 or dens == 0.0:
        return float(dens) / spec.alpha
    rest = np.delete(np.arange(n), k)
    if tag is not None:
        # Conditioning an equicorrelated vector on one coordinate keeps it
        # equicorrelated: shift d/(c+d) w, covariance c I + cd/(c+d) 11'.
        cond_bounds = bounds[rest] - (d / var_k) * w
        cond = (c, c * d / var_k)
        cond_cov = None
    else:
        col = spec.omega[rest, k]
        cond_bounds = bounds[rest] - col / var_k * w
        cond_cov = spec.omega[np.ix_(rest, rest)] - np.outer(col, col) / var_k
        cond = None
    prob = _orthant(spec, cond, cond_cov, cond_bounds)
    return float(dens) * prob / spec.alpha


def marginal_density(spec: TruncatedAboveSpec, k: int, w):
    """k-th marginal density of the centred truncated vector, ``g_k(w)``.

    ``w`` is on the centred scale (``y_k - theta_k``); the density is zero
    above ``b_k - theta_k``.  Accepts a scalar or an array of points.
    """
    if not 0 <= k < spec.dim:
        raise IndexError(f"coordinate {k} out of range for dimension {spec.dim}")
    if np.ndim(w) == 0:
        return _density_one(spec, k, float(w))
    w = np.asarray(w, dtype=float)
    return np.array([_density_one(spec, k, float(x)) for x in w.ravel()]).reshape(w.shape)


def marginal_densities_at_bounds(spec: TruncatedAboveSpec, exploit_symmetry: bool = True) -> np.ndarray:
    """``g_k(b_k - theta_k)`` for every ``k``."""
    bounds = spec.centered_upper
    if exploit_symmetry and spec.exchangeable:
        return np.full(spec.dim, _density_one(spec, 0, float(bounds[0])))
    return np.array([_density_one(spec, k, float(bounds[k])) for k in range(spec.dim)])


def truncated_mean(spec: TruncatedAboveSpec, exploit_symmetry: bool = True) -> np.ndarray:
    """``E(Y | Y <= b)`` componentwise."""
    g = marginal_densities_at_bounds(spec, exploit_symmetry)
    return spec.theta - spec.omega @ g
