"""Normal-normal hierarchical model for the treatment selection problem.

Arm means and sampling errors are both compound symmetric::

    mu      ~ N(0, gamma^2 I + (1 - gamma^2) 11')
    X | mu  ~ N(mu, sigma^2 {eta^2 I + (1 - eta^2) 11'})

so that marginally ``X ~ N(0, a I + b 11')`` with ``a = gamma^2 + sigma^2 eta^2``
and ``b = 1 - gamma^2 + sigma^2 (1 - eta^2)``.  Everything in this module is
un-truncated: the effect of selecting the largest observation lives in
:mod:`selbias.bias`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidParamsError

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "GaussianSpec",
    "derive_constants",
    "posterior_mean_single",
    "posterior_mean_full",
    "conditional_distribution",
    "marginal_distribution",
    "prior_covariance",
    "noise_covariance",
]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """The four scalars defining the model.

    Parameters
    ----------
    p : int
        Number of treatment arms, at least 2.
    gamma : float
        Within-arm share of the prior standard deviation, in [0, 1].
    eta : float
        Independent share of the noise standard deviation, in [0, 1].
    sigma : float
        Sampling noise scale, strictly positive.
    """

    p: int
    gamma: float
    eta: float
    sigma: float

    def __post_init__(self):
        p, gamma, eta, sigma = self.p, self.gamma, self.eta, self.sigma
        if isinstance(p, bool) or int(p) != p:
            raise InvalidParamsError(f"p must be an integer, got {p!r}")
        object.__setattr__(self, "p", int(p))
        for name in ("gamma", "eta", "sigma"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidParamsError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)
        if self.p < 2:
            raise InvalidParamsError(f"need p >= 2 arms, got p={self.p}")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParamsError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParamsError(f"eta must lie in [0, 1], got {self.eta}")
        if not self.sigma > 0.0:
            raise InvalidParamsError(f"sigma must be positive, got {self.sigma}")
        if not self.a > 0.0:
            raise InvalidParamsError(
                "gamma = eta = 0 makes the marginal covariance rank one")

    @classmethod
    def from_squares(cls, p: int, gamma2: float, eta2: float, sigma: float) -> "ModelParams":
        """Build from squared ``gamma`` and ``eta`` (the form used in tables)."""
        for name, val in (("gamma2", gamma2), ("eta2", eta2)):
            if not 0.0 <= val <= 1.0:
                raise InvalidParamsError(f"{name} must lie in [0, 1], got {val}")
        return cls(p, math.sqrt(gamma2), math.sqrt(eta2), sigma)

    @property
    def gamma2(self) -> float:
        return self.gamma * self.gamma

    @property
    def eta2(self) -> float:
        return self.eta * self.eta

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    @property
    def a(self) -> float:
        return self.gamma2 + self.sigma2 * self.eta2

    @property
    def b(self) -> float:
        return 1.0 - self.gamma2 + self.sigma2 * (1.0 - self.eta2)


@dataclass(frozen=True)
class DerivedConstants:
    a: float
    b: float
    r: np.ndarray = field(repr=False)

    @property
    def r_other(self) -> float:
        """Common weight on each of the non-selected arms."""
        return float(self.r[0])

    @property
    def r_self(self) -> float:
        return float(self.r[-1])


@dataclass(frozen=True)
class GaussianSpec:
    """Mean vector and covariance matrix of a multivariate normal.

    ``equicorr`` optionally carries ``(c, d)`` with ``cov = c I + d 11'``.
    Use :meth:`equicorrelated` to build one with the tag filled in.
    """

    mean: np.ndarray
    cov: np.ndarray
    equicorr: Optional[tuple[float, float]] = None

    def __post_init__(self):
        mean = _frozen(self.mean).reshape(-1)
        cov = _frozen(self.cov)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DimensionMismatchError(
                f"covariance shape {cov.shape} does not match mean length {n}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise InvalidParamsError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if self.equicorr is not None:
            c, d = (float(v) for v in self.equicorr)
            if not c > 0.0 or d < 0.0:
                raise InvalidParamsError(
                    f"equicorrelated tag needs c > 0 and d >= 0, got c={c}, d={d}")
            rebuilt = c * np.eye(n) + d
            if np.max(np.abs(rebuilt - cov), initial=0.0) > 1e-12:
                raise InvalidParamsError("equicorrelated tag does not reproduce cov")
            object.__setattr__(self, "equicorr", (c, d))

    @classmethod
    def equicorrelated(cls, mean, c: float, d: float, n: Optional[int] = None) -> "GaussianSpec":
        mean = np.asarray(mean, dtype=float)
        if mean.ndim == 0:
            if n is None:
                raise DimensionMismatchError("scalar mean needs an explicit n")
            mean = np.full(n, float(mean))
        n = mean.shape[0]
        c, d = float(c), float(d)
        return cls(mean, c * np.eye(n) + d, (c, d))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def derive_constants(params: ModelParams) -> DerivedConstants:
    """Posterior weights of ``E(mu_p | X_1..X_p) = sum_i r_i X_i``."""
    p, a, b = params.p, params.a, params.b
    denom = a * (a + p * b)
    r_other = params.sigma2 * (params.eta2 - params.gamma2) / denom
    r_self = (a + (p - 1) * b * params.gamma2) / denom
    r = np.full(p, r_other)
    r[-1] = r_self
    r.setflags(write=False)
    return DerivedConstants(a, b, r)


def posterior_mean_single(params: ModelParams, xp: float) -> float:
    """Posterior mean of an arm's effect given only its own sample mean."""
    return xp / (1.0 + params.sigma2)


def posterior_mean_full(params: ModelParams, x: Sequence[float]) -> float:
    """Posterior mean of the last arm's effect given all ``p`` sample means."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.p,):
        raise DimensionMismatchError(f"expected {params.p} sample means, got shape {x.shape}")
    return float(derive_constants(params).r @ x)


def conditional_distribution(params: ModelParams, xp: float) -> GaussianSpec:
    """Distribution of the other ``p - 1`` sample means given ``X_p = xp``.

    Returns ``N(b/(a+b) xp 1, a I + ab/(a+b) 11')`` with the equicorrelated
    tag set.
    """
    a, b = params.a, params.b
    return GaussianSpec.equicorrelated(
        b / (a + b) * float(xp), a, a * b / (a + b), n=params.p - 1)


def marginal_distribution(params: ModelParams) -> GaussianSpec:
    """Marginal law of all sample means, ``N(0, a I + b 11')``."""
    return GaussianSpec.equicorrelated(0.0, params.a, params.b, n=params.p)


def prior_covariance(params: ModelParams) -> np.ndarray:
    g2 = params.gamma2
    return g2 * np.eye(params.p) + (1.0 - g2)


def noise_covariance(params: ModelParams) -> np.ndarray:
    e2 = params.eta2
    return params.sigma2 * (e2 * np.eye(params.p) + (1.0 - e2))
