"""Multivariate normal densities and orthant probabilities.

Two engines:

* :func:`mvn_cdf_equicorr` -- covariance ``c I + d 11'`` with ``d >= 0``.  A
  one-factor representation ``Y_i = mean_i + sqrt(d) Z + sqrt(c) E_i`` turns the
  orthant probability into a one dimensional integral,

      Pr(Y <= u) = int phi(z) prod_i Phi((u_i - mean_i - sqrt(d) z) / sqrt(c)) dz,

  which is evaluated by adaptive Gauss-Kronrod quadrature (compiled kernel
  when available).
* :func:`mvn_cdf_general` -- any positive definite covariance, via Genz's
  separation of variables with randomly scrambled Sobol points.  Slow and
  noisy; only used to cross-check the first engine.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from . import _backend
from .errors import (
    DimensionMismatchError,
    InvalidParamsError,
    NonConvergenceError,
    NotPositiveDefiniteError,
    ProbabilityRangeError,
)
from .model import GaussianSpec

__all__ = [
    "QuadratureConfig",
    "QmcConfig",
    "QuadResult",
    "std_normal_pdf",
    "std_normal_cdf",
    "normal_pdf",
    "mvn_cdf_equicorr",
    "mvn_cdf_general",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the one dimensional orthant quadrature.

    ``rel_tol`` tightens the target for small probabilities, where the
    absolute tolerance alone would leave ratios such as ``g_k = f / alpha``
    poorly resolved.  The stopping rule is ``err <= min(abs_tol, rel_tol*|I|)``.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_nodes: int = 4096
    integration_halfwidth: float = 8.5

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise InvalidParamsError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.rel_tol > 0:
            raise InvalidParamsError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_nodes) != self.max_nodes or self.max_nodes < 32:
            raise InvalidParamsError(f"max_nodes must be an integer >= 32, got {self.max_nodes}")
        if not self.integration_halfwidth > 0:
            raise InvalidParamsError("integration_halfwidth must be positive")


@dataclass(frozen=True)
class QmcConfig:
    """Randomised quasi-Monte Carlo settings.

    ``samples`` is rounded up to a power of two (Sobol balance).
    """

    samples: int = 2 ** 16
    replicates: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1024:
            raise InvalidParamsError(f"samples must be >= 1024, got {self.samples}")
        if self.replicates < 2:
            raise InvalidParamsError(f"replicates must be >= 2, got {self.replicates}")


DEFAULT_QUADRATURE = QuadratureConfig()
DEFAULT_QMC = QmcConfig()


class QuadResult(NamedTuple):
    value: float
    abserr: float
    n_evals: int


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return out if out.ndim else float(out)


def std_normal_cdf(z):
    """Standard normal CDF, accurate to ~1e-16 absolute (erfc based)."""
    out = ndtr(np.asarray(z, dtype=float))
    return out if np.ndim(out) else float(out)


def normal_pdf(x, var):
    """Density of ``N(0, var)`` at ``x``."""
    sd = math.sqrt(var)
    return std_normal_pdf(np.asarray(x, dtype=float) / sd) / sd


def _broadcast(vec, n, name):
    arr = np.asarray(vec, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    arr = arr.reshape(-1)
    if arr.shape[0] != n:
        raise DimensionMismatchError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def _check_probability(raw, tol, what):
    if not math.isfinite(raw) or raw < -tol or raw > 1.0 + tol:
        raise ProbabilityRangeError(f"{what} produced probability {raw!r} outside [0, 1]")
    return min(max(raw, 0.0), 1.0)


def mvn_cdf_equicorr(n: int, mean, c: float, d: float, upper,
                     cfg: Optional[QuadratureConfig] = None,
                     full_output: bool = False):
    """``Pr(Y_i <= upper_i for all i)`` for ``Y ~ N(mean, c I + d 11')``.

    Parameters
    ----------
    n : int
        Dimension.
    mean, upper : float or array_like of length n
        Scalars are broadcast.  Entries of ``upper`` may be infinite.
    c : float
        Diagonal excess variance, ``> 0``.
    d : float
        Common covariance, ``>= 0``.
    cfg : QuadratureConfig, optional
    full_output : bool
        Return a :class:`QuadResult` instead of the bare probability.

    Raises
    ------
    NonConvergenceError
        Node budget exhausted before the tolerance was met.
    """
    cfg = cfg or DEFAULT_QUADRATURE
    n = int(n)
    if n < 1:
        raise DimensionMismatchError(f"dimension must be >= 1, got {n}")
    c, d = float(c), float(d)
    if not c > 0.0:
        raise InvalidParamsError(f"c must be positive, got {c}")
    if d < 0.0:
        raise InvalidParamsError(f"negative equicorrelation d={d} is not supported")
    shifted = _broadcast(upper, n, "upper") - _broadcast(mean, n, "mean")
    if np.isnan(shifted).any():
        raise InvalidParamsError("NaN in mean or upper bounds")

    def done(value, err=0.0, evals=0):
        return QuadResult(value, err, evals) if full_output else value

    if (shifted == -np.inf).any():
        return done(0.0)
    shifted = shifted[np.isfinite(shifted)]
    if shifted.size == 0:
        return done(1.0)
    if d == 0.0:
        return done(float(np.prod(ndtr(shifted / math.sqrt(c)))))

    vals, counts = np.unique(shifted, return_counts=True)
    value, err, evals, converged = _backend.orthant_equicorr(
        vals, counts.astype(float), c, d, cfg.integration_halfwidth,
        cfg.abs_tol, cfg.rel_tol, int(cfg.max_nodes))
    if not converged:
        raise NonConvergenceError(
            f"mvn_cdf_equicorr: error estimate {err:.3g} above tolerance after "
            f"{evals} nodes (n={n}, c={c}, d={d})")
    value = _check_probability(float(value), cfg.abs_tol, "mvn_cdf_equicorr")
    return done(value, float(err), int(evals))


def mvn_cdf_general(spec: GaussianSpec, upper, cfg: Optional[QmcConfig] = None):
    """Orthant probability for an arbitrary positive definite covariance.

    Genz's separation-of-variables transform with ``cfg.replicates``
    independently scrambled Sobol sequences.

    Returns
    -------
    (probability, standard_error)
    """
    cfg = cfg or DEFAULT_QMC
    n = spec.dim
    shifted = _broadcast(upper, n, "upper") - spec.mean
    try:
        chol = linalg.cholesky(spec.cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"covariance is not positive definite: {exc}") from None
    diag = np.diag(chol)
    if n == 1:
        return float(ndtr(shifted[0] / diag[0])), 0.0

    m = max(10, math.ceil(math.log2(cfg.samples)))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
    tiny = np.finfo(float).tiny
    estimates = np.empty(cfg.replicates)
    for rep, ss in enumerate(seeds):
        sampler = qmc.Sobol(d=n - 1, scramble=True, seed=np.random.default_rng(ss))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = sampler.random_base2(m)
        npts = w.shape[0]
        y = np.empty((npts, n - 1))
        e = np.full(npts, ndtr(shifted[0] / diag[0]))
        f = e.copy()
        for i in range(1, n):
            y[:, i - 1] = ndtri(np.clip(w[:, i - 1] * e, tiny, 1.0 - 1e-16))
            e = ndtr((shifted[i] - y[:, :i] @ chol[i, :i]) / diag[i])
            f *= e
        estimates[rep] = f.mean()
    prob = float(estimates.mean())
    se = float(estimates.std(ddof=1) / math.sqrt(cfg.replicates))
    return min(max(prob, 0.0), 1.0), se
