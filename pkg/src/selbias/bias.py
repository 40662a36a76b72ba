"""Selection bias of the largest observation and the post-selection mean.

With the winner placed last, the naive posterior mean ``X_p / (1 + sigma^2)``
overstates (or understates) the mean that also conditions on ``X_p`` being
the largest observation by

    Delta = sigma^2 (eta^2 - gamma^2) / (1 + sigma^2) * sum_i h_i(a/(a+b) X_p)

where ``h_i`` are the marginal densities of the other ``p - 1`` sample means
given ``X_p``, truncated above at ``X_p`` and written in centred
coordinates.  Those ``p - 1`` coordinates are exchangeable, so one density
evaluation suffices.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidParamsError
from .model import ModelParams, conditional_distribution, posterior_mean_single
from .mvn import QuadratureConfig, mvn_cdf_equicorr
from .truncmvn import TruncatedAboveSpec, marginal_densities_at_bounds

__all__ = [
    "BiasReport",
    "select_winner",
    "selection_bias",
    "post_selection_mean",
    "max_exceedance_probability",
    "max_cdf",
    "bias_table",
]


@dataclass(frozen=True)
class BiasReport:
    """Result of one ``(params, xp)`` query.

    ``delta_i`` and ``conditional_means`` (``E(X_i | X_p, X_p = max)``) are
    intermediate quantities kept for testing; they are not a stable API.
    """

    params: ModelParams
    xp: float
    naive_mean: float
    delta: float
    lambda_: float
    marginal_density_value: float
    alpha: float
    winner_index: Optional[int] = None
    density_values: np.ndarray = field(default=None, repr=False)
    delta_i: np.ndarray = field(default=None, repr=False)
    conditional_means: np.ndarray = field(default=None, repr=False)

    @property
    def centered_bound(self) -> float:
        a, b = self.params.a, self.params.b
        return a / (a + b) * self.xp

    def as_row(self) -> dict:
        p = self.params
        return {
            "p": p.p,
            "gamma": p.gamma,
            "eta": p.eta,
            "gamma2": p.gamma2,
            "eta2": p.eta2,
            "sigma": p.sigma,
            "xp": self.xp,
            "naive_mean": self.naive_mean,
            "delta": self.delta,
            "lambda": self.lambda_,
            "marginal_density": self.marginal_density_value,
            "alpha": self.alpha,
        }


def select_winner(x: Sequence[float]) -> tuple[int, float]:
    """Index and value of the largest entry; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatchError("need a non-empty vector of sample means")
    i = int(np.argmax(x))
    return i, float(x[i])


def selection_bias(params: ModelParams, xp, quad: Optional[QuadratureConfig] = None,
                   exploit_symmetry: bool = True) -> BiasReport:
    """Closed-form selection bias at winning value ``xp``.

    Parameters
    ----------
    params : ModelParams
    xp : float or array_like
        The largest sample mean, or the full vector of ``p`` sample means
        (the winner is then picked with :func:`select_winner`).
    quad : QuadratureConfig, optional
    exploit_symmetry : bool
        Evaluate one marginal density and multiply by ``p - 1``.  With
        ``False`` every ``h_i`` is computed separately and summed.
    """
    winner = None
    if np.ndim(xp) > 0:
        x = np.asarray(xp, dtype=float)
        if x.shape != (params.p,):
            raise DimensionMismatchError(f"expected {params.p} sample means, got shape {x.shape}")
        winner, xp = select_winner(x)
    xp = float(xp)
    if not math.isfinite(xp):
        raise InvalidParamsError(f"xp must be finite, got {xp}")

    a, b = params.a, params.b
    n = params.p - 1
    kwargs = {} if quad is None else {"quad": quad}
    spec = TruncatedAboveSpec(conditional_distribution(params, xp), xp, **kwargs)
    h = marginal_densities_at_bounds(spec, exploit_symmetry)

    scale = params.sigma2 * (params.eta2 - params.gamma2) / (1.0 + params.sigma2)
    if exploit_symmetry:
        h_sum = n * float(h[0])
    else:
        h_sum = math.fsum(h)
    delta = scale * h_sum
    naive = posterior_mean_single(params, xp)

    delta_i = a * b / (a + b) * h_sum + a * h
    cond_means = b / (a + b) * xp - delta_i
    for arr in (h, delta_i, cond_means):
        arr.setflags(write=False)
    return BiasReport(
        params=params,
        xp=xp,
        naive_mean=naive,
        delta=delta,
        lambda_=naive - delta,
        marginal_density_value=float(h[0]),
        alpha=spec.alpha,
        winner_index=winner,
        density_values=h,
        delta_i=delta_i,
        conditional_means=cond_means,
    )


def post_selection_mean(params: ModelParams, xp, quad: Optional[QuadratureConfig] = None) -> float:
    """``E(mu_winner | X_winner = xp, X_winner is the maximum)``."""
    return selection_bias(params, xp, quad).lambda_


def max_cdf(params: ModelParams, x: float, quad: Optional[QuadratureConfig] = None) -> float:
    """``Pr(max_i X_i <= x)`` under the marginal law ``N(0, a I + b 11')``."""
    return mvn_cdf_equicorr(params.p, 0.0, params.a, params.b, float(x), quad)


def max_exceedance_probability(params: ModelParams, x: float,
                               quad: Optional[QuadratureConfig] = None) -> float:
    """``Pr(X_winner > x)``."""
    return 1.0 - max_cdf(params, x, quad)


def bias_table(sigma: float, p_list: Iterable[int], xp_list: Iterable[float],
               case_list: Iterable[tuple[float, float]],
               quad: Optional[QuadratureConfig] = None,
               workers: Optional[int] = None) -> list[BiasReport]:
    """Selection bias over a ``case x p x xp`` grid.

    ``case_list`` holds ``(gamma, eta)`` pairs (not squared).  Rows come out
    ordered by case (in the order given), then ascending ``p``, then
    ascending ``xp``, whatever the number of ``workers``.
    """
    cases = [ModelParams(2, g, e, sigma) for g, e in case_list]  # validates early
    ps = sorted({int(p) for p in p_list})
    xs = sorted({float(x) for x in xp_list})
    jobs = [(ModelParams(p, c.gamma, c.eta, sigma), x)
            for c, p, x in itertools.product(cases, ps, xs)]

    def run(job):
        return selection_bias(job[0], job[1], quad)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]
