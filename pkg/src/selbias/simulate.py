"""Seeded Monte Carlo for the treatment selection model.

Replications are drawn through the hierarchical representation

    mu_i = phi + mu'_i,      phi ~ N(0, 1 - gamma^2),   mu'_i ~ N(0, gamma^2)
    X_i  = mu_i + xi + e'_i, xi ~ N(0, (1 - eta^2) sigma^2), e'_i ~ N(0, eta^2 sigma^2)

in blocks of ``BLOCK_SIZE`` replications.  Block ``j`` gets its own stream
from ``SeedSequence(seed, spawn_key=(j,))`` and lays its draws out row by
row, so a run with more replications reproduces every replication of a
shorter run bit for bit, whatever the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np
from scipy import linalg

from .errors import BudgetExhaustedError, DegenerateDesignError, InvalidParamsError
from .model import ModelParams, derive_constants
from .truncmvn import TruncatedAboveSpec

__all__ = [
    "BLOCK_SIZE",
    "SimConfig",
    "WinnerPair",
    "WinnerPairs",
    "Bin",
    "RejectionResult",
    "sample_model",
    "sample_arrays",
    "winner_pairs",
    "binned_conditional_mean",
    "regression_fit",
    "rejection_sample_truncated",
    "paradox_residuals",
    "naive_residuals",
    "mean_and_se",
]

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n_reps: int
    seed: int = 0
    bin_width: float = 0.25

    def __post_init__(self):
        if int(self.n_reps) != self.n_reps or self.n_reps < 1:
            raise InvalidParamsError(f"n_reps must be a positive integer, got {self.n_reps}")
        if not self.bin_width > 0:
            raise InvalidParamsError(f"bin_width must be positive, got {self.bin_width}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidParamsError(f"seed must be a non-negative integer, got {self.seed}")


class WinnerPair(NamedTuple):
    mu_star: float
    x_star: float
    winner_index: int


@dataclass(frozen=True)
class WinnerPairs:
    """Column store of winner pairs; iterating yields :class:`WinnerPair`.

    ``x_total`` keeps the sum of all ``p`` observations of each replication,
    which is all the full-data posterior mean needs besides ``x_star``.
    """

    mu_star: np.ndarray
    x_star: np.ndarray
    winner_index: np.ndarray
    x_total: Optional[np.ndarray] = None

    def __len__(self):
        return self.x_star.shape[0]

    def __getitem__(self, i):
        return WinnerPair(float(self.mu_star[i]), float(self.x_star[i]), int(self.winner_index[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_pairs(cls, pairs: Iterable[WinnerPair]) -> "WinnerPairs":
        rows = list(pairs)
        return cls(np.array([r.mu_star for r in rows], dtype=float),
                   np.array([r.x_star for r in rows], dtype=float),
                   np.array([r.winner_index for r in rows], dtype=np.int64))


PairsLike = Union[WinnerPairs, Iterable[WinnerPair]]


def _columns(pairs: PairsLike) -> WinnerPairs:
    return pairs if isinstance(pairs, WinnerPairs) else WinnerPairs.from_pairs(pairs)


class Bin(NamedTuple):
    center: float
    mean: float
    count: int
    se: float


class RejectionResult(NamedTuple):
    mean: np.ndarray
    se: np.ndarray
    acceptance_rate: float
    acceptance_se: float
    n_proposed: int


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _draw_block(params: ModelParams, seed: int, block: int, count: int):
    p = params.p
    z = _block_rng(seed, block).standard_normal((count, 2 * p + 2))
    phi = math.sqrt(1.0 - params.gamma2) * z[:, :1]
    xi = params.sigma * math.sqrt(1.0 - params.eta2) * z[:, 1:2]
    mu = phi + params.gamma * z[:, 2:2 + p]
    x = mu + xi + (params.eta * params.sigma) * z[:, 2 + p:]
    return mu, x


def _blocks(n_reps: int):
    n_blocks = -(-n_reps // BLOCK_SIZE)
    for j in range(n_blocks):
        yield j, min(BLOCK_SIZE, n_reps - j * BLOCK_SIZE)


def sample_model(cfg: SimConfig) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream ``(mu, X)`` blocks of shape ``(k, p)`` for all replications, in order."""
    for j, count in _blocks(cfg.n_reps):
        yield _draw_block(cfg.params, cfg.seed, j, count)


def sample_arrays(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """All replications as two ``(n_reps, p)`` arrays."""
    mus, xs = zip(*sample_model(cfg))
    return np.concatenate(mus), np.concatenate(xs)


def _winners_of_block(params, seed, block, count):
    mu, x = _draw_block(params, seed, block, count)
    idx = np.argmax(x, axis=1)  # first maximum: lowest-index tie break
    rows = np.arange(count)
    return mu[rows, idx], x[rows, idx], idx, x.sum(axis=1)


def winner_pairs(cfg: SimConfig, workers: Optional[int] = None) -> WinnerPairs:
    """``(mu_star, x_star, winner_index)`` for every replication."""
    jobs = list(_blocks(cfg.n_reps))

    def run(job):
        return _winners_of_block(cfg.params, cfg.seed, *job)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    mu, x, idx, tot = (np.concatenate(col) for col in zip(*parts))
    return WinnerPairs(mu, x, idx.astype(np.int64), tot)


def mean_and_se(values) -> tuple[float, float]:
    """Exactly rounded mean and ``sd / sqrt(n)`` (zero for a single value)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    resid = values - mean
    var = math.fsum(resid * resid) / (n - 1)
    return mean, math.sqrt(var / n)


def binned_conditional_mean(pairs: PairsLike, bin_width: float = 0.25) -> list[Bin]:
    """Mean of ``mu_star`` within bins of ``x_star``.

    Bins are ``[k w - w/2, k w + w/2)`` so the centres are multiples of the
    width; empty bins are omitted.
    """
    if not bin_width > 0:
        raise InvalidParamsError(f"bin_width must be positive, got {bin_width}")
    cols = _columns(pairs)
    if len(cols) == 0:
        raise InvalidParamsError("no pairs to bin")
    keys = np.floor(cols.x_star / bin_width + 0.5).astype(np.int64)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    mu = cols.mu_star[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    ends = np.r_[starts[1:], keys.size]
    out = []
    for s, e in zip(starts, ends):
        mean, se = mean_and_se(mu[s:e])
        out.append(Bin(float(keys[s] * bin_width), mean, int(e - s), se))
    return out


def regression_fit(pairs: PairsLike) -> tuple[float, float]:
    """Ordinary least squares of ``mu_star`` on ``x_star``: ``(intercept, slope)``."""
    cols = _columns(pairs)
    x, y = cols.x_star, cols.mu_star
    n = x.size
    if n < 2:
        raise DegenerateDesignError("need at least two pairs for a regression line")
    x_bar = math.fsum(x) / n
    y_bar = math.fsum(y) / n
    dx = x - x_bar
    sxx = math.fsum(dx * dx)
    if sxx == 0.0:
        raise DegenerateDesignError("all x values are equal; slope is undefined")
    slope = math.fsum(dx * (y - y_bar)) / sxx
    return y_bar - slope * x_bar, slope


def rejection_sample_truncated(spec: TruncatedAboveSpec, n_accepted: int, seed: int,
                               max_proposals: int = 10 ** 9) -> RejectionResult:
    """Brute-force moments of ``Y | Y <= b`` by rejection from ``N(theta, Omega)``.

    Proposals are drawn in batches via the Cholesky factor of ``Omega``; the
    first ``n_accepted`` accepted draws give the mean and its standard
    error.  The acceptance rate uses every proposal examined.
    """
    if n_accepted < 2:
        raise InvalidParamsError("n_accepted must be at least 2")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    chol = linalg.cholesky(spec.omega, lower=True)
    bound = spec.centered_upper
    n = spec.dim
    total = np.zeros(n)
    total_sq = np.zeros(n)
    kept = 0
    accepted = 0
    proposed = 0
    rate = 0.5
    while kept < n_accepted:
        if proposed >= max_proposals:
            raise BudgetExhaustedError(
                f"only {kept} of {n_accepted} draws accepted after {proposed} proposals")
        need = (n_accepted - kept) / max(rate, 1e-6) * 1.1
        batch = int(min(max(need, 2 ** 14), 2 ** 20, max_proposals - proposed))
        w = rng.standard_normal((batch, n)) @ chol.T
        ok = np.all(w <= bound, axis=1)
        proposed += batch
        accepted += int(ok.sum())
        rate = accepted / proposed
        good = w[ok][: n_accepted - kept]
        total += good.sum(axis=0)
        total_sq += (good * good).sum(axis=0)
        kept += good.shape[0]
    mean_w = total / kept
    var = (total_sq - kept * mean_w * mean_w) / (kept - 1)
    rate = accepted / proposed
    return RejectionResult(
        mean=spec.theta + mean_w,
        se=np.sqrt(np.maximum(var, 0.0) / kept),
        acceptance_rate=rate,
        acceptance_se=math.sqrt(rate * (1.0 - rate) / proposed),
        n_proposed=proposed,
    )


def paradox_residuals(cfg: SimConfig, pairs: Optional[WinnerPairs] = None) -> tuple[float, float]:
    """Mean and standard error of ``mu_star - E(mu_star | X_1..X_p)``.

    The full-data posterior mean puts weight ``r_p`` on the winner and the
    common weight ``r_1`` on every other arm.
    """
    if pairs is None or pairs.x_total is None:
        pairs = winner_pairs(cfg)
    dc = derive_constants(cfg.params)
    fitted = dc.r_self * pairs.x_star + dc.r_other * (pairs.x_total - pairs.x_star)
    return mean_and_se(pairs.mu_star - fitted)


def naive_residuals(cfg: SimConfig, pairs: Optional[WinnerPairs] = None) -> tuple[float, float]:
    """Mean and standard error of ``mu_star - X_star / (1 + sigma^2)``."""
    if pairs is None:
        pairs = winner_pairs(cfg)
    return mean_and_se(pairs.mu_star - pairs.x_star / (1.0 + cfg.params.sigma2))
