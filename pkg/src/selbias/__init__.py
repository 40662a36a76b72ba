"""Exact post-selection posterior means for the treatment selection problem.

Quick start::

    >>> from selbias import ModelParams, selection_bias
    >>> params = ModelParams.from_squares(p=10, gamma2=0.5, eta2=1.0, sigma=2.0)
    >>> round(selection_bias(params, 3.25).lambda_, 3)
    0.4
"""

__version__ = "0.1.0"

from ._backend import active_backend, available_backends, set_backend, using_backend
from .bias import (
    BiasReport,
    bias_table,
    max_cdf,
    max_exceedance_probability,
    post_selection_mean,
    select_winner,
    selection_bias,
)
from .errors import SelbiasError
from .model import (
    DerivedConstants,
    GaussianSpec,
    ModelParams,
    conditional_distribution,
    derive_constants,
    posterior_mean_full,
    posterior_mean_single,
)
from .mvn import (
    QmcConfig,
    QuadratureConfig,
    mvn_cdf_equicorr,
    mvn_cdf_general,
    std_normal_cdf,
    std_normal_pdf,
)
from .simulate import SimConfig, winner_pairs
from .truncmvn import TruncatedAboveSpec, marginal_density, normalizing_constant, truncated_mean
