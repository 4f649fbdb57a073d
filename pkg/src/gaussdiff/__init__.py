"""Gaussianization preprocessing for denoising diffusion models.

The library fits an invertible iterative Gaussianization transform (ICA plus
per-component KDE-based marginal Gaussianization), trains a minimal DDPM on
raw or Gaussianized mixture data, and scores generated samples against the
exact mixture density.  The ``gaussdiff`` CLI orchestrates the full
baseline-vs-gaussianized comparison.
"""

from .gmm import (
    GmmSpec, Dataset, default_spec, sample_gmm, gmm_log_density, gmm_log_densities,
    average_log_likelihood, reference_log_likelihood,
)
from .ica import IcaModel, IcaConfig, fit_ica, ica_forward, ica_inverse
from .marginal import (
    MarginalMap, kde_pdf, silverman_bandwidth, fit_marginal, marginal_cdf,
    marginal_inverse_cdf, std_normal_cdf, std_normal_inverse_cdf,
    gaussianize_1d, degaussianize_1d,
)
from .gaussianizer import (
    MarginalConfig, GaussianizerStack, fit_gaussianizer,
    gaussianizer_forward, gaussianizer_inverse, save_stack, load_stack,
)
from .ddpm import (
    DiffusionSchedule, EpsNetParams, TrainConfig, make_schedule, forward_diffuse,
    init_eps_net, eps_net_forward, train_step, train, reverse_step, sample,
    sample_with_predictor,
)
from .evalkit import LlCurve, ll_vs_step, ks_statistic, max_abs_offdiag_corr

__version__ = "0.1.0"
