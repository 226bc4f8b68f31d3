"""Evidential binary classification with beta opinions.

A small numpy library implementing joint class-probability and uncertainty
prediction from per-class evidence, coverage-based sample rejection, and
uncertainty-driven bootstrapping of noisy training sets.
"""

from .specfun import BetaParams, beta_kl_to_uniform, beta_pdf, digamma, log_gamma, trigamma
from .evidential import (
    AnnealedWeight,
    BetaOpinion,
    Evidence,
    LabeledTarget,
    anneal,
    data_loss,
    data_loss_mc_oracle,
    loss_gradient_wrt_evidence,
    opinion_from_evidence,
    reg_loss,
    total_loss,
)
from .net import ModelParams, NetworkSpec, backward, forward_evidence, forward_sigmoid_baseline, init_params
from .train import TrainConfig, TrainedModel, fit, fit_ensemble, predict, score_dataset
from .metrics import ScoredSet, best_working_point, f1_scores, roc_auc
from .selection import (
    BootstrapPlan,
    CoverageReport,
    bootstrap_filter,
    bootstrap_retrain,
    coverage_curve,
    reject_by_probability_interval,
    reject_by_uncertainty,
)
from .data import Dataset, Sample, gen_gaussian_overlap, gen_ood_probe, load_csv, save_csv, split_by_group

__version__ = "0.1.0"
