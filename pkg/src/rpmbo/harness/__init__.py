"""Experiment orchestration, the overfitting study, statistics and reporting."""

from .config import ExperimentSpec, OverfitSpec, default_run_config, load_spec
from .experiment import aggregate_incumbents, m_sweep, run_experiment
from .overfit import overfit_metric, overfit_loss_from_samples, run_overfit_study
from .wilcoxon import wilcoxon_signed_rank

__all__ = [
    "ExperimentSpec",
    "OverfitSpec",
    "aggregate_incumbents",
    "default_run_config",
    "load_spec",
    "m_sweep",
    "overfit_loss_from_samples",
    "overfit_metric",
    "run_experiment",
    "run_overfit_study",
    "wilcoxon_signed_rank",
]
