"""Bayesian optimization over random projections of manifold feature maps."""

from .acquisition import AcquisitionProblem, composed_acquisition, expected_improvement, maximize_acquisition
from .benchmarks import BaseFunction, ComposedObjective, eval_base, eval_composed, make_linear_objective, make_objective
from .gp import GammaPrior, GpModel, Kernel, fit_map, neg_log_marginal_likelihood, posterior, posterior_sample
from .losses import TrainingConfig, UnlabeledSet, combined_loss, consistency_loss, supervised_loss, train_feature_map
from .manifolds import IdentityMap, LinearMap, MixedOracle, SphereMap
from .neural import NeuralMap
from .optimizer import History, RunConfig, random_embedding_run, random_search_run, rpmbo_run
from .projections import Projection, SearchSpace, back_project, latin_hypercube, project, sample_orthogonal

__version__ = "0.1.0"
