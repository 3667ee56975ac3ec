"""Concentration distribution learning from label-distribution data.

A concentration distribution ``[b, mu]`` extends a label distribution with
a background concentration ``mu``: the description degree left to labels
outside the label space.
"""

from .core import (ConcentrationDistribution, Dataset, DimensionError, EvidenceVector,
                   LabelDistribution, ValidationError, normalize, validate_distribution)
from .cv import CvReport, ExperimentConfig, merge_reports, run_cv
from .data import (apparent_from_cd, build_cdl_from_ratings, hide_last_label, load_dataset,
                   noise_append_baseline, synth_generate)
from .dirichlet import (DirichletParams, LossBreakdown, amse_gradient, amse_loss,
                        dirichlet_mean, dirichlet_sample, mse_loss)
from .estimator import ConcentrationLearner, NoiseAppendBaseline, SoftmaxLDLRegressor
from .metrics import MetricReport, average_ranks, eval_metrics, friedman_statistic
from .network import ConfidenceModel, DivergenceError, NetworkConfig, train
from .recovery import apparent_expectation, bound_constant, recover

__version__ = "0.1.0"
