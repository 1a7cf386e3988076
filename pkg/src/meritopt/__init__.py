"""Surrogate-assisted design optimization with active learning.

The package optimizes a scalar merit over a nine-variable engine design space
against an expensive evaluator: stacked five-learner surrogates per output
target, one-time Bayesian hyperparameter tuning, a genetic optimizer over the
surrogate merit, and a batched active-learning campaign with persistence and
resume.
"""

from .active_loop import (
    Campaign,
    LoopState,
    Proposal,
    check_convergence,
    compute_epsilon,
    propose_batch,
    resume_campaign,
    run_campaign,
)
from .config import CampaignConfig
from .design_space import (
    VARIABLE_NAMES,
    DesignPoint,
    DesignSpace,
    denormalize,
    lhs_mdu_sample,
    normalize,
)
from .errors import (
    BatchEvaluationError,
    ConfigError,
    DatasetError,
    EvaluationTimeout,
    EvaluatorError,
    MeritoptError,
    ProtocolError,
    TrainingError,
    ValidationError,
)
from .evaluators import (
    Dataset,
    EvaluatedSample,
    ExternalCommandEvaluator,
    VirtualEngine,
    evaluate_batch,
    load_dataset,
)
from .genetic import GAConfig, GAResult, optimize
from .hyper_tuner import TuneResult, TuningBudget, bo_minimize, tune, tune_all
from .merit import TARGETS, MeritConstants, ObjectiveVector, merit, merit_formula
from .reporting import amse_report, r_squared, write_reports
from .super_learner import Ensemble, SuperLearner, kfold_split, train_super_learner

__version__ = "0.1.0"

__all__ = [
    "Campaign",
    "CampaignConfig",
    "Dataset",
    "DesignPoint",
    "DesignSpace",
    "Ensemble",
    "EvaluatedSample",
    "ExternalCommandEvaluator",
    "GAConfig",
    "GAResult",
    "LoopState",
    "MeritConstants",
    "MeritoptError",
    "ObjectiveVector",
    "Proposal",
    "SuperLearner",
    "TARGETS",
    "TuneResult",
    "TuningBudget",
    "VARIABLE_NAMES",
    "VirtualEngine",
    "amse_report",
    "bo_minimize",
    "check_convergence",
    "compute_epsilon",
    "denormalize",
    "evaluate_batch",
    "kfold_split",
    "lhs_mdu_sample",
    "load_dataset",
    "merit",
    "merit_formula",
    "normalize",
    "optimize",
    "propose_batch",
    "r_squared",
    "resume_campaign",
    "run_campaign",
    "train_super_learner",
    "tune",
    "tune_all",
    "write_reports",
    "BatchEvaluationError",
    "ConfigError",
    "DatasetError",
    "EvaluationTimeout",
    "EvaluatorError",
    "ProtocolError",
    "TrainingError",
    "ValidationError",
]
