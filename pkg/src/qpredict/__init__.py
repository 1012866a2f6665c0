"""Learning quantum predictive models of stochastic processes from data.

Classical side: unifilar hidden Markov machines, exact word statistics and
the best achievable distortion of a dimension-limited classical model.
Quantum side: Kraus-operator memories fitted by maximum likelihood, scored
by their predictive distortion and compiled to a unitary.
"""

from .bound import BoundReport, CoarseGrainedModel, StatePartition, classical_lower_bound, optimal_merged_morph
from .distortion import DistortionReport, EvalProtocol, distortion, kl_divergence
from .errors import GuardError, NumericalError, QPredictError, TrainingFailedError, ValidationError, ZeroProbabilityError
from .process import (
    EpsilonMachine,
    load_machine,
    markov_order,
    sample_sequence,
    stationary_distribution,
    uniform_renewal,
    word_distribution,
)
from .quantum import (
    KrausModel,
    ParamSet,
    complete_unitary,
    encode_past,
    leading_eigenpair,
    recover_kraus,
    sequence_likelihood,
)
from .trainer import TrainConfig, TrainResult, cost, gradient, train

__all__ = [
    "BoundReport",
    "CoarseGrainedModel",
    "DistortionReport",
    "EpsilonMachine",
    "EvalProtocol",
    "GuardError",
    "KrausModel",
    "NumericalError",
    "ParamSet",
    "QPredictError",
    "StatePartition",
    "TrainConfig",
    "TrainResult",
    "TrainingFailedError",
    "ValidationError",
    "ZeroProbabilityError",
    "classical_lower_bound",
    "complete_unitary",
    "cost",
    "distortion",
    "encode_past",
    "gradient",
    "kl_divergence",
    "leading_eigenpair",
    "load_machine",
    "markov_order",
    "optimal_merged_morph",
    "recover_kraus",
    "sample_sequence",
    "sequence_likelihood",
    "stationary_distribution",
    "train",
    "uniform_renewal",
    "word_distribution",
]
