"""Individualized classifier ensembles built from overlapping clusters."""

from .association import AblationFlags, IceModel, IceParams, train_ice
from .data import Dataset, ZScoreScaler, encode_nominal, load_csv, load_dataset, stratified_folds
from .exceptions import DataError, InvariantError
from .framework import ICEClassifier, fit, load, resweep_decision, save
from .inference import PredictionContext, predict_batch, predict_instance
from .learners import (
    AdaBoostEnsemble,
    BaggingEnsemble,
    DecisionStump,
    L2LogisticRegression,
    PriorClassifier,
)

__version__ = "0.1.0"

__all__ = [
    "AblationFlags",
    "AdaBoostEnsemble",
    "BaggingEnsemble",
    "DataError",
    "Dataset",
    "DecisionStump",
    "ICEClassifier",
    "IceModel",
    "IceParams",
    "InvariantError",
    "L2LogisticRegression",
    "PredictionContext",
    "PriorClassifier",
    "ZScoreScaler",
    "encode_nominal",
    "fit",
    "load",
    "load_csv",
    "load_dataset",
    "predict_batch",
    "predict_instance",
    "resweep_decision",
    "save",
    "stratified_folds",
    "train_ice",
]
