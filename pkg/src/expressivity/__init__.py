"""Attribute expressivity of feature representations via MINE lower bounds."""

from .mine import MineParams, MineRunResult, TrainConfig, TrainingDiverged, run_mine
from .protocols import (
    AttributeVector,
    ChannelSubset,
    ExpressivityEstimate,
    FeatureMapStack,
    protocol1,
    protocol2,
)

__all__ = [
    "AttributeVector",
    "ChannelSubset",
    "ExpressivityEstimate",
    "FeatureMapStack",
    "MineParams",
    "MineRunResult",
    "TrainConfig",
    "TrainingDiverged",
    "protocol1",
    "protocol2",
    "run_mine",
]
