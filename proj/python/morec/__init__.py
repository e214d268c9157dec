"""Tri-level multi-objective training for a matrix-factorization recommender.

The heavy lifting lives in the compiled extension; this package re-exports it
and adds a couple of convenience helpers.
"""

from ._morec import (
    CoordinatorMode,
    EvalSplit,
    InteractionDataset,
    ItemCatalog,
    ItemMeta,
    LossMode,
    MfModel,
    Objective,
    PiController,
    RawInteractions,
    SynthConfig,
    SynthResult,
    TrainConfig,
    build_catalog,
    continual_train,
    evaluate,
    imp,
    kcore_filter,
    leave_one_out_split,
    make_model,
    pareto_frontier,
    pretrain,
    run_experiment,
    synth_generate,
)

__version__ = "0.1.0"


def synth_config(**kwargs):
    """Build a SynthConfig from keyword arguments."""
    cfg = SynthConfig()
    for key, value in kwargs.items():
        if not hasattr(cfg, key):
            raise AttributeError(f"SynthConfig has no field {key!r}")
        setattr(cfg, key, value)
    return cfg


def train_config(**kwargs):
    """Build a TrainConfig from keyword arguments."""
    cfg = TrainConfig()
    for key, value in kwargs.items():
        if not hasattr(cfg, key):
            raise AttributeError(f"TrainConfig has no field {key!r}")
        setattr(cfg, key, value)
    return cfg


__all__ = [name for name in dir() if not name.startswith("_")]
