"""Choosing backend flags for a program and running the chosen configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .backend import (BackendAdapter, BenchmarkSpec, RawVerdict, VerificationOutcome,
                      run_backend)
from .dtree import DecisionTreeModel, read_model
from .errors import DimensionMismatch
from .features import ProgramFeatures, features_of_file
from .flags import FlagConfiguration, FlagGrid, default_config, encode, render_flags

MODEL_WIDTH = 19

EXIT_OK = 0
EXIT_UNKNOWN = 10
EXIT_TIMEOUT = 20
EXIT_ERROR = 30
EXIT_USAGE = 64

EXIT_CODES = {
    RawVerdict.TRUE: EXIT_OK,
    RawVerdict.FALSE: EXIT_OK,
    RawVerdict.UNKNOWN: EXIT_UNKNOWN,
    RawVerdict.TIMEOUT: EXIT_TIMEOUT,
    RawVerdict.ERROR: EXIT_ERROR,
}


@dataclass(frozen=True)
class Prediction:
    chosen: FlagConfiguration
    chosen_index: int
    predicted_class: int
    per_config_classes: tuple  # of (index, class)


def select_flags(model: DecisionTreeModel, features: ProgramFeatures, grid: FlagGrid) -> Prediction:
    """Score every grid configuration and keep the first with the lowest class."""
    if model.feature_count != MODEL_WIDTH:
        raise DimensionMismatch(
            f"flag selection needs a {MODEL_WIDTH}-feature model, got {model.feature_count}"
        )
    if len(grid) == 0:
        raise ValueError("empty flag grid")
    base = features.as_list()
    scores = tuple((i, model.leaf_for(base + encode(cfg)).predicted) for i, cfg in enumerate(grid))
    best_index, best_class = min(scores, key=lambda s: (s[1], s[0]))
    return Prediction(grid[best_index], best_index, best_class, scores)


@dataclass(frozen=True)
class VerifyResult:
    outcome: VerificationOutcome
    config: FlagConfiguration
    prediction: Prediction | None

    @property
    def exit_code(self):
        return EXIT_CODES[self.outcome.raw]


def verify(program, property_path, model_path, grid: FlagGrid, adapter: BackendAdapter,
           timeout_s: float, fallback_default=False) -> VerifyResult:
    """Extract features, pick flags with the model, and run the backend once.

    With ``fallback_default`` the model is not consulted and the backend
    runs with its default settings.
    """
    if not os.path.isfile(program):
        raise FileNotFoundError(f"program not found: {program}")
    prediction = None
    if fallback_default:
        config = default_config()
    else:
        model = read_model(model_path)
        prediction = select_flags(model, features_of_file(program), grid)
        config = prediction.chosen
    bench = BenchmarkSpec(program, property_path or "")
    outcome = run_backend(bench, config, timeout_s, adapter)
    return VerifyResult(outcome, config, prediction)


def describe_flags(config: FlagConfiguration, strategy_flags=None) -> str:
    args = render_flags(config, strategy_flags)
    return " ".join(args) if args else "(defaults)"
