"""Flag prediction for bounded model checking of concurrent C programs."""

from .backend import (BenchmarkSpec, Expected, RawVerdict, Verdict, VerificationOutcome,
                      classify, classify_outcome, parse_raw_verdict, run_backend)
from .campaign import (CampaignManifest, DatasetRow, read_dataset, run_campaign, split_train,
                       write_dataset)
from .dtree import (DecisionTreeModel, TrainingSample, TrainParams, balance_weights,
                    load_model, predict_class, save_model, train)
from .features import ProgramFeatures, SourceUnit, extract_features, parse_source
from .flags import (FlagConfiguration, FlagGrid, Strategy, canonical_grid, default_config,
                    encode, render_flags)
from .predict import Prediction, select_flags, verify
from .report import ComparisonReport, report_compare

__version__ = "0.1.0"

__all__ = [
    "BenchmarkSpec", "Expected", "RawVerdict", "Verdict", "VerificationOutcome", "classify",
    "classify_outcome", "parse_raw_verdict", "run_backend",
    "CampaignManifest", "DatasetRow", "read_dataset", "run_campaign", "split_train",
    "write_dataset",
    "DecisionTreeModel", "TrainingSample", "TrainParams", "balance_weights", "load_model",
    "predict_class", "save_model", "train",
    "ProgramFeatures", "SourceUnit", "extract_features", "parse_source",
    "FlagConfiguration", "FlagGrid", "Strategy", "canonical_grid", "default_config", "encode",
    "render_flags",
    "Prediction", "select_flags", "verify",
    "ComparisonReport", "report_compare",
]
