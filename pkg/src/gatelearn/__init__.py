"""Greedy active learning (GATE) for logistic-regression classifiers.

Batch subject selection combines uncertainty filtering with a locally
D-optimal argmax; variables enter one at a time by gradient magnitude
until the normalized information determinant stops changing.
"""

from .data import DataPool, LabelOracle, case_spec, gen_synthetic, initial_split, load_csv
from .gate import (
    GateConfig,
    RunResult,
    run_baseline_full,
    run_baseline_random_full,
    run_baseline_random_selected,
    run_gate,
)
from .logistic import IrlsControls, LogisticModel, fit_irls

__all__ = [
    "DataPool",
    "GateConfig",
    "IrlsControls",
    "LabelOracle",
    "LogisticModel",
    "RunResult",
    "case_spec",
    "fit_irls",
    "gen_synthetic",
    "initial_split",
    "load_csv",
    "run_baseline_full",
    "run_baseline_random_full",
    "run_baseline_random_selected",
    "run_gate",
]

__version__ = "0.1.0"
