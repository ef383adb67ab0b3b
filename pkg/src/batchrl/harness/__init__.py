"""Experiment orchestration: configuration, evaluation, CSV/SVG reports and the CLI."""
from .config import ExperimentConfig
from .evaluate import ConstantPolicy, EvalReport, RandomLinearBaseline, evaluate
from .report import emit_report, read_csv_table, write_csv

__all__ = [
    "ConstantPolicy",
    "EvalReport",
    "ExperimentConfig",
    "RandomLinearBaseline",
    "emit_report",
    "evaluate",
    "read_csv_table",
    "write_csv",
]
