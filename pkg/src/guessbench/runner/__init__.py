"""Experiment pipeline: simulate, analyze, out-of-sample validation and reporting."""
from .analyze import analyze, load_traces, write_metrics
from .config import AnalysisFlags, ConfigError, ExperimentConfig, load_config
from .oos import compare_runs, validate_oos
from .report import report
from .simulate import RunManifest, simulate

__all__ = ["AnalysisFlags", "ConfigError", "ExperimentConfig", "RunManifest", "analyze", "compare_runs",
           "load_config", "load_traces", "report", "simulate", "validate_oos", "write_metrics"]
