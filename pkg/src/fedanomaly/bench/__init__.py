from .config import ExperimentSpec, parse_config, parse_config_dict
from .report import render_report
from .runner import ResultRow, load_results, run_spec, run_suite

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "load_results",
    "parse_config",
    "parse_config_dict",
    "render_report",
    "run_spec",
    "run_suite",
]
