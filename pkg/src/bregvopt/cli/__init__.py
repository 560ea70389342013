"""Configuration, orchestration and reporting for command-line runs."""
from .batch import RunOutcome, csv_text, execute, run_batch, summary_csv
from .config import RunConfig, config_from_dict, parse_config, serialize
from .rates import fit_rates

__all__ = [
    "RunConfig",
    "RunOutcome",
    "config_from_dict",
    "csv_text",
    "execute",
    "fit_rates",
    "parse_config",
    "run_batch",
    "serialize",
    "summary_csv",
]
