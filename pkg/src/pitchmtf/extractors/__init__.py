from .adapters import (
    BUILTINS,
    ExtractorAdapter,
    builtin_adapters,
    load_registry,
    parse_csv_time_f0,
    parse_one_column,
    run_adapter,
    run_external,
)
from .builtin import apply_validation_system, extract_acf, extract_cepstrum, extract_identity

__all__ = [
    "BUILTINS",
    "ExtractorAdapter",
    "apply_validation_system",
    "builtin_adapters",
    "extract_acf",
    "extract_cepstrum",
    "extract_identity",
    "load_registry",
    "parse_csv_time_f0",
    "parse_one_column",
    "run_adapter",
    "run_external",
]
