"""Principal component regression risk laboratory."""

from ._pcrlab import (
    ConfigError,
    ParameterError,
    Spectrum,
    __version__,
    build_grouping,
    find_gap_index_above,
    find_gap_index_below,
    gap_report,
    make_spectrum,
    mc_study,
    pca,
    pcr_fit,
    run_cli,
    run_replicate,
    sample_design,
)

__all__ = [
    "ConfigError",
    "ParameterError",
    "Spectrum",
    "__version__",
    "build_grouping",
    "find_gap_index_above",
    "find_gap_index_below",
    "gap_report",
    "make_spectrum",
    "mc_study",
    "pca",
    "pcr_fit",
    "run_cli",
    "run_replicate",
    "sample_design",
]
