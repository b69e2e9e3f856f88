"""Python bindings for the porkcast forecasting library."""

from ._porkcast import (
    DataError,
    FetchError,
    FitError,
    Panel,
    adf_test,
    build_dataset,
    correlations,
    evaluate,
    load_csv,
    r2,
    ridge_fit,
    rmse,
    run_command,
    sarima_forecast,
    select_markets,
    synthetic_panel,
)

__all__ = [
    "DataError",
    "FetchError",
    "FitError",
    "Panel",
    "adf_test",
    "build_dataset",
    "correlations",
    "evaluate",
    "load_csv",
    "r2",
    "ridge_fit",
    "rmse",
    "run_command",
    "sarima_forecast",
    "select_markets",
    "synthetic_panel",
]
