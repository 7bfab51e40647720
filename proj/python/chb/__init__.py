"""Cahn-Hilliard-Brinkman tumour growth simulator."""

from ._core import (
    Grid,
    RunConfig,
    acceptance,
    brinkman_oracle,
    execute,
    load_config,
    make_grid,
    mms_neumann_poisson,
    mms_robin_diffusion,
    parse_config,
    simulate,
    timeseries_columns,
    validate,
)

__all__ = [
    "Grid",
    "RunConfig",
    "acceptance",
    "brinkman_oracle",
    "execute",
    "load_config",
    "make_grid",
    "mms_neumann_poisson",
    "mms_robin_diffusion",
    "parse_config",
    "simulate",
    "timeseries_columns",
    "validate",
]
