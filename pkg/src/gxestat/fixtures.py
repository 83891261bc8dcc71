"""Loaders for the bundled demonstration datasets."""
from __future__ import annotations

from importlib import resources

from .data import ColumnSchema, TrialDataset, parse_csv

WATERMELON_SCHEMA = ColumnSchema(genotype="CLT", location="LC", trait="MY", year="YR", rep="RP")
OATS_SCHEMA = ColumnSchema(genotype="CLT", location="LC", trait="MY", rep="RP")


def _read(name: str) -> bytes:
    return resources.files("gxestat.datasets").joinpath(name).read_bytes()


def load_watermelon() -> TrialDataset:
    """Two-year, five-location, ten-variety melon yield trial (400 rows)."""
    return parse_csv(_read("watermelon.csv"), WATERMELON_SCHEMA)


def load_oats() -> TrialDataset:
    """Six-environment, 24-variety oat trial without a year factor (720 rows)."""
    return parse_csv(_read("oats.csv"), OATS_SCHEMA)


def fixture_path(name: str):
    """Filesystem path of a bundled CSV (for CLI examples and tests)."""
    return resources.files("gxestat.datasets").joinpath(name)
