"""
Day-ahead price data: CSV ingestion and a synthetic stand-in generator.

A price file has one day per row and one field per hourly slot, with ``.``
as decimal separator and no header. A first row starting with a
non-numeric token is treated as a header and skipped with a warning.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np

from ..splitting import Dataset

__all__ = ["HORIZON", "PriceFormatError", "load_prices", "write_prices", "synth_prices",
           "price_profile"]

log = logging.getLogger(__name__)

#: hourly slots per day (0:00 to 13:00)
HORIZON = 14


class PriceFormatError(ValueError):
    """Malformed price file."""


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_prices(path, horizon: int = HORIZON) -> Dataset:
    """Read a price CSV into a dataset of ``horizon``-vectors.

    Raises
    ------
    PriceFormatError
        On an empty file, a row of the wrong arity or a non-finite value;
        the message names the offending line.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            fields = [f.strip() for f in row]
            if lineno == 1 and not _is_number(fields[0]):
                log.warning("skipping header row in %s", path)
                continue
            if len(fields) != horizon:
                raise PriceFormatError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {horizon}")
            try:
                vals = [float(f) for f in fields]
            except ValueError as exc:
                raise PriceFormatError(f"{path}: line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise PriceFormatError(f"{path}: line {lineno} contains a non-finite value")
            rows.append(vals)
    if not rows:
        raise PriceFormatError(f"{path}: no price rows")
    return Dataset(np.array(rows))


def write_prices(dataset: Dataset, path) -> None:
    """Write a dataset in the price CSV format, with round-trip precision."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in dataset.samples:
            w.writerow([repr(float(v)) for v in row])


def price_profile(horizon: int = HORIZON) -> np.ndarray:
    """Mean daily shape ``0.05 + 0.03 sin(2 pi (h - 6) / 24)`` in EUR/kWh for hours ``h = 0..horizon-1``."""
    h = np.arange(horizon)
    return 0.05 + 0.03 * np.sin(2.0 * np.pi * (h - 6) / 24.0)


def synth_prices(s: int, horizon: int = HORIZON, seed=0, sigma: float = 0.3) -> Dataset:
    """Synthetic day-ahead prices.

    Day ``j``, hour ``h``: ``price_profile(h) * exp(sigma * z_jh)`` with
    i.i.d. standard normal ``z``, drawn from ``numpy.random.default_rng(seed)``.
    Prices are positive with a lognormal (heavy right) tail.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((s, horizon))
    return Dataset(price_profile(horizon)[None, :] * np.exp(sigma * z))
