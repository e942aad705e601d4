"""Pilot-trained threshold detection and bit error accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sigchain import ModParams, Waveform

__all__ = [
    "BerResult",
    "train_threshold",
    "demodulate",
    "count_errors",
    "wilson_interval",
]

# Two-sided 95% normal quantile used by the Wilson score interval.
Z_95 = 1.959963984540054


@dataclass(frozen=True)
class BerResult:
    bits_total: int
    bit_errors: int
    ber: float
    wilson_ci95: tuple[float, float]


def wilson_interval(errors: int, total: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total < 1:
        raise ValueError("total must be at least 1")
    if not 0 <= errors <= total:
        raise ValueError("errors must lie in [0, total]")
    p = errors / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    # The bound is exactly 0 (or 1) at the degenerate counts; rounding in
    # center-half would otherwise leave a ~1e-18 residue that excludes p=0.
    lo = 0.0 if errors == 0 else max(center - half, 0.0)
    hi = 1.0 if errors == total else min(center + half, 1.0)
    return (lo, hi)


def _decision_samples(rx: Waveform, offset: int, count: int, sps: int) -> np.ndarray:
    if offset < 0:
        raise ValueError("offset must be non-negative")
    last = offset + (count - 1) * sps
    if last >= rx.samples.size:
        raise ValueError("insufficient samples for the requested decisions")
    return rx.samples[offset : last + 1 : sps].real


def train_threshold(
    rx: Waveform,
    pilot_bits: Sequence[int] | np.ndarray,
    offset: int,
    params: ModParams,
) -> float:
    """Midpoint of the two classes' mean decision samples over the pilot.

    The waveform is expected to be phase-derotated already, so the real
    part at the decision instants carries the signal.
    """
    pilot = np.asarray(pilot_bits, dtype=np.int64).reshape(-1)
    if pilot.size == 0 or not (np.any(pilot == 0) and np.any(pilot == 1)):
        raise ValueError("pilot lacks both symbols")
    vals = _decision_samples(rx, offset, pilot.size, params.samples_per_symbol)
    return float(0.5 * (vals[pilot == 0].mean() + vals[pilot == 1].mean()))


def demodulate(
    rx: Waveform,
    offset: int,
    threshold: float,
    n_bits: int,
    params: ModParams,
) -> np.ndarray:
    """Slice the real part at symbol-spaced decision instants."""
    if n_bits < 1:
        raise ValueError("n_bits must be at least 1")
    vals = _decision_samples(rx, offset, n_bits, params.samples_per_symbol)
    return (vals > threshold).astype(np.int64)


def count_errors(tx_bits: Sequence[int] | np.ndarray, rx_bits: Sequence[int] | np.ndarray) -> BerResult:
    tx = np.asarray(tx_bits).reshape(-1)
    rx = np.asarray(rx_bits).reshape(-1)
    if tx.size != rx.size:
        raise ValueError("length mismatch between transmitted and received bits")
    if tx.size == 0:
        raise ValueError("empty bit sequence")
    errors = int(np.count_nonzero(tx != rx))
    total = int(tx.size)
    return BerResult(total, errors, errors / total, wilson_interval(errors, total))
