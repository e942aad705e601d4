"""ASK modulation, time-reversal precoding filters, and power scaling.

A transmit chain is: bits -> rectangular NRZ ASK waveform -> convolution
with a unit-energy pre-filter -> rescaling to the requested mean power.
The pre-filter is either the conjugate time-reverse of the link's own
channel (time-reversal precoding) or a single unit tap (no precoding),
so power comparisons between the two are at equal transmit energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as _signal

from .chanmodel import Cir, same_grid

__all__ = [
    "ModParams",
    "Waveform",
    "TrFilter",
    "make_tr_filter",
    "make_identity_filter",
    "modulate_ask",
    "precode",
    "scale_to_power",
    "dbm_to_watts",
    "watts_to_dbm",
]


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watts) + 30.0


@dataclass(frozen=True)
class ModParams:
    """Amplitude-shift-keying parameters on a uniform baseband grid.

    The grid is implied: sample_interval = 1 / (bit_rate * samples_per_symbol).
    ``carrier_hz`` is carried as metadata only; all processing happens in
    complex baseband.
    """

    bit_rate: float
    samples_per_symbol: int = 4
    level_zero: float = 0.0
    level_one: float = 1.0
    carrier_hz: float = 140e9

    def __post_init__(self) -> None:
        if not self.bit_rate > 0.0:
            raise ValueError("bit_rate must be positive")
        if int(self.samples_per_symbol) != self.samples_per_symbol or self.samples_per_symbol < 1:
            raise ValueError(
                f"samples_per_symbol must be a positive integer, got {self.samples_per_symbol}"
            )
        object.__setattr__(self, "samples_per_symbol", int(self.samples_per_symbol))
        if not 0.0 <= self.level_zero < self.level_one:
            raise ValueError("need 0 <= level_zero < level_one")
        if not self.carrier_hz > 0.0:
            raise ValueError("carrier_hz must be positive")

    @property
    def sample_interval(self) -> float:
        return 1.0 / (self.bit_rate * self.samples_per_symbol)

    @property
    def mean_symbol_power(self) -> float:
        """E[a^2] for equiprobable bits."""
        return 0.5 * (self.level_zero**2 + self.level_one**2)


@dataclass(frozen=True)
class Waveform:
    """A sampled complex-baseband signal."""

    samples: np.ndarray
    sample_interval: float
    origin: str = ""

    def __post_init__(self) -> None:
        s = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if s.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0.0):
            raise ValueError(f"sample_interval must be positive, got {self.sample_interval}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def mean_power(self) -> float:
        """Mean |x|^2 over the full waveform length."""
        return self.energy / self.samples.size


@dataclass(frozen=True)
class TrFilter:
    """Unit-energy transmit pre-filter (time-reversal or identity)."""

    samples: np.ndarray
    sample_interval: float
    source_channel: str = ""

    def __post_init__(self) -> None:
        s = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if s.size < 1:
            raise ValueError("filter must contain at least one tap")
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0.0):
            raise ValueError(f"sample_interval must be positive, got {self.sample_interval}")
        energy = float(np.sum(np.abs(s) ** 2))
        if not math.isclose(energy, 1.0, rel_tol=1e-9):
            raise ValueError(f"filter must have unit energy, got {energy!r}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)


def _shortest_energy_window(g: np.ndarray, fraction: float) -> np.ndarray:
    """Shortest contiguous slice holding at least ``fraction`` of the energy."""
    p = np.abs(g) ** 2
    total = float(p.sum())
    # Back off by a few ulps so fraction=1.0 still accepts the full window.
    target = fraction * total * (1.0 - 1e-12)
    n = p.size
    best_lo, best_hi = 0, n
    acc = 0.0
    hi = 0
    for lo in range(n):
        while hi < n and acc < target:
            acc += float(p[hi])
            hi += 1
        if acc >= target and (hi - lo) < (best_hi - best_lo):
            best_lo, best_hi = lo, hi
        acc -= float(p[lo])
    return g[best_lo:best_hi].copy()


def make_tr_filter(cir: Cir, energy_keep: float | None = None) -> TrFilter:
    """Conjugate time-reversed, unit-energy copy of a channel response.

    Convolving the filter with its source channel produces a matched
    filter peak of sqrt(channel energy) at the alignment lag, which is
    what concentrates energy at the intended receiver. ``energy_keep``
    optionally truncates the filter to the shortest contiguous window
    holding at least that fraction of its energy, then renormalizes;
    by default no truncation is applied.
    """
    energy = cir.energy
    if energy <= 0.0:
        raise ValueError("degenerate channel: zero energy")
    g = np.conj(cir.samples[::-1]) / math.sqrt(energy)
    if energy_keep is not None:
        if not 0.0 < energy_keep <= 1.0:
            raise ValueError(f"energy_keep must lie in (0, 1], got {energy_keep}")
        g = _shortest_energy_window(g, energy_keep)
        g = g / math.sqrt(float(np.sum(np.abs(g) ** 2)))
    return TrFilter(g, cir.sample_interval, cir.label)


def make_identity_filter(cir: Cir) -> TrFilter:
    """Single unit tap on the channel's grid: the no-precoding baseline."""
    return TrFilter(np.ones(1, dtype=np.complex128), cir.sample_interval, cir.label)


def modulate_ask(bits: Sequence[int] | np.ndarray, params: ModParams) -> Waveform:
    """Rectangular NRZ ASK: each bit holds its level for samples_per_symbol samples."""
    b = np.asarray(bits, dtype=np.int64).reshape(-1)
    if b.size == 0:
        raise ValueError("empty bit sequence")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    levels = np.where(b == 1, params.level_one, params.level_zero).astype(np.complex128)
    return Waveform(np.repeat(levels, params.samples_per_symbol), params.sample_interval)


def precode(waveform: Waveform, tx_filter: TrFilter) -> Waveform:
    """Full linear convolution of the waveform with the pre-filter.

    FFT-based; output length is len(waveform) + len(filter) - 1.
    """
    if not same_grid(waveform.sample_interval, tx_filter.sample_interval):
        raise ValueError("grid mismatch between waveform and filter")
    out = _signal.fftconvolve(tx_filter.samples, waveform.samples)
    return Waveform(out, waveform.sample_interval, waveform.origin)


def scale_to_power(waveform: Waveform, p_dbm: float) -> Waveform:
    """Rescale so the mean |x|^2 over the full length hits the dBm target."""
    target = dbm_to_watts(p_dbm)
    mean = waveform.mean_power
    if mean <= 0.0:
        raise ValueError("cannot scale silence")
    return Waveform(
        waveform.samples * math.sqrt(target / mean),
        waveform.sample_interval,
        waveform.origin,
    )
