"""Channel impulse response construction, synthesis, and characterization.

Channels between nodes of the package are modeled as tapped delay lines:
a sparse set of multipath components, each with an amplitude, a phase,
and a propagation delay, rendered onto a uniform complex-baseband sample
grid. CIRs can be built from explicit taps, synthesized as reverberant
realizations with a prescribed RMS delay spread, or imported from a
sampled in-band frequency response (for example a field-solver export).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as _signal

__all__ = [
    "Tap",
    "Cir",
    "ReverbParams",
    "render_taps",
    "synth_reverberant",
    "synth_correlated_pair",
    "import_frequency_response",
    "rms_delay_spread",
    "channel_correlation",
    "read_frequency_response",
    "read_cir_csv",
    "write_cir_csv",
    "same_grid",
]

# Relative tolerance when deciding whether two sample intervals describe
# the same uniform grid. Grids normally come from the same arithmetic
# expression, so this only has to absorb float representation noise.
GRID_RTOL = 1e-9


def same_grid(dt_a: float, dt_b: float) -> bool:
    """Whether two sample intervals describe the same uniform grid."""
    return math.isclose(dt_a, dt_b, rel_tol=GRID_RTOL)


@dataclass(frozen=True)
class Tap:
    """One multipath component: linear amplitude, phase (rad), delay (s)."""

    amplitude: float
    phase: float
    delay: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0.0):
            raise ValueError(f"tap amplitude must be finite and >= 0, got {self.amplitude}")
        if not math.isfinite(self.phase):
            raise ValueError(f"tap phase must be finite, got {self.phase}")
        if not (math.isfinite(self.delay) and self.delay >= 0.0):
            raise ValueError(f"tap delay must be finite and >= 0, got {self.delay}")

    @property
    def gain(self) -> complex:
        """Complex gain, amplitude * exp(j*phase)."""
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class Cir:
    """Uniformly sampled complex-baseband channel impulse response.

    The sample array is copied on construction and frozen, so a Cir can be
    shared between scenarios and threads without defensive copies.
    """

    samples: np.ndarray
    sample_interval: float
    label: str = ""

    def __post_init__(self) -> None:
        s = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if s.size < 1:
            raise ValueError("CIR must contain at least one sample")
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0.0):
            raise ValueError(f"sample_interval must be positive, got {self.sample_interval}")
        if not np.all(np.isfinite(s.view(np.float64))):
            raise ValueError("CIR samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def energy(self) -> float:
        """Sum of |h[n]|^2 over the grid."""
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_interval


def render_taps(
    taps: Iterable[Tap],
    sample_interval: float,
    duration: float,
    label: str = "",
) -> Cir:
    """Render a tap list onto a uniform grid of the given duration.

    Each tap deposits its complex gain on the sample index nearest its
    delay; taps that land on the same index add coherently.
    """
    tap_list = list(taps)
    if not tap_list:
        raise ValueError("no taps")
    if sample_interval <= 0.0:
        raise ValueError("sample_interval must be positive")
    if duration < max(t.delay for t in tap_list):
        raise ValueError("tap beyond duration")
    n = max(int(round(duration / sample_interval)), 1)
    out = np.zeros(n, dtype=np.complex128)
    for tap in tap_list:
        idx = int(round(tap.delay / sample_interval))
        if idx >= n:
            # A delay within half a sample of the grid end rounds past it.
            raise ValueError("tap beyond duration")
        out[idx] += tap.gain
    return Cir(out, sample_interval, label)


@dataclass(frozen=True)
class ReverbParams:
    """Parameters of the synthetic reverberant channel generator.

    Tap delays are drawn uniformly over [0, max_delay] and complex gains
    are circularly symmetric Gaussian with an exponentially decaying mean
    power profile exp(-delay/decay). The decay constant is solved so the
    ensemble RMS delay spread matches ``rms_delay_spread_target``. When
    ``rician_k`` is positive a deterministic tap at zero delay carries the
    fraction k/(1+k) of the power. The realization is rescaled so its
    energy equals ``total_energy`` exactly.
    """

    sample_interval: float
    num_taps: int
    rms_delay_spread_target: float
    max_delay: float
    rician_k: float = 0.0
    total_energy: float = 1.0

    def __post_init__(self) -> None:
        if not self.sample_interval > 0.0:
            raise ValueError("sample_interval must be positive")
        if int(self.num_taps) != self.num_taps or self.num_taps < 1:
            raise ValueError(f"num_taps must be a positive integer, got {self.num_taps}")
        object.__setattr__(self, "num_taps", int(self.num_taps))
        if not self.max_delay > 0.0:
            raise ValueError("max_delay must be positive")
        if not self.rician_k >= 0.0:
            raise ValueError("rician_k must be >= 0")
        if not self.total_energy > 0.0:
            raise ValueError("total_energy must be positive")
        if not 0.0 < self.rms_delay_spread_target < self.max_delay:
            raise ValueError("rms_delay_spread_target must lie in (0, max_delay)")
        # The profile family cannot exceed the spread of its flat limit;
        # a dominant zero-delay tap lowers the ceiling further.
        diffuse = 1.0 / (1.0 + self.rician_k)
        ceiling = self.max_delay * math.sqrt(diffuse / 3.0 - diffuse * diffuse / 4.0)
        if not self.rms_delay_spread_target < ceiling:
            raise ValueError(
                "rms_delay_spread_target unreachable: must be below "
                f"{ceiling:.6e} s for max_delay={self.max_delay:.6e} s "
                f"and rician_k={self.rician_k}"
            )


def _truncated_exp_moments(decay: float, t_max: float) -> tuple[float, float]:
    """First two moments of an exponential delay density truncated to [0, t_max]."""
    x = t_max / decay
    if x > 50.0:
        # Truncation is immaterial this far into the tail.
        return decay, 2.0 * decay * decay
    if x < 0.02:
        # Series around the flat limit; the direct formula cancels badly here.
        m1 = t_max * (0.5 - x / 12.0 + x**3 / 720.0)
        m2 = t_max * t_max * (1.0 / 3.0 - x / 12.0 + x * x / 360.0)
        return m1, m2
    r = 1.0 / math.expm1(x)
    m1 = decay - t_max * r
    m2 = 2.0 * decay * decay - (t_max * t_max + 2.0 * decay * t_max) * r
    return m1, m2


def _ensemble_delay_spread(decay: float, params: ReverbParams) -> float:
    """Ensemble RMS delay spread of the generator's power-delay profile."""
    diffuse = 1.0 / (1.0 + params.rician_k)
    m1, m2 = _truncated_exp_moments(decay, params.max_delay)
    mean = diffuse * m1
    var = diffuse * m2 - mean * mean
    return math.sqrt(max(var, 0.0))


def _solve_decay_constant(params: ReverbParams) -> float:
    """Decay constant whose ensemble RMS delay spread matches the target."""
    target = params.rms_delay_spread_target
    lo = target / 100.0
    hi = 1e9 * params.max_delay
    # Log-scale bisection; the spread grows monotonically with the decay
    # constant between the two bracket ends.
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if _ensemble_delay_spread(mid, params) < target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _synth_reverberant(rng: np.random.Generator, params: ReverbParams, label: str) -> Cir:
    decay = _solve_decay_constant(params)
    delays = rng.uniform(0.0, params.max_delay, params.num_taps)
    profile = np.exp(-delays / decay)
    gains = np.sqrt(profile / 2.0) * (
        rng.standard_normal(params.num_taps) + 1j * rng.standard_normal(params.num_taps)
    )
    dt = params.sample_interval
    n = int(np.rint(params.max_delay / dt)) + 1
    h = np.zeros(n, dtype=np.complex128)
    np.add.at(h, np.rint(delays / dt).astype(np.intp), gains)
    if params.rician_k > 0.0:
        diffuse_energy = float(np.sum(np.abs(gains) ** 2))
        h[0] += math.sqrt(params.rician_k * diffuse_energy)
    energy = float(np.sum(np.abs(h) ** 2))
    h *= math.sqrt(params.total_energy / energy)
    return Cir(h, dt, label)


def synth_reverberant(seed: int, params: ReverbParams, label: str = "") -> Cir:
    """Draw one reverberant channel realization.

    The result is a pure function of (seed, params): the same inputs
    reproduce the same samples bit for bit.
    """
    return _synth_reverberant(np.random.default_rng(seed), params, label)


def synth_correlated_pair(
    seed: int,
    params: ReverbParams,
    rho_target: float,
    labels: tuple[str, str] = ("corr-a", "corr-b"),
) -> tuple[Cir, Cir]:
    """Draw two reverberant channels with a prescribed correlation.

    The second channel is a mix rho*h1 + sqrt(1-rho^2)*h_indep whose
    mixing weight is bisected until channel_correlation(h1, h2) lands
    within 0.02 of ``rho_target``. Independent draws of this generator
    are never exactly uncorrelated, so targets below that floor return
    the plain independent pair. Both outputs carry ``total_energy``.
    """
    if not 0.0 <= rho_target <= 1.0:
        raise ValueError(f"rho_target must lie in [0, 1], got {rho_target}")
    child_a, child_b = np.random.SeedSequence(seed).spawn(2)
    base = _synth_reverberant(np.random.default_rng(child_a), params, labels[0])
    indep = _synth_reverberant(np.random.default_rng(child_b), params, labels[1])

    def mix(rho: float) -> Cir:
        m = rho * base.samples + math.sqrt(max(1.0 - rho * rho, 0.0)) * indep.samples
        energy = float(np.sum(np.abs(m) ** 2))
        return Cir(m * math.sqrt(params.total_energy / energy), params.sample_interval, labels[1])

    if rho_target >= 1.0 - 1e-12:
        return base, mix(1.0)
    if rho_target <= channel_correlation(base, mix(0.0)):
        return base, mix(0.0)

    lo, hi = 0.0, 1.0
    for _ in range(64):
        rho = 0.5 * (lo + hi)
        second = mix(rho)
        measured = channel_correlation(base, second)
        if abs(measured - rho_target) <= 0.02:
            return base, second
        if measured < rho_target:
            lo = rho
        else:
            hi = rho
    raise ValueError("correlation unreachable")


def rms_delay_spread(cir: Cir) -> float:
    """Power-weighted standard deviation of the delay profile, in seconds."""
    p = np.abs(cir.samples) ** 2
    energy = float(p.sum())
    if energy <= 0.0:
        raise ValueError("CIR has zero energy")
    t = cir.times
    mean = float((p * t).sum()) / energy
    return math.sqrt(float((p * (t - mean) ** 2).sum()) / energy)


def channel_correlation(h1: Cir, h2: Cir) -> float:
    """Peak |cross-correlation| normalized by the geometric mean energy.

    Uses the conjugate (matched-filter) convention, so a delayed and
    phase-rotated copy of a channel correlates to exactly 1.
    """
    if not same_grid(h1.sample_interval, h2.sample_interval):
        raise ValueError("grid mismatch between the two CIRs")
    e1, e2 = h1.energy, h2.energy
    if e1 <= 0.0 or e2 <= 0.0:
        raise ValueError("CIR has zero energy")
    cc = _signal.correlate(h1.samples, h2.samples, mode="full", method="auto")
    return float(np.max(np.abs(cc)) / math.sqrt(e1 * e2))


def import_frequency_response(
    records: Sequence[tuple[float, float, float]],
    window: str = "rectangular",
    label: str = "",
) -> Cir:
    """Build a CIR from a uniformly sampled complex frequency response.

    ``records`` holds (frequency_hz, real, imag) rows with strictly
    increasing, uniformly spaced frequencies (within 1e-6 relative). The
    chosen window ("rectangular" or "hann") is applied across the band
    before the inverse DFT. The returned grid has
    sample_interval = 1 / (N * spacing).
    """
    rows = list(records)
    if len(rows) < 2:
        raise ValueError("insufficient data: need at least two frequency samples")
    freq = np.array([float(r[0]) for r in rows])
    resp = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    df = np.diff(freq)
    if np.any(df <= 0.0):
        raise ValueError("irregular grid: frequencies must be strictly increasing")
    step = float(np.mean(df))
    if float(np.max(np.abs(df - step))) > 1e-6 * step:
        raise ValueError("irregular grid: frequency spacing is not uniform")
    n = len(rows)
    if window == "rectangular":
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    cir = np.fft.ifft(resp * w)
    return Cir(cir, 1.0 / (n * step), label)


def _parse_csv_rows(lines: Iterable[str], what: str) -> list[tuple[float, float, float]]:
    """Shared three-column CSV reader; '#' lines and blanks are skipped."""
    rows: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"{what}: line {lineno}: expected 3 comma-separated fields")
        try:
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError:
            raise ValueError(f"{what}: line {lineno}: fields must be numbers") from None
    return rows


def read_frequency_response(path: str | Path) -> list[tuple[float, float, float]]:
    """Read ``frequency_hz,real,imag`` records from a text file."""
    with open(path, encoding="utf-8") as fh:
        return _parse_csv_rows(fh, str(path))


def read_cir_csv(path: str | Path, label: str | None = None) -> Cir:
    """Read a ``time_s,real,imag`` CIR file written by :func:`write_cir_csv`."""
    with open(path, encoding="utf-8") as fh:
        rows = _parse_csv_rows(fh, str(path))
    if len(rows) < 2:
        raise ValueError(f"{path}: insufficient data: need at least two samples to infer the grid")
    t = np.array([r[0] for r in rows])
    dt_all = np.diff(t)
    if np.any(dt_all <= 0.0):
        raise ValueError(f"{path}: irregular grid: times must be strictly increasing")
    dt = float(np.mean(dt_all))
    if float(np.max(np.abs(dt_all - dt))) > 1e-6 * dt:
        raise ValueError(f"{path}: irregular grid: time spacing is not uniform")
    samples = np.array([complex(r[1], r[2]) for r in rows])
    if label is None:
        label = Path(path).stem
    return Cir(samples, dt, label)


def write_cir_csv(cir: Cir, path: str | Path) -> None:
    """Write a CIR as ``time_s,real,imag`` rows (full float precision)."""
    lines = ["# time_s,real,imag"]
    for t, v in zip(cir.times, cir.samples):
        lines.append(f"{t:.17g},{v.real:.17g},{v.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
