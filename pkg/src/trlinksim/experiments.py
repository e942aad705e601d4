"""Scenario builders, seeded Monte Carlo trials, and sweep orchestration.

Two canonical topologies are provided. The multi-transmitter layout runs
disjoint node pairs concurrently (A->B, C->D, E->F), one independently
precoded stream each. The scatter layout sends several streams from one
transmitter to distinct receivers, splitting a total power budget
equally; each stream is shaped by the time-reversal filter of its own
receiver's channel, so superposing them is how one transmitter addresses
many receivers at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import signal as _signal

from .chanmodel import Cir, ReverbParams, same_grid, synth_reverberant
from .detector import BerResult, count_errors, demodulate, train_threshold, wilson_interval
from .linksim import (
    LinkSpec,
    NoiseSpec,
    Scenario,
    SinrReport,
    compute_sinr,
    effective_response,
    link_filter,
    propagate,
    sinr_from_powers,
)
from .sigchain import ModParams, Waveform, dbm_to_watts, make_tr_filter, modulate_ask, precode, scale_to_power

__all__ = [
    "DEFAULT_PAIRS",
    "SweepSpec",
    "SweepRow",
    "FocusEntry",
    "derive_seed",
    "synth_channel_set",
    "mod_params_for_rate",
    "build_multi_tx_scenario",
    "build_scatter_scenario",
    "run_trial",
    "sweep",
    "focusing_report",
]

DEFAULT_PAIRS = (("A", "B"), ("C", "D"), ("E", "F"))

_SWEEP_VARIABLES = ("tx_power_dbm", "aggregate_rate_bps", "n_links", "config")


def derive_seed(*parts: int) -> int:
    """Stable non-negative sub-seed from integer coordinates."""
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def synth_channel_set(
    seed: int,
    params: ReverbParams,
    pairs: Iterable[tuple[str, str]],
) -> dict[tuple[str, str], Cir]:
    """One independent reverberant realization per directed node pair.

    Pairs are sub-seeded in sorted order, so the mapping from (seed, pair)
    to realization does not depend on the iteration order of ``pairs``.
    """
    out: dict[tuple[str, str], Cir] = {}
    for index, pair in enumerate(sorted({(str(a), str(b)) for a, b in pairs})):
        out[pair] = synth_reverberant(
            derive_seed(seed, index), params, label=f"{pair[0]}->{pair[1]}"
        )
    return out


def mod_params_for_rate(
    rate_bps: float,
    sample_interval: float,
    level_zero: float = 0.0,
    level_one: float = 1.0,
    carrier_hz: float = 140e9,
) -> ModParams:
    """Modulation parameters whose symbol grid rides on an existing channel grid.

    The bit rate must divide the grid: samples_per_symbol has to come out
    an integer, because channels stay fixed while the symbol rate moves.
    """
    sps = 1.0 / (rate_bps * sample_interval)
    sps_int = int(round(sps))
    if sps_int < 1 or abs(sps - sps_int) > 1e-6 * sps:
        raise ValueError(
            f"bit rate {rate_bps:g} b/s does not fit the grid of {sample_interval:g} s "
            f"(samples per symbol would be {sps:g})"
        )
    return ModParams(
        bit_rate=rate_bps,
        samples_per_symbol=sps_int,
        level_zero=level_zero,
        level_one=level_one,
        carrier_hz=carrier_hz,
    )


def _common_grid(channels: Mapping[tuple[str, str], Cir], pairs: Iterable[tuple[str, str]]) -> float:
    dt = None
    for pair in pairs:
        if pair not in channels:
            raise ValueError(f"missing channel {pair[0]}->{pair[1]}")
        cir = channels[pair]
        if dt is None:
            dt = cir.sample_interval
        elif not same_grid(cir.sample_interval, dt):
            raise ValueError(f"grid mismatch: channel {pair[0]}->{pair[1]} is off the common grid")
    assert dt is not None
    return dt


def build_multi_tx_scenario(
    channels: Mapping[tuple[str, str], Cir],
    n_links: int,
    mode: str,
    power_dbm: float,
    rate_bps: float,
    noise: NoiseSpec | None = None,
    pairs: tuple[tuple[str, str], ...] = DEFAULT_PAIRS,
    level_zero: float = 0.0,
    level_one: float = 1.0,
    carrier_hz: float = 140e9,
) -> Scenario:
    """Scenario with ``n_links`` disjoint pairs transmitting concurrently.

    ``rate_bps`` is the per-link bit rate and ``power_dbm`` applies per
    transmitter. ``channels`` must cover every active transmitter toward
    every active receiver. Noise defaults to thermal at 300 K over a
    bandwidth equal to the bit rate.
    """
    if mode not in ("tr", "none"):
        raise ValueError(f"mode must be 'tr' or 'none', got {mode!r}")
    if not 1 <= n_links <= len(pairs):
        raise ValueError(f"n_links must lie in [1, {len(pairs)}], got {n_links}")
    active = tuple(pairs[:n_links])
    receivers = [rx for _, rx in active]
    required = [(tx, rx) for tx, _ in active for rx in receivers]
    dt = _common_grid(channels, required)
    mod = mod_params_for_rate(rate_bps, dt, level_zero, level_one, carrier_hz)
    if noise is None:
        noise = NoiseSpec.thermal(300.0, rate_bps)
    links = tuple(
        LinkSpec(tx, rx, stream_id=f"{tx}->{rx}", precoding=mode, tx_power_dbm=power_dbm)
        for tx, rx in active
    )
    nodes = tuple(sorted({node for pair in required for node in pair}))
    return Scenario(nodes, {pair: channels[pair] for pair in required}, links, noise, mod)


def build_scatter_scenario(
    channels: Mapping[tuple[str, str], Cir],
    tx_node: str,
    rx_nodes: Iterable[str],
    total_power_dbm: float,
    rate_bps: float,
    noise: NoiseSpec | None = None,
    mode: str = "tr",
    level_zero: float = 0.0,
    level_one: float = 1.0,
    carrier_hz: float = 140e9,
) -> Scenario:
    """One transmitter, one precoded stream per receiver, equal power split.

    ``total_power_dbm`` bounds the transmitted sum; each of the S streams
    gets total/S. ``rate_bps`` is the per-stream bit rate. A single
    receiver degenerates to an ordinary point-to-point link at the full
    budget.
    """
    rx_list = [str(r) for r in rx_nodes]
    if not rx_list:
        raise ValueError("scatter needs at least one receiver")
    if len(set(rx_list)) != len(rx_list):
        raise ValueError("duplicate receivers in scatter scenario")
    if tx_node in rx_list:
        raise ValueError("receivers must differ from the transmitter")
    if mode not in ("tr", "none"):
        raise ValueError(f"mode must be 'tr' or 'none', got {mode!r}")
    per_stream_dbm = total_power_dbm - 10.0 * math.log10(len(rx_list))
    required = [(tx_node, rx) for rx in rx_list]
    dt = _common_grid(channels, required)
    mod = mod_params_for_rate(rate_bps, dt, level_zero, level_one, carrier_hz)
    if noise is None:
        noise = NoiseSpec.thermal(300.0, rate_bps)
    links = tuple(
        LinkSpec(tx_node, rx, stream_id=f"{tx_node}->{rx}", precoding=mode, tx_power_dbm=per_stream_dbm)
        for rx in rx_list
    )
    nodes = tuple(sorted({tx_node, *rx_list}))
    return Scenario(nodes, {pair: channels[pair] for pair in required}, links, noise, mod)


def run_trial(
    scenario: Scenario,
    seed: int,
    n_bits: int,
    pilot_len: int = 64,
) -> tuple[dict[str, SinrReport], dict[str, BerResult]]:
    """One seeded end-to-end realization of every link in the scenario.

    Per stream: draw pilot and payload bits, modulate, precode with the
    link's own filter, scale to the link's power target, then superpose
    all streams and detect each one at its receiver. The pilot (which
    always contains both symbols) trains the threshold and is excluded
    from the error count. Received waveforms are derotated by the phase
    of the link's decision tap before slicing.

    Returns ({stream_id: SinrReport}, {stream_id: BerResult}). The same
    (scenario, seed, n_bits, pilot_len) reproduces identical results.
    """
    if int(seed) != seed or seed < 0:
        raise ValueError("seed must be a non-negative integer")
    if n_bits < 1:
        raise ValueError("n_bits must be at least 1")
    if pilot_len < 2:
        raise ValueError("pilot needs at least two bits")
    mod = scenario.mod_params
    sps = mod.samples_per_symbol
    links = sorted(scenario.links, key=lambda l: l.stream_id)
    streams: dict[str, Waveform] = {}
    filters = {}
    pilots = {}
    payloads = {}
    for s_index, link in enumerate(links):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0, s_index)))
        pilot = rng.integers(0, 2, size=pilot_len)
        payload = rng.integers(0, 2, size=n_bits)
        pilot[0], pilot[1] = 0, 1  # guarantee both classes for training
        g = link_filter(scenario, link)
        shaped = precode(modulate_ask(np.concatenate([pilot, payload]), mod), g)
        x = scale_to_power(shaped, link.tx_power_dbm)
        streams[link.stream_id] = Waveform(x.samples, x.sample_interval, origin=link.stream_id)
        filters[link.stream_id] = g
        pilots[link.stream_id] = pilot
        payloads[link.stream_id] = payload
    received = propagate(scenario, streams, derive_seed(seed, 1))
    reports: dict[str, SinrReport] = {}
    errors: dict[str, BerResult] = {}
    for link in links:
        sid = link.stream_id
        own = effective_response(
            filters[sid], scenario.channels[(link.tx_node, link.rx_node)], mod, source=sid
        )
        y = received[link.rx_node]
        rotated = Waveform(
            y.samples * np.exp(-1j * np.angle(own.peak)), y.sample_interval, y.origin
        )
        threshold = train_threshold(rotated, pilots[sid], own.decision_offset, mod)
        rx_bits = demodulate(
            rotated, own.decision_offset + pilot_len * sps, threshold, n_bits, mod
        )
        errors[sid] = count_errors(payloads[sid], rx_bits)
        reports[sid] = compute_sinr(scenario, link)
    return reports, errors


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition for one experiment sweep."""

    variable: str
    grid: tuple
    n_bits: int = 1000
    n_trials: int = 10
    master_seed: int = 0
    pilot_len: int = 64

    def __post_init__(self) -> None:
        if self.variable not in _SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {_SWEEP_VARIABLES}, got {self.variable!r}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("sweep grid must not be empty")
        object.__setattr__(self, "grid", grid)
        if self.n_bits < 100:
            raise ValueError("n_bits must be at least 100")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")


@dataclass(frozen=True)
class SweepRow:
    """Aggregated per-link outcome at one grid point."""

    variable: str
    value: float
    link: str
    sinr_db: float
    signal_w: float
    isi_w: float
    cochannel_w: float
    noise_w: float
    ber: float
    ber_ci: tuple[float, float]
    bits: int
    errors: int


def sweep(
    spec: SweepSpec,
    scenario_template: Callable[[float, int], Scenario],
) -> list[SweepRow]:
    """Run the grid defined by ``spec`` against a scenario template.

    ``scenario_template(value, channel_seed)`` must build the scenario
    for one grid value; templates backed by synthetic channels should use
    ``channel_seed`` so every trial sees a fresh realization, while
    imported channels simply ignore it. Per grid point the SINR component
    powers are averaged linearly over trials and bit errors are pooled.
    All sub-seeds derive from (master_seed, point index, trial index), so
    the output is a pure function of (spec, scenario_template).
    """
    rows: list[SweepRow] = []
    for p_index, value in enumerate(spec.grid):
        power_acc: dict[str, np.ndarray] = {}
        error_acc: dict[str, int] = {}
        bit_acc: dict[str, int] = {}
        for t_index in range(spec.n_trials):
            channel_seed = derive_seed(spec.master_seed, p_index, t_index, 0)
            trial_seed = derive_seed(spec.master_seed, p_index, t_index, 1)
            scenario = scenario_template(value, channel_seed)
            reports, bers = run_trial(scenario, trial_seed, spec.n_bits, pilot_len=spec.pilot_len)
            for sid, report in reports.items():
                acc = power_acc.setdefault(sid, np.zeros(4))
                acc += (report.signal_w, report.isi_w, report.cochannel_w, report.noise_w)
                error_acc[sid] = error_acc.get(sid, 0) + bers[sid].bit_errors
                bit_acc[sid] = bit_acc.get(sid, 0) + bers[sid].bits_total
        for sid in sorted(power_acc):
            signal_w, isi_w, cochannel_w, noise_w = power_acc[sid] / spec.n_trials
            bits = bit_acc[sid]
            n_err = error_acc[sid]
            rows.append(
                SweepRow(
                    variable=spec.variable,
                    value=value,
                    link=sid,
                    sinr_db=sinr_from_powers(signal_w, isi_w, cochannel_w, noise_w),
                    signal_w=float(signal_w),
                    isi_w=float(isi_w),
                    cochannel_w=float(cochannel_w),
                    noise_w=float(noise_w),
                    ber=n_err / bits,
                    ber_ci=wilson_interval(n_err, bits),
                    bits=bits,
                    errors=n_err,
                )
            )
    return rows


@dataclass(frozen=True)
class FocusEntry:
    """Received power at one node for a probe aimed at a chosen target."""

    node: str
    tr_peak_w: float
    tr_total_w: float
    nontr_peak_w: float
    nontr_total_w: float


def focusing_report(
    channels: Mapping[str, Cir],
    target: str,
    power_dbm: float,
) -> dict[str, FocusEntry]:
    """Spatial focusing audit of a TR filter aimed at ``target``.

    ``channels`` maps receiving nodes to the channel from the probing
    transmitter. For every node the peak instantaneous power and the
    total received energy of channel * filter are reported, scaled by the
    transmit power; the non-TR columns use the bare channel at the same
    power.
    """
    if target not in channels:
        raise ValueError(f"target {target!r} has no channel entry")
    g = make_tr_filter(channels[target])
    p_tx = dbm_to_watts(power_dbm)
    out: dict[str, FocusEntry] = {}
    for node in sorted(channels):
        h = channels[node]
        if not same_grid(h.sample_interval, g.sample_interval):
            raise ValueError(f"grid mismatch: channel toward {node!r}")
        response = _signal.convolve(h.samples, g.samples, method="direct")
        focused = np.abs(response) ** 2
        bare = np.abs(h.samples) ** 2
        out[node] = FocusEntry(
            node=node,
            tr_peak_w=p_tx * float(focused.max()),
            tr_total_w=p_tx * float(focused.sum()),
            nontr_peak_w=p_tx * float(bare.max()),
            nontr_total_w=p_tx * float(bare.sum()),
        )
    return out
