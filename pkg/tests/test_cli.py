"""Config parsing, channel realization, and the command line front end."""

import re

import numpy as np
import pytest

import trlinksim
from trlinksim import chanmodel
from trlinksim.chanmodel import Cir, read_cir_csv, write_cir_csv
from trlinksim.cli import (
    DEFAULTS,
    FOCUSING_HEADER,
    SWEEP_HEADER,
    ConfigError,
    main,
    parse_config,
    realize_channels,
)
from trlinksim.linksim import noise_power

MINIMAL = """\
[nodes]
names = A, B

[channel "A->B"]
model = reverberant
num_taps = 8
rms_delay_spread_s = 50e-12
max_delay_s = 200e-12

[link 1]
tx = A
rx = B

[noise]
mode = explicit
power_dbm = -40
"""

TWO_LINK = """\
[nodes]
names = A, B, C, D

[channel "A->B"]
model = reverberant
num_taps = 8
rms_delay_spread_s = 50e-12
max_delay_s = 200e-12

[channel "A->D"]
model = reverberant
num_taps = 8
rms_delay_spread_s = 50e-12
max_delay_s = 200e-12

[channel "C->B"]
model = reverberant
num_taps = 8
rms_delay_spread_s = 50e-12
max_delay_s = 200e-12

[channel "C->D"]
model = reverberant
num_taps = 8
rms_delay_spread_s = 50e-12
max_delay_s = 200e-12

[link 1]
tx = A
rx = B

[link 2]
tx = C
rx = D

[noise]
mode = explicit
power_dbm = -40

[sweep]
n_bits = 100
n_trials = 1
"""


def test_package_reexports_the_working_surface():
    for name in ("Cir", "ReverbParams", "LinkSpec", "Scenario", "run_trial", "sweep"):
        assert hasattr(trlinksim, name)
    assert callable(main)


def test_parse_minimal_config_applies_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.nodes == ("A", "B")
    assert cfg.mod.bit_rate == DEFAULTS["bit_rate_bps"]
    assert cfg.mod.samples_per_symbol == DEFAULTS["samples_per_symbol"]
    link = cfg.links[0]
    assert (link.precoding, link.tx_power_dbm) == ("tr", 0.0)
    assert cfg.n_bits == DEFAULTS["n_bits"]
    assert cfg.master_seed == DEFAULTS["master_seed"]
    assert cfg.pilot_len == DEFAULTS["pilot_bits"]
    assert cfg.out_dir == DEFAULTS["output_dir"]
    assert cfg.sweep_variable is None and cfg.sweep_values is None
    # synthetic channel inherits the modulation sample grid
    src = cfg.channel_sources[("A", "B")]
    assert src.reverb.sample_interval == pytest.approx(5e-12, rel=1e-12)
    assert src.seed is None


def test_effective_trials_depend_on_channel_freshness(tmp_path):
    assert parse_config(MINIMAL).effective_trials == 10
    pinned = MINIMAL.replace("max_delay_s = 200e-12", "max_delay_s = 200e-12\nseed = 7")
    assert parse_config(pinned).effective_trials == 1
    write_cir_csv(Cir(np.array([1.0, 0.0]), 5e-12), tmp_path / "chan.csv")
    file_cfg = MINIMAL.replace(
        "model = reverberant\nnum_taps = 8\nrms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12",
        "file = chan.csv",
    )
    assert parse_config(file_cfg, base_dir=str(tmp_path)).effective_trials == 1
    explicit = MINIMAL + "\n[sweep]\nn_trials = 4\n"
    assert parse_config(explicit).effective_trials == 4


def test_raw_parse_errors_name_the_line():
    with pytest.raises(ConfigError, match="line 1: malformed section header"):
        parse_config("[nodes\nnames = A\n")
    with pytest.raises(ConfigError, match="line 1: key outside any section"):
        parse_config("x = 1\n")
    with pytest.raises(ConfigError, match="line 3: duplicate section"):
        parse_config("[nodes]\nnames = A\n[nodes]\n")
    with pytest.raises(ConfigError, match="line 2: expected 'key = value'"):
        parse_config("[nodes]\nhello\n")
    with pytest.raises(ConfigError, match="line 3: duplicate key 'names'"):
        parse_config("[nodes]\nnames = A\nnames = B\n")
    with pytest.raises(ConfigError, match="line 1: empty section name"):
        parse_config("[ ]\n")


def test_nodes_section_errors():
    with pytest.raises(ConfigError, match="missing required section"):
        parse_config("")
    with pytest.raises(ConfigError, match="names is empty"):
        parse_config("[nodes]\nnames = ,\n")
    with pytest.raises(ConfigError, match="duplicate node names"):
        parse_config("[nodes]\nnames = A, B, A\n")
    with pytest.raises(ConfigError, match="missing required key 'names'"):
        parse_config("[nodes]\n")


def test_channel_section_errors():
    with pytest.raises(ConfigError, match=r"line \d+: undefined node 'Z'"):
        parse_config(MINIMAL.replace('[channel "A->B"]', '[channel "A->Z"]'))
    with pytest.raises(ConfigError, match="channel endpoints must differ"):
        parse_config(MINIMAL.replace('[channel "A->B"]', '[channel "A->A"]'))
    with pytest.raises(ConfigError, match='channel name must look like "A->B"'):
        parse_config(MINIMAL.replace('[channel "A->B"]', '[channel "AB"]'))
    with pytest.raises(ConfigError, match="needs exactly one of 'file' or 'model'"):
        parse_config(MINIMAL.replace("model = reverberant\n", ""))
    with pytest.raises(ConfigError, match="unknown channel model 'gaussian'"):
        parse_config(MINIMAL.replace("model = reverberant", "model = gaussian"))
    with pytest.raises(ConfigError, match="missing required key 'num_taps'"):
        parse_config(MINIMAL.replace("num_taps = 8\n", ""))
    with pytest.raises(ConfigError, match="seed must be non-negative"):
        parse_config(MINIMAL.replace("num_taps = 8", "num_taps = 8\nseed = -3"))
    with pytest.raises(ConfigError, match="must be a number"):
        parse_config(MINIMAL.replace("max_delay_s = 200e-12", "max_delay_s = wide"))
    # model parameter validation surfaces with the section's line number
    with pytest.raises(ConfigError, match="unreachable"):
        parse_config(MINIMAL.replace("rms_delay_spread_s = 50e-12", "rms_delay_spread_s = 190e-12"))
    dup = MINIMAL.replace(
        "[link 1]",
        '[channel "A ->B"]\nmodel = reverberant\nnum_taps = 8\n'
        "rms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12\n\n[link 1]",
    )
    with pytest.raises(ConfigError, match="duplicate channel A->B"):
        parse_config(dup)


def test_file_channel_rules(tmp_path):
    write_cir_csv(Cir(np.array([1.0, 0.0]), 5e-12), tmp_path / "chan.csv")
    base = MINIMAL.replace(
        "model = reverberant\nnum_taps = 8\nrms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12",
        "file = chan.csv",
    )
    cfg = parse_config(base, base_dir=str(tmp_path))
    assert cfg.channel_sources[("A", "B")].file == str(tmp_path / "chan.csv")
    with pytest.raises(ConfigError, match="does not apply to a file-backed channel"):
        parse_config(base.replace("file = chan.csv", "file = chan.csv\nnum_taps = 4"),
                     base_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="channel file not found"):
        parse_config(base.replace("chan.csv", "nope.csv"), base_dir=str(tmp_path))


def test_link_sections_sort_by_number_and_reject_duplicates():
    reordered = TWO_LINK.replace("[link 1]", "[link 10]").replace("[link 2]", "[link 2]")
    cfg = parse_config(reordered)
    assert [l.stream_id for l in cfg.links] == ["C->D", "A->B"]
    with pytest.raises(ConfigError, match="duplicate link A->B"):
        parse_config(MINIMAL + "\n[link 2]\ntx = A\nrx = B\n")
    with pytest.raises(ConfigError, match="missing required key 'tx'"):
        parse_config(MINIMAL.replace("tx = A\n", ""))
    with pytest.raises(ConfigError, match="defines no"):
        parse_config(MINIMAL.replace("[link 1]\ntx = A\nrx = B\n", ""))
    with pytest.raises(ConfigError, match="precoding"):
        parse_config(MINIMAL.replace("rx = B", "rx = B\nprecoding = zf"))


def test_links_demand_full_channel_coverage():
    broken = TWO_LINK.replace(
        '[channel "A->D"]\nmodel = reverberant\nnum_taps = 8\n'
        "rms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12\n\n",
        "",
    )
    with pytest.raises(ConfigError, match=re.escape('missing section [channel "A->D"]')):
        parse_config(broken)


def test_noise_section_rules():
    thermal = MINIMAL.replace(
        "mode = explicit\npower_dbm = -40",
        "mode = thermal\ntemperature_k = 300\nbandwidth_hz = 10e9",
    )
    cfg = parse_config(thermal)
    assert noise_power(cfg.noise) == pytest.approx(4.141947e-11, rel=1e-12)
    with pytest.raises(ConfigError, match="missing required section"):
        parse_config(MINIMAL.replace("[noise]\nmode = explicit\npower_dbm = -40\n", ""))
    with pytest.raises(ConfigError, match="noise mode must be 'thermal' or 'explicit'"):
        parse_config(MINIMAL.replace("mode = explicit", "mode = pink"))
    with pytest.raises(ConfigError, match="does not apply to thermal noise"):
        parse_config(
            MINIMAL.replace(
                "mode = explicit",
                "mode = thermal\ntemperature_k = 300\nbandwidth_hz = 10e9",
            )
        )
    with pytest.raises(ConfigError, match="does not apply to explicit noise"):
        parse_config(MINIMAL.replace("power_dbm = -40", "power_dbm = -40\ntemperature_k = 300"))
    with pytest.raises(ConfigError, match="missing required key 'power_dbm'"):
        parse_config(MINIMAL.replace("power_dbm = -40\n", ""))


def test_sweep_section_rules():
    good = MINIMAL + "\n[sweep]\nvariable = tx_power_dbm\nvalues = -5, 0, 5\n"
    cfg = parse_config(good)
    assert cfg.sweep_variable == "tx_power_dbm"
    assert cfg.sweep_values == (-5.0, 0.0, 5.0)
    with pytest.raises(ConfigError, match="variable must be one of"):
        parse_config(MINIMAL + "\n[sweep]\nvariable = bandwidth\n")
    with pytest.raises(ConfigError, match="values requires variable"):
        parse_config(MINIMAL + "\n[sweep]\nvalues = 1, 2\n")
    with pytest.raises(ConfigError, match="values must be comma-separated numbers"):
        parse_config(MINIMAL + "\n[sweep]\nvariable = tx_power_dbm\nvalues = a, b\n")
    with pytest.raises(ConfigError, match="values is empty"):
        parse_config(MINIMAL + "\n[sweep]\nvariable = tx_power_dbm\nvalues = ,\n")
    with pytest.raises(ConfigError, match="n_bits must be at least 100"):
        parse_config(MINIMAL + "\n[sweep]\nn_bits = 10\n")
    with pytest.raises(ConfigError, match="n_trials must be at least 1"):
        parse_config(MINIMAL + "\n[sweep]\nn_trials = 0\n")
    with pytest.raises(ConfigError, match="master_seed must be non-negative"):
        parse_config(MINIMAL + "\n[sweep]\nmaster_seed = -1\n")
    with pytest.raises(ConfigError, match="pilot_bits must be at least 2"):
        parse_config(MINIMAL + "\n[sweep]\npilot_bits = 1\n")


def test_strict_mode_rejects_unknown_names(capsys):
    unknown_section = MINIMAL + "\n[plotting]\nstyle = fancy\n"
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(unknown_section)
    cfg = parse_config(unknown_section, strict=False)
    assert cfg.nodes == ("A", "B")
    assert "unknown section" in capsys.readouterr().err
    unknown_key = MINIMAL.replace("rx = B", "rx = B\ncolor = red")
    with pytest.raises(ConfigError, match="unknown key 'color'"):
        parse_config(unknown_key)
    parse_config(unknown_key, strict=False)
    assert "unknown key" in capsys.readouterr().err


def test_realize_channels_pins_and_refreshes(tmp_path):
    pinned_cfg = parse_config(
        MINIMAL.replace("max_delay_s = 200e-12", "max_delay_s = 200e-12\nseed = 7")
    )
    a = realize_channels(pinned_cfg, 0)[("A", "B")]
    b = realize_channels(pinned_cfg, 99)[("A", "B")]
    assert np.array_equal(a.samples, b.samples)
    fresh_cfg = parse_config(MINIMAL)
    c = realize_channels(fresh_cfg, 0)[("A", "B")]
    d = realize_channels(fresh_cfg, 99)[("A", "B")]
    assert not np.array_equal(c.samples, d.samples)
    assert c.label == "A->B"


def test_realize_channels_checks_file_grid(tmp_path):
    write_cir_csv(Cir(np.array([1.0, 0.0]), 1e-12), tmp_path / "chan.csv")
    cfg = parse_config(
        MINIMAL.replace(
            "model = reverberant\nnum_taps = 8\nrms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12",
            "file = chan.csv",
        ),
        base_dir=str(tmp_path),
    )
    with pytest.raises(ValueError, match="grid mismatch"):
        realize_channels(cfg, 0)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], [line.split(",") for line in lines[1:]]


def test_main_run_writes_csv(tmp_path):
    cfg_path = _write(tmp_path, "run.cfg", TWO_LINK)
    out = tmp_path / "results"
    assert main(["run", "--config", cfg_path, "--out", str(out)]) == 0
    header, rows = _read_rows(out / "run.csv")
    assert header == SWEEP_HEADER
    assert [r[2] for r in rows] == ["A->B", "C->D"]
    assert all(r[0] == "config" for r in rows)
    assert all(len(r) == len(SWEEP_HEADER.split(",")) for r in rows)
    assert all(int(r[11]) == 100 for r in rows)


def test_main_trials_override_pools_more_bits(tmp_path):
    cfg_path = _write(tmp_path, "run.cfg", TWO_LINK)
    out = tmp_path / "results"
    assert main(["run", "--config", cfg_path, "--out", str(out), "--trials", "3"]) == 0
    _, rows = _read_rows(out / "run.csv")
    assert all(int(r[11]) == 300 for r in rows)


def test_main_power_sweep_default_grid(tmp_path):
    write_cir_csv(Cir(np.array([1.0, 0.0]), 5e-12), tmp_path / "chan.csv")
    cfg_path = _write(
        tmp_path,
        "p.cfg",
        MINIMAL.replace(
            "model = reverberant\nnum_taps = 8\nrms_delay_spread_s = 50e-12\nmax_delay_s = 200e-12",
            "file = chan.csv",
        )
        + "\n[sweep]\nn_bits = 100\n",
    )
    out = tmp_path / "results"
    assert main(["sweep-power", "--config", cfg_path, "--out", str(out)]) == 0
    header, rows = _read_rows(out / "sweep_power.csv")
    assert header == SWEEP_HEADER
    # default grid spans -5..10 dBm in 1 dB steps
    assert len(rows) == 16
    assert [float(r[1]) for r in rows] == [float(p) for p in range(-5, 11)]
    sinrs = [float(r[3]) for r in rows]
    assert all(b > a for a, b in zip(sinrs, sinrs[1:]))


def test_main_sweep_uses_config_values(tmp_path):
    cfg_path = _write(
        tmp_path,
        "v.cfg",
        TWO_LINK + "variable = tx_power_dbm\nvalues = -5, 0\n",
    )
    out = tmp_path / "results"
    assert main(["sweep-power", "--config", cfg_path, "--out", str(out)]) == 0
    _, rows = _read_rows(out / "sweep_power.csv")
    assert [(float(r[1]), r[2]) for r in rows] == [
        (-5.0, "A->B"),
        (-5.0, "C->D"),
        (0.0, "A->B"),
        (0.0, "C->D"),
    ]


def test_main_rejects_variable_command_mismatch(tmp_path, capsys):
    cfg_path = _write(
        tmp_path,
        "m.cfg",
        TWO_LINK + "variable = aggregate_rate_bps\nvalues = 50e9\n",
    )
    assert main(["sweep-power", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "does not match command" in err


def test_main_ignores_other_variable_values_for_links_sweep(tmp_path):
    cfg_path = _write(
        tmp_path,
        "l.cfg",
        TWO_LINK + "variable = n_links\nvalues = 1, 2\n",
    )
    out = tmp_path / "results"
    assert main(["sweep-links", "--config", cfg_path, "--out", str(out)]) == 0
    _, rows = _read_rows(out / "sweep_links.csv")
    assert [(float(r[1]), r[2]) for r in rows] == [
        (1.0, "A->B"),
        (2.0, "A->B"),
        (2.0, "C->D"),
    ]


def test_main_option_validation(tmp_path, capsys):
    cfg_path = _write(tmp_path, "a.cfg", TWO_LINK)
    assert main(["run", "--config", cfg_path, "--seed", "-1"]) == 1
    assert "--seed" in capsys.readouterr().err
    assert main(["run", "--config", cfg_path, "--n-bits", "10"]) == 1
    assert "--n-bits" in capsys.readouterr().err
    assert main(["run", "--config", cfg_path, "--trials", "0"]) == 1
    assert "--trials" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert "error:" in capsys.readouterr().err


def test_main_outputs_are_deterministic(tmp_path):
    cfg_path = _write(
        tmp_path,
        "d.cfg",
        TWO_LINK + "variable = tx_power_dbm\nvalues = -5, 0\n",
    )
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["sweep-power", "--config", cfg_path, "--out", str(out1)]) == 0
    assert main(["sweep-power", "--config", cfg_path, "--out", str(out2)]) == 0
    assert (out1 / "sweep_power.csv").read_bytes() == (out2 / "sweep_power.csv").read_bytes()
    assert main(["sweep-power", "--config", cfg_path, "--out", str(out1), "--seed", "5"]) == 0
    assert (out1 / "sweep_power.csv").read_bytes() != (out2 / "sweep_power.csv").read_bytes()


def test_main_focusing_reports_reachable_nodes(tmp_path):
    cfg_path = _write(tmp_path, "f.cfg", TWO_LINK)
    out = tmp_path / "results"
    assert main(["focusing", "--config", cfg_path, "--out", str(out)]) == 0
    header, rows = _read_rows(out / "focusing.csv")
    assert header == FOCUSING_HEADER
    # probe transmitter A has configured channels toward B and D only
    assert [r[0] for r in rows] == ["B", "D"]
    target_row = rows[0]
    assert float(target_row[1]) > float(rows[1][1])


def test_main_gen_channel_round_trips(tmp_path):
    pinned = MINIMAL.replace("max_delay_s = 200e-12", "max_delay_s = 200e-12\nseed = 7")
    cfg_path = _write(tmp_path, "g.cfg", pinned)
    out = tmp_path / "chans"
    assert main(["gen-channel", "--config", cfg_path, "--out", str(out)]) == 0
    cir_path = out / "cir_A_to_B.csv"
    cir = read_cir_csv(cir_path)
    assert cir.sample_interval == pytest.approx(5e-12, rel=1e-9)
    assert cir.energy == pytest.approx(1.0, rel=1e-9)
    reference = chanmodel.synth_reverberant(
        7, parse_config(pinned).channel_sources[("A", "B")].reverb
    )
    assert np.array_equal(cir.samples, reference.samples)
    # the generated file can feed a file-backed run unchanged
    file_cfg = pinned.replace(
        "model = reverberant\nnum_taps = 8\nrms_delay_spread_s = 50e-12\n"
        "max_delay_s = 200e-12\nseed = 7",
        f"file = {cir_path}",
    ) + "\n[sweep]\nn_bits = 100\n"
    cfg2 = _write(tmp_path, "g2.cfg", file_cfg)
    assert main(["run", "--config", cfg2, "--out", str(tmp_path / "r2")]) == 0


def test_main_strict_flag(tmp_path, capsys):
    loose = TWO_LINK + "\n[plotting]\nstyle = fancy\n"
    cfg_path = _write(tmp_path, "s.cfg", loose)
    out = tmp_path / "results"
    assert main(["run", "--config", cfg_path, "--out", str(out)]) == 1
    assert "unknown section" in capsys.readouterr().err
    assert main(["run", "--config", cfg_path, "--out", str(out), "--no-strict"]) == 0
    assert "warning:" in capsys.readouterr().err
