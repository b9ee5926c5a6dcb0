"""Tests for the command-line front end: parsing, execution, artifacts."""

import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

from cmaeig.cli import (
    RunConfig,
    SummaryRecord,
    build_config,
    config_hash,
    main,
    parse_config,
    run,
)
from cmaeig.domain import Ball, Constant, CustomRho, Ellipsoid, GaussianBump
from cmaeig.errors import ConfigError
from cmaeig.serialize import read_field
from cmaeig.verify import InvariantRow, VerifyReport

from oracles import LAMBDA1_UNIT_DISC


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_minimal_radial_config_fills_defaults():
    config = build_config({"command": "radial", "n": "1", "R": "1"})
    assert config.command == "radial"
    assert config.domain == Ball(n=1, radius=1.0)
    assert config.density == Constant(1.0)
    assert config.tol == 1e-8
    assert config.seed == 42
    assert config.h is None
    assert config.max_iters is None
    assert config.emit == frozenset({"csv", "binary", "summary"})
    assert config.output_dir == "results"


def test_zero_tol_rejected():
    with pytest.raises(ConfigError, match="tol"):
        build_config({"command": "radial", "n": "1", "R": "1", "tol": "0"})


def test_conflicting_ball_and_ellipsoid_names_both_keys():
    with pytest.raises(ConfigError) as excinfo:
        build_config({"command": "solve", "h": "0.1",
                      "R": "1", "domain.axes": "1,1.5"})
    message = str(excinfo.value)
    assert "R" in message and "domain.axes" in message


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        build_config({"command": "radial", "n": "1", "radius": "1"})


def test_command_required_and_validated():
    with pytest.raises(ConfigError, match="command"):
        build_config({"n": "1"})
    with pytest.raises(ConfigError, match="command"):
        build_config({"command": "eigen", "n": "1"})


def test_h_required_for_grid_commands():
    with pytest.raises(ConfigError, match="h"):
        build_config({"command": "solve", "n": "1"})
    with pytest.raises(ConfigError, match="h"):
        build_config({"command": "solve", "n": "1", "h": "-0.1"})


def test_ellipsoid_axes_fix_n():
    config = build_config({"command": "solve", "h": "0.25",
                           "domain.axes": "1.0, 1.5"})
    assert config.domain == Ellipsoid(axes=(1.0, 1.5))
    assert config.n == 2
    with pytest.raises(ConfigError, match="n"):
        build_config({"command": "solve", "h": "0.25", "n": "3",
                      "domain.axes": "1.0, 1.5"})


def test_custom_domain_round_trip():
    config = build_config({
        "command": "solve", "h": "0.1",
        "domain.kind": "custom",
        "domain.coeffs": "2,0: 1; 0,2: 1; 0,0: -1",
        "domain.seed_point": "0, 0",
        "domain.box": "-1.1, 1.1; -1.1, 1.1",
    })
    assert isinstance(config.domain, CustomRho)
    assert config.domain.coeffs[(2, 0)] == 1.0
    assert config.domain.box == ((-1.1, 1.1), (-1.1, 1.1))


def test_custom_domain_missing_pieces():
    with pytest.raises(ConfigError, match="domain.seed_point"):
        build_config({"command": "solve", "h": "0.1",
                      "domain.coeffs": "2,0:1; 0,2:1; 0,0:-1",
                      "domain.box": "-1,1;-1,1"})


def test_bump_density_parsing():
    config = build_config({
        "command": "solve", "n": "1", "h": "0.1",
        "density.center": "0.2, 0.0",
        "density.amplitude": "1.5",
        "density.width": "0.5",
    })
    assert config.density == GaussianBump(center=(0.2, 0.0),
                                          amplitude=1.5, width=0.5)
    with pytest.raises(ConfigError, match="density.width"):
        build_config({"command": "solve", "n": "1", "h": "0.1",
                      "density.center": "0,0", "density.amplitude": "1"})
    with pytest.raises(ConfigError, match="density.value"):
        build_config({"command": "solve", "n": "1", "h": "0.1",
                      "density.kind": "bump", "density.value": "2",
                      "density.center": "0,0", "density.amplitude": "1",
                      "density.width": "0.5"})


def test_emit_subset_and_rejects_unknown_target():
    config = build_config({"command": "radial", "n": "1", "emit": "summary"})
    assert config.emit == frozenset({"summary"})
    with pytest.raises(ConfigError, match="emit"):
        build_config({"command": "radial", "n": "1", "emit": "csv,plots"})


def test_filter_only_for_verify():
    with pytest.raises(ConfigError, match="filter"):
        build_config({"command": "radial", "n": "1", "filter": "bound-chain"})


def test_config_file_with_flag_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# a comment\n"
        "command = radial\n"
        "n = 1\n"
        "R = 2.0   # trailing comment\n"
        "tol = 1e-6\n"
    )
    config = parse_config(["--config", str(path), "--tol", "1e-7"])
    assert config.domain.radius == 2.0
    assert config.tol == 1e-7


def test_malformed_config_lines(tmp_path):
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("command = radial\ncommand = solve\n")
    missing = tmp_path / "nope.cfg"
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(["--config", str(missing)])


def parse_config_text(text):
    from cmaeig.cli import _parse_kv_text
    return build_config(_parse_kv_text(text))


def test_config_hash_deterministic_and_sensitive():
    pairs = {"command": "radial", "n": "1", "R": "1"}
    a = config_hash(build_config(pairs))
    b = config_hash(build_config(dict(pairs)))
    assert a == b and len(a) == 64
    flags = parse_config(["--command", "radial", "--n", "1"])
    assert config_hash(flags) == a
    reseeded = build_config({**pairs, "seed": "7"})
    assert config_hash(reseeded) != a
    moved = build_config({**pairs, "out": "elsewhere"})
    assert config_hash(moved) == a


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def test_radial_run_matches_pinned_eigenvalue(tmp_path):
    config = build_config({"command": "radial", "n": "1", "R": "1",
                           "out": str(tmp_path / "out")})
    code, record = run(config)
    assert code == 0
    assert record.lambda1 == pytest.approx(1.445796, abs=1e-5)
    assert (tmp_path / "out" / "summary.txt").exists()
    branch = (tmp_path / "out" / "branch.csv").read_text().splitlines()
    assert branch[0] == "t,phi,dphi"
    assert not (tmp_path / "out" / "field.csv").exists()
    text = (tmp_path / "out" / "summary.txt").read_text()
    assert f"lambda1={format(record.lambda1, '.17g')}" in text
    assert f"config_hash={record.config_hash}" in text


def test_continuation_run_within_two_percent(tmp_path):
    config = build_config({"command": "eigen-continuation", "n": "1",
                           "h": "0.015625", "out": str(tmp_path / "out")})
    code, record = run(config)
    assert code == 0
    assert abs(record.lambda1 - LAMBDA1_UNIT_DISC) / LAMBDA1_UNIT_DISC < 0.02
    lines = (tmp_path / "out" / "branch.csv").read_text().splitlines()
    assert lines[0] == "lambda,sup_norm,iterations,residual"
    assert len(lines) - 1 == record.diagnostics["branch_points"]


def test_solve_run_emits_recoverable_field(tmp_path):
    out = tmp_path / "out"
    config = build_config({"command": "solve", "n": "1", "h": "0.0625",
                           "out": str(out)})
    code, record = run(config)
    assert code == 0
    assert record.lambda1 is None
    u = read_field(out / "field.bin")
    assert u.sup_norm() == pytest.approx(1.0, abs=1e-10)
    lines = (out / "branch.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,")
    rows = np.loadtxt(out / "field.csv", delimiter=",", skiprows=1)
    assert rows.shape == (u.grid.num_interior, 3)
    assert np.array_equal(rows[:, 2], u.interior)


def test_rayleigh_run_reports_quotient(tmp_path):
    config = build_config({"command": "rayleigh", "n": "1", "h": "0.0625",
                           "out": str(tmp_path / "out")})
    code, record = run(config)
    assert code == 0
    d = record.diagnostics
    assert d["rayleigh"] == pytest.approx(d["energy"] / d["mass"])
    assert d["rayleigh"] >= d["eigenvalue_lower_bound"]


def test_emit_controls_artifacts(tmp_path):
    out = tmp_path / "out"
    config = build_config({"command": "solve", "n": "1", "h": "0.125",
                           "emit": "csv", "out": str(out)})
    run(config)
    assert sorted(p.name for p in out.iterdir()) == ["branch.csv", "field.csv"]


def test_verify_run_exit_code_and_single_row_filter(tmp_path):
    out = tmp_path / "out"
    config = build_config({"command": "verify",
                           "filter": "functional-homogeneity",
                           "out": str(out)})
    code, record = run(config)
    assert code == 0
    assert record.diagnostics == {"rows": 1, "failures": 0}
    lines = (out / "branch.csv").read_text().splitlines()
    assert lines[0] == "invariant,fixture,margin,result"
    assert len(lines) == 2 and lines[1].endswith("PASS")
    assert "PASS" in record.table


def test_verify_failure_exits_one(tmp_path, monkeypatch):
    rows = (InvariantRow("demo", "fixture", -1.0, False),)
    monkeypatch.setattr("cmaeig.cli.run_suite",
                        lambda **kw: VerifyReport(rows=rows))
    config = build_config({"command": "verify", "out": str(tmp_path / "out")})
    code, record = run(config)
    assert code == 1
    assert record.diagnostics["failures"] == 1


def test_solver_failure_exits_one_with_error_summary(tmp_path):
    out = tmp_path / "out"
    config = build_config({"command": "eigen-continuation", "n": "1",
                           "h": "0.0625", "max_iters": "1", "out": str(out)})
    code, record = run(config)
    assert code == 1
    assert "ScheduleExhausted" in record.diagnostics["error"]
    assert sorted(p.name for p in out.iterdir()) == ["summary.txt"]
    assert "error=" in (out / "summary.txt").read_text()


def test_unbuildable_grid_is_a_config_error(tmp_path):
    # two-well domain whose interior is disconnected at any lattice spacing
    config = build_config({
        "command": "solve", "n": "1", "h": "0.1",
        "domain.kind": "custom",
        "domain.coeffs": "4,0:1; 2,0:-2; 0,2:1; 0,0:0.9",
        "domain.seed_point": "1, 0",
        "domain.box": "-1.5,1.5; -0.5,0.5",
        "out": str(tmp_path / "out"),
    })
    with pytest.raises(ConfigError, match="h"):
        run(config)


def test_main_exit_codes(tmp_path, capsys):
    assert main(["--command", "radial", "--n", "1",
                 "--out", str(tmp_path / "a")]) == 0
    assert "lambda1=" in capsys.readouterr().out
    assert main(["--command", "radial", "--n", "1", "--tol", "0"]) == 2
    assert "config error" in capsys.readouterr().err


def test_csv_outputs_bit_identical_across_runs(tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        config = build_config({"command": "eigen-inverse-power", "n": "1",
                               "h": "0.0625", "out": str(out)})
        assert run(config)[0] == 0
        outputs.append({p.name: p.read_bytes() for p in out.iterdir()
                        if p.suffix in (".csv", ".bin")})
    assert outputs[0] == outputs[1]


def test_kill_mid_run_leaves_no_partial_final_files(tmp_path):
    out = tmp_path / "out"
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        [str(p) for p in sys.path if p] + [env.get("PYTHONPATH", "")]
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "cmaeig", "--command", "verify",
         "--out", str(out)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL, env=env,
    )
    time.sleep(1.5)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    assert proc.returncode == -signal.SIGKILL
    if out.exists():
        names = [p.name for p in out.iterdir()]
        assert not any(name.startswith(".tmp-") for name in names)
        for name in names:
            # anything under a final name must be complete, never partial
            text = (out / name).read_text()
            assert text.endswith("\n")


def test_summary_record_text_layout():
    record = SummaryRecord(command="solve", config_hash="ab", lambda1=None,
                           residuals={"residual": 1e-9}, wall_time=0.25,
                           diagnostics={"iterations": 3})
    text = record.to_text()
    assert text.splitlines() == [
        "command=solve",
        "config_hash=ab",
        "residual=1.0000000000000001e-09",
        "iterations=3",
        "wall_time_s=0.250",
    ]


def test_run_config_direct_construction_is_validated():
    with pytest.raises(ConfigError, match="emit"):
        RunConfig(command="radial", domain=Ball(1), density=Constant(),
                  n=1, emit=frozenset({"png"}))
