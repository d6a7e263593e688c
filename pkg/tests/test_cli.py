"""End-to-end command-line tests: config handling, run artifacts, exit codes.

Runs are executed in-process through cli.main so coverage and monkeypatching
work; sizes are kept small enough for the fast suite.
"""
import json
import math

import numpy as np
import pytest
import yaml

from ratchetrotor import cli, quantum, runio
from ratchetrotor.analysis import TimeSeries, gogolin_density
from ratchetrotor.distribution import MomentumDistribution, from_weights, symmetric_grid
from ratchetrotor.model import params_from_mapping

TWO_PI = 2.0 * math.pi

BASE_CONFIG = {
    "params": {"kick_strength": 3.1, "hbar_eff": 0.8, "sigma": 1.32, "seed": 42},
    "run": {"n_kicks": 6, "record_at": [3, 6]},
    "classical": {"n_points": 4000, "portrait_bins": 32},
    "quantum": {"n_samples": 40},
    "grid": {"p_max": 40.0, "bin_width": 0.4},
}


def write_config(tmp_path, name="run.yaml", **section_overrides):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    for section, value in section_overrides.items():
        cfg[section] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def read_data_digests(out_dir):
    manifest = runio.read_manifest(out_dir)
    return {name: runio.file_digest(out_dir / name) for name in manifest["files"]}


# ------------------------------------------------------------- bad inputs


def test_missing_config_is_a_config_error(tmp_path, capsys):
    out = tmp_path / "out"
    rc = cli.main(["classical", "--config", str(tmp_path / "absent.yaml"), "--out", str(out)])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_config_key_is_named(tmp_path, capsys):
    cfg = write_config(tmp_path, run={"n_kicks": 6, "recorb_at": [3]})
    rc = cli.main(["classical", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "recorb_at" in capsys.readouterr().err


def test_engine_section_is_required(tmp_path, capsys):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    del cfg["classical"]
    path = tmp_path / "noengine.yaml"
    path.write_text(yaml.safe_dump(cfg))
    rc = cli.main(["classical", "--config", str(path), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "classical" in capsys.readouterr().err


def test_record_flag_validation(tmp_path, capsys):
    cfg = write_config(tmp_path)
    rc = cli.main(
        ["classical", "--config", cfg, "--out", str(tmp_path / "o1"), "--record", "3,99"]
    )
    assert rc == 2
    assert "outside" in capsys.readouterr().err
    rc = cli.main(
        ["classical", "--config", cfg, "--out", str(tmp_path / "o2"), "--record", "a,b"]
    )
    assert rc == 2
    assert "comma list" in capsys.readouterr().err


@pytest.mark.parametrize("preset", cli.PRESETS)
def test_presets_load_and_build_params(preset):
    raw = cli.load_config(preset)
    params = params_from_mapping(raw["params"])
    assert params.kick_strength > 0
    assert "run" in raw


# -------------------------------------------------------------- run flows


def test_classical_run_writes_verified_directory(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(["classical", "--config", cfg, "--out", str(out)])
    assert rc == 0
    assert "classical run complete" in capsys.readouterr().out

    manifest = runio.verify_run_dir(out)
    assert set(manifest["files"]) == {
        "dist_n3.csv", "dist_n6.csv", "p_mean.csv", "p2.csv", "p2_right.csv", "portrait.csv",
    }
    dist = runio.read_distribution_csv(out / "dist_n6.csv")
    assert dist.n_kicks == 6
    assert dist.n_samples == 4000
    assert np.trapezoid(dist.density, dist.grid) == pytest.approx(1.0, abs=1e-9)
    series = runio.read_series_csv(out / "p2.csv")
    assert series.kicks.tolist() == list(range(7))


def test_quantum_run_writes_verified_directory(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(["quantum", "--config", cfg, "--out", str(out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "quantum run complete" in stdout
    assert "lattice" in stdout

    manifest = runio.verify_run_dir(out)
    assert "asymmetry.csv" in manifest["files"]
    assert manifest["grid"]["initial_m"] >= 64
    assert manifest["grid"]["final_m"] >= manifest["grid"]["initial_m"]
    asym = runio.read_series_csv(out / "asymmetry.csv")
    assert asym.kicks.tolist() == [3, 6]
    assert np.all(asym.values >= 0)


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    for engine in ("classical", "quantum"):
        a, b = tmp_path / f"{engine}_a", tmp_path / f"{engine}_b"
        assert cli.main([engine, "--config", cfg, "--out", str(a)]) == 0
        assert cli.main([engine, "--config", cfg, "--out", str(b)]) == 0
        assert read_data_digests(a) == read_data_digests(b)
        ma, mb = runio.read_manifest(a), runio.read_manifest(b)
        ma.pop("wall_time_s")
        mb.pop("wall_time_s")
        assert ma == mb


def test_thread_count_does_not_change_bytes(tmp_path):
    cfg = write_config(
        tmp_path,
        run={"n_kicks": 8, "record_at": [8]},
        classical={"n_points": 60_000, "portrait_bins": 32},
        quantum={"n_samples": 130},
    )
    for engine in ("classical", "quantum"):
        one, two = tmp_path / f"{engine}_t1", tmp_path / f"{engine}_t2"
        assert cli.main([engine, "--config", cfg, "--out", str(one), "--threads", "1"]) == 0
        assert cli.main([engine, "--config", cfg, "--out", str(two), "--threads", "2"]) == 0
        assert read_data_digests(one) == read_data_digests(two)


def test_seed_override_changes_data_reproducibly(tmp_path):
    cfg = write_config(tmp_path)
    base, o7a, o7b = (tmp_path / d for d in ("base", "o7a", "o7b"))
    assert cli.main(["classical", "--config", cfg, "--out", str(base)]) == 0
    for out in (o7a, o7b):
        rc = cli.main(
            ["classical", "--config", cfg, "--out", str(out), "--seed-override", "7"]
        )
        assert rc == 0
    assert runio.read_manifest(o7a)["seed"] == 7
    assert read_data_digests(o7a) == read_data_digests(o7b)
    assert (
        read_data_digests(base)["dist_n6.csv"] != read_data_digests(o7a)["dist_n6.csv"]
    )


def test_record_flag_selects_snapshots(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(["classical", "--config", cfg, "--out", str(out), "--record", "2,4"])
    assert rc == 0
    manifest = runio.read_manifest(out)
    assert manifest["run"]["record_at"] == [2, 4]
    assert (out / "dist_n2.csv").exists()
    assert (out / "dist_n4.csv").exists()
    assert not (out / "dist_n6.csv").exists()


def test_reproducible_reduction_flag_is_accepted(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(
        ["classical", "--config", cfg, "--out", str(out), "--reproducible-reduction"]
    )
    assert rc == 0
    assert runio.read_manifest(out)["reproducible_reduction"] is True


# ---------------------------------------------------------------- analyze


def test_malformed_csv_row_is_located(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("p,density\n0,1\nbad\n")
    rc = cli.main(["analyze", "asymmetry", "--dist", str(bad)])
    assert rc == 2
    assert "row 3" in capsys.readouterr().err

    rc = cli.main(["analyze", "asymmetry", "--dist", str(tmp_path / "missing.csv")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_analyze_power_law_roundtrip(tmp_path, capsys):
    kicks = np.arange(1, 61)
    series = TimeSeries(kicks=kicks, values=2.0 * kicks**1.35)
    src = tmp_path / "p2_right.csv"
    runio.write_series_csv(src, series, "deadbeef", "p2_right")
    report = tmp_path / "fit.json"
    rc = cli.main(
        [
            "analyze", "power-law",
            "--series", str(src),
            "--n-min", "5", "--n-max", "50",
            "--out", str(report),
        ]
    )
    assert rc == 0
    assert "power-law exponent = 1.35" in capsys.readouterr().out
    payload = json.loads(report.read_text())
    assert payload["analysis"] == "power-law"
    assert payload["estimate"] == pytest.approx(1.35, abs=1e-12)
    assert payload["window"] == [5.0, 50.0]
    assert payload["inputs"] == {"p2_right.csv": runio.file_digest(src)}


def test_analyze_peak_and_asymmetry(tmp_path, capsys):
    grid = symmetric_grid(30.0, 0.1)
    target = grid[np.argmin(np.abs(grid - (-TWO_PI * 9 / 3.0)))]
    base = from_weights(grid, np.where(grid == target, 1.0, 0.0))
    dist = MomentumDistribution(
        grid=base.grid, density=base.density, overflow_fraction=0.0, n_kicks=9, n_samples=100
    )
    src = tmp_path / "dist_n9.csv"
    runio.write_distribution_csv(src, dist, "deadbeef")

    report = tmp_path / "peak.json"
    rc = cli.main(["analyze", "peak", "--dist", str(src), "--out", str(report)])
    assert rc == 0
    assert "peak at p =" in capsys.readouterr().out
    payload = json.loads(report.read_text())
    assert payload["location"] == pytest.approx(target, abs=1e-9)
    assert payload["population"] == pytest.approx(1.0, abs=1e-9)

    even = from_weights(grid, np.exp(-(grid**2) / 8.0))
    src2 = tmp_path / "even.csv"
    runio.write_distribution_csv(src2, even, "deadbeef")
    report2 = tmp_path / "asym.json"
    rc = cli.main(["analyze", "asymmetry", "--dist", str(src2), "--out", str(report2)])
    assert rc == 0
    assert json.loads(report2.read_text())["value"] < 1e-12


def test_analyze_gogolin_fit_roundtrip(tmp_path, capsys):
    grid = symmetric_grid(1200.0, 1.0)
    dist = from_weights(grid, gogolin_density(grid, 35.0))
    src = tmp_path / "dist_loc.csv"
    runio.write_distribution_csv(src, dist, "deadbeef")
    report = tmp_path / "loc.json"
    rc = cli.main(
        ["analyze", "gogolin", "--dist", str(src), "--p-window", "250", "--out", str(report)]
    )
    assert rc == 0
    assert "localization length" in capsys.readouterr().out
    payload = json.loads(report.read_text())
    assert payload["estimate"] == pytest.approx(35.0, rel=1e-3)
    assert payload["window"] == [5.0, 250.0]


def test_analyze_front_roundtrip(tmp_path, capsys):
    grid = symmetric_grid(3600.0, 1.0)
    args = ["analyze", "front"]
    for n in (10, 20, 40, 80):
        weights = ((grid >= 0.0) & (grid <= 40.0 * n**0.675)).astype(float)
        base = from_weights(grid, weights)
        dist = MomentumDistribution(
            grid=base.grid, density=base.density, overflow_fraction=0.0, n_kicks=n, n_samples=1
        )
        src = tmp_path / f"dist_n{n}.csv"
        runio.write_distribution_csv(src, dist, "deadbeef")
        args += ["--dist", str(src)]
    report = tmp_path / "front.json"
    rc = cli.main(args + ["--out", str(report)])
    assert rc == 0
    assert "front exponent" in capsys.readouterr().out
    assert json.loads(report.read_text())["estimate"] == pytest.approx(0.675, abs=5e-3)


# ------------------------------------------------------------- tabulation


def test_gogolin_tabulation_normalizes(tmp_path, capsys):
    out = tmp_path / "profile.csv"
    rc = cli.main(
        ["gogolin", "--xi", "35", "--p-max", "3000", "--bin-width", "0.1", "--out", str(out)]
    )
    assert rc == 0
    assert "tabulated localized profile" in capsys.readouterr().out
    p, d = [], []
    for line in out.read_text().splitlines():
        if line.startswith("#") or line == "p,density":
            continue
        a, b = line.split(",")
        p.append(float(a))
        d.append(float(b))
    p, d = np.array(p), np.array(d)
    assert abs(np.trapezoid(d, p) - 1.0) < 1e-6
    assert np.array_equal(d, d[::-1])  # even in p


# ------------------------------------------------------------- exit codes


def test_lattice_cap_is_a_numerical_failure(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(quantum, "MAX_LATTICE", 256)
    cfg = write_config(tmp_path, run={"n_kicks": 200, "record_at": [200]})
    rc = cli.main(["quantum", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 3
    err = capsys.readouterr().err
    assert "numerical failure" in err
    assert "cap" in err


def test_unwritable_out_is_an_io_failure(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("occupied")
    cfg = write_config(tmp_path)
    rc = cli.main(["classical", "--config", cfg, "--out", str(blocker)])
    assert rc == 4
    assert "I/O failure" in capsys.readouterr().err
