import csv
import json
import subprocess
import sys
from decimal import Decimal

import pytest

from collapse_lab.cli import CSV_HEADER, EXIT_OK, EXIT_STRICT, EXIT_USAGE, main, resolve_config


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        assert first == CSV_HEADER
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_spectrum_grid(tmp_path):
    assert main(["spectrum", "--r-grid", "linspace:0.01:0.99:99", "--out-dir", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "spectrum.csv")
    assert len(rows) == 99
    assert all(row[header.index("bounds_ok")] == "true" for row in rows)
    summary = json.loads((tmp_path / "spectrum.json").read_text())
    assert summary["violations"] == 0 and summary["min_bound_margin"] > 0


def test_spectrum_single_r(tmp_path):
    assert main(["spectrum", "--r", "0.5", "--out-dir", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "spectrum.csv")
    lam0 = float(rows[0][header.index("lambda0")])
    assert -0.5 < lam0 < -0.125


@pytest.mark.parametrize("grid", ["", "0.5,1.5"])
def test_spectrum_bad_grid(tmp_path, grid, capsys):
    assert main(["spectrum", "--r-grid", grid, "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_construct_zk_end_to_end(tmp_path):
    assert main(["construct-zk", "--seed", "1", "--out-dir", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert set(rep) == {"order", "convergence", "certificate", "zk_construction"}
    assert rep["order"]["kind"] == "nearly-linear"
    assert rep["certificate"]["clean"] is True
    header, rows = read_csv(tmp_path / "events.csv")
    assert header == ["index", "t", "pair", "eta_pre", "eta_post", "zeta", "tau"]
    assert len(rows) >= 500
    assert {row[2] for row in rows} == {"01", "02"}
    state = json.loads((tmp_path / "initial_state.json").read_text())
    assert len(state["positions"]) == 3


def test_construct_zk_cos_minus_half_rejected(tmp_path, capsys):
    code = main(["construct-zk", "--cos-theta0", "-0.5", "--out-dir", str(tmp_path)])
    assert code == EXIT_USAGE
    assert "cos" in capsys.readouterr().err


def test_construct_zk_large_r(tmp_path, capsys):
    assert main(["construct-zk", "--r", "0.5", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert "9-4" in capsys.readouterr().err


def test_construct_zk_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["construct-zk", "--seed", "3", "--n-collisions", "60", "--out-dir", str(d)]) == EXIT_OK
    assert files(a) == files(b)


def test_sweep_cardinality_and_parallelism(tmp_path):
    args = ["sweep", "--r-grid", "0.01,0.02,0.03", "--cos-grid", "-0.5,-0.9,-0.95", "--seeds", "1,2",
            "--n-collisions", "40"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--workers", "1", "--out-dir", str(a)]) == EXIT_OK
    assert main(args + ["--workers", "3", "--out-dir", str(b)]) == EXIT_OK
    assert files(a) == files(b)
    header, rows = read_csv(a / "sweep.csv")
    assert len(rows) == 18
    keys = [(float(r[0]), float(r[1]), int(r[2])) for r in rows]
    assert keys == sorted(keys)
    status = header.index("status")
    # cos = -0.5 is below the stability threshold at these r, the others are admissible
    for row in rows:
        admissible = float(row[1]) < -0.8
        assert row[status].startswith("ok") == admissible, row


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--seeds", "", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_config_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# a comment\nr = 0.03\ndelta-theta = 0.04\ntheta0_deg = 160\n")
    cfg = resolve_config("construct-zk", {"config": str(conf)})
    assert cfg.r == 0.03 and cfg.delta_theta == 0.04 and cfg.dim == 2
    assert cfg.cos0 == pytest.approx(-0.9396926207859083)
    cfg = resolve_config("construct-zk", {"config": str(conf), "r": 0.01, "cos_theta0": -0.95})
    assert cfg.r == 0.01 and cfg.cos0 == -0.95


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("radius = 3\n")
    assert main(["construct-zk", "--config", str(conf)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [["construct-zk", "--dim", "1"], ["construct-zk", "--delta-theta", "0"],
                                  ["simulate", "--r", "1.5"], ["bogus"],
                                  ["triangular-probe", "--x0", "1,0,-1,1"]])
def test_usage_errors(tmp_path, argv):
    assert main(argv + ["--out-dir", str(tmp_path)] if argv != ["bogus"] else argv) == EXIT_USAGE


def decimal_round_trip(path, doubles=True):
    header, rows = read_csv(path)
    for row in rows:
        for cell in row:
            if cell in ("", "true", "false") or not cell[0] in "-0123456789":
                continue
            d = Decimal(cell)
            digits = len(d.as_tuple().digits)
            assert digits <= 17, cell
            if doubles and abs(d) < Decimal("1e300") and (d == 0 or abs(d) > Decimal("1e-300")):
                assert format(float(cell), ".17g") == cell
    return rows


def test_csv_round_trip(tmp_path):
    assert main(["construct-zk", "--n-collisions", "50", "--out-dir", str(tmp_path / "z")]) == EXIT_OK
    assert main(["spectrum", "--r-grid", "linspace:0.05:0.95:7", "--out-dir", str(tmp_path / "s")]) == EXIT_OK
    assert main(["triangular-probe", "--r", "0.05", "--out-dir", str(tmp_path / "p")]) == EXIT_OK
    # events carry mpfr values, rounded once to 17 digits
    decimal_round_trip(tmp_path / "z" / "events.csv", doubles=False)
    decimal_round_trip(tmp_path / "s" / "spectrum.csv")
    rows = decimal_round_trip(tmp_path / "p" / "orbit.csv")
    probe = json.loads((tmp_path / "p" / "probe.json").read_text())
    assert probe["exit_index"] is not None and len(rows) == 501


def write_state(path, positions, velocities):
    path.write_text(json.dumps({"positions": positions, "velocities": velocities, "t": 0}))
    return str(path)


def test_simulate_strict_triple(tmp_path):
    st = write_state(tmp_path / "s.json", [[0, 0], [2, 0], [-2, 0]], [[0, 0], [-1, 0], [1, 0]])
    assert main(["simulate", "--initial-state", st, "--strict", "--out-dir", str(tmp_path / "a")]) == EXIT_STRICT
    assert main(["simulate", "--initial-state", st, "--out-dir", str(tmp_path / "b")]) == EXIT_OK
    header, rows = read_csv(tmp_path / "b" / "events.csv")
    assert rows == []
    assert json.loads((tmp_path / "b" / "report.json").read_text()) == {}


def test_simulate_from_state(tmp_path):
    st = write_state(tmp_path / "s.json", [[0, 0], [2, 0], [0, 5]], [[0, 0], [-1, 0], [0, 0]])
    assert main(["simulate", "--initial-state", st, "--r", "0.5", "--out-dir", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "events.csv")
    assert len(rows) >= 1 and rows[0][2] == "01"
    assert float(rows[0][header.index("t")]) == pytest.approx(1.0, abs=1e-15)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["convergence"]["termination"] == "separation"


def test_simulate_bad_state_file(tmp_path):
    assert main(["simulate", "--initial-state", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "collapse_lab", "spectrum", "--r", "0.3", "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "spectrum.csv").exists()
