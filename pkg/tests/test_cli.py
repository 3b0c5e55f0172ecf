import csv
import json

import numpy as np
import pytest

from alsp.cli import CSV_HEADER, ConfigError, main, parse_bench_config
from alsp.mmio import read_vector
from alsp.problems import load


def rows_of(text):
    return list(csv.reader(text.strip().splitlines()))


@pytest.fixture
def stokes_dir(tmp_path):
    d = tmp_path / "p"
    assert main(["gen", "--problem", "stokes-mac", "--grid", "4", "--seed", "1", "--out", str(d)]) == 0
    return d


def test_gen_layout(stokes_dir, capsys):
    for name in ("G.mtx", "B.mtx", "f.vec", "g.vec", "meta.txt"):
        assert (stokes_dir / name).is_file()
    p = load(stokes_dir)
    assert (p.system.n, p.system.m) == (24, 16)


def test_gen_bb1_and_oseen(tmp_path):
    assert main(["gen", "--problem", "bb1", "--out", str(tmp_path / "b")]) == 0
    assert load(tmp_path / "b").system.G.shape == (2, 2)
    d = tmp_path / "o"
    assert main(["gen", "--problem", "oseen-mac", "--grid", "8", "--nu", "0.01", "--wind", "1,0", "--out", str(d)]) == 0
    assert "nu=0.01" in (d / "meta.txt").read_text()


def test_solve_spalbb_and_gmres(stokes_dir, tmp_path, capsys):
    sol1, sol2 = tmp_path / "a.vec", tmp_path / "b.vec"
    hist = tmp_path / "h.csv"
    rc = main(["solve", "--method", "spalbb", "--omega", "1e-3", "--delta", "0.5", "--problem", str(stokes_dir),
               "--history", str(hist), "--solution", str(sol1)])
    assert rc == 0
    rows = rows_of(capsys.readouterr().out)
    assert rows[0] == CSV_HEADER
    row = dict(zip(rows[0], rows[1]))
    assert row["status"] == "converged" and float(row["final_relres"]) <= 1e-6
    h = rows_of(hist.read_text())
    assert h[0] == ["iteration", "relres"] and float(h[1][1]) == 1.0
    rc = main(["solve", "--method", "gmres", "--restart", "20", "--problem", str(stokes_dir), "--solution", str(sol2)])
    assert rc == 0
    row = dict(zip(*rows_of(capsys.readouterr().out)))
    assert row["status"] == "converged" and row["oiter"] == ""
    p = load(stokes_dir).system
    z1, z2 = read_vector(sol1), read_vector(sol2)
    dx, dy = z1[: p.n] - z2[: p.n], z1[p.n :] - z2[p.n :]
    G, B = p.G.to_dense(), p.B.to_dense()
    scale = np.linalg.norm(p.rhs)
    assert np.linalg.norm(B.T @ dx) + np.linalg.norm(G @ dx + B @ dy) <= 1e-4 * scale


def test_solve_outside_range_reports_status(tmp_path, capsys):
    from alsp.problems import GeneratedProblem, write_problem
    from conftest import make_system

    d = tmp_path / "ind"
    write_problem(GeneratedProblem(make_system(np.diag([-1.0, 1.0]), [[1.0], [0.0]], [1.0, 1.0], [0.0])), d)
    for omega in ("10", "1"):
        rc = main(["solve", "--method", "spal-exact", "--omega", omega, "--maxit", "500", "--problem", str(d)])
        assert rc == 0
        row = dict(zip(*rows_of(capsys.readouterr().out)))
        assert row["status"] in ("diverged", "maxit", "breakdown")


def test_solve_inner_history(stokes_dir, tmp_path, capsys):
    ih = tmp_path / "inner.csv"
    assert main(["solve", "--method", "spalbb", "--problem", str(stokes_dir), "--inner-history", str(ih)]) == 0
    lines = rows_of(ih.read_text())
    assert lines[0] == ["inner_iteration", "residual"] and len(lines) > 2


def test_bicgstab_history_half_steps(stokes_dir, tmp_path, capsys):
    hist = tmp_path / "h.csv"
    assert main(["solve", "--method", "bicgstab", "--problem", str(stokes_dir), "--history", str(hist)]) == 0
    h = rows_of(hist.read_text())
    assert h[2][0] == "0.5"


def test_usage_and_io_errors(stokes_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["solve", "--method", "nope", "--problem", str(stokes_dir)])
    assert e.value.code == 2
    assert main(["solve", "--method", "gmres", "--problem", str(tmp_path / "missing")]) == 3
    (stokes_dir / "B.mtx").write_text("garbage\n")
    assert main(["solve", "--method", "gmres", "--problem", str(stokes_dir)]) == 3
    assert main(["gen", "--problem", "stokes-mac", "--grid", "1", "--out", str(tmp_path / "x")]) == 2


def test_analyze(tmp_path, stokes_dir, capsys, monkeypatch):
    from alsp.problems import GeneratedProblem, write_problem
    from conftest import make_system

    toy = tmp_path / "toy"
    write_problem(GeneratedProblem(make_system(np.eye(2), [[1.0], [0.0]], [1.0, 0.0], [-1.0])), toy)
    out = tmp_path / "r.json"
    assert main(["analyze", "--problem", str(toy), "--omega", "1", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["spectral"]["eta"] == pytest.approx(1.0)
    assert data["spectral"]["rho_T"] == pytest.approx(0.5)
    assert main(["analyze", "--problem", str(stokes_dir), "--omega", "0.1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["spectral"]["omega_max_exact"] == "inf"
    monkeypatch.setenv("ALSP_DENSE_CAP", "10")
    assert main(["analyze", "--problem", str(stokes_dir)]) == 2
    assert "cap of 10" in capsys.readouterr().err


BENCH = """\
# two problems, three methods, three omegas
problem = stokes-mac grid=4
problem = oseen-mac grid=4 nu=0.1 wind=1,0
method = spalbb
method = gmres restart=20
method = bicgstab
omega = 1e-1, 1e-2
omega = 1e-3
"""


def test_bench_determinism(tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text(BENCH)
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"out{threads}.csv"
        assert main(["bench", "--config", str(cfg), "--threads", threads, "--out", str(out)]) == 0
        outs.append(rows_of(out.read_text()))
    strip = lambda rows: [r[:6] + r[7:] for r in rows]  # noqa: E731
    assert strip(outs[0]) == strip(outs[1])
    assert len(outs[0]) == 1 + 2 * 3 * 3


def test_bench_config_errors():
    with pytest.raises(ConfigError, match="no method"):
        parse_bench_config("problem = stokes-mac grid=4\nomega = 1\n")
    with pytest.raises(ConfigError, match=":2:"):
        parse_bench_config("problem = stokes-mac grid=4\nmethod = warp\nomega = 1\n", "c")
    with pytest.raises(ConfigError, match=":1:"):
        parse_bench_config("frobnicate = 3\n", "c")
    cfg = parse_bench_config("problem = random n=8 m=3\nmethod = spal-inexact inner=lu\nomega = 0.5\nmaxit = 50\n")
    assert cfg.maxit == 50 and cfg.tol == 1e-6 and cfg.methods[0].inner == "lu"


def test_bench_failed_cells_do_not_abort(tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("problem = stokes-mac grid=4\nmethod = spalbb\nmethod = spal-exact\nomega = 1e-2\nmaxit = 1\n")
    assert main(["bench", "--config", str(cfg)]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert [r[-1] for r in rows[1:]] == ["maxit", "maxit"]
