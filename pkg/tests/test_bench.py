import numpy as np
import pytest
from dataclasses import replace

from fsiprecond import bench, cli
from fsiprecond.fsisystem import MeshTanglingError


def small(tmp_path, **kw):
    base = dict(levels=(0,), dts=(1e-2,), density_ratios=(10.0,), preconditioners=("M1",), out=str(tmp_path))
    base.update(kw)
    return bench.BenchConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        bench.BenchConfig(levels=())
    with pytest.raises(ValueError):
        bench.BenchConfig(tol=1.5)
    with pytest.raises(ValueError):
        bench.BenchConfig(dts=(0.01, -1.0))
    with pytest.raises(ValueError):
        bench.BenchConfig(preconditioners=("M9",))
    with pytest.raises(ValueError):
        bench.BenchConfig(geometry="airfoil")


def test_config_text_round_trip():
    cfg = bench.BenchConfig(levels=(0, 2), dts=(0.01,), preconditioners=("M1", "SC"), tol=1e-8, serial=False)
    assert bench.parse_config_text(bench.format_config(cfg)) == cfg
    text = """
# sweep
geometry = channel_flag
dt = 0.01, 0.001
precond = M3
max-iter = 40
serial = yes
"""
    cfg = bench.parse_config_text(text)
    assert cfg.geometry == "channel_flag" and cfg.dts == (0.01, 0.001)
    assert cfg.preconditioners == ("M3",) and cfg.max_iter == 40 and cfg.serial
    with pytest.raises(ValueError):
        bench.parse_config_text("nonsense = 1")
    with pytest.raises(ValueError):
        bench.parse_config_text("levels 1")


def test_single_cell_table(tmp_path):
    table = bench.run_iteration_table(small(tmp_path))
    header, body = table.rows()
    assert len(body) == 1 and len(header) == 3
    assert len(table.cells) == 1
    csv_path, txt_path = table.write(tmp_path)
    assert csv_path.read_text().count("\n") == 2


def test_table_complete_and_marks_failures(tmp_path):
    cfg = small(tmp_path, levels=(0, 1), preconditioners=("M1", "M2"), max_iter=5)
    table = bench.run_iteration_table(cfg)
    assert len(table.cells) == 4
    _, body = table.rows()
    assert [row[0] for row in body] == ["0", "1"]
    labels = [cell for row in body for cell in row[2:]]
    assert "×(5)" in labels                    # M2 needs more than 5 iterations
    assert table.count(0, 1e-2, 10.0, "M2") is None
    assert table.count(0, 1e-2, 10.0, "M1") <= 5


def test_serial_table_deterministic(tmp_path):
    cfg = small(tmp_path, preconditioners=("M1", "SC"), density_ratios=(1.0, 10.0))
    a = bench.run_iteration_table(cfg).to_csv()
    b = bench.run_iteration_table(cfg).to_csv()
    assert a == b
    par = bench.run_iteration_table(replace(cfg, serial=False, workers=2)).to_csv()
    assert par == a


def test_theory_suite_level0(tmp_path):
    bundle = bench.run_theory_suite(small(tmp_path, dts=(1e-2, 1e-3, 1e-4), density_ratios=(10.0,)))
    assert bundle.passed, bundle.summary()
    names = [c.name for c in bundle.checks]
    assert "norm identities" in names and "exact-inverse self test" in names
    bundle.write(tmp_path)
    assert (tmp_path / "infsup.csv").exists() and (tmp_path / "spectra.csv").exists()
    geo = bundle.geometry
    assert geo[0][1:3] == (1.0, 1.0)


def test_theory_size_guard(tmp_path):
    with pytest.raises(bench.analysis.DenseSizeError):
        bench.run_theory_suite(small(tmp_path, levels=(0, 1)), limit=500)


def test_evolution_zero_data(tmp_path):
    res = bench.run_time_evolution(small(tmp_path, inflow_peak=0.0, steps=10))
    assert len(res.checkpoints) == 10
    for path in res.checkpoints:
        data = bench.read_checkpoint(path)
        assert not np.any(data["v"]) and not np.any(data["p"]) and not np.any(data["u_s"])
    assert not np.any(res.tip[:, 1])


def test_evolution_constant_inflow(tmp_path):
    cfg = small(tmp_path / "a", steps=5, preconditioners=("M1",))
    res = bench.run_time_evolution(cfg)
    for dg in res.diagnostics:
        assert dg["relative_divergence_residual"] <= 1e-9
    again = bench.run_time_evolution(replace(cfg, out=str(tmp_path / "b")))
    for p, q in zip(res.checkpoints, again.checkpoints):
        assert p.read_bytes() == q.read_bytes()
    tip = np.loadtxt(tmp_path / "a" / "tip.txt")
    assert tip.shape == (6, 2) and np.any(tip[1:, 1])


def test_evolution_tangling_reports_step(tmp_path):
    cfg = small(tmp_path, steps=3, dts=(1.0,), inflow_peak=0.0)
    with pytest.raises(MeshTanglingError) as info:
        bench.run_time_evolution(cfg, g_s=(0.0, -1e9))
    assert info.value.step >= 1


def test_cli_subcommands(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.main(["table", "--levels", "0", "--dt", "0.01", "--density-ratios", "10", "--precond", "M1,M3",
                     "--out", out, "--serial"]) == 0
    assert "M3" in capsys.readouterr().out
    assert cli.main(["mesh", "--levels", "0,1", "--out", out]) == 0
    assert (tmp_path / "cavity_halves_level1.mesh").exists()
    assert cli.main(["evolve", "--levels", "0", "--steps", "2", "--out", out + "/ev"]) == 0
    assert (tmp_path / "ev" / "checkpoint_0002.txt").exists()
    cfg = tmp_path / "c.cfg"
    cfg.write_text("levels = 0\ndt = 0.01\ndensity_ratios = 10\n")
    assert cli.main(["theory", "--config", str(cfg), "--out", out + "/th"]) == 0
    assert cli.main(["table", "--tol", "2"]) == 2
