import csv
import json
import math

import numpy as np
import pytest

from layerpot.cli import main
from layerpot.errors import ConfigError, EmptySelection
from layerpot.harness import (CSV_HEADER, DUMP_HEADER, RunConfig, TargetSelection, emit_plot_script,
                              fitted_orders, run, select_targets)
from layerpot.surface import UnitSphere

S = UnitSphere()


def test_band_selection_on_sphere():
    h = 0.25
    fr = select_targets(S, h)
    r = np.linalg.norm(fr.y, axis=1)
    assert np.all(np.abs(r - 1) <= h + 1e-11)
    assert np.allclose(fr.y / h, np.round(fr.y / h))
    # every grid point in the band is found
    g = np.arange(-8, 9) * h
    P = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    expected = np.sum(np.abs(np.linalg.norm(P, axis=1) - 1) <= h + 1e-11)
    assert len(fr) == expected


def test_selection_order_is_lexicographic():
    y = select_targets(S, 1 / 8).y
    keys = np.round(y * 8).astype(int)
    assert np.all(np.diff(np.lexsort(keys.T[::-1])) == 1)


def test_shell_side_and_octant():
    h = 1 / 16
    fr = select_targets(S, h, TargetSelection(shell=3, octant=True, side="outside"))
    assert np.all((np.abs(fr.b) > 3 * h) & (np.abs(fr.b) <= 4 * h + 1e-11))
    assert np.all(fr.y >= 0) and np.all(fr.b > 0)
    inside = select_targets(S, h, TargetSelection(side="inside"))
    assert np.all(inside.chi == 1.0)


def test_selection_validation():
    with pytest.raises(ConfigError):
        TargetSelection(shell=0)
    with pytest.raises(ConfigError):
        TargetSelection(side="above")


def test_empty_selection():
    class Tiny(UnitSphere):
        def level(self, x):
            return np.sum(np.asarray(x) ** 2, axis=-1) - 1e-4

        def gradient(self, x):
            return 2.0 * np.asarray(x)

    t = Tiny()
    t.lower, t.upper = -0.01 * np.ones(3), 0.01 * np.ones(3)
    with pytest.raises(EmptySelection):
        select_targets(t, 0.5, TargetSelection(side="inside"))


def test_fitted_orders():
    hs = [1 / 32, 1 / 48, 1 / 64]
    errs = [3 * h**5 for h in hs]
    pair, slope = fitted_orders(hs, errs)
    assert np.allclose(pair, 5) and slope == pytest.approx(5)


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(h=[1 / 64, 1 / 32])
    with pytest.raises(ConfigError):
        RunConfig(case="torus")
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"cases": "sphere_single"})
    with pytest.raises(ConfigError):
        RunConfig(order=7, rho=[2, 3, 4]).plan()
    assert RunConfig(h="1/8,1/16").h == [0.125, 0.0625]
    assert RunConfig(case="stokes_sphere").plan().rhos == (3.0, 4.0, 5.0)
    assert RunConfig(q=0.8).default_band() == (3.3, 4.7)


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_writes_csv_dump_and_plot(tmp_path):
    cfg = RunConfig(case="sphere_single", h=[1 / 8, 1 / 12], out=str(tmp_path), baseline=True,
                    dump_targets=True, dump_nodes=True)
    rep = run(cfg)
    rows = _read(tmp_path / "sphere_single.csv")
    assert rows[0] == CSV_HEADER
    assert len(rows) == 5
    assert [r[4] for r in rows[1:]] == ["proportional"] * 2 + ["unregularized"] * 2
    assert rows[1][3] == "2;3;4"
    assert rep.rows[0].l2_err < rep.baseline_rows[0].l2_err
    e = rep.rows[0]
    assert e.l2_err <= e.max_err
    dump = _read(tmp_path / "sphere_single_targets.csv")
    assert dump[0] == DUMP_HEADER
    assert len(dump) - 1 == 2 * sum(r.n_targets for r in rep.rows)
    # the per-target errors reproduce the reported norms
    errs = np.array([float(r[-1]) for r in dump[1:] if r[1] == repr(0.125) and r[4] == "proportional"])
    assert math.sqrt(np.mean(errs**2)) == pytest.approx(e.l2_err, rel=1e-12)
    assert (tmp_path / "sphere_single_nodes_h8.csv").exists()
    script = (tmp_path / "sphere_single_plot.py").read_text()
    assert "sphere_single.csv" in script and '"l2_err"' in script and "(4, 5)" in script
    compile(script, "plot", "exec")


def test_emit_plot_script_requires_rows(tmp_path):
    from layerpot.harness import ErrorReport
    with pytest.raises(ValueError):
        emit_plot_script(ErrorReport([], [], [], float("nan")), tmp_path / "p.py")


def test_run_is_deterministic(tmp_path):
    for k in range(2):
        run(RunConfig(case="stresslet_sphere", h=[1 / 8, 1 / 12], out=str(tmp_path / str(k))))
    a, b = _read(tmp_path / "0/stresslet_sphere.csv"), _read(tmp_path / "1/stresslet_sphere.csv")
    assert [r[:-1] for r in a] == [r[:-1] for r in b]


def test_cli_success(tmp_path, capsys):
    code = main(["--case", "sphere_double", "--h", "1/8,1/12", "--out", str(tmp_path), "--no-plot"])
    assert code == 0
    assert "sphere_double" in capsys.readouterr().out
    assert (tmp_path / "sphere_double.csv").exists()
    assert not (tmp_path / "sphere_double_plot.py").exists()


def test_cli_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"case": "sphere_single", "h": [0.125], "out": str(tmp_path / "a"),
                               "shell": 1}))
    assert main(["--config", str(cfg), "--band", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "sphere_single.csv").exists()
    assert not (tmp_path / "a").exists()


def test_cli_configuration_error(tmp_path, capsys):
    assert main(["--case", "sphere_single", "--h", "1/16,1/8", "--out", str(tmp_path)]) == 1
    assert "configuration error" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json")]) == 1


def test_cli_numerical_failure(tmp_path, capsys):
    code = main(["--case", "sphere_single", "--h", "1/8", "--rho", "2,2.00000000000001,3",
                 "--out", str(tmp_path)])
    assert code == 2
    assert "SingularSystem" in capsys.readouterr().err
