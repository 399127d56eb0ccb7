import json
import math

import numpy as np
import pytest

from poreshape import PhysicalParams, io
from poreshape.cli import main
from poreshape.diagnostics import yl_band, yl_discrepancy
from poreshape.mesh import FLUID, unit_square_mesh


def test_yl_discrepancy_dilute_limit():
    params = PhysicalParams()
    d = yl_discrepancy(1e-9, 1e-3, params)      # huge screening length
    flat = params.sigma_c**2 / (2 * params.eps)
    assert d.delta == pytest.approx(flat, rel=1e-6)
    assert d.relative == pytest.approx(0.00356, abs=2e-5)


def test_yl_discrepancy_dense_limit():
    params = PhysicalParams()
    d = yl_discrepancy(1e-9, 0.6e-9, params)
    assert d.lambda_p == pytest.approx(2.78, abs=5e-3)
    assert d.relative == pytest.approx(0.00438, abs=2e-5)


def test_yl_discrepancy_uncharged_would_vanish():
    # sigma_c -> 0 kills the discrepancy (checked on the closed form)
    params = PhysicalParams()
    d = yl_discrepancy(1e-9, 0.8e-9, params)
    tiny = yl_discrepancy(1e-9, 0.8e-9, PhysicalParams(sigma_c=1e-9))
    assert tiny.delta < 1e-7 * d.delta


def test_yl_discrepancy_domain():
    with pytest.raises(ValueError, match="lambda_p"):
        yl_discrepancy(3e-9, 0.6e-9, PhysicalParams())


def test_yl_band_monotone():
    band = yl_band(PhysicalParams())
    rel = [r.relative for r in band["rows"]]
    lam = [r.lambda_p for r in band["rows"]]
    order = np.argsort(lam)
    rel_sorted = np.asarray(rel)[order]
    assert np.all(np.diff(rel_sorted) >= -1e-12)
    assert band["relative_low"] < band["relative_high"]


def test_mesh_text_round_trip(tmp_path, coarse_mesh):
    path = tmp_path / "mesh.txt"
    io.write_mesh_txt(coarse_mesh, path)
    back = io.read_mesh_txt(path)
    assert back.n_nodes == coarse_mesh.n_nodes
    assert np.array_equal(back.triangles, coarse_mesh.triangles)
    assert np.array_equal(back.boundary_tags, coarse_mesh.boundary_tags)
    assert np.allclose(back.nodes, coarse_mesh.nodes, atol=0)


def test_vtk_export(tmp_path):
    m = unit_square_mesh(3)
    data = {"f": np.arange(m.n_nodes, dtype=float),
            "v": np.ones((m.n_nodes, 2))}
    path = tmp_path / "out.vtk"
    io.write_vtk(m, path, point_data=data, cell_data={"c": np.zeros(m.n_triangles)})
    text = path.read_text()
    assert "UNSTRUCTURED_GRID" in text
    assert f"POINTS {m.n_nodes} double" in text
    assert "SCALARS f double 1" in text
    assert "VECTORS v double" in text
    assert "CELL_DATA" in text


def test_checkpoint_round_trip(tmp_path, coarse_mesh):
    fields = {"u": np.linspace(0, 1, coarse_mesh.n_nodes)}
    path = tmp_path / "ck.npz"
    io.save_checkpoint(path, coarse_mesh, fields, {"n": 3})
    mesh, back, meta = io.load_checkpoint(path)
    assert mesh.n_nodes == coarse_mesh.n_nodes
    assert np.array_equal(back["u"], fields["u"])
    assert meta["n"] == 3


def test_cli_yl_band(tmp_path):
    out = tmp_path / "band"
    rc = main(["--mode", "yl-band", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["extras"]["relative_low"] == pytest.approx(0.00356, abs=2e-5)
    assert report["extras"]["relative_high"] == pytest.approx(0.00438, abs=2e-5)
    assert (out / "yl_band.csv").exists()
    assert (out / "yl_band.png").exists()
    header = (out / "yl_band.csv").read_text().splitlines()[0]
    assert "[m]" in header and "[1]" in header      # units in the header


def test_cli_determinism_bytes(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--mode", "yl-band", "--out", str(out1)]) == 0
    assert main(["--mode", "yl-band", "--out", str(out2)]) == 0
    assert (out1 / "yl_band.csv").read_bytes() == (out2 / "yl_band.csv").read_bytes()
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_cli_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\nk_S = 1e9\nG_S = 9e9\n")
    rc = main(["--mode", "yl-band", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 64


def test_cli_unknown_mode():
    with pytest.raises(SystemExit):
        main(["--mode", "warp"])


def test_cli_fixed_point_run(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("""
[geometry]
d = 2e-9
l = 10e-9
s = 0.5e-9

[physics]
sigma_skip = true

[solver]
h = 0.7e-9
max_iter = 40
err = 1e-3

[output]
dir = {}
""".format(tmp_path / "run_out"))
    rc = main(["--mode", "fixed-point", "--config", str(cfg)])
    assert rc == 0
    out = tmp_path / "run_out"
    for name in ("iterations.csv", "interface.csv", "state.vtk", "mesh.txt",
                 "report.json", "report.txt", "history.png",
                 "interface_evolution.png", "fields.png"):
        assert (out / name).exists(), name
    assert (out / "checkpoints" / "final.npz").exists()
    header = (out / "iterations.csv").read_text().splitlines()[0]
    assert "E_total [E_star]" in header
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "CONVERGED"
    assert report["exit_code"] == 0


def test_cli_radial_oracle(tmp_path):
    out = tmp_path / "oracle"
    rc = main(["--mode", "radial-oracle", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["extras"]["linf_error"] < 0.08     # coarse default mesh
    assert (out / "slab_profile.csv").exists()
    assert (out / "slab_profile.png").exists()


def test_report_text_isolates_timestamp(tmp_path):
    out = tmp_path / "band"
    main(["--mode", "yl-band", "--out", str(out)])
    lines = (out / "report.txt").read_text().splitlines()
    assert lines[0].startswith("# generated")
    assert not any("generated" in ln for ln in lines[1:])
