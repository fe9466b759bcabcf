import json

import pytest

from liouville.cli import RunConfig, ConfigError, main, parse_length


@pytest.fixture
def domains(tmp_path):
    files = {"disk": "kind: circle\nradius: 1.0\n",
             "ellipse": "kind: ellipse\nsemi_axes: [2, 1]\n",
             "annulus": "kind: annulus\nr0: 0.5\n",
             "bad": "kind: circle\nradius: -2\n"}
    out = {}
    for k, v in files.items():
        p = tmp_path / f"{k}.yaml"
        p.write_text(v)
        out[k] = str(p)
    return out


def test_parse_length():
    assert parse_length("1/128") == 1 / 128
    assert parse_length("0.25") == 0.25
    with pytest.raises(ConfigError):
        parse_length("abc")


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(domain="x", out="y", h_grid=-1).validate()


def test_solve_disk(tmp_path, domains):
    out = tmp_path / "solve"
    assert main(["solve", domains["disk"], "--out", str(out), "--h-grid", "1/32", "--h-trim", "0.05"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["converged"] and not rep["partial"]
    for name in ("u", "v", "w", ):
        assert (out / f"{name}.field").exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["command"] == "solve"


def test_solve_ellipse_fit_c1(tmp_path, domains):
    from liouville import asymptotics as A, geometry as geo
    from liouville.domainfile import load_domain
    from liouville.fields import read_field

    out = tmp_path / "ell"
    assert main(["solve", domains["ellipse"], "--out", str(out), "--h-grid", "1/32"]) == 0
    dom = load_domain(domains["ellipse"])
    grid = geo.build_grid(dom, 1 / 32, 1 / 32)
    v = read_field(out / "v.field", grid=grid)
    fit = A.fit_expansion(v, dom, [0.25], window=(2 / 32, 0.15))
    assert fit.c1()[0] == pytest.approx(2.0, abs=0.02)


def test_config_error_exit_code(tmp_path, domains, capsys):
    assert main(["solve", domains["bad"], "--out", str(tmp_path / "x")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "x")]) == 2
    assert main(["exact", domains["ellipse"], "--out", str(tmp_path / "x")]) == 2


def test_exact(tmp_path, domains):
    from liouville.fields import read_field
    import numpy as np

    out = tmp_path / "exact"
    assert main(["exact", domains["disk"], "--out", str(out), "--h-grid", "1/16"]) == 0
    w = read_field(out / "w.field")
    assert np.allclose(w.values[np.isfinite(w.values)], -1.0, atol=1e-8)
    v = read_field(out / "v.field")
    assert np.nanmax(v.values) == 1.0
    assert main(["exact", domains["annulus"], "--out", str(tmp_path / "ann"), "--h-grid", "1/16"]) == 0


def test_w0(tmp_path, domains):
    out = tmp_path / "w0"
    assert main(["w0", domains["ellipse"], "--out", str(out), "--n-y", "32"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["notes"]["trace_center"] == pytest.approx(-2.0, rel=0.02)
    assert (out / "contraction.csv").read_text().startswith("iteration,difference")


def test_verify_disk_and_determinism(tmp_path, domains):
    runs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        assert main(["verify", domains["disk"], "--out", str(out), "--h-grid", "1/64"]) == 0
        runs.append(((out / "verify.json").read_bytes(), (out / "checks.csv").read_bytes()))
    assert runs[0] == runs[1]


def test_verify_coarse_grid_exit_code(tmp_path, domains):
    out = tmp_path / "coarse"
    assert main(["verify", domains["disk"], "--out", str(out), "--h-grid", "1/8"]) == 4
    data = json.loads((out / "verify.json").read_text())
    assert any(c["status"] == "insufficient resolution" for c in data["checks"])


def test_convergence(tmp_path, domains):
    out = tmp_path / "conv"
    assert main(["convergence", domains["disk"], "--out", str(out), "--hs", "1/16,1/32,1/64"]) == 0
    rep = json.loads((out / "convergence.json").read_text())
    assert rep["min_order"] > 1.8


def test_config_file(tmp_path, domains):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"domain: {domains['disk']}\nout: {tmp_path / 'cfg'}\nh_grid: 1/32\n")
    assert main(["solve", "--config", str(cfg)]) == 0
    cfg.write_text("domain: x\nbogus: 1\n")
    assert main(["solve", "--config", str(cfg)]) == 2
