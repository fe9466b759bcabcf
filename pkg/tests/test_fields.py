import numpy as np
import pytest

from liouville import fields
from liouville import fuchsian as F
from liouville import geometry as geo
from liouville import oracles
from liouville.fields import FieldFormatError, GridField, RadiusInterpolator


def test_grid_field_round_trip(tmp_path, disk):
    g = geo.build_grid(disk, 1 / 16, 0.05)
    f = GridField.from_function(g, lambda p: np.sin(p[:, 0]) + 1e-17 * p[:, 1], "u")
    path = tmp_path / "u.field"
    fields.write_grid_field(path, f)
    back = fields.read_field(path, grid=g)
    assert np.array_equal(np.isnan(back.values), np.isnan(f.values))
    assert np.array_equal(back.values[f.mask], f.values[f.mask])
    stub = fields.read_field(path)
    assert stub.grid.nx == g.nx and stub.grid.domain_hash == disk.digest()


def test_collar_field_round_trip(tmp_path, disk):
    ch = geo.collar_chart(disk, 0.0, 0.1, n_y=16)
    f = F.chart_field(ch, lambda T, Y: T * np.cos(np.pi * Y / 0.1) + 0.3)
    path = tmp_path / "k.field"
    fields.write_collar_field(path, f)
    back = fields.read_field(path, chart=ch)
    assert np.array_equal(back.values, f.values)
    assert np.array_equal(back.trace, f.trace)


def test_hash_mismatch(tmp_path, disk):
    g = geo.build_grid(disk, 1 / 8, 0.05)
    path = tmp_path / "u.field"
    fields.write_grid_field(path, GridField.from_function(g, lambda p: p[:, 0]))
    g2 = geo.build_grid(geo.circle(radius=2.0), 1 / 8, 0.05)
    with pytest.raises(FieldFormatError):
        fields.read_field(path, grid=g2)


@pytest.mark.parametrize("text,msg", [
    ("nonsense\n", "line 1"),
    ("# liouville field v1\nkind = grid\nbroken line\nvalues\n", "line 3"),
    ("# liouville field v1\nkind = grid\nshape = [2]\n", "values"),
    ("# liouville field v1\nkind = grid\nshape = [3]\nvalues\n1.0\n", "expected 3"),
])
def test_format_errors(tmp_path, text, msg):
    path = tmp_path / "bad.field"
    path.write_text(text)
    with pytest.raises(FieldFormatError, match=msg):
        fields.read_field(path)


def test_interpolator_reproduces_oracle(disk):
    orc = oracles.RadialOracle("disk", 1.0)
    g = geo.build_grid(disk, 1 / 64, 1 / 64)
    I = RadiusInterpolator(GridField.from_function(g, orc.u))
    p = np.array([[0.3, 0.1], [0.0, -0.9], [0.5, 0.5]])
    assert np.allclose(I.v_at(p), orc.v(p), atol=1e-6)
    assert np.allclose(I.grad_at(p), orc.grad_v(p), atol=1e-3)


def test_interpolator_linear_data_exact_at_box_edge():
    hp = geo.HalfPlane((0.0, 1.0, 0.0, 1.0))
    g = geo.build_grid(hp, 1 / 16, 1 / 16)
    I = RadiusInterpolator(GridField.from_function(g, lambda p: -np.log(2 * p[:, 0])))
    p = np.array([[0.5, 0.01], [0.2, 0.99], [0.9, 0.5]])
    assert np.allclose(I.v_at(p), 2 * p[:, 0], atol=1e-12)
    assert np.allclose(I.grad_at(p), [[2.0, 0.0]] * 3, atol=1e-10)


def test_sampler_coercion():
    orc = oracles.RadialOracle("disk", 1.0)
    s = fields.sampler(orc)
    assert s.v_at(np.array([[0.0, 0.0]]))[0] == 1.0
    with pytest.raises(TypeError):
        fields.sampler(3)
