import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville import geometry as geo
from liouville.domainfile import DomainFileError, dump_domain, load_domain, parse_domain


def test_parse_kinds():
    assert parse_domain("kind: circle\nradius: 2\n").params["radius"] == 2
    e = parse_domain("kind: ellipse\nsemi_axes: [2, 1]\n")
    assert e.curvature(0.0) == pytest.approx(2.0, abs=1e-8)
    a = parse_domain("kind: annulus\nr0: 0.5\n")
    assert len(a.curves) == 2
    hp = parse_domain("kind: halfplane\nbox: [0, 1, 0, 2]\n")
    assert isinstance(hp, geo.HalfPlane)


@pytest.mark.parametrize("text,needle", [
    ("kind: circle\nradius: -1\n", "line 2: field 'radius'"),
    ("kind: square\n", "line 1: field 'kind'"),
    ("kind: circle\ncolour: red\n", "line 2: unknown field 'colour'"),
    ("kind: annulus\n", "field 'r0' is required"),
    ("kind: circle\nradius: [1\n", "YAML syntax error"),
    ("- 1\n- 2\n", "expected a mapping"),
    ("kind: ellipse\nsemi_axes: [2, 0]\n", "line 2: field 'semi_axes'"),
    ("kind: circle\nradius: 1\nradius: 2\n", "line 3: field 'radius' repeated"),
    ("kind: annulus\nr0: 1.5\n", "r0"),
])
def test_errors_name_line_and_field(text, needle):
    with pytest.raises(DomainFileError, match=needle.replace("[", r"\[")):
        parse_domain(text)


def test_missing_file(tmp_path):
    with pytest.raises(DomainFileError, match="cannot read"):
        load_domain(tmp_path / "nope.yaml")


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(-3.0, 3.0))
def test_ellipse_round_trip(a, b, rot):
    dom = geo.ellipse(semi_axes=(a, b), rotation=rot)
    assert parse_domain(dump_domain(dom)).digest() == dom.digest()


def test_halfplane_round_trip():
    hp = geo.HalfPlane((0.0, 1.0, -1.0, 1.0))
    assert parse_domain(dump_domain(hp)).digest() == hp.digest()
