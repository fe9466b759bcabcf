"""YAML domain files.

A domain file is a mapping with a ``kind`` key and the constructor arguments
of that kind, for example::

    kind: ellipse
    center: [0, 0]
    semi_axes: [2, 1]
    rotation: 0.0

Errors name the offending field and the line it sits on.
"""

from __future__ import annotations

import yaml

from . import geometry as geo


class DomainFileError(ValueError):
    pass


_SCHEMA = {
    "circle": {"center": "point", "radius": "positive"},
    "ellipse": {"center": "point", "semi_axes": "pair+", "rotation": "number"},
    "annulus": {"center": "point", "r0": "positive"},
    "fourier": {"x_cos": "list", "x_sin": "list", "y_cos": "list", "y_sin": "list",
                "reach": "positive"},
    "spline": {"points": "points", "reach": "positive"},
    "halfplane": {"box": "box"},
}
_REQUIRED = {
    "circle": (), "ellipse": (), "annulus": ("r0",),
    "fourier": ("x_cos", "x_sin", "y_cos", "y_sin"), "spline": ("points",), "halfplane": (),
}


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check(kind_of, value):
    if kind_of == "number":
        return _is_num(value)
    if kind_of == "positive":
        return _is_num(value) and value > 0
    if kind_of == "point":
        return isinstance(value, list) and len(value) == 2 and all(map(_is_num, value))
    if kind_of == "pair+":
        return _check("point", value) and all(v > 0 for v in value)
    if kind_of == "list":
        return isinstance(value, list) and len(value) >= 1 and all(map(_is_num, value))
    if kind_of == "points":
        return isinstance(value, list) and len(value) >= 4 and all(_check("point", p) for p in value)
    if kind_of == "box":
        return (isinstance(value, list) and len(value) == 4 and all(map(_is_num, value))
                and value[0] < value[1] and value[2] < value[3])
    raise AssertionError(kind_of)


_EXPECT = {"number": "a number", "positive": "a positive number", "point": "a pair [x, y]",
           "pair+": "two positive numbers", "list": "a non-empty list of numbers",
           "points": "a list of at least four [x, y] points",
           "box": "[xmin, xmax, ymin, ymax] with min < max"}


def parse_domain(text, source="<string>"):
    """Parse YAML text into a domain object."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        raise DomainFileError(f"{source}: {where}: YAML syntax error: "
                              f"{getattr(exc, 'problem', exc)}") from None
    if not isinstance(node, yaml.MappingNode):
        raise DomainFileError(f"{source}: line 1: expected a mapping of fields")
    lines = {}
    data = {}
    loader = yaml.SafeLoader("")
    for k, v in node.value:
        key = loader.construct_object(k, deep=True)
        if key in data:
            raise DomainFileError(f"{source}: line {k.start_mark.line + 1}: field '{key}' repeated")
        data[key] = loader.construct_object(v, deep=True)
        lines[key] = k.start_mark.line + 1
    kind = data.pop("kind", None)
    if kind not in _SCHEMA:
        line = lines.get("kind", 1)
        raise DomainFileError(f"{source}: line {line}: field 'kind' must be one of "
                              f"{', '.join(sorted(_SCHEMA))} (got {kind!r})")
    schema = _SCHEMA[kind]
    for key, value in data.items():
        if key not in schema:
            raise DomainFileError(f"{source}: line {lines[key]}: unknown field '{key}' "
                                  f"for kind {kind}")
        if not _check(schema[key], value):
            raise DomainFileError(f"{source}: line {lines[key]}: field '{key}' must be "
                                  f"{_EXPECT[schema[key]]}")
    for key in _REQUIRED[kind]:
        if key not in data:
            raise DomainFileError(f"{source}: field '{key}' is required for kind {kind}")
    try:
        return build_domain(kind, data)
    except geo.GeometryError as exc:
        raise DomainFileError(f"{source}: {exc}") from None


def build_domain(kind, params):
    p = dict(params)
    if kind == "circle":
        return geo.circle(tuple(p.get("center", (0.0, 0.0))), float(p.get("radius", 1.0)))
    if kind == "ellipse":
        return geo.ellipse(tuple(p.get("center", (0.0, 0.0))), tuple(p.get("semi_axes", (2.0, 1.0))),
                           float(p.get("rotation", 0.0)))
    if kind == "annulus":
        return geo.annulus(tuple(p.get("center", (0.0, 0.0))), float(p["r0"]))
    if kind == "fourier":
        return geo.fourier_domain(p["x_cos"], p["x_sin"], p["y_cos"], p["y_sin"], p.get("reach"))
    if kind == "spline":
        return geo.spline_domain(p["points"], p.get("reach"))
    if kind == "halfplane":
        return geo.HalfPlane(tuple(p.get("box", (0.0, 1.0, 0.0, 1.0))))
    raise DomainFileError(f"unknown kind {kind!r}")


def load_domain(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DomainFileError(f"{path}: cannot read domain file ({exc.strerror})") from None
    return parse_domain(text, str(path))


def dump_domain(domain):
    """YAML text that reproduces ``domain`` through :func:`parse_domain`."""
    kind = domain.kind if hasattr(domain, "kind") else "halfplane"
    params = dict(getattr(domain, "params", {}) or {})
    if kind == "halfplane":
        params = {"box": list(domain.box)}
    return yaml.safe_dump({"kind": kind, **params}, sort_keys=True)
