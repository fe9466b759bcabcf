"""Grid and collar fields, their text file format, and interpolation.

File layout (both kinds)::

    # liouville field v1
    kind = grid | collar
    name = u
    <header lines "key = value", values JSON-encoded>
    values
    <one float per line, row-major, repr() precision, nan where masked>

Collar files add the chart block (base point, theta, rotation, log-grid
parameters) and an optional ``trace`` line holding the T = 0 values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

MAGIC = "# liouville field v1"


class FieldFormatError(ValueError):
    pass


@dataclass
class GridField:
    """Scalar field on a :class:`~liouville.geometry.Grid`; NaN outside its mask."""

    grid: object
    values: np.ndarray
    name: str = "u"

    @property
    def mask(self):
        return np.isfinite(self.values)

    @classmethod
    def from_interior(cls, grid, vec, name="u"):
        vals = np.full((grid.ny, grid.nx), np.nan)
        vals[grid.interior] = vec
        return cls(grid, vals, name)

    @classmethod
    def from_function(cls, grid, f, name="u", mask=None):
        mask = grid.interior if mask is None else mask
        vals = np.full((grid.ny, grid.nx), np.nan)
        vals[mask] = f(grid.points()[mask])
        return cls(grid, vals, name)

    def interior_values(self):
        return self.values[self.grid.interior]

    def header(self):
        hdr = self.grid.header() if hasattr(self.grid, "header") else dict(self.grid)
        hdr["name"] = self.name
        return hdr

    def max_abs(self, where=None):
        m = self.mask if where is None else (self.mask & where)
        return float(np.max(np.abs(self.values[m]))) if m.any() else 0.0


@dataclass
class CollarField:
    """Field on a collar chart: rows are the log-T nodes, columns the periodic Y nodes.

    Y is sampled on [-theta, theta) without the duplicate endpoint, so the
    periodic ends agree by construction.  ``trace`` holds T = 0 values when known.
    """

    chart: object
    values: np.ndarray
    trace: np.ndarray | None = None
    name: str = "f"
    periodic_in_Y: bool = True
    meta: dict = field(default_factory=dict)

    def like(self, values, trace=None, name=None):
        return CollarField(self.chart, values, trace, name or self.name)

    def header(self):
        if self.chart is not None and hasattr(self.chart, "header"):
            hdr = self.chart.header()
        else:
            hdr = dict(self.meta)
        hdr["name"] = self.name
        return hdr


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------

def _write(path, kind, header, values, trace=None):
    lines = [MAGIC, f"kind = {kind}"]
    for k in sorted(header):
        lines.append(f"{k} = {json.dumps(header[k], sort_keys=True)}")
    lines.append(f"shape = {json.dumps(list(values.shape))}")
    if trace is not None:
        lines.append("trace = " + json.dumps([repr(float(x)) for x in trace]))
    lines.append("values")
    body = "\n".join(repr(float(x)) for x in np.asarray(values, dtype=float).ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n" + body + "\n")


def _read(path):
    with open(path) as fh:
        text = fh.read().split("\n")
    if not text or text[0].strip() != MAGIC:
        raise FieldFormatError(f"{path}: line 1: missing '{MAGIC}' header")
    header = {}
    i = 1
    while i < len(text) and text[i].strip() != "values":
        line = text[i].strip()
        if line and not line.startswith("#"):
            if "=" not in line:
                raise FieldFormatError(f"{path}: line {i + 1}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            try:
                header[k] = json.loads(v)
            except json.JSONDecodeError:
                header[k] = v
        i += 1
    if i == len(text):
        raise FieldFormatError(f"{path}: no 'values' section")
    shape = tuple(header.pop("shape"))
    vals = np.array([float(s) for s in text[i + 1:] if s.strip()])
    if vals.size != int(np.prod(shape)):
        raise FieldFormatError(f"{path}: expected {int(np.prod(shape))} values, found {vals.size}")
    trace = header.pop("trace", None)
    if trace is not None:
        trace = np.array([float(s) for s in trace])
    return header, vals.reshape(shape), trace


def write_grid_field(path, f: GridField):
    _write(path, "grid", f.header(), f.values)


def write_collar_field(path, f: CollarField):
    _write(path, "collar", f.header(), f.values, f.trace)


@dataclass
class GridStub:
    """Grid metadata recovered from a field file (no geometry attached)."""

    nx: int
    ny: int
    origin: tuple
    h: float
    trim: float
    domain_hash: str

    def header(self):
        return {"nx": self.nx, "ny": self.ny, "origin": list(self.origin),
                "spacing": self.h, "trim": self.trim, "domain_hash": self.domain_hash}


def read_field(path, grid=None, chart=None):
    """Read a grid or collar field.  Pass ``grid``/``chart`` to re-attach geometry."""
    header, vals, trace = _read(path)
    kind = header.pop("kind", "grid")
    name = header.pop("name", "f")
    if kind == "collar":
        return CollarField(chart, vals, trace, name, meta=header)
    if grid is None:
        grid = GridStub(int(header["nx"]), int(header["ny"]), tuple(header["origin"]),
                        float(header["spacing"]), float(header["trim"]),
                        str(header["domain_hash"]))
    elif grid.domain.digest() != header.get("domain_hash"):
        raise FieldFormatError(f"{path}: domain hash does not match the supplied grid")
    return GridField(grid, vals, name)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

class RadiusInterpolator:
    """Bicubic interpolation of the hyperbolic radius v = e^{-u} from grid samples.

    Built from a field of u (``name == "u"``) or of v itself.  Nodes outside
    the solved region are filled with the two-term boundary expansion
    2d - kappa d^2 so the spline sees a smooth field across the trim level
    and the boundary.
    """

    PAD = 8

    def __init__(self, field: GridField):
        g = field.grid
        self.grid = g
        v = np.exp(-field.values) if field.name == "u" else np.array(field.values, dtype=float)
        fill = 2.0 * g.distance - g.kappa_foot * g.distance ** 2
        v = np.where(np.isfinite(v), v, fill)
        self.v = v
        # odd reflection continues linear data exactly, so grids that end at a
        # box wall do not pick up the spline's edge transient
        vp = np.pad(v, self.PAD, mode="reflect", reflect_type="odd")
        gy, gx = np.gradient(vp, g.h)
        self._coef_v = ndimage.spline_filter(vp, order=3, mode="nearest")
        self._coef_gx = ndimage.spline_filter(gx, order=3, mode="nearest")
        self._coef_gy = ndimage.spline_filter(gy, order=3, mode="nearest")

    def _eval(self, coef, p):
        p = np.asarray(p, dtype=float)
        g = self.grid
        c = np.stack([(p[..., 1] - g.origin[1]) / g.h, (p[..., 0] - g.origin[0]) / g.h]) + self.PAD
        out = ndimage.map_coordinates(coef, c.reshape(2, -1), order=3, prefilter=False,
                                      mode="nearest")
        return out.reshape(c.shape[1:])

    def v_at(self, p):
        return self._eval(self._coef_v, p)

    def grad_at(self, p):
        return np.stack([self._eval(self._coef_gx, p), self._eval(self._coef_gy, p)], axis=-1)

    def u_at(self, p):
        return -np.log(self.v_at(p))


class FunctionSampler:
    """Same interface as :class:`RadiusInterpolator` for closed-form v and grad v."""

    def __init__(self, v, grad=None):
        self._v = v
        self._grad = grad

    def v_at(self, p):
        return np.asarray(self._v(np.asarray(p, dtype=float)), dtype=float)

    def grad_at(self, p):
        if self._grad is None:
            raise ValueError("no gradient supplied for this sampler")
        return np.asarray(self._grad(np.asarray(p, dtype=float)), dtype=float)

    def u_at(self, p):
        return -np.log(self.v_at(p))


def sampler(source):
    """Coerce a GridField, an oracle or a sampler into the sampler interface."""
    if isinstance(source, GridField):
        return RadiusInterpolator(source)
    if hasattr(source, "v_at"):
        return source
    if hasattr(source, "grad_v") and hasattr(source, "v"):
        return FunctionSampler(lambda p: source.v(p, check=False), source.grad_v)
    if callable(source):
        return FunctionSampler(source)
    raise TypeError("cannot sample from this object")
