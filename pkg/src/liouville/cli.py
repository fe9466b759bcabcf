"""Command-line front end: ``liouville {solve,exact,w0,verify,convergence}``.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 the
numerics did not converge, 4 checks skipped for insufficient resolution.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from . import asymptotics as asy
from . import fuchsian as fu
from . import geometry as geo
from . import oracles as orc
from . import solver as sol
from .domainfile import DomainFileError, load_domain
from .fields import GridField, write_collar_field, write_grid_field

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_COARSE = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    domain: str = ""
    out: str = "out"
    h_grid: float = 1 / 128
    h_trim: float | None = None          # None: trim at h_grid
    refine_trim: float = 0.05
    order: int = 2
    n_values: list = field(default_factory=lambda: [1, 2, 4, 8])
    hs: list = field(default_factory=list)
    theta: float = 0.2
    s_base: float = 0.0
    n_y: int = 64
    A: float = 100.0
    alpha: float = 0.5
    tol: float = 1e-10
    c2_rel_tol: float = 0.05
    grad_tol: float = 0.02
    order_min: float = 1.8
    error_constant: float = 4.0
    n_probes: int = 8
    seed: int = 0

    @property
    def trim(self):
        return self.h_grid if self.h_trim is None else self.h_trim

    def validate(self):
        for name in ("h_grid", "refine_trim", "theta", "A", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.h_trim is not None and not self.h_trim > 0:
            raise ConfigError("h_trim must be positive")
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if any(h <= 0 for h in self.hs):
            raise ConfigError("grid spacings must be positive")
        if self.n_y < 8 or self.n_y % 2:
            raise ConfigError("n_y must be an even number >= 8")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def parse_length(text):
    """'0.01', '1/128' or a number; fractions are exact before conversion."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot read {text!r} as a length") from None


def parse_list(text, conv):
    if isinstance(text, list):
        return [conv(x) for x in text]
    return [conv(x) for x in str(text).split(",") if x.strip()]


_LENGTHS = {"h_grid", "h_trim", "refine_trim", "theta"}


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return data


def build_config(args):
    cfg = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for k, v in vars(args).items():
        if k in known and v is not None:
            values[k] = v
    for k, v in values.items():
        if k not in known:
            raise ConfigError(f"unknown configuration field '{k}'")
        if k in _LENGTHS and v is not None:
            v = parse_length(v)
        elif k == "hs":
            v = parse_list(v, parse_length)
        elif k == "n_values":
            v = parse_list(v, int)
        elif k in ("order", "n_y", "n_probes", "seed"):
            v = int(v)
        elif k in ("A", "alpha", "tol", "c2_rel_tol", "grad_tol", "order_min",
                   "error_constant", "s_base"):
            v = float(v)
        setattr(cfg, k, v)
    if not cfg.domain:
        raise ConfigError("a domain file is required")
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x).__name__)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _prepare_out(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out, command, cfg, started):
    write_json(out / "meta.json", {"command": command, "version": __version__,
                                   "backend": kernels.backend(),
                                   "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
                                   "elapsed_s": round(time.time() - started, 3),
                                   "config": cfg.to_dict()})


def _v_and_w(u: GridField):
    v = GridField(u.grid, np.exp(-u.values), "v")
    w = fu.renormalize(v)
    return v, w


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg):
    domain = load_domain(cfg.domain)
    out = _prepare_out(cfg)
    u, rep = sol.trimmed_solve(domain, cfg.trim, cfg.order, cfg.h_grid, tol=cfg.tol)
    v, w = _v_and_w(u)
    for f in (u, v, w):
        write_grid_field(out / f"{f.name}.field", f)
    report = rep.to_dict()
    report["partial"] = not rep.converged
    report["domain"] = domain.describe()
    write_json(out / "report.json", report)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_exact(cfg):
    domain = load_domain(cfg.domain)
    try:
        oracle = orc.from_domain(domain)
    except orc.OracleDomainError as exc:
        raise ConfigError(str(exc)) from None
    out = _prepare_out(cfg)
    grid = geo.build_grid(domain, cfg.h_grid, 0.0)
    # nodes that the projection places inside but that sit on the circle to
    # roundoff have v = 0; they are left out rather than written as infinities
    mask = grid.interior.copy()
    mask[mask] = oracle.v(grid.points()[mask], check=False) > 0
    u = GridField.from_function(grid, lambda p: oracle.u(p, check=False), "u", mask)
    v = GridField.from_function(grid, lambda p: oracle.v(p, check=False), "v", mask)
    w = GridField.from_function(grid, lambda p: oracle.w(p, check=False), "w", mask)
    for f in (u, v, w):
        write_grid_field(out / f"{f.name}.field", f)
    write_json(out / "report.json", {"oracle": {"kind": oracle.kind, "r0": oracle.r0,
                                                "center": list(oracle.center)},
                                     "domain": domain.describe(), "nodes": grid.n_interior})
    return EXIT_OK


def cmd_w0(cfg):
    domain = load_domain(cfg.domain)
    out = _prepare_out(cfg)
    chart = geo.collar_chart(domain, cfg.s_base, cfg.theta, n_y=cfg.n_y)
    try:
        w0, rep = fu.w0_fixed_point(chart, tol=min(cfg.tol, 1e-10))
    except fu.ContractionError as exc:
        write_json(out / "report.json", {"converged": False, "error": str(exc)})
        return EXIT_NONCONVERGED
    write_collar_field(out / "w0.field", w0)
    res = fu.lw0_residual(w0)
    report = rep.to_dict()
    report["kappa_base"] = chart.kappa_base
    report["Lw0_residual_sup"] = float(np.max(np.abs(res.values[:, chart.valid_y])))
    write_json(out / "report.json", report)
    with open(out / "contraction.csv", "w") as fh:
        fh.write("iteration,difference\n")
        for i, d in enumerate(rep.differences, 1):
            fh.write(f"{i},{d!r}\n")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_verify(cfg):
    from .verify import run_suite

    domain = load_domain(cfg.domain)
    out = _prepare_out(cfg)
    result = run_suite(domain, cfg)
    write_json(out / "verify.json", result.to_dict())
    (out / "checks.csv").write_text(result.checks_csv())
    for name, text in result.tables.items():
        (out / name).write_text(text)
    for c in result.checks:
        print(f"{c.status.upper():>24}  {c.group}/{c.name}")
    return result.exit_code


def cmd_convergence(cfg):
    from .verify import exact_solution, _common_difference, _sup_error

    domain = load_domain(cfg.domain)
    hs = sorted(cfg.hs or [4 * cfg.h_grid, 2 * cfg.h_grid, cfg.h_grid], reverse=True)
    if len(hs) < 3:
        raise ConfigError("a convergence study needs at least three grid spacings")
    out = _prepare_out(cfg)
    exact = exact_solution(domain)
    fields = []
    not_converged = False
    for h in hs:
        u, rep = sol.trimmed_solve(domain, cfg.refine_trim, cfg.order, h, tol=cfg.tol)
        not_converged |= not rep.converged
        fields.append(u)
    if exact is not None:
        table = asy.ConvergenceTable(hs, [_sup_error(u, exact) for u in fields], [])
        measure = "sup error vs exact solution"
    else:
        hs = hs[:-1]
        table = asy.ConvergenceTable(hs, [_common_difference(a, b)
                                          for a, b in zip(fields, fields[1:])], [])
        measure = "sup difference to the next finer grid"
    table.orders = asy.observed_orders(table.hs, table.errors)
    (out / "convergence.csv").write_text(table.to_csv())
    summary = table.to_dict() if len(table.errors) >= 2 else {"h": table.hs, "error": table.errors}
    summary["measure"] = measure
    write_json(out / "convergence.json", summary)
    return EXIT_NONCONVERGED if not_converged else EXIT_OK


COMMANDS = {"solve": cmd_solve, "exact": cmd_exact, "w0": cmd_w0, "verify": cmd_verify,
            "convergence": cmd_convergence}


def build_parser():
    p = argparse.ArgumentParser(prog="liouville", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("domain", nargs="?", help="YAML domain file")
        c.add_argument("--config", help="YAML file with RunConfig fields")
        c.add_argument("--out", help="output directory")
        c.add_argument("--h-grid", dest="h_grid", help="grid spacing, e.g. 1/128")
        c.add_argument("--h-trim", dest="h_trim", help="trim level (default: h-grid)")
        c.add_argument("--refine-trim", dest="refine_trim")
        c.add_argument("--order", type=int, choices=(1, 2))
        c.add_argument("--n", dest="n_values", help="comma-separated boundary values")
        c.add_argument("--hs", help="comma-separated spacings for convergence")
        c.add_argument("--theta")
        c.add_argument("--s-base", dest="s_base", type=float)
        c.add_argument("--n-y", dest="n_y", type=int)
        c.add_argument("--A", dest="A", type=float)
        c.add_argument("--alpha", type=float)
        c.add_argument("--tol", type=float)
        c.add_argument("--seed", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = build_config(args)
        code = COMMANDS[args.command](cfg)
    except (ConfigError, DomainFileError, geo.GeometryError, sol.DataError) as exc:
        print(f"liouville: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (sol.RangeError, sol.LinearSolverError, fu.ContractionError) as exc:
        print(f"liouville: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    _write_meta(Path(cfg.out), args.command, cfg, started)
    return code


if __name__ == "__main__":
    sys.exit(main())
