import numpy as np
import pytest

from liouville import geometry as geo
from liouville import oracles, solver
from liouville.fields import GridField


@pytest.fixture(scope="module")
def strip():
    return geo.HalfPlane((0.0, 1.0, 0.0, 1.0))


def test_residual_of_zero_is_four(strip):
    g = geo.build_grid(strip, 1 / 16, 0.1)
    prob = solver.DirichletProblem(g, solver.function_data(lambda p: np.zeros(len(p))))
    r = solver.residual(prob, GridField.from_function(g, lambda p: 0 * p[:, 0]))
    assert np.allclose(r.interior_values(), 4.0, atol=1e-9)


def test_residual_manufactured_orders(disk, strip):
    # Shortley-Weller rows next to the cut are only first-order consistent (the
    # global error is still O(h^2)), so the residual order is read on regular
    # nodes of a fixed region d >= 0.25
    def sup_res(dom, u, h):
        g = geo.build_grid(dom, h, 0.1)
        prob = solver.DirichletProblem(g, solver.function_data(u))
        r = solver.residual(prob, GridField.from_function(g, u)).values
        regular = g.interior & np.all(g.theta == 1.0, axis=0) & (g.distance >= 0.25)
        return np.max(np.abs(r[regular]))

    for dom, u in ((strip, lambda p: -np.log(2 * p[:, 0])),
                   (disk, lambda p: -np.log(1 - p[:, 0] ** 2 - p[:, 1] ** 2))):
        e = [sup_res(dom, u, h) for h in (1 / 16, 1 / 32, 1 / 64)]
        assert np.log2(e[1] / e[2]) > 1.8


def test_strip_solve_recovers_exact(strip):
    exact = lambda p: -np.log(2 * p[:, 0])
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = geo.build_grid(strip, h, 0.05)
        prob = solver.DirichletProblem(g, solver.function_data(exact), lift=True)
        u, rep = solver.newton_solve(prob)
        assert rep.converged
        errs.append(np.max(np.abs(u.interior_values() - exact(g.interior_points()))))
    assert np.log2(errs[1] / errs[2]) > 1.8


def test_start_at_solution_converges_fast(disk):
    g = geo.build_grid(disk, 1 / 32, 0.05)
    orc = oracles.RadialOracle("disk", 1.0)
    prob = solver.DirichletProblem(g, solver.expansion_data(2))
    op = solver.assemble(prob)
    # the discrete solution itself is the fixed point; start from the oracle
    u, rep = solver.newton_solve(prob, orc.u(g.interior_points()), op=op)
    assert rep.converged and rep.iterations <= 3
    u2, rep2 = solver.newton_solve(prob, u, op=op)
    assert rep2.iterations == 0


def test_order_two_beats_order_one(disk):
    orc = oracles.RadialOracle("disk", 1.0)
    errs = {}
    for order in (1, 2):
        u, rep = solver.trimmed_solve(disk, 0.1, order, 1 / 32)
        errs[order] = np.max(np.abs(u.interior_values() - orc.u(u.grid.interior_points())))
    assert errs[2] < errs[1]


def test_maximal_sequence_monotone_small(disk):
    seq = solver.maximal_sequence(disk, [1, 2, 4], 1 / 32)
    vals = [u.interior_values() for u, _ in seq]
    for a, b in zip(vals, vals[1:]):
        assert np.all(b >= a - 1e-8)
    assert all(r.notes["monotone_ok"] for _, r in seq[1:])


def test_data_errors(disk):
    with pytest.raises(solver.DataError):
        solver.constant_data(50)
    with pytest.raises(solver.DataError):
        solver.expansion_data(3)
    with pytest.raises(solver.DataError):
        solver.trimmed_solve(disk, 0.9, 2, 1 / 16)
    with pytest.raises(solver.DataError):
        solver.maximal_sequence(disk, [2, 1], 1 / 16)


def test_domain_monotonicity_oracles():
    small, big = oracles.RadialOracle("disk", 1.0), oracles.RadialOracle("disk", 2.0)
    g = geo.build_grid(small.domain(), 1 / 16, 0.05)
    u_in = GridField.from_function(g, small.u)
    rep = solver.domain_monotonicity(lambda p: big.u(p), u_in, tol=0.0)
    assert rep.ok and rep.max_violation == 0.0
    same = solver.domain_monotonicity(lambda p: small.u(p), u_in, tol=1e-12)
    assert same.ok


def test_report_serialises(disk):
    u, rep = solver.trimmed_solve(disk, 0.1, 2, 1 / 16)
    d = rep.to_dict()
    assert d["converged"] and d["residual_norms"][-1] <= 1e-10
