import numpy as np
import pytest

from fdcf import conic_adapter as ca


def test_maximize_bounded_line():
    prog = ca.ConicProgram()
    x = prog.add_variables(1)
    prog.add_le(ca.affine({x[0]: 1.0}), 3.0)
    prog.set_objective(ca.affine({x[0]: 1.0}))
    sol = ca.solve(prog)
    assert sol.status == ca.OPTIMAL
    assert sol.x[0] == pytest.approx(3.0, abs=1e-7)
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_hyperbolic_soc_boundary():
    # xi^2 <= phi t  <=>  ||[2 xi, phi - t]|| <= phi + t ; with phi, t <= 2 the max xi is 2
    prog = ca.ConicProgram()
    xi, phi, t = prog.add_variables(3, lb=[-np.inf, 0.0, 0.0], ub=[np.inf, 2.0, 2.0])
    prog.add_soc(ca.affine({phi: 1.0, t: 1.0}),
                 [ca.affine({xi: 2.0}), ca.affine({phi: 1.0, t: -1.0})])
    prog.set_objective(ca.affine({xi: 1.0}))
    sol = ca.solve(prog).raise_for_status()
    np.testing.assert_allclose(sol.x, [2.0, 2.0, 2.0], atol=1e-6)
    # the identity behind the encoding
    a, b, c = 2.0, 2.0, 2.0
    assert 4 * a ** 2 + (b - c) ** 2 == pytest.approx((b + c) ** 2)


def test_log_hypograph():
    prog = ca.ConicProgram()
    s, u = prog.add_variables(2)
    prog.add_le(ca.affine({u: 1.0}), np.e)
    prog.add_log_hypograph(ca.affine({s: 1.0}), ca.affine({u: 1.0}))
    prog.set_objective(ca.affine({s: 1.0}))
    sol = ca.solve(prog).raise_for_status()
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)


def test_log_hypograph_with_offsets():
    # s + log(4) <= log(2 u + 1), u <= 1.5  ->  s = log(4) - log(4) = 0
    prog = ca.ConicProgram()
    s, u = prog.add_variables(2)
    prog.add_le(ca.affine({u: 1.0}), 1.5)
    prog.add_log_hypograph(ca.affine({s: 1.0}, np.log(4.0)), ca.affine({u: 2.0}, 1.0))
    prog.set_objective(ca.affine({s: 1.0}))
    assert ca.solve(prog).x[0] == pytest.approx(0.0, abs=1e-7)


def test_equality_and_duplicate_indices():
    prog = ca.ConicProgram()
    x = prog.add_variables(2, lb=0.0)
    prog.add_eq(ca.affine(([x[0], x[1]], [1.0, 1.0]), -1.0))
    # duplicated index: 0.5 x0 + 0.5 x0 <= 0.25
    prog.add_le(ca.affine(([x[0], x[0]], [0.5, 0.5])), 0.25)
    prog.set_objective(ca.affine({x[0]: 2.0, x[1]: 1.0}))
    sol = ca.solve(prog).raise_for_status()
    np.testing.assert_allclose(sol.x, [0.25, 0.75], atol=1e-7)


def test_infeasible_and_unbounded():
    prog = ca.ConicProgram()
    x = prog.add_variables(1, lb=1.0)
    prog.add_le(ca.affine({x[0]: 1.0}), 0.0)
    prog.set_objective(ca.affine({x[0]: 1.0}))
    sol = ca.solve(prog)
    assert sol.status == ca.INFEASIBLE and sol.x is None
    with pytest.raises(ca.ProgramInfeasible):
        sol.raise_for_status()

    prog = ca.ConicProgram()
    x = prog.add_variables(1, lb=0.0)
    prog.set_objective(ca.affine({x[0]: 1.0}))
    sol = ca.solve(prog)
    assert sol.status == ca.UNBOUNDED
    with pytest.raises(ca.ProgramUnbounded):
        sol.raise_for_status()


def test_iteration_limit():
    prog = ca.ConicProgram()
    s, u = prog.add_variables(2)
    prog.add_le(ca.affine({u: 1.0}), 7.0)
    prog.add_log_hypograph(ca.affine({s: 1.0}), ca.affine({u: 1.0}))
    prog.set_objective(ca.affine({s: 1.0}))
    sol = ca.solve(prog, ca.Tolerances(max_iter=1))
    assert sol.status == ca.ITERATION_LIMIT
    with pytest.raises(ca.IterationLimit):
        sol.raise_for_status()


def test_validation():
    with pytest.raises(ValueError):
        ca.solve(ca.ConicProgram())
    prog = ca.ConicProgram()
    prog.add_variables(1)
    prog.add_le(ca.affine({3: 1.0}))
    with pytest.raises(ValueError):
        ca.solve(prog)
    prog = ca.ConicProgram()
    x = prog.add_variables(1)
    prog.add_le(ca.affine({x[0]: np.inf}))
    with pytest.raises(ValueError):
        ca.solve(prog)
    with pytest.raises(ValueError):
        ca.solve(ca.ConicProgram(), backend="nope")


def _random_program(rng, n=6, m=4):
    prog = ca.ConicProgram()
    x = prog.add_variables(n, lb=0.0, ub=5.0)
    s = prog.add_variables(m)
    B = rng.normal(size=(3, n))
    prog.add_soc(ca.affine(const=4.0), [ca.affine((x, row)) for row in B])
    for _ in range(2):
        prog.add_le(ca.affine((x, rng.uniform(0, 1, n))), 3.0)
    for j in range(m):
        prog.add_log_hypograph(ca.affine({s[j]: 1.0}),
                               ca.affine((x, rng.uniform(0, 2, n)), 1.0))
    c = rng.normal(scale=0.3, size=n)
    prog.set_objective(ca.affine((np.concatenate([x, s]), np.concatenate([c, np.ones(m)]))))
    return prog


@pytest.mark.parametrize("seed", range(5))
def test_cross_check_against_cvxpy(seed):
    pytest.importorskip("cvxpy")
    prog = _random_program(np.random.default_rng(seed))
    a = ca.solve(prog, backend="clarabel").raise_for_status()
    b = ca.solve(prog, backend="cvxpy").raise_for_status()
    assert a.objective == pytest.approx(b.objective, abs=1e-6)
    assert max(prog.violations(a.x).values()) <= 1e-7 * (1 + np.max(np.abs(a.x)))


def test_violations_report():
    prog = ca.ConicProgram()
    x = prog.add_variables(2, lb=0.0, ub=1.0)
    prog.add_le(ca.affine({x[0]: 1.0}), 0.5)
    prog.add_soc(ca.affine(const=1.0), [ca.affine({x[1]: 1.0})])
    prog.add_log_hypograph(ca.affine({x[0]: 1.0}), ca.affine(const=1.0))
    v = prog.violations(np.array([0.8, 2.0]))
    assert v["le"] == pytest.approx(0.3)
    assert v["bounds"] == pytest.approx(1.0)
    assert v["soc"] == pytest.approx(1.0)
    assert v["exp"] == pytest.approx(0.8)
