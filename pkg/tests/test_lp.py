import numpy as np
import pytest

from oracles import beale_cycling, klee_minty, lp_vertex_enumeration, random_feasible_lp
from robust_hvac import lp as lp_mod
from robust_hvac.errors import SolverError, ValidationError
from robust_hvac.lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    LpSolution,
    check_kkt,
    dump_lp,
    load_lp,
    solve_lp,
)

INF = np.inf


def _problem(c, G=None, h=None, lo=None, hi=None, A_eq=None, b_eq=None):
    c = np.asarray(c, dtype=float)
    n = c.size
    G = np.zeros((0, n)) if G is None else G
    h = np.zeros(0) if h is None else h
    A_eq = np.zeros((0, n)) if A_eq is None else A_eq
    b_eq = np.zeros(0) if b_eq is None else b_eq
    lo = np.zeros(n) if lo is None else lo
    hi = np.full(n, INF) if hi is None else hi
    return LpProblem(c, G, h, A_eq, b_eq, lo, hi)


def test_single_variable_upper_bound():
    sol = solve_lp(_problem([-1.0], hi=[1.0]))
    assert sol.status == OPTIMAL
    assert sol.z[0] == 1.0
    assert sol.objective_value == -1.0


def test_tied_facet_returns_a_vertex():
    # x + y >= 1 with equal costs: every point on the facet is optimal
    p = _problem([1.0, 1.0], G=[[-1.0, -1.0]], h=[-1.0])
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-12)
    assert sorted(sol.z.tolist()) == [0.0, 1.0]


def test_infeasible_and_unbounded_are_statuses():
    infeasible = _problem([1.0], G=[[1.0], [-1.0]], h=[0.0, -1.0])
    assert solve_lp(infeasible).status == INFEASIBLE
    unbounded = _problem([-1.0])
    assert solve_lp(unbounded).status == UNBOUNDED


def test_equality_constraints():
    # min x + 2y  s.t.  x + y = 3, x <= 2
    p = _problem([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[3.0], hi=[2.0, INF])
    sol = solve_lp(p)
    np.testing.assert_allclose(sol.z, [2.0, 1.0], atol=1e-12)
    assert check_kkt(p, sol).ok()


@pytest.mark.parametrize("seed", range(40))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    c, G, h, lo, hi = random_feasible_lp(rng, 8, 12)
    p = LpProblem(c, G, h, np.zeros((0, 8)), np.zeros(0), lo, hi)
    sol = solve_lp(p)
    ref, _ = lp_vertex_enumeration(c, G, h, lo, hi)
    assert sol.status == OPTIMAL
    assert abs(sol.objective_value - ref) <= 1e-8
    rep = check_kkt(p, sol)
    assert rep.ok(1e-8), rep
    assert rep.dual_objective <= sol.objective_value + 1e-8


@pytest.mark.parametrize("n", range(2, 9))
def test_klee_minty_terminates(n):
    c, G, h = klee_minty(n)
    p = _problem(c, G, h)
    sol = solve_lp(p)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(-(5.0**n), rel=1e-12)
    assert check_kkt(p, sol).max_residual <= 1e-8 * 5.0**n


def test_beale_cycling_instance():
    c, G, h = beale_cycling()
    p = _problem(c, G, h)
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(-1.25, abs=1e-12)
    np.testing.assert_allclose(sol.z, [1.0, 0.0, 1.0, 0.0], atol=1e-12)
    assert check_kkt(p, sol).ok()


def test_deterministic():
    rng = np.random.default_rng(7)
    c, G, h, lo, hi = random_feasible_lp(rng, 10, 16)
    p = LpProblem(c, G, h, np.zeros((0, 10)), np.zeros(0), lo, hi)
    a, b = solve_lp(p), solve_lp(p)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.ineq_duals, b.ineq_duals)


def test_stall_raises_with_condition(monkeypatch):
    class _Res:
        status, message, nit = 4, "numerical difficulties", 0

    monkeypatch.setattr(lp_mod, "linprog", lambda *a, **k: _Res())
    with pytest.raises(SolverError, match=r"cond\(G\)"):
        solve_lp(_problem([1.0], G=[[1.0]], h=[1.0]))


# ---------------------------------------------------------------------------
# KKT report


def test_kkt_hand_built_pair():
    p = _problem([-1.0], hi=[1.0])
    sol = LpSolution(OPTIMAL, z=np.array([1.0]), objective_value=-1.0, ineq_duals=np.zeros(0),
                     eq_duals=np.zeros(0), lower_duals=np.zeros(1), upper_duals=np.array([1.0]))
    rep = check_kkt(p, sol)
    assert rep.primal_residual == rep.dual_infeasibility == rep.complementarity == rep.duality_gap == 0.0


def test_kkt_detects_perturbation():
    p = _problem([1.0, 1.0], G=[[-1.0, -1.0]], h=[-1.0])
    sol = solve_lp(p)
    z = sol.z - np.array([1e-3, 0.0])
    bad = LpSolution(OPTIMAL, z=z, objective_value=p.objective(z), ineq_duals=sol.ineq_duals,
                     eq_duals=sol.eq_duals, lower_duals=sol.lower_duals, upper_duals=sol.upper_duals)
    rep = check_kkt(p, bad)
    assert rep.primal_residual == pytest.approx(1e-3, rel=1e-9)
    assert not rep.ok()


def test_kkt_requires_optimal():
    with pytest.raises(ValidationError):
        check_kkt(_problem([1.0]), LpSolution(INFEASIBLE))


# ---------------------------------------------------------------------------
# problem container and dump format


def test_problem_validation():
    with pytest.raises(ValidationError, match="lower bound exceeds"):
        LpProblem([1.0], np.zeros((0, 1)), [], np.zeros((0, 1)), [], [2.0], [1.0], names=("flow",))
    with pytest.raises(ValidationError, match="non-finite"):
        _problem([np.nan])
    with pytest.raises(ValidationError, match="NaN"):
        _problem([1.0], lo=[np.nan])
    with pytest.raises(ValidationError, match="right-hand side"):
        _problem([1.0], G=[[1.0]], h=[1.0, 2.0])


def test_dump_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    c, G, h, lo, hi = random_feasible_lp(rng, 5, 9)
    p = LpProblem(c, G, h, rng.normal(size=(1, 5)), [0.3], lo, hi,
                  names=tuple(f"v{i}" for i in range(5)), offset=1.25)
    q = load_lp(dump_lp(p, tmp_path / "p.lp"))
    for f in ("c", "G", "h", "A_eq", "b_eq", "lo", "hi"):
        np.testing.assert_array_equal(getattr(p, f), getattr(q, f))
    assert q.names == p.names and q.offset == p.offset


def test_dump_rejects_garbage(tmp_path):
    path = tmp_path / "bad.lp"
    path.write_text("not a dump\n")
    with pytest.raises(ValidationError, match="missing header"):
        load_lp(path)
    p = _problem([1.0, 2.0], G=[[1.0, 1.0]], h=[1.0])
    text = dump_lp(p, tmp_path / "ok.lp").read_text()
    path.write_text(text.replace("1.0 1.0 | 1.0", "1.0 x | 1.0"))
    with pytest.raises(ValidationError, match=r"bad.lp:\d+: cannot parse 'x'"):
        load_lp(path)
    path.write_text("\n".join(text.splitlines()[:4]) + "\n")
    with pytest.raises(ValidationError, match="ends early"):
        load_lp(path)
