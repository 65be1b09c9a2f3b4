"""Dense linear programs: canonical container, HiGHS-backed simplex solve, KKT audit.

Canonical form::

    minimize    c @ z + offset
    subject to  G z <= h,  A_eq z = b_eq,  lo <= z <= hi

Infinite bounds are ``-inf`` / ``+inf``, never large finite numbers.
Dual multipliers follow the Lagrangian
``c + G' lam + A_eq' nu - mu_lo + mu_hi = 0`` with ``lam, mu_lo, mu_hi >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .errors import IoError, SolverError, ValidationError

FEASIBILITY_TOL = 1e-9
ACCEPTANCE_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_TIGHT = {"primal_feasibility_tolerance": FEASIBILITY_TOL, "dual_feasibility_tolerance": FEASIBILITY_TOL}
# fixed attempt order keeps results deterministic; HiGHS presolve can stall under tight tolerances
_ATTEMPTS = (
    ("highs-ds", {**_TIGHT, "presolve": False}),
    ("highs-ds", {"presolve": True}),
    ("highs-ipm", {**_TIGHT, "presolve": False}),
)


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple[str, ...] = ()
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        nv = c.size
        G = np.asarray(self.G, dtype=float).reshape(-1, nv)
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, nv)
        fields = {
            "c": c,
            "G": G,
            "h": np.asarray(self.h, dtype=float).reshape(-1),
            "A_eq": A_eq,
            "b_eq": np.asarray(self.b_eq, dtype=float).reshape(-1),
            "lo": np.asarray(self.lo, dtype=float).reshape(-1),
            "hi": np.asarray(self.hi, dtype=float).reshape(-1),
        }
        for k, v in fields.items():
            object.__setattr__(self, k, v)
        if fields["h"].size != G.shape[0] or fields["b_eq"].size != A_eq.shape[0]:
            raise ValidationError("right-hand side length does not match constraint rows")
        if fields["lo"].size != nv or fields["hi"].size != nv:
            raise ValidationError("bound vectors must have one entry per variable")
        for k in ("c", "G", "h", "A_eq", "b_eq"):
            if not np.all(np.isfinite(fields[k])):
                raise ValidationError(f"LP field {k} contains non-finite entries")
        if np.isnan(fields["lo"]).any() or np.isnan(fields["hi"]).any():
            raise ValidationError("bounds contain NaN")
        if (fields["lo"] > fields["hi"]).any():
            bad = int(np.argmax(fields["lo"] > fields["hi"]))
            raise ValidationError(f"lower bound exceeds upper bound for variable {self._name(bad)}")
        if self.names and len(self.names) != nv:
            raise ValidationError("names must have one entry per variable")
        object.__setattr__(self, "names", tuple(self.names))

    def _name(self, i: int) -> str:
        return self.names[i] if self.names else f"z[{i}]"

    @property
    def n_vars(self) -> int:
        return self.c.size

    def objective(self, z: np.ndarray) -> float:
        return float(self.c @ z + self.offset)


@dataclass(frozen=True)
class LpSolution:
    status: str
    z: np.ndarray | None = None
    objective_value: float = float("nan")
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None
    iterations: int = 0
    message: str = ""


@dataclass(frozen=True)
class KktReport:
    primal_residual: float
    dual_infeasibility: float
    complementarity: float
    duality_gap: float
    dual_objective: float

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_infeasibility, self.complementarity)

    def ok(self, tol: float = ACCEPTANCE_TOL) -> bool:
        return self.max_residual <= tol and self.duality_gap <= tol


def _bounds(problem: LpProblem) -> list[tuple[float | None, float | None]]:
    lo = [None if np.isneginf(v) else float(v) for v in problem.lo]
    hi = [None if np.isposinf(v) else float(v) for v in problem.hi]
    return list(zip(lo, hi))


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve with the HiGHS dual simplex; returns a basic (vertex) solution."""
    kw = {}
    if problem.G.shape[0]:
        kw.update(A_ub=problem.G, b_ub=problem.h)
    if problem.A_eq.shape[0]:
        kw.update(A_eq=problem.A_eq, b_eq=problem.b_eq)
    bounds = _bounds(problem)
    for method, options in _ATTEMPTS:
        res = linprog(problem.c, bounds=bounds, method=method, options=options, **kw)
        if res.status in (0, 2, 3):
            break
    nit = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution(INFEASIBLE, iterations=nit, message=res.message)
    if res.status == 3:
        return LpSolution(UNBOUNDED, iterations=nit, message=res.message)
    if res.status != 0:
        raise SolverError(
            f"LP solve stalled ({res.message}); {problem.n_vars} variables, "
            f"{problem.G.shape[0]} inequalities, cond(G) ~ {_cond(problem.G):.3e}"
        )
    z = np.asarray(res.x, dtype=float)
    m, p = problem.G.shape[0], problem.A_eq.shape[0]
    lam = -np.asarray(res.ineqlin.marginals) if m else np.zeros(0)
    nu = -np.asarray(res.eqlin.marginals) if p else np.zeros(0)
    mu_lo = np.asarray(res.lower.marginals, dtype=float)
    mu_hi = -np.asarray(res.upper.marginals, dtype=float)
    raw = LpSolution(
        OPTIMAL,
        z=z,
        objective_value=problem.objective(z),
        ineq_duals=lam,
        eq_duals=nu,
        lower_duals=mu_lo,
        upper_duals=mu_hi,
        iterations=nit,
        message=res.message,
    )
    return _polish(problem, raw)


def _score(problem: LpProblem, sol: LpSolution) -> float:
    rep = check_kkt(problem, sol)
    return max(rep.max_residual, rep.duality_gap)


def _polish(problem: LpProblem, sol: LpSolution, active_tol: float = 1e-7) -> LpSolution:
    """Rebuild the optimal vertex and its multipliers from a reconstructed basis.

    HiGHS applies its feasibility tolerances to the internally scaled model,
    which can leave ~1e-8 residuals in original units. Here ``n`` linearly
    independent active constraints are picked (those carrying a multiplier
    first) and the square primal and dual systems are solved directly. The
    polished pair is kept only if its KKT residuals are smaller.
    """
    z, lo, hi = sol.z, problem.lo, problem.hi
    G, h, A_eq, b_eq, c = problem.G, problem.h, problem.A_eq, problem.b_eq, problem.c
    n, m = problem.n_vars, G.shape[0]
    slack = h - G @ z
    # candidates: (kind, index, priority, closeness); kind 0 = equality, 1 = row, 2 = lower, 3 = upper
    cands = [(0, i, 0, 0.0) for i in range(A_eq.shape[0])]
    for i in np.flatnonzero(np.abs(slack) <= active_tol * max(1.0, np.abs(h).max(initial=0.0))):
        cands.append((1, i, 1 if sol.ineq_duals[i] > 0 else 2, abs(slack[i])))
    for i in np.flatnonzero(np.isfinite(lo) & (np.abs(z - lo) <= active_tol)):
        cands.append((2, i, 1 if sol.lower_duals[i] > 0 else 2, abs(z[i] - lo[i])))
    for i in np.flatnonzero(np.isfinite(hi) & (np.abs(hi - z) <= active_tol)):
        cands.append((3, i, 1 if sol.upper_duals[i] > 0 else 2, abs(hi[i] - z[i])))
    cands.sort(key=lambda t: (t[2], t[3], t[0], t[1]))

    def vec(kind, i):
        if kind == 0:
            return A_eq[i]
        if kind == 1:
            return G[i]
        e = np.zeros(n)
        e[i] = -1.0 if kind == 2 else 1.0
        return e

    basis, Q = [], np.zeros((0, n))
    for kind, i, _, _ in cands:
        a = vec(kind, i)
        res = a - Q.T @ (Q @ a)
        norm = np.linalg.norm(res)
        if norm > 1e-9 * max(np.linalg.norm(a), 1.0):
            Q = np.vstack([Q, res / norm])
            basis.append((kind, i))
            if len(basis) == n:
                break
    if len(basis) < n:
        return sol
    K = np.array([vec(k, i) for k, i in basis])
    rhs = np.array([b_eq[i] if k == 0 else h[i] if k == 1 else -lo[i] if k == 2 else hi[i] for k, i in basis])
    try:
        z_new = np.linalg.solve(K, rhs)
        y = np.linalg.solve(K.T, -c)
    except np.linalg.LinAlgError:
        return sol
    lam, nu = np.zeros(m), np.zeros(A_eq.shape[0])
    mu_lo, mu_hi = np.zeros(n), np.zeros(n)
    for (kind, i), val in zip(basis, y):
        if kind == 0:
            nu[i] = val
        elif kind == 1:
            lam[i] = val
        elif kind == 2:
            mu_lo[i] = val
        else:
            mu_hi[i] = val
    if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(y))):
        return sol
    polished = LpSolution(
        OPTIMAL,
        z=z_new,
        objective_value=problem.objective(z_new),
        ineq_duals=lam,
        eq_duals=nu,
        lower_duals=mu_lo,
        upper_duals=mu_hi,
        iterations=sol.iterations,
        message=sol.message,
    )
    return polished if _score(problem, polished) < _score(problem, sol) else sol


def _cond(M: np.ndarray) -> float:
    if M.size == 0:
        return 1.0
    return float(np.linalg.cond(M))


def check_kkt(problem: LpProblem, solution: LpSolution) -> KktReport:
    """Residuals of the first-order optimality conditions for an optimal pair."""
    if solution.status != OPTIMAL:
        raise ValidationError(f"KKT check needs an optimal solution, status is {solution.status}")
    z = solution.z
    lam, nu = solution.ineq_duals, solution.eq_duals
    mu_lo, mu_hi = solution.lower_duals, solution.upper_duals
    slack = problem.h - problem.G @ z
    eq_res = problem.A_eq @ z - problem.b_eq
    lo_gap = np.where(np.isfinite(problem.lo), z - problem.lo, np.inf)
    hi_gap = np.where(np.isfinite(problem.hi), problem.hi - z, np.inf)
    primal = max(
        _max0(-slack),
        float(np.abs(eq_res).max(initial=0.0)),
        _max0(-lo_gap[np.isfinite(lo_gap)]),
        _max0(-hi_gap[np.isfinite(hi_gap)]),
    )
    stationarity = problem.c + problem.G.T @ lam + problem.A_eq.T @ nu - mu_lo + mu_hi
    dual = max(
        float(np.abs(stationarity).max(initial=0.0)),
        _max0(-lam),
        _max0(-mu_lo),
        _max0(-mu_hi),
        # multipliers on infinite bounds must vanish
        float(np.abs(mu_lo[~np.isfinite(problem.lo)]).max(initial=0.0)),
        float(np.abs(mu_hi[~np.isfinite(problem.hi)]).max(initial=0.0)),
    )
    comp = max(
        float(np.abs(lam * slack).max(initial=0.0)),
        float(np.abs(mu_lo * np.where(np.isfinite(lo_gap), lo_gap, 0.0)).max(initial=0.0)),
        float(np.abs(mu_hi * np.where(np.isfinite(hi_gap), hi_gap, 0.0)).max(initial=0.0)),
    )
    fin_lo, fin_hi = np.isfinite(problem.lo), np.isfinite(problem.hi)
    dual_obj = (
        -problem.h @ lam
        - problem.b_eq @ nu
        + problem.lo[fin_lo] @ mu_lo[fin_lo]
        - problem.hi[fin_hi] @ mu_hi[fin_hi]
        + problem.offset
    )
    gap = solution.objective_value - float(dual_obj)
    return KktReport(primal, dual, comp, abs(gap), float(dual_obj))


def _max0(v: np.ndarray) -> float:
    return float(np.max(v, initial=0.0)) if np.size(v) else 0.0


# ---------------------------------------------------------------------------
# plain-text dump

_HEADER = "# robust_hvac LP dump v1"


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_lp(problem: LpProblem, path) -> Path:
    """Write ``problem`` in a whitespace-separated text format (see README)."""
    path = Path(path)
    lines = [_HEADER, f"OFFSET {_fmt(problem.offset)}", f"VARIABLES {problem.n_vars}"]
    for i in range(problem.n_vars):
        lines.append(f"{problem._name(i)} {_fmt(problem.lo[i])} {_fmt(problem.hi[i])} {_fmt(problem.c[i])}")
    for tag, M, rhs in (("INEQUALITIES", problem.G, problem.h), ("EQUALITIES", problem.A_eq, problem.b_eq)):
        lines.append(f"{tag} {M.shape[0]}")
        for row, b in zip(M, rhs):
            lines.append(" ".join(_fmt(v) for v in row) + f" | {_fmt(b)}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def load_lp(path) -> LpProblem:
    try:
        text = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return _parse_dump(text, path)
    except StopIteration:
        raise ValidationError(f"{path}: dump ends early") from None


def _parse_dump(text: list[str], path) -> LpProblem:
    if not text or text[0] != _HEADER:
        raise ValidationError(f"{path}: not an LP dump (missing header)")
    it = iter(enumerate(text[1:], start=2))

    def expect(tag):
        lineno, line = next(it)
        key, _, val = line.partition(" ")
        if key != tag:
            raise ValidationError(f"{path}:{lineno}: expected {tag}, got {key!r}")
        return val, lineno

    def number(parse, value, lineno):
        try:
            return parse(value)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: cannot parse {value!r}") from None

    offset = number(float, *expect("OFFSET"))
    nv = number(int, *expect("VARIABLES"))
    names, lo, hi, c = [], [], [], []
    for _ in range(nv):
        lineno, line = next(it)
        parts = line.rsplit(" ", 3)
        if len(parts) != 4:
            raise ValidationError(f"{path}:{lineno}: expected 'name lo hi cost'")
        names.append(parts[0])
        lo.append(number(float, parts[1], lineno))
        hi.append(number(float, parts[2], lineno))
        c.append(number(float, parts[3], lineno))
    blocks = []
    for tag in ("INEQUALITIES", "EQUALITIES"):
        rows, rhs = [], []
        for _ in range(number(int, *expect(tag))):
            lineno, line = next(it)
            coeffs, sep, b = line.partition(" | ")
            row = [number(float, v, lineno) for v in coeffs.split()]
            if not sep or len(row) != nv:
                raise ValidationError(f"{path}:{lineno}: expected {nv} coefficients then '| rhs'")
            rows.append(row)
            rhs.append(number(float, b, lineno))
        blocks.append((np.array(rows).reshape(-1, nv), np.array(rhs)))
    (G, h), (A_eq, b_eq) = blocks
    return LpProblem(c, G, h, A_eq, b_eq, lo, hi, names=tuple(names), offset=offset)
