"""Robust MPC step: cost terms, LP assembly and receding-horizon solve.

Decision vector ``z = (u, r, eps, beta)`` with ``u``, ``r`` and ``eps`` stored
time-major (``t * n_rooms + room``). ``u`` is the not-curtailed purchase,
``r >= 0`` the curtailable part offered as reserve, so the curtailed
trajectory is driven by ``u - r``. Rooms are the last ``n_rooms`` states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, ValidationError
from .lp import OPTIMAL, KktReport, LpProblem, check_kkt, solve_lp
from .prediction import PredictionMatrices, build_prediction_matrices
from .robust import robustify_dynamics
from .thermal import DiscreteStateSpace


@dataclass(frozen=True)
class PowerModel:
    """Affine electric power of fan, cooling and heating coil per room (kW per kg/s)."""

    fan: tuple[float, ...]
    cooling: tuple[float, ...]
    heating: tuple[float, ...]
    base: float = 0.0

    def __post_init__(self):
        for name in ("fan", "cooling", "heating"):
            v = tuple(float(x) for x in getattr(self, name))
            if any(x < 0 for x in v):
                raise ValidationError(f"power model coefficients must be >= 0 ({name})")
            object.__setattr__(self, name, v)
        if not len(self.fan) == len(self.cooling) == len(self.heating):
            raise ValidationError("power model coefficient lists differ in length")

    @property
    def kappa(self) -> np.ndarray:
        return np.array(self.fan) + np.array(self.cooling) + np.array(self.heating)


def electric_power(pm: PowerModel, flow) -> np.ndarray | float:
    """Total electric power (kW) for a flow vector, or per step for an (N, rooms) array."""
    flow = np.asarray(flow, dtype=float)
    if (flow < 0).any():
        raise ValidationError("flow must be nonnegative")
    p = flow @ pm.kappa + pm.base
    return float(p) if np.ndim(p) == 0 else p


def _per_step(name: str, v, N: int, j: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1 and v.size == N * j:
        v = v.reshape(N, j)
    if v.shape != (N, j):
        raise ValidationError(f"{name} has shape {v.shape}, expected ({N}, {j})")
    return v


@dataclass(frozen=True)
class PriceWindow:
    """Energy price (SGD/kWh), reserve price (SGD/kWh) and peak-power penalty (SGD/kW) per step."""

    energy: np.ndarray
    reserve: np.ndarray
    ppp: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float).reshape(-1) for k in ("energy", "reserve", "ppp")]
        if len({a.size for a in arrays}) != 1:
            raise ValidationError("price window series have different lengths")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValidationError("prices must be finite")
        if (arrays[2] < 0).any():
            raise ValidationError("peak-power penalty must be >= 0")
        for k, a in zip(("energy", "reserve", "ppp"), arrays):
            object.__setattr__(self, k, a)

    def __len__(self):
        return self.energy.size


def consumption_cost(prices: PriceWindow, pm: PowerModel, u, dt: float) -> float:
    N = len(prices)
    u = _per_step("u", u, N, len(pm.kappa))
    return float(dt * prices.energy @ electric_power(pm, u))


def reserve_revenue(prices: PriceWindow, pm: PowerModel, r, dt: float) -> float:
    """Capacity payment on the curtailable power, ``sum dt * b * (P(r) - P(0))``."""
    N = len(prices)
    r = _per_step("r", r, N, len(pm.kappa))
    if (r < 0).any():
        raise ValidationError("reserve must be nonnegative")
    return float(dt * prices.reserve @ (r @ pm.kappa))


@dataclass(frozen=True)
class ComfortEnvelope:
    """Room temperature bounds (degC), shape (N, rooms), for predicted steps 1..N."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValidationError("comfort bounds differ in shape")
        if (lo > hi).any():
            raise ValidationError("comfort envelope violates lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class ActuatorLimits:
    """Flow bounds (kg/s), shape (N, rooms)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or (lo < 0).any() or (lo > hi).any():
            raise ValidationError("actuator limits need 0 <= lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class RmpcConfig:
    horizon: int = 48
    rho: float | None = None
    robust: bool = True
    reserve: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.rho is not None and not self.rho > 0:
            raise ValidationError("slack penalty rho must be > 0")


def default_rho(prices: PriceWindow, pm: PowerModel) -> float:
    """1000 x (largest energy price x largest per-room power coefficient)."""
    return 1e3 * max(float(prices.energy.max()), 1e-3) * max(float(pm.kappa.max()), 1e-3)


@dataclass(frozen=True)
class HorizonWindow:
    """Everything the controller needs for one solve, aligned to ``horizon`` steps."""

    d_hat: np.ndarray
    sigma: np.ndarray
    envelope: ComfortEnvelope
    limits: ActuatorLimits
    prices: PriceWindow


@dataclass(frozen=True)
class LpLayout:
    horizon: int
    n_rooms: int

    @property
    def size(self) -> int:
        return 3 * self.horizon * self.n_rooms + 1

    def _blk(self, k: int) -> slice:
        m = self.horizon * self.n_rooms
        return slice(k * m, (k + 1) * m)

    @property
    def u(self) -> slice:
        return self._blk(0)

    @property
    def r(self) -> slice:
        return self._blk(1)

    @property
    def eps(self) -> slice:
        return self._blk(2)

    @property
    def beta(self) -> int:
        return self.size - 1

    def names(self) -> tuple[str, ...]:
        out = []
        for tag in ("u", "r", "eps"):
            out += [f"{tag}[{t},{i}]" for t in range(self.horizon) for i in range(self.n_rooms)]
        return tuple(out + ["beta"])


def _check_window(window: HorizonWindow, N: int, j: int, nd: int) -> None:
    for name, arr, shape in (
        ("d_hat", window.d_hat, (N, nd)),
        ("sigma", window.sigma, (N, nd)),
        ("comfort lower", window.envelope.lower, (N, j)),
        ("actuator lower", window.limits.lower, (N, j)),
    ):
        if np.shape(arr) != shape:
            raise ValidationError(f"{name} has shape {np.shape(arr)}, expected {shape}")
    if len(window.prices) != N:
        raise ValidationError(f"price window has {len(window.prices)} steps, expected {N}")


def assemble_rmpc_lp(
    dss: DiscreteStateSpace,
    pred: PredictionMatrices,
    x0,
    window: HorizonWindow,
    power: PowerModel,
    config: RmpcConfig,
) -> tuple[LpProblem, LpLayout]:
    N, n, j = pred.horizon, pred.n_states, pred.n_inputs
    _check_window(window, N, j, pred.n_disturbances)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,) or not np.all(np.isfinite(x0)):
        raise ValidationError(f"x0 must be a finite vector of length {n}")
    lay = LpLayout(N, j)
    nz, m = lay.size, N * j
    prices = window.prices
    kappa = power.kappa
    rho = config.rho if config.rho is not None else default_rho(prices, power)

    rows = np.array([t * n + (n - j) + i for t in range(1, N + 1) for i in range(j)])
    free = (pred.A @ x0 + pred.E @ np.asarray(window.d_hat, dtype=float).reshape(-1))[rows]
    Bu = pred.B[rows]
    Br = pred.B_r[rows]
    if config.robust:
        off = robustify_dynamics(pred, np.asarray(window.sigma).reshape(-1)).worst_case_offset[rows]
    else:
        off = np.zeros(m)
    ub = window.envelope.upper.reshape(-1)
    lb = window.envelope.lower.reshape(-1)
    I = np.eye(m)

    def trajectory_rows(with_reserve: bool):
        up = np.zeros((m, nz))
        up[:, lay.u] = Bu
        if with_reserve:
            up[:, lay.r] = Br
        up[:, lay.eps] = -I
        dn = -up
        dn[:, lay.eps] = -I
        return [up, dn], [ub - free - off, free - lb - off]

    G_blocks, h_blocks = trajectory_rows(False)
    if config.reserve:
        g, hh = trajectory_rows(True)
        G_blocks += g
        h_blocks += hh
        act = np.zeros((m, nz))
        act[:, lay.u] = -I
        act[:, lay.r] = I
        G_blocks.append(act)
        h_blocks.append(-np.maximum(window.limits.lower.reshape(-1), 0.0))
    for t in np.flatnonzero(prices.ppp > 0):
        row = np.zeros((1, nz))
        row[0, lay.u.start + t * j : lay.u.start + (t + 1) * j] = prices.ppp[t] * kappa
        row[0, lay.beta] = -1.0
        G_blocks.append(row)
        h_blocks.append(np.array([-prices.ppp[t] * power.base]))

    c = np.zeros(nz)
    dt = dss.dt
    c[lay.u] = np.outer(dt * prices.energy, kappa).reshape(-1)
    c[lay.eps] = rho
    c[lay.beta] = 1.0
    lo = np.zeros(nz)
    hi = np.full(nz, np.inf)
    hi[lay.u] = window.limits.upper.reshape(-1)
    if config.reserve:
        mask = np.tile(dss.reserve_mask, N)
        c[lay.r] = -np.outer(dt * prices.reserve, kappa).reshape(-1) * mask
        hi[lay.r] = np.where(mask > 0, np.inf, 0.0)
    else:
        lo[lay.u] = window.limits.lower.reshape(-1)
        hi[lay.r] = 0.0
    problem = LpProblem(
        c=c,
        G=np.vstack(G_blocks),
        h=np.concatenate(h_blocks),
        A_eq=np.zeros((0, nz)),
        b_eq=np.zeros(0),
        lo=lo,
        hi=hi,
        names=lay.names(),
        offset=float(dt * prices.energy.sum() * power.base),
    )
    return problem, lay


def assemble_nominal_lp(
    dss: DiscreteStateSpace,
    x0,
    window: HorizonWindow,
    power: PowerModel,
    rho: float,
) -> LpProblem:
    """Nominal MPC program built by forward simulation of the plant.

    Shares the variable layout of :func:`assemble_rmpc_lp` (reserve pinned to
    zero, no peak rows) and exists as an independent reference for it.
    """
    n, j = dss.n_states, dss.n_inputs
    N = len(window.prices)
    lay = LpLayout(N, j)
    nz, m = lay.size, N * j
    d = np.asarray(window.d_hat, dtype=float)
    x = np.asarray(x0, dtype=float)
    free = []
    for t in range(N):
        x = dss.A @ x + dss.E @ d[t]
        free.append(x[n - j :])
    free = np.concatenate(free)
    resp = np.zeros((m, m))
    for s in range(N):
        for i in range(j):
            e = np.zeros(j)
            e[i] = 1.0
            x = dss.B @ e
            for t in range(s, N):
                if t > s:
                    x = dss.A @ x
                resp[t * j : (t + 1) * j, s * j + i] = x[n - j :]
    ub = window.envelope.upper.reshape(-1)
    lb = window.envelope.lower.reshape(-1)
    G = np.zeros((2 * m, nz))
    G[:m, :m] = resp
    G[m:, :m] = -resp
    G[:m, 2 * m : 3 * m] = -np.eye(m)
    G[m:, 2 * m : 3 * m] = -np.eye(m)
    h = np.concatenate([ub - free, free - lb])
    c = np.zeros(nz)
    kappa = power.kappa
    for t in range(N):
        for i in range(j):
            c[t * j + i] = dss.dt * window.prices.energy[t] * kappa[i]
    c[2 * m : 3 * m] = rho
    c[-1] = 1.0
    lo = np.zeros(nz)
    hi = np.full(nz, np.inf)
    lo[:m] = window.limits.lower.reshape(-1)
    hi[:m] = window.limits.upper.reshape(-1)
    hi[m : 2 * m] = 0.0
    return LpProblem(c, G, h, np.zeros((0, nz)), np.zeros(0), lo, hi, names=lay.names(),
                     offset=float(dss.dt * window.prices.energy.sum() * power.base))


@dataclass(frozen=True)
class StepSchedule:
    u: np.ndarray
    r: np.ndarray
    eps: np.ndarray
    beta: float
    energy_cost: float
    reserve_revenue: float
    slack_penalty: float
    peak_term: float
    objective: float
    status: str
    kkt: KktReport
    iterations: int
    z: np.ndarray = field(repr=False)

    @property
    def applied(self) -> tuple[np.ndarray, np.ndarray]:
        """First-step action ``(u*_0, r*_0)``."""
        return self.u[0], self.r[0]


class RmpcController:
    """Receding-horizon controller; prediction operators are built once."""

    def __init__(self, dss: DiscreteStateSpace, power: PowerModel, config: RmpcConfig):
        if len(power.kappa) != dss.n_inputs:
            raise ValidationError("power model and state space disagree on the number of rooms")
        self.dss = dss
        self.power = power
        self.config = config
        self.pred = build_prediction_matrices(dss, config.horizon)

    def assemble(self, x0, window: HorizonWindow) -> tuple[LpProblem, LpLayout]:
        return assemble_rmpc_lp(self.dss, self.pred, x0, window, self.power, self.config)

    def solve_step(self, x0, window: HorizonWindow) -> StepSchedule:
        problem, lay = self.assemble(x0, window)
        sol = solve_lp(problem)
        if sol.status != OPTIMAL:
            # comfort is soft and actuator bounds are consistent, so this cannot happen for valid inputs
            raise SolverError(f"RMPC program reported {sol.status}: {sol.message}")
        z = sol.z
        N, j = lay.horizon, lay.n_rooms
        u = np.maximum(z[lay.u].reshape(N, j), 0.0)
        r = np.maximum(z[lay.r].reshape(N, j), 0.0)
        eps = np.maximum(z[lay.eps].reshape(N, j), 0.0)
        dt = self.dss.dt
        rho = self.config.rho if self.config.rho is not None else default_rho(window.prices, self.power)
        energy = consumption_cost(window.prices, self.power, u, dt)
        revenue = reserve_revenue(window.prices, self.power, r, dt)
        return StepSchedule(
            u=u,
            r=r,
            eps=eps,
            beta=float(z[lay.beta]),
            energy_cost=energy,
            reserve_revenue=revenue,
            slack_penalty=float(rho * z[lay.eps].sum()),
            peak_term=float(z[lay.beta]),
            objective=sol.objective_value,
            status=sol.status,
            kkt=check_kkt(problem, sol),
            iterations=sol.iterations,
            z=z,
        )


@dataclass(frozen=True)
class ComfortSchedule:
    """Occupancy-dependent comfort band: ``occupied`` applies in [start, end) hours of day."""

    occupied_hours: tuple[float, float] = (8.0, 18.0)
    occupied: tuple[float, float] = (22.0, 26.0)
    unoccupied: tuple[float, float] = (20.0, 28.0)

    def __post_init__(self):
        for name in ("occupied", "unoccupied"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"{name} comfort band has lower > upper")

    def bounds(self, timestamps: np.ndarray, n_rooms: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.asarray(timestamps, dtype="datetime64[m]")
        minutes = (ts - ts.astype("datetime64[D]")).astype(int)
        hour = minutes / 60.0
        start, end = self.occupied_hours
        occ = (hour >= start) & (hour < end)
        lo = np.where(occ, self.occupied[0], self.unoccupied[0])
        hi = np.where(occ, self.occupied[1], self.unoccupied[1])
        return np.repeat(lo[:, None], n_rooms, 1), np.repeat(hi[:, None], n_rooms, 1)
