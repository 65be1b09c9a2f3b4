"""Closed-loop receding-horizon simulation, PPP sweep and monthly accounting."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import BuildingConfig
from .controller import ComfortEnvelope, HorizonWindow, PriceWindow, RmpcConfig, RmpcController
from .errors import DataError, ValidationError
from .market import (
    PERIOD,
    PERIODS_PER_DAY,
    CurtailmentSignal,
    DisturbanceForecast,
    PriceSeries,
    _rng,
    bernoulli_curtailment,
    derive_uncertainty_bounds,
)
from .thermal import plant_step

REALIZATIONS = ("uniform", "vertex-upper", "vertex-lower", "vertex-random", "none", "replay")
COMFORT_TOL = 1e-9


@dataclass(frozen=True)
class ScenarioSpec:
    label: str = "b"
    robust: bool = True
    ppp: float = 0.0
    uncertainty_fraction: float = 0.5
    horizon: int = 48
    days: int = 2
    disturbance_seed: int = 0
    curtailment_seed: int = 1
    curtailment_probability: float = 0.1
    realization: str = "uniform"
    reserve: bool = True
    rho: float | None = None

    def __post_init__(self):
        if self.realization not in REALIZATIONS:
            raise ValidationError(f"realization must be one of {REALIZATIONS}")
        if self.days < 1 or self.horizon < 1:
            raise ValidationError("days and horizon must be >= 1")
        if np.any(np.asarray(self.ppp) < 0):
            raise ValidationError("peak-power penalty must be >= 0")
        if self.uncertainty_fraction < 0:
            raise ValidationError("uncertainty fraction must be >= 0")

    @property
    def steps(self) -> int:
        return self.days * PERIODS_PER_DAY


def scenario(label: str, **overrides) -> ScenarioSpec:
    """Scenario (a) nominal MPC, (b) robust MPC, (c) robust MPC with a 1.5 SGD/kW peak penalty."""
    presets = {
        "a": dict(robust=False, ppp=0.0),
        "b": dict(robust=True, ppp=0.0),
        "c": dict(robust=True, ppp=1.5),
    }
    if label not in presets:
        raise ValidationError(f"unknown scenario {label!r}; expected a, b or c")
    return ScenarioSpec(label=label, **{**presets[label], **overrides})


@dataclass(frozen=True)
class SimulationTrace:
    label: str
    node_labels: tuple[str, ...]
    room_labels: tuple[str, ...]
    dt: float
    timestamps: np.ndarray
    states: np.ndarray
    u: np.ndarray
    r: np.ndarray
    called: np.ndarray
    w: np.ndarray
    d_hat: np.ndarray
    energy_price: np.ndarray
    reserve_price: np.ndarray
    ppp: np.ndarray
    power: np.ndarray
    cost: np.ndarray
    revenue: np.ndarray
    eps_max: np.ndarray
    beta: np.ndarray
    comfort_lower: np.ndarray
    comfort_upper: np.ndarray
    predicted_next: np.ndarray
    lp_status: tuple[str, ...]
    kkt_max: np.ndarray
    iterations: np.ndarray

    def __len__(self):
        return self.timestamps.size

    @property
    def room_states(self) -> np.ndarray:
        """Room temperatures after each step, shape (steps, rooms)."""
        j = len(self.room_labels)
        return self.states[1:, -j:]

    def violations(self, tol: float = COMFORT_TOL) -> np.ndarray:
        x = self.room_states
        return ((x > self.comfort_upper + tol) | (x < self.comfort_lower - tol)).any(axis=1)

    @property
    def total_cost(self) -> float:
        return float(self.cost.sum())

    @property
    def total_revenue(self) -> float:
        return float(self.revenue.sum())

    @property
    def net_cost(self) -> float:
        return self.total_cost - self.total_revenue

    @property
    def peak_power(self) -> float:
        return float(self.power.max())

    def equals(self, other: "SimulationTrace") -> bool:
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


def _check_span(n_have: int, n_need: int, what: str, spec: ScenarioSpec):
    if n_have < n_need:
        raise DataError(
            f"{what} covers {n_have} periods; scenario needs {n_need} "
            f"({spec.days} days x {PERIODS_PER_DAY} + horizon {spec.horizon})"
        )


def run_closed_loop(
    spec: ScenarioSpec,
    building: BuildingConfig,
    prices: PriceSeries,
    forecast: DisturbanceForecast,
    curtailment: CurtailmentSignal | None = None,
    x0=None,
) -> SimulationTrace:
    thermal = building.thermal
    dss = thermal.discrete
    layout = thermal.layout
    K, N = spec.steps, spec.horizon
    _check_span(len(prices), K + N, "price series", spec)
    _check_span(len(forecast), K + N, "disturbance forecast", spec)
    if prices.timestamps[0] != forecast.timestamps[0]:
        raise DataError(
            f"price series starts at {prices.timestamps[0]}, forecast at {forecast.timestamps[0]}; they must align"
        )
    forecast = forecast.reorder(layout.channels)
    if curtailment is None:
        curtailment = bernoulli_curtailment(K, spec.curtailment_probability, spec.curtailment_seed)
    if len(curtailment) < K:
        raise DataError(f"curtailment signal covers {len(curtailment)} steps; scenario needs {K}")
    if spec.realization == "replay" and forecast.realization is None:
        raise DataError("replay realization requested but the forecast has no realization column")

    j, n = building.n_rooms, dss.n_states
    config = RmpcConfig(horizon=N, rho=spec.rho, robust=spec.robust, reserve=spec.reserve)
    controller = RmpcController(dss, building.power, config)
    limits = building.actuator_limits(N)
    kappa = building.power.kappa

    d_node = thermal.node_heat(forecast.values)
    sigma_phys = derive_uncertainty_bounds(forecast, spec.uncertainty_fraction, layout.uncertain)
    sigma_node = sigma_phys @ np.abs(layout.matrix).T
    if spec.realization == "replay":
        w_replay = thermal.node_heat(forecast.realization) - d_node
    ppp = np.broadcast_to(np.asarray(spec.ppp, dtype=float), (len(prices),)) if np.ndim(spec.ppp) == 0 \
        else np.asarray(spec.ppp, dtype=float)
    _check_span(ppp.size, K + N, "peak-power penalty series", spec)
    start = prices.timestamps[0]
    all_times = start + PERIOD * np.arange(K + N + 1)
    lo_all, hi_all = building.comfort.bounds(all_times, j)

    rng = _rng(spec.disturbance_seed)
    x = building.initial_state if x0 is None else np.asarray(x0, dtype=float)
    rec = {k: [] for k in ("u", "r", "w", "power", "cost", "revenue", "eps", "beta", "pred", "status", "kkt", "it")}
    states = [x]
    for k in range(K):
        sl = slice(k, k + N)
        window = HorizonWindow(
            d_hat=d_node[sl],
            sigma=sigma_node[sl],
            envelope=ComfortEnvelope(lo_all[k + 1 : k + N + 1], hi_all[k + 1 : k + N + 1]),
            limits=limits,
            prices=PriceWindow(prices.energy[sl], prices.reserve[sl], ppp[sl]),
        )
        sched = controller.solve_step(x, window)
        u0, r0 = sched.applied
        called = bool(curtailment.called[k])
        r_applied = r0 if called else np.zeros(j)

        draw = rng.uniform(-1.0, 1.0, n)
        s = sigma_node[k]
        if spec.realization == "uniform":
            w = s * draw
        elif spec.realization == "vertex-upper":
            w = s.copy()
        elif spec.realization == "vertex-lower":
            w = -s
        elif spec.realization == "vertex-random":
            w = s * np.where(draw >= 0, 1.0, -1.0)
        elif spec.realization == "replay":
            w = w_replay[k]
        else:
            w = np.zeros(n)

        pred_next = plant_step(dss, x, u0, d_node[k], r_applied)
        x_next = plant_step(dss, x, u0, d_node[k] + w, r_applied)
        applied = u0 - r_applied
        p = float(applied @ kappa + building.power.base)
        rec["u"].append(u0)
        rec["r"].append(r0)
        rec["w"].append(w)
        rec["power"].append(p)
        rec["cost"].append(dss.dt * prices.energy[k] * p)
        rec["revenue"].append(dss.dt * prices.reserve[k] * float(r0 @ kappa))
        rec["eps"].append(float(sched.eps.max()))
        rec["beta"].append(sched.beta)
        rec["pred"].append(pred_next)
        rec["status"].append(sched.status)
        rec["kkt"].append(max(sched.kkt.max_residual, sched.kkt.duality_gap))
        rec["it"].append(sched.iterations)
        states.append(x_next)
        x = x_next

    return SimulationTrace(
        label=spec.label,
        node_labels=tuple(thermal.network.node_ids),
        room_labels=tuple(r.id for r in thermal.network.rooms),
        dt=dss.dt,
        timestamps=all_times[:K],
        states=np.array(states),
        u=np.array(rec["u"]),
        r=np.array(rec["r"]),
        called=np.asarray(curtailment.called[:K], dtype=bool),
        w=np.array(rec["w"]),
        d_hat=d_node[:K].copy(),
        energy_price=prices.energy[:K].copy(),
        reserve_price=prices.reserve[:K].copy(),
        ppp=np.array(ppp[:K], dtype=float),
        power=np.array(rec["power"]),
        cost=np.array(rec["cost"]),
        revenue=np.array(rec["revenue"]),
        eps_max=np.array(rec["eps"]),
        beta=np.array(rec["beta"]),
        comfort_lower=lo_all[1 : K + 1],
        comfort_upper=hi_all[1 : K + 1],
        predicted_next=np.array(rec["pred"]),
        lp_status=tuple(rec["status"]),
        kkt_max=np.array(rec["kkt"]),
        iterations=np.array(rec["it"], dtype=int),
    )


def replay_states(trace: SimulationTrace, building: BuildingConfig) -> np.ndarray:
    """Re-simulate the plant from logged actions and disturbances."""
    dss = building.thermal.discrete
    x = trace.states[0]
    out = [x]
    for k in range(len(trace)):
        r_applied = trace.r[k] if trace.called[k] else np.zeros_like(trace.r[k])
        x = plant_step(dss, x, trace.u[k], trace.d_hat[k] + trace.w[k], r_applied)
        out.append(x)
    return np.array(out)


# ---------------------------------------------------------------------------
# peak-power-penalty sweep


@dataclass(frozen=True)
class PppSweepResult:
    phi: np.ndarray
    cost: np.ndarray
    peak: np.ndarray
    norm_cost: np.ndarray = field(init=False)
    norm_peak: np.ndarray = field(init=False)
    knee: float | None = None

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        peak = np.asarray(self.peak, dtype=float)
        if cost.size == 0:
            raise ValidationError("sweep has no grid points")
        if cost.shape != peak.shape or np.size(self.phi) != cost.size:
            raise ValidationError("sweep columns differ in length")
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "peak", peak)
        object.__setattr__(self, "norm_cost", cost / cost.max())
        object.__setattr__(self, "norm_peak", peak / peak.max())


def detect_knee(phi: np.ndarray, peak: np.ndarray, fraction: float = 0.1) -> float | None:
    """Smallest grid value after which the peak drop per unit penalty stays below
    ``fraction`` of the steepest drop observed; ``None`` if the sweep never flattens."""
    phi, peak = np.asarray(phi, dtype=float), np.asarray(peak, dtype=float)
    if phi.size < 3:
        return None
    slope = -np.diff(peak) / np.diff(phi)
    steepest = slope.max()
    if not steepest > 0:
        return None
    flat = slope < fraction * steepest
    for i in range(flat.size):
        if flat[i:].all():
            return float(phi[i]) if i > 0 else None
    return None


def _sweep_point(args):
    base, phi, building, prices, forecast, curtailment = args
    spec = dataclasses.replace(base, ppp=float(phi), label=f"phi={phi:g}")
    trace = run_closed_loop(spec, building, prices, forecast, curtailment)
    return trace.net_cost, trace.peak_power


def run_ppp_sweep(
    base: ScenarioSpec,
    grid,
    building: BuildingConfig,
    prices: PriceSeries,
    forecast: DisturbanceForecast,
    curtailment: CurtailmentSignal | None = None,
    knee_fraction: float = 0.1,
    max_workers: int | None = None,
) -> PppSweepResult:
    """One closed-loop run per penalty value with shared seeds.

    Cost is the operating cost (energy minus reserve revenue, penalty excluded);
    peak is the largest applied electric power in the run.
    """
    grid = np.asarray(sorted(float(g) for g in grid))
    if grid.size == 0:
        raise ValidationError("PPP grid is empty")
    if (grid < 0).any():
        raise ValidationError("PPP grid values must be >= 0")
    jobs = [(base, phi, building, prices, forecast, curtailment) for phi in grid]
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    cost = np.array([c for c, _ in results])
    peak = np.array([p for _, p in results])
    return PppSweepResult(grid, cost, peak, knee=detect_knee(grid, peak, knee_fraction))


# ---------------------------------------------------------------------------
# accounting


def percent_change(baseline: float, value: float) -> float | None:
    """Percentage change; ``None`` when the baseline is zero (no defined ratio)."""
    if baseline == 0:
        return None
    return 100.0 * (value - baseline) / baseline


@dataclass(frozen=True)
class AccountingReport:
    months: tuple[str, ...]
    cost: np.ndarray
    revenue: np.ndarray
    total: np.ndarray = field(init=False)
    baseline: "AccountingReport | None" = None

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float).reshape(-1)
        rev = np.asarray(self.revenue, dtype=float).reshape(-1)
        if not len(self.months) == cost.size == rev.size:
            raise ValidationError("accounting columns differ in length")
        object.__setattr__(self, "months", tuple(self.months))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "revenue", rev)
        object.__setattr__(self, "total", cost - rev)
        if self.baseline is not None and self.baseline.months != self.months:
            raise ValidationError(
                f"baseline covers months {self.baseline.months}, report covers {self.months}"
            )

    def average(self) -> dict[str, float]:
        return {"cost": float(self.cost.mean()), "revenue": float(self.revenue.mean()), "total": float(self.total.mean())}

    def deltas(self) -> dict[str, float | None] | None:
        """Percentage change of the monthly averages against the baseline."""
        if self.baseline is None:
            return None
        mine, base = self.average(), self.baseline.average()
        return {k: percent_change(base[k], mine[k]) for k in mine}


def accounting(trace: SimulationTrace, baseline: AccountingReport | None = None) -> AccountingReport:
    if len(trace) == 0:
        raise ValidationError("cannot account an empty trace")
    months = trace.timestamps.astype("datetime64[M]")
    labels = np.unique(months)
    cost = [trace.cost[months == m].sum() for m in labels]
    rev = [trace.revenue[months == m].sum() for m in labels]
    return AccountingReport(tuple(str(m) for m in labels), np.array(cost), np.array(rev), baseline=baseline)
