"""Linear thermal model of a building assembled from a resistor-capacitor network.

State ordering is fixed: wall nodes first, then rooms. Temperatures in degC,
capacitances in kWh/degC, resistances in degC/kW, time in hours, air mass
flow in kg/s and specific heat in kJ/(kg degC), so that ``flow * c_p * dT``
is a heat rate in kW.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import NumericError, ValidationError

AMBIENT = "ambient"


@dataclass(frozen=True)
class RcNode:
    id: str
    kind: str  # "wall" | "room"
    capacitance: float
    peripheral: int = 0
    absorptivity: float = 0.0
    area: float = 0.0
    window: int = 0
    window_transmittance: float = 0.0
    window_area: float = 0.0

    def __post_init__(self):
        if self.kind not in ("wall", "room"):
            raise ValidationError(f"node {self.id!r}: kind must be 'wall' or 'room', got {self.kind!r}")
        if not self.capacitance > 0:
            raise ValidationError(f"node {self.id!r}: capacitance must be > 0, got {self.capacitance}")
        for name in ("peripheral", "window"):
            if getattr(self, name) not in (0, 1):
                raise ValidationError(f"node {self.id!r}: {name} must be 0 or 1")
        for name in ("absorptivity", "window_transmittance"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"node {self.id!r}: {name} must lie in [0, 1], got {v}")
        for name in ("area", "window_area"):
            if getattr(self, name) < 0:
                raise ValidationError(f"node {self.id!r}: {name} must be >= 0")

    @property
    def solar_gain_area(self) -> float:
        """Effective area (m^2) turning irradiance (kW/m^2) into a heat rate on this node."""
        if self.kind == "wall":
            return self.peripheral * self.absorptivity * self.area
        return self.window * self.window_transmittance * self.window_area


@dataclass(frozen=True)
class RcEdge:
    a: str
    b: str
    resistance: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError(f"edge {self.a!r}-{self.b!r} is a self-loop")
        if not self.resistance > 0:
            raise ValidationError(f"edge {self.a!r}-{self.b!r}: resistance must be > 0, got {self.resistance}")

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class RcNetwork:
    nodes: tuple[RcNode, ...]
    edges: tuple[RcEdge, ...]
    specific_heat: float = 1.005
    supply_temperature: tuple[float, ...] = ()
    ambient_node: str = AMBIENT

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "supply_temperature", tuple(float(t) for t in self.supply_temperature))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids")
        if self.ambient_node in ids:
            raise ValidationError(f"node id {self.ambient_node!r} is reserved for the ambient boundary")
        kinds = [n.kind for n in self.nodes]
        if "room" not in kinds:
            raise ValidationError("network has no room node")
        if kinds != sorted(kinds, key=lambda k: k == "room"):
            raise ValidationError("nodes must be ordered walls first, rooms last")
        if not self.specific_heat > 0:
            raise ValidationError("specific_heat must be > 0")
        if len(self.supply_temperature) != len(self.rooms):
            raise ValidationError(
                f"supply_temperature needs one value per room ({len(self.rooms)}), got {len(self.supply_temperature)}"
            )
        known = set(ids) | {self.ambient_node}
        seen: dict[frozenset, float] = {}
        for e in self.edges:
            for end in (e.a, e.b):
                if end not in known:
                    raise ValidationError(f"edge {e.a!r}-{e.b!r} references unknown node {end!r}")
            if e.key in seen and seen[e.key] != e.resistance:
                raise ValidationError(f"edge {e.a!r}-{e.b!r} listed twice with different resistances")
            seen[e.key] = e.resistance
        degree = {i: 0 for i in ids}
        for e in self.edges:
            for end in (e.a, e.b):
                if end in degree:
                    degree[end] += 1
        lonely = [n.id for n in self.rooms if degree[n.id] == 0]
        if lonely:
            raise ValidationError(f"room nodes without any edge: {lonely}")
        unreachable = self._unreachable_from_ambient()
        if unreachable:
            raise ValidationError(f"network is not connected to the ambient node; disconnected: {unreachable}")

    def _unreachable_from_ambient(self) -> list[str]:
        adj: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        adj[self.ambient_node] = set()
        for e in self.edges:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        seen = {self.ambient_node}
        queue = deque([self.ambient_node])
        while queue:
            for nxt in adj[queue.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return [n.id for n in self.nodes if n.id not in seen]

    @property
    def walls(self) -> list[RcNode]:
        return [n for n in self.nodes if n.kind == "wall"]

    @property
    def rooms(self) -> list[RcNode]:
        return [n for n in self.nodes if n.kind == "room"]

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def room_indices(self) -> np.ndarray:
        return np.array([i for i, n in enumerate(self.nodes) if n.kind == "room"])

    def unique_edges(self) -> list[RcEdge]:
        out, seen = [], set()
        for e in self.edges:
            if e.key not in seen:
                seen.add(e.key)
                out.append(e)
        return out


@dataclass(frozen=True)
class OperatingPoint:
    """Linearization anchor of the bilinear supply-air term, one entry per room."""

    nominal_flow: tuple[float, ...]
    nominal_room_temp: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "nominal_flow", tuple(float(v) for v in self.nominal_flow))
        object.__setattr__(self, "nominal_room_temp", tuple(float(v) for v in self.nominal_room_temp))
        if any(v < 0 for v in self.nominal_flow):
            raise ValidationError("nominal_flow must be >= 0")
        if len(self.nominal_flow) != len(self.nominal_room_temp):
            raise ValidationError("nominal_flow and nominal_room_temp lengths differ")


@dataclass(frozen=True)
class DisturbanceLayout:
    """Maps physical forecast channels onto the per-node heat channels.

    ``matrix`` is n x n_phys: node heat (kW) = matrix @ physical values + offset.
    Physical channels: ``ambient`` (degC), ``solar`` (kW/m^2) and
    ``internal:<room>`` (kW) per room.
    """

    channels: tuple[str, ...]
    matrix: np.ndarray
    uncertain: tuple[bool, ...]

    def node_heat(self, physical: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
        physical = np.asarray(physical, dtype=float)
        heat = physical @ self.matrix.T
        if offset is not None:
            heat = heat + offset
        return heat

    def uncertain_heat(self, physical: np.ndarray) -> np.ndarray:
        mask = np.asarray(self.uncertain, dtype=float)
        return (np.asarray(physical, dtype=float) * mask) @ self.matrix.T


def disturbance_layout(network: RcNetwork) -> DisturbanceLayout:
    n = len(network.nodes)
    index = {nid: i for i, nid in enumerate(network.node_ids)}
    rooms = network.rooms
    channels = ["ambient", "solar"] + [f"internal:{r.id}" for r in rooms]
    M = np.zeros((n, len(channels)))
    for e in network.unique_edges():
        if network.ambient_node in (e.a, e.b):
            other = e.b if e.a == network.ambient_node else e.a
            M[index[other], 0] += 1.0 / e.resistance
    for i, node in enumerate(network.nodes):
        M[i, 1] = node.solar_gain_area
    for k, r in enumerate(rooms):
        M[index[r.id], 2 + k] = 1.0
    # ambient temperature is treated as a known boundary; only heat loads carry forecast error
    uncertain = tuple(c != "ambient" for c in channels)
    return DisturbanceLayout(tuple(channels), M, uncertain)


@dataclass(frozen=True)
class ContinuousStateSpace:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    heat_offset: np.ndarray
    ambient_coupling: np.ndarray
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class DiscreteStateSpace:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    B_r: np.ndarray
    dt: float
    reserve_mask: np.ndarray
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_disturbances(self) -> int:
        return self.E.shape[1]


def assemble_continuous(
    network: RcNetwork, op: OperatingPoint, layout: DisturbanceLayout | None = None
) -> ContinuousStateSpace:
    """Continuous-time matrices of the RC network linearized about ``op``.

    The supply-air term ``m c_p (T_s - T_r)`` is expanded to first order about
    ``(m0, T_r0)``: the flow part becomes the input column, the temperature part
    adds ``-m0 c_p`` to the room diagonal and the remainder ``m0 c_p T_r0`` is a
    constant heat input returned as ``heat_offset``.
    """
    rooms = network.rooms
    if len(op.nominal_flow) != len(rooms):
        raise ValidationError(f"operating point has {len(op.nominal_flow)} rooms, network has {len(rooms)}")
    n, j = len(network.nodes), len(rooms)
    index = {nid: i for i, nid in enumerate(network.node_ids)}
    cap = np.array([node.capacitance for node in network.nodes])
    G = np.zeros((n, n))
    g_amb = np.zeros(n)
    for e in network.unique_edges():
        g = 1.0 / e.resistance
        ends = [index.get(e.a), index.get(e.b)]
        if None in ends:
            g_amb[ends[0] if ends[0] is not None else ends[1]] += g
            continue
        a, b = ends
        G[a, b] += g
        G[b, a] += g
    G[np.diag_indices(n)] = -(G.sum(axis=1) + g_amb)

    cp = network.specific_heat
    B = np.zeros((n, j))
    offset = np.zeros(n)
    for k, room in enumerate(rooms):
        i = index[room.id]
        m0, tr0 = op.nominal_flow[k], op.nominal_room_temp[k]
        G[i, i] -= m0 * cp
        B[i, k] = cp * (network.supply_temperature[k] - tr0)
        offset[i] = m0 * cp * tr0

    inv_c = 1.0 / cap
    A_c = G * inv_c[:, None]
    B_c = B * inv_c[:, None]
    E_c = np.diag(inv_c)
    return ContinuousStateSpace(
        A=A_c,
        B=B_c,
        E=E_c,
        heat_offset=offset,
        ambient_coupling=g_amb * inv_c,
        state_labels=tuple(network.node_ids),
        input_labels=tuple(r.id for r in rooms),
    )


def check_continuous(css: ContinuousStateSpace, tol: float = 1e-12) -> list[str]:
    """Return a list of violated structural invariants (empty when healthy)."""
    problems = []
    A = css.A
    off = A - np.diag(np.diag(A))
    if (off < -tol).any():
        problems.append("off-diagonal entries of A_c must be nonnegative (Metzler)")
    rows = A.sum(axis=1) + css.ambient_coupling
    if (rows > tol * np.abs(A).max()).any():
        problems.append("row sums of A_c plus ambient coupling must be <= 0")
    eig = np.linalg.eigvals(A)
    if (eig.real >= 0).any():
        problems.append(f"A_c has eigenvalues with nonnegative real part: {eig[eig.real >= 0]}")
    return problems


def time_constants(css: ContinuousStateSpace) -> np.ndarray:
    """Open-loop time constants in hours, sorted ascending."""
    return np.sort(-1.0 / np.linalg.eigvals(css.A).real)


def _expm_checked(M: np.ndarray) -> np.ndarray:
    # overflow is reported below with the norms, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        out = expm(M)
    if not np.all(np.isfinite(out)):
        raise NumericError(
            f"matrix exponential did not converge (||M||_1 = {np.linalg.norm(M, 1):.3e}, "
            f"||M||_inf = {np.linalg.norm(M, np.inf):.3e})"
        )
    return out


def discretize_zoh(
    css: ContinuousStateSpace, dt: float, reserve_mask: Sequence[int] | None = None
) -> DiscreteStateSpace:
    """Zero-order-hold discretization via the block-augmented matrix exponential."""
    if not dt > 0:
        raise ValidationError(f"sample time must be > 0, got {dt}")
    A_c, B_c, E_c = (np.asarray(m, dtype=float) for m in (css.A, css.B, css.E))
    if not all(np.all(np.isfinite(m)) for m in (A_c, B_c, E_c)):
        raise NumericError("continuous matrices contain non-finite entries")
    n, j, nd = A_c.shape[0], B_c.shape[1], E_c.shape[1]
    mask = np.ones(j) if reserve_mask is None else np.asarray(reserve_mask, dtype=float)
    if mask.shape != (j,) or not np.isin(mask, (0.0, 1.0)).all():
        raise ValidationError(f"reserve_mask must be a 0/1 vector of length {j}")
    M = np.zeros((n + j + nd, n + j + nd))
    M[:n, :n] = A_c
    M[:n, n : n + j] = B_c
    M[:n, n + j :] = E_c
    Phi = _expm_checked(M * dt)
    A = Phi[:n, :n]
    B = Phi[:n, n : n + j]
    E = Phi[:n, n + j :]
    return DiscreteStateSpace(
        A=A,
        B=B,
        E=E,
        B_r=-B * mask[None, :],
        dt=float(dt),
        reserve_mask=mask,
        state_labels=css.state_labels,
        input_labels=css.input_labels,
    )


def plant_step(
    dss: DiscreteStateSpace,
    x: np.ndarray,
    u: np.ndarray,
    d_realized: np.ndarray,
    r_applied: np.ndarray | None = None,
) -> np.ndarray:
    """One step of the discrete plant: ``A x + B u + E d + B_r r``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d_realized, dtype=float)
    r = np.zeros(dss.n_inputs) if r_applied is None else np.asarray(r_applied, dtype=float)
    for name, vec, size in (("x", x, dss.n_states), ("u", u, dss.n_inputs),
                            ("d", d, dss.n_disturbances), ("r", r, dss.n_inputs)):
        if vec.shape != (size,):
            raise ValidationError(f"{name} has shape {vec.shape}, expected ({size},)")
    return dss.A @ x + dss.B @ u + dss.E @ d + dss.B_r @ r


@dataclass(frozen=True)
class ThermalModel:
    """Network, linearization and derived matrices bundled together."""

    network: RcNetwork
    operating_point: OperatingPoint
    dt: float
    reserve_mask: tuple[int, ...]
    layout: DisturbanceLayout = field(init=False)
    continuous: ContinuousStateSpace = field(init=False)
    discrete: DiscreteStateSpace = field(init=False)

    def __post_init__(self):
        layout = disturbance_layout(self.network)
        css = assemble_continuous(self.network, self.operating_point, layout)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "continuous", css)
        object.__setattr__(self, "discrete", discretize_zoh(css, self.dt, self.reserve_mask))

    def node_heat(self, physical: np.ndarray) -> np.ndarray:
        """Per-node disturbance channels (kW) for rows of physical forecast values."""
        return self.layout.node_heat(physical, self.continuous.heat_offset)
