"""Building/controller configuration file (YAML) with line-anchored validation errors."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .controller import ActuatorLimits, ComfortSchedule, PowerModel, RmpcConfig
from .errors import ConfigError, ValidationError
from .thermal import AMBIENT, OperatingPoint, RcEdge, RcNetwork, RcNode, ThermalModel

_LINE = "__line__"


class _LineLoader(yaml.SafeLoader):
    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[_LINE] = node.start_mark.line + 1
        return mapping


@dataclass(frozen=True)
class BuildingConfig:
    thermal: ThermalModel
    power: PowerModel
    comfort: ComfortSchedule
    min_flow: float
    max_flow: float
    controller: RmpcConfig
    initial_temperature: float
    source: str = "<memory>"

    @property
    def n_rooms(self) -> int:
        return len(self.thermal.network.rooms)

    @property
    def initial_state(self) -> np.ndarray:
        return np.full(len(self.thermal.network.nodes), self.initial_temperature)

    def actuator_limits(self, N: int) -> ActuatorLimits:
        j = self.n_rooms
        return ActuatorLimits(np.full((N, j), self.min_flow), np.full((N, j), self.max_flow))


def default_building_path() -> Path:
    return Path(str(resources.files("robust_hvac") / "data" / "default_building.yaml"))


def _get(mapping: dict, key: str, path, default=...):
    if key in mapping:
        return mapping[key]
    if default is ...:
        raise ConfigError(f"missing required key {key!r}", mapping.get(_LINE), path)
    return default


def _section(doc: dict, key: str, path) -> dict:
    sec = _get(doc, key, path, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {key!r} must be a mapping", doc.get(_LINE), path)
    return sec


def _clean(mapping: dict) -> dict:
    return {k: v for k, v in mapping.items() if k != _LINE}


def parse_building(text: str, path="<string>") -> BuildingConfig:
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", mark.line + 1 if mark else None, path) from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", 1, path)

    b = _section(doc, "building", path)
    nodes = []
    for entry in _get(b, "nodes", path):
        line = entry.get(_LINE) if isinstance(entry, dict) else None
        try:
            nodes.append(RcNode(**_clean(entry)))
        except (TypeError, ValidationError) as exc:
            raise ConfigError(f"node entry: {exc}", line, path) from exc
    edges = []
    for entry in _get(b, "edges", path):
        line = entry.get(_LINE) if isinstance(entry, dict) else None
        try:
            edges.append(RcEdge(**_clean(entry)))
        except (TypeError, ValidationError) as exc:
            raise ConfigError(f"edge entry: {exc}", line, path) from exc

    room_ids = [n.id for n in nodes if n.kind == "room"]
    rooms = _section(b, "rooms", path)
    extra = set(rooms) - set(room_ids) - {_LINE}
    if extra:
        raise ConfigError(f"'rooms' lists unknown rooms {sorted(extra)}", rooms.get(_LINE), path)
    supply, flow, temp, mask = [], [], [], []
    for rid in room_ids:
        spec = rooms.get(rid, {})
        supply.append(float(_get(spec, "supply_temperature", path, 13.0)))
        flow.append(float(_get(spec, "nominal_flow", path, 0.0)))
        temp.append(float(_get(spec, "nominal_temperature", path, 24.0)))
        mask.append(int(_get(spec, "reserve", path, 1)))
    try:
        network = RcNetwork(
            nodes,
            edges,
            specific_heat=float(_get(b, "specific_heat", path, 1.005)),
            supply_temperature=supply,
            ambient_node=str(_get(b, "ambient_node", path, AMBIENT)),
        )
        op = OperatingPoint(flow, temp)
        for rid, ts, t0 in zip(room_ids, supply, temp):
            if max(flow) > 0 and not ts < t0:
                raise ValidationError(f"room {rid!r}: supply temperature must be below nominal room temperature")
        thermal = ThermalModel(network, op, float(_get(b, "dt", path)), tuple(mask))
    except ValidationError as exc:
        raise ConfigError(str(exc), b.get(_LINE), path) from exc

    pmsec = _section(doc, "power_model", path)
    prooms = _section(pmsec, "rooms", path)
    coeffs = {k: [] for k in ("fan", "cooling", "heating")}
    for rid in room_ids:
        if rid not in prooms:
            raise ConfigError(f"power_model has no entry for room {rid!r}", prooms.get(_LINE), path)
        for k in coeffs:
            coeffs[k].append(float(_get(prooms[rid], k, path, 0.0)))
    try:
        power = PowerModel(**coeffs, base=float(_get(pmsec, "base", path, 0.0)))
    except ValidationError as exc:
        raise ConfigError(str(exc), pmsec.get(_LINE), path) from exc

    csec = _section(doc, "comfort", path)
    try:
        comfort = ComfortSchedule(
            occupied_hours=tuple(_get(csec, "occupied_hours", path, (8.0, 18.0))),
            occupied=tuple(_get(csec, "occupied", path, (22.0, 26.0))),
            unoccupied=tuple(_get(csec, "unoccupied", path, (20.0, 28.0))),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc), csec.get(_LINE), path) from exc

    asec = _section(doc, "actuator", path)
    lo, hi = float(_get(asec, "min_flow", path, 0.0)), float(_get(asec, "max_flow", path))
    if not 0 <= lo <= hi:
        raise ConfigError("actuator limits need 0 <= min_flow <= max_flow", asec.get(_LINE), path)

    ctl = _section(doc, "controller", path)
    try:
        controller = RmpcConfig(
            horizon=int(_get(ctl, "horizon", path, 48)),
            rho=_get(ctl, "rho", path, None),
            reserve=bool(_get(ctl, "reserve", path, True)),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc), ctl.get(_LINE), path) from exc

    return BuildingConfig(
        thermal=thermal,
        power=power,
        comfort=comfort,
        min_flow=lo,
        max_flow=hi,
        controller=controller,
        initial_temperature=float(_get(b, "initial_temperature", path, 24.0)),
        source=str(path),
    )


def load_building(path=None) -> BuildingConfig:
    """Load a building file; ``None`` loads the shipped default building."""
    path = default_building_path() if path is None else Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read building file: {exc}", path=path) from exc
    return parse_building(text, path)
