"""Half-hourly price series, disturbance forecasts, uncertainty bounds, curtailment events.

Prices are stored in SGD/kWh. Random series use ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, IoError, ValidationError

PERIODS_PER_DAY = 48
PERIOD = np.timedelta64(30, "m")
DEFAULT_START = "2014-01-06T00:00"
_UNIT_SCALE = {"SGD/kWh": 1.0, "SGD/MWh": 1e-3}


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def half_hourly(start=DEFAULT_START, periods: int = PERIODS_PER_DAY) -> np.ndarray:
    return np.datetime64(start, "m") + PERIOD * np.arange(periods)


def _parse_time(text: str, where: str) -> np.datetime64:
    try:
        return np.datetime64(text.strip(), "m")
    except ValueError as exc:
        raise DataError(f"{where}: bad timestamp {text!r}") from exc


def _format_time(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "m"))


def _check_spacing(ts: np.ndarray, where: str, spacing=PERIOD) -> None:
    if ts.size < 2:
        return
    steps = np.diff(ts)
    bad = np.flatnonzero(steps != spacing)
    if bad.size:
        i = int(bad[0])
        raise DataError(
            f"{where}: nonuniform spacing between period {i + 1} ({_format_time(ts[i])}) and "
            f"period {i + 2} ({_format_time(ts[i + 1])}); expected {spacing}"
        )


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray
    energy: np.ndarray
    reserve: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        e = np.asarray(self.energy, dtype=float)
        r = np.asarray(self.reserve, dtype=float)
        if not ts.size == e.size == r.size:
            raise ValidationError("price series columns differ in length")
        if ts.size > 1 and (np.diff(ts) <= np.timedelta64(0, "m")).any():
            raise ValidationError("price timestamps must be strictly increasing")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(r))):
            raise ValidationError("prices must be finite")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "energy", e)
        object.__setattr__(self, "reserve", r)

    def __len__(self):
        return self.energy.size


def load_price_csv(path, unit: str | None = None) -> PriceSeries:
    """Read ``timestamp,energy_price,reserve_price[,unit]``; converts SGD/MWh to SGD/kWh."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read price file {path}: {exc}") from exc
    ts, energy, reserve = [], [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["timestamp", "energy_price", "reserve_price"]:
            raise DataError(f"{path}:1: header must start with timestamp,energy_price,reserve_price")
        has_unit = len(header) > 3 and header[3].strip() == "unit"
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) < 3:
                raise DataError(f"{where}: expected at least 3 fields, got {len(row)}")
            row_unit = unit or (row[3].strip() if has_unit and len(row) > 3 else "SGD/kWh")
            if row_unit not in _UNIT_SCALE:
                raise DataError(f"{where}: unknown price unit {row_unit!r}")
            try:
                e, r = float(row[1]), float(row[2])
            except ValueError as exc:
                raise DataError(f"{where}: non-numeric price") from exc
            ts.append(_parse_time(row[0], where))
            scale = _UNIT_SCALE[row_unit]
            energy.append(e * scale)
            reserve.append(r * scale)
    ts = np.array(ts, dtype="datetime64[m]")
    _check_spacing(ts, str(path))
    return PriceSeries(ts, np.array(energy), np.array(reserve))


def _open_write(path: Path):
    try:
        return path.open("w", newline="")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_price_csv(series: PriceSeries, path) -> Path:
    path = Path(path)
    with _open_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "energy_price", "reserve_price"])
        for t, e, r in zip(series.timestamps, series.energy, series.reserve):
            w.writerow([_format_time(t), repr(float(e)), repr(float(r))])
    return path


@dataclass(frozen=True)
class PriceShape:
    """Two-peak diurnal shape of the energy price (SGD/kWh)."""

    days: int = 2
    start: str = DEFAULT_START
    base: float = 0.12
    morning_peak: float = 0.08
    morning_hour: float = 11.0
    evening_peak: float = 0.10
    evening_hour: float = 19.0
    peak_width: float = 2.0
    noise: float = 0.01
    reserve_fraction: float = 0.05
    reserve_noise: float = 0.2
    spike_probability: float = 0.02
    spike_ratio: float = 1.5
    floor: float = 0.01

    def __post_init__(self):
        if self.days < 1:
            raise ValidationError("days must be >= 1")
        if self.noise < 0 or self.reserve_noise < 0 or self.reserve_fraction < 0:
            raise ValidationError("noise levels and reserve fraction must be >= 0")
        if not 0 <= self.spike_probability < 1 or self.spike_ratio < 0:
            raise ValidationError("spike_probability must lie in [0, 1) and spike_ratio be >= 0")
        if not 0 <= self.reserve_noise <= 1:
            raise ValidationError("reserve_noise must lie in [0, 1]")


def diurnal_energy_shape(shape: PriceShape, hours: np.ndarray) -> np.ndarray:
    bump = lambda centre: np.exp(-0.5 * ((hours - centre) / shape.peak_width) ** 2)  # noqa: E731
    return shape.base + shape.morning_peak * bump(shape.morning_hour) + shape.evening_peak * bump(shape.evening_hour)


def synthesize_prices(shape: PriceShape = PriceShape(), seed: int = 0) -> PriceSeries:
    """Deterministic synthetic half-hourly energy and reserve prices.

    Reserve prices are a small multiple of the energy price except in
    ``round(spike_probability * periods)`` randomly placed periods where they
    reach ``spike_ratio`` times the energy price. The ordinary multiple is set
    so that the mean reserve/energy ratio equals ``reserve_fraction``.
    """
    periods = shape.days * PERIODS_PER_DAY
    ts = half_hourly(shape.start, periods)
    hours = (np.arange(periods) % PERIODS_PER_DAY) / 2.0
    clean = diurnal_energy_shape(shape, hours)
    rng = _rng(seed)
    eps_e = rng.standard_normal(periods)
    eps_r = rng.uniform(-1.0, 1.0, periods)
    order = rng.permutation(periods)
    n_spikes = int(round(shape.spike_probability * periods))
    spikes = np.zeros(periods, dtype=bool)
    spikes[order[:n_spikes]] = True
    base = (shape.reserve_fraction * periods - shape.spike_ratio * n_spikes) / (periods - n_spikes)
    if base < 0:
        raise ValidationError("spikes alone exceed the configured mean reserve fraction")
    energy = np.maximum(clean + shape.noise * eps_e, shape.floor) if shape.noise else clean
    ratio = np.where(spikes, shape.spike_ratio, base * (1.0 + shape.reserve_noise * eps_r))
    return PriceSeries(ts, energy, ratio * energy)


# ---------------------------------------------------------------------------
# disturbance forecasts


@dataclass(frozen=True)
class DisturbanceForecast:
    """Physical disturbance channels over time, shape (T, channels).

    Channels follow :class:`robust_hvac.thermal.DisturbanceLayout`: ``ambient``
    (degC), ``solar`` (kW/m^2) and ``internal:<room>`` (kW). ``realization``
    holds logged actual values when replaying data.
    """

    timestamps: np.ndarray
    channels: tuple[str, ...]
    values: np.ndarray
    realization: np.ndarray | None = field(default=None)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (ts.size, len(self.channels)):
            raise ValidationError(f"forecast values have shape {v.shape}, expected {(ts.size, len(self.channels))}")
        if ts.size > 1 and (np.diff(ts) <= np.timedelta64(0, "m")).any():
            raise ValidationError("forecast timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "values", v)
        if self.realization is not None:
            real = np.asarray(self.realization, dtype=float)
            if real.shape != v.shape:
                raise ValidationError("realization must match the forecast shape")
            object.__setattr__(self, "realization", real)

    def __len__(self):
        return self.timestamps.size

    def reorder(self, channels) -> "DisturbanceForecast":
        """Return a copy whose columns follow ``channels``."""
        missing = [c for c in channels if c not in self.channels]
        if missing:
            raise DataError(f"forecast lacks channels {missing}")
        idx = [self.channels.index(c) for c in channels]
        real = None if self.realization is None else self.realization[:, idx]
        return DisturbanceForecast(self.timestamps, tuple(channels), self.values[:, idx], real)


def derive_uncertainty_bounds(forecast: DisturbanceForecast, fraction: float, uncertain=None) -> np.ndarray:
    """Box half-widths ``fraction * |forecast|`` per channel and step.

    ``uncertain`` (bool per channel) zeroes the bound of channels treated as known.
    """
    if not fraction >= 0:
        raise ValidationError(f"uncertainty fraction must be >= 0, got {fraction}")
    sigma = fraction * np.abs(forecast.values)
    if uncertain is not None:
        sigma = sigma * np.asarray(uncertain, dtype=float)[None, :]
    return sigma


def load_forecast_csv(path) -> DisturbanceForecast:
    """Read long-format ``timestamp,channel,value[,realization]`` rows."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read forecast file {path}: {exc}") from exc
    table: dict[np.datetime64, dict[str, tuple[float, float | None]]] = {}
    channels: list[str] = []
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in (next(reader, None) or [])]
        if header[:3] != ["timestamp", "channel", "value"]:
            raise DataError(f"{path}:1: header must start with timestamp,channel,value")
        has_real = len(header) > 3 and header[3] == "realization"
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) < 3:
                raise DataError(f"{where}: expected at least 3 fields")
            t = _parse_time(row[0], where)
            ch = row[1].strip()
            try:
                val = float(row[2])
                real = float(row[3]) if has_real and len(row) > 3 and row[3].strip() else None
            except ValueError as exc:
                raise DataError(f"{where}: non-numeric value") from exc
            if ch not in channels:
                channels.append(ch)
            table.setdefault(t, {})[ch] = (val, real)
    ts = np.array(sorted(table), dtype="datetime64[m]")
    _check_spacing(ts, str(path))
    values = np.empty((ts.size, len(channels)))
    real = np.empty_like(values)
    any_real = False
    for i, t in enumerate(ts):
        for k, ch in enumerate(channels):
            if ch not in table[t]:
                raise DataError(f"{path}: channel {ch!r} missing at {_format_time(t)}")
            v, rv = table[t][ch]
            values[i, k] = v
            real[i, k] = v if rv is None else rv
            any_real |= rv is not None
    return DisturbanceForecast(ts, tuple(channels), values, real if any_real else None)


def write_forecast_csv(forecast: DisturbanceForecast, path) -> Path:
    path = Path(path)
    with _open_write(path) as fh:
        w = csv.writer(fh)
        header = ["timestamp", "channel", "value"]
        if forecast.realization is not None:
            header.append("realization")
        w.writerow(header)
        for i, t in enumerate(forecast.timestamps):
            for k, ch in enumerate(forecast.channels):
                row = [_format_time(t), ch, repr(float(forecast.values[i, k]))]
                if forecast.realization is not None:
                    row.append(repr(float(forecast.realization[i, k])))
                w.writerow(row)
    return path


@dataclass(frozen=True)
class WeatherShape:
    days: int = 2
    start: str = DEFAULT_START
    ambient_mean: float = 29.0
    ambient_swing: float = 3.0
    ambient_peak_hour: float = 14.0
    solar_peak: float = 0.8
    sunrise: float = 7.0
    sunset: float = 19.0
    occupied_hours: tuple[float, float] = (8.0, 18.0)
    internal_occupied: float = 2.0
    internal_unoccupied: float = 0.3
    noise: float = 0.05


def synthesize_forecast(rooms, shape: WeatherShape = WeatherShape(), seed: int = 0) -> DisturbanceForecast:
    """Tropical-climate ambient temperature, clear-sky solar and occupancy gains."""
    periods = shape.days * PERIODS_PER_DAY
    ts = half_hourly(shape.start, periods)
    hours = (np.arange(periods) % PERIODS_PER_DAY) / 2.0 + 0.25
    rng = _rng(seed)
    ambient = shape.ambient_mean + shape.ambient_swing * np.cos(2 * np.pi * (hours - shape.ambient_peak_hour) / 24.0)
    day = (hours > shape.sunrise) & (hours < shape.sunset)
    solar = np.where(day, shape.solar_peak * np.sin(np.pi * (hours - shape.sunrise) / (shape.sunset - shape.sunrise)), 0.0)
    solar = np.maximum(solar, 0.0)
    start, end = shape.occupied_hours
    occ = (hours >= start) & (hours < end)
    cols = [ambient, solar]
    channels = ["ambient", "solar"]
    for room in rooms:
        gains = np.where(occ, shape.internal_occupied, shape.internal_unoccupied)
        if shape.noise:
            gains = gains * (1.0 + shape.noise * rng.uniform(-1.0, 1.0, periods))
        cols.append(gains)
        channels.append(f"internal:{room}")
    return DisturbanceForecast(ts, tuple(channels), np.column_stack(cols))


# ---------------------------------------------------------------------------
# curtailment events


@dataclass(frozen=True)
class CurtailmentSignal:
    """Per-step flag: True when an accepted interruptible-load bid is called."""

    called: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "called", np.asarray(self.called, dtype=bool).reshape(-1))

    def __len__(self):
        return self.called.size


def bernoulli_curtailment(steps: int, p: float = 0.1, seed: int = 0) -> CurtailmentSignal:
    if not 0 <= p <= 1:
        raise ValidationError("curtailment probability must lie in [0, 1]")
    return CurtailmentSignal(_rng(seed).random(steps) < p)


def load_curtailment_csv(path) -> tuple[np.ndarray, CurtailmentSignal]:
    """Read ``timestamp,called`` rows with ``called`` in {0, 1}."""
    path = Path(path)
    ts, flags = [], []
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read curtailment file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in (next(reader, None) or [])]
        if header[:2] != ["timestamp", "called"]:
            raise DataError(f"{path}:1: header must be timestamp,called")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) < 2 or row[1].strip() not in ("0", "1"):
                raise DataError(f"{where}: called must be 0 or 1")
            ts.append(_parse_time(row[0], where))
            flags.append(row[1].strip() == "1")
    ts = np.array(ts, dtype="datetime64[m]")
    _check_spacing(ts, str(path))
    return ts, CurtailmentSignal(flags)
