"""CSV reports and plot-data files for traces, sweeps and accounting.

Every float is written with ``repr`` so files are bit-stable and reload to the
exact same values. Layouts:

``trace.csv``
    One row per step. A leading ``# key=value`` block records the scenario
    label and sample time. Per-node and per-room columns carry the id after a
    colon, e.g. ``x:room1``. ``x`` is the state at the start of the step and
    ``x_next`` the state after it.
``fig_temperature.csv``
    Room temperatures and comfort bounds per step.
``fig_power.csv``
    Applied power, reserve offer per room, curtailment flag and prices.
``sweep.csv`` / ``fig_sweep.csv``
    ``phi,cost,peak,norm_cost,norm_peak``; the figure file holds the
    normalized curves in percent plus the detected knee.
``accounting.csv``
    Per-month cost, revenue, total, and the same against the baseline.
``schedule.csv``
    One controller solve: ``step,room,u,r,eps`` per horizon step and room,
    with ``beta`` and the objective terms in the preamble.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import DataError, IoError, ValidationError
from .market import _format_time, _parse_time
from .controller import StepSchedule
from .sim import AccountingReport, PppSweepResult, SimulationTrace, percent_change

SWEEP_HEADER = ("phi", "cost", "peak", "norm_cost", "norm_peak")
ACCOUNTING_HEADER = ("month", "cost", "revenue", "total", "delta_cost_pct", "delta_revenue_pct", "delta_total_pct")

_NODE_BLOCKS = ("x", "x_next", "w", "d_hat", "predicted_next")
_ROOM_BLOCKS = ("u", "r", "comfort_lower", "comfort_upper")
_SCALARS = ("energy_price", "reserve_price", "ppp", "power", "cost", "revenue", "eps_max", "beta", "kkt_max")


def _f(v) -> str:
    return repr(float(v))


def _write(path: Path, header, rows, preamble: dict[str, str] | None = None) -> Path:
    buf = io.StringIO()
    for k, v in (preamble or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _trace_header(trace: SimulationTrace) -> list[str]:
    header = ["timestamp"]
    for b in _NODE_BLOCKS[:2]:
        header += [f"{b}:{n}" for n in trace.node_labels]
    header += [f"{b}:{r}" for b in _ROOM_BLOCKS[:2] for r in trace.room_labels]
    header.append("called")
    for b in _NODE_BLOCKS[2:]:
        header += [f"{b}:{n}" for n in trace.node_labels]
    header += [f"{b}:{r}" for b in _ROOM_BLOCKS[2:] for r in trace.room_labels]
    header += list(_SCALARS) + ["lp_status", "iterations"]
    return header


def write_trace_csv(trace: SimulationTrace, path) -> Path:
    path = Path(path)
    rows = []
    for k in range(len(trace)):
        row = [_format_time(trace.timestamps[k])]
        row += [_f(v) for v in trace.states[k]]
        row += [_f(v) for v in trace.states[k + 1]]
        row += [_f(v) for v in trace.u[k]] + [_f(v) for v in trace.r[k]]
        row.append(str(int(trace.called[k])))
        for arr in (trace.w, trace.d_hat, trace.predicted_next, trace.comfort_lower, trace.comfort_upper):
            row += [_f(v) for v in arr[k]]
        row += [_f(getattr(trace, s)[k]) for s in _SCALARS]
        row += [trace.lp_status[k], str(int(trace.iterations[k]))]
        rows.append(row)
    return _write(path, _trace_header(trace), rows, {"label": trace.label, "dt": _f(trace.dt)})


def load_trace(path) -> SimulationTrace:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    meta = {}
    while lines and lines[0].startswith("#"):
        key, _, value = lines.pop(0)[1:].strip().partition("=")
        meta[key] = value
    if "label" not in meta or "dt" not in meta:
        raise DataError(f"{path}: missing '# label=' / '# dt=' preamble")
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path}: no header row") from None
    rows = list(reader)
    if not rows:
        raise DataError(f"{path}: trace has no steps")
    col = {name: i for i, name in enumerate(header)}
    nodes = tuple(h.split(":", 1)[1] for h in header if h.startswith("x:"))
    rooms = tuple(h.split(":", 1)[1] for h in header if h.startswith("u:"))

    def block(prefix, ids):
        try:
            idx = [col[f"{prefix}:{i}"] for i in ids]
        except KeyError as exc:
            raise DataError(f"{path}: missing column {exc.args[0]!r}") from None
        return np.array([[float(r[i]) for i in idx] for r in rows])

    def scalar(name, cast=float):
        if name not in col:
            raise DataError(f"{path}: missing column {name!r}")
        return np.array([cast(r[col[name]]) for r in rows])

    x = block("x", nodes)
    x_next = block("x_next", nodes)
    return SimulationTrace(
        label=meta["label"],
        node_labels=nodes,
        room_labels=rooms,
        dt=float(meta["dt"]),
        timestamps=np.array(
            [_parse_time(r[col["timestamp"]], f"{path}:{i + 2}") for i, r in enumerate(rows)], dtype="datetime64[m]"
        ),
        states=np.vstack([x[:1], x_next]),
        u=block("u", rooms),
        r=block("r", rooms),
        called=scalar("called", int).astype(bool),
        w=block("w", nodes),
        d_hat=block("d_hat", nodes),
        energy_price=scalar("energy_price"),
        reserve_price=scalar("reserve_price"),
        ppp=scalar("ppp"),
        power=scalar("power"),
        cost=scalar("cost"),
        revenue=scalar("revenue"),
        eps_max=scalar("eps_max"),
        beta=scalar("beta"),
        comfort_lower=block("comfort_lower", rooms),
        comfort_upper=block("comfort_upper", rooms),
        predicted_next=block("predicted_next", nodes),
        lp_status=tuple(r[col["lp_status"]] for r in rows),
        kkt_max=scalar("kkt_max"),
        iterations=scalar("iterations", int),
    )


def write_schedule_csv(schedule: StepSchedule, path, room_labels=None) -> Path:
    N, j = schedule.u.shape
    rooms = list(room_labels) if room_labels is not None else [str(i) for i in range(j)]
    if len(rooms) != j:
        raise ValidationError(f"{len(rooms)} room labels for a {j}-room schedule")
    rows = [
        [str(t), rooms[i], _f(schedule.u[t, i]), _f(schedule.r[t, i]), _f(schedule.eps[t, i])]
        for t in range(N)
        for i in range(j)
    ]
    meta = {
        "status": schedule.status,
        "beta": _f(schedule.beta),
        "energy_cost": _f(schedule.energy_cost),
        "reserve_revenue": _f(schedule.reserve_revenue),
        "slack_penalty": _f(schedule.slack_penalty),
        "peak_term": _f(schedule.peak_term),
        "objective": _f(schedule.objective),
    }
    return _write(Path(path), ("step", "room", "u", "r", "eps"), rows, meta)


def _trace_figures(trace: SimulationTrace, out: Path) -> list[Path]:
    rooms = trace.room_labels
    temps = trace.room_states
    header = ["timestamp"] + [f"T:{r}" for r in rooms] + [f"lower:{r}" for r in rooms] + [f"upper:{r}" for r in rooms]
    rows = [
        [_format_time(trace.timestamps[k])]
        + [_f(v) for v in temps[k]]
        + [_f(v) for v in trace.comfort_lower[k]]
        + [_f(v) for v in trace.comfort_upper[k]]
        for k in range(len(trace))
    ]
    fig_t = _write(out / "fig_temperature.csv", header, rows, {"label": trace.label})
    header = ["timestamp", "power", "called", "energy_price", "reserve_price"] + [f"reserve:{r}" for r in rooms]
    rows = [
        [_format_time(trace.timestamps[k]), _f(trace.power[k]), str(int(trace.called[k])),
         _f(trace.energy_price[k]), _f(trace.reserve_price[k])]
        + [_f(v) for v in trace.r[k]]
        for k in range(len(trace))
    ]
    fig_p = _write(out / "fig_power.csv", header, rows, {"label": trace.label})
    return [fig_t, fig_p]


def write_sweep_csv(sweep: PppSweepResult, path) -> Path:
    rows = [
        [_f(sweep.phi[i]), _f(sweep.cost[i]), _f(sweep.peak[i]), _f(sweep.norm_cost[i]), _f(sweep.norm_peak[i])]
        for i in range(sweep.phi.size)
    ]
    return _write(Path(path), SWEEP_HEADER, rows)


def _sweep_figure(sweep: PppSweepResult, out: Path) -> Path:
    rows = [
        [_f(sweep.phi[i]), _f(100.0 * sweep.norm_cost[i]), _f(100.0 * sweep.norm_peak[i])]
        for i in range(sweep.phi.size)
    ]
    knee = "none" if sweep.knee is None else _f(sweep.knee)
    return _write(out / "fig_sweep.csv", ("phi", "norm_cost_pct", "norm_peak_pct"), rows, {"knee": knee})


def write_accounting_csv(report: AccountingReport, path) -> Path:
    base = report.baseline
    rows = []
    for i, m in enumerate(report.months):
        row = [m, _f(report.cost[i]), _f(report.revenue[i]), _f(report.total[i])]
        if base is None:
            row += ["", "", ""]
        else:
            row += [
                _pct(base.cost[i], report.cost[i]),
                _pct(base.revenue[i], report.revenue[i]),
                _pct(base.total[i], report.total[i]),
            ]
        rows.append(row)
    avg = report.average()
    row = ["average", _f(avg["cost"]), _f(avg["revenue"]), _f(avg["total"])]
    deltas = report.deltas()
    if deltas is None:
        row += ["", "", ""]
    else:
        row += ["" if deltas[k] is None else _f(deltas[k]) for k in ("cost", "revenue", "total")]
    rows.append(row)
    return _write(Path(path), ACCOUNTING_HEADER, rows)


def _pct(base: float, value: float) -> str:
    # zero baseline (e.g. no reserve revenue) has no defined percentage
    pct = percent_change(base, value)
    return "" if pct is None else _f(pct)


def emit_reports(obj, out_dir) -> list[Path]:
    """Write the CSV report and plot data for a trace, sweep or accounting report."""
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise IoError(f"output path {out} exists and is not a directory")
    if isinstance(obj, SimulationTrace):
        if len(obj) == 0:
            raise ValidationError("trace is empty")
        return [write_trace_csv(obj, out / "trace.csv"), *_trace_figures(obj, out)]
    if isinstance(obj, PppSweepResult):
        if obj.phi.size == 0:
            raise ValidationError("sweep has no grid points")
        return [write_sweep_csv(obj, out / "sweep.csv"), _sweep_figure(obj, out)]
    if isinstance(obj, AccountingReport):
        return [write_accounting_csv(obj, out / "accounting.csv")]
    raise ValidationError(f"cannot emit reports for {type(obj).__name__}")
