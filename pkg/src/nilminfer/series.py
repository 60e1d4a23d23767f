"""Time-series data model: uniform power traces, ingestion, resampling and
local clock-window arithmetic.

All power values are active power in watts on a uniform grid. Timestamps are
UTC epoch seconds; anything calendar-related (night windows, weekdays, day
boundaries) is computed in the series' IANA timezone.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone as _utc_tz
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .errors import EmptyWindowError, GapError, ParseError

SECONDS_PER_DAY = 86400


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Uniformly sampled active-power trace.

    values are stored as a read-only float array; they must be finite and
    non-negative (ingestion clamps metering artifacts before construction).
    """

    start_time: int
    period_s: int
    values: np.ndarray
    timezone: str = "UTC"
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if int(self.period_s) <= 0:
            raise ValueError("period_s must be a positive integer")
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values must be finite")
        if np.any(arr < 0):
            raise ValueError("values must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_time", int(self.start_time))
        object.__setattr__(self, "period_s", int(self.period_s))
        ZoneInfo(self.timezone)  # fail fast on unknown zone names

    def __len__(self):
        return int(self.values.size)

    @property
    def end_time(self) -> int:
        """Time one period past the last sample (half-open span)."""
        return self.start_time + len(self) * self.period_s

    @property
    def span_s(self) -> int:
        return len(self) * self.period_s

    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self), dtype=np.int64) * self.period_s

    def slice(self, i: int, j: int) -> "PowerSeries":
        """Sub-series over sample index range [i, j)."""
        if not 0 <= i < j <= len(self):
            raise ValueError(f"bad slice [{i}, {j}) for length {len(self)}")
        return PowerSeries(self.start_time + i * self.period_s, self.period_s,
                           self.values[i:j], self.timezone)

    def energy_ws(self) -> float:
        """Total energy in watt-seconds (sum of value x period)."""
        return float(self.values.sum()) * self.period_s


# ---------------------------------------------------------------------------
# Local-clock helpers
# ---------------------------------------------------------------------------

def _offset_at(t: int, tz: ZoneInfo) -> int:
    return int(datetime.fromtimestamp(t, tz).utcoffset().total_seconds())


def utc_offsets(ts: np.ndarray, tzname: str) -> np.ndarray:
    """Per-timestamp UTC offset in seconds.

    Timestamps must be ascending. Offsets are resolved chunk-wise (6 h chunks)
    so DST transitions are honored without a per-sample datetime conversion.
    """
    tz = ZoneInfo(tzname)
    ts = np.asarray(ts, dtype=np.int64)
    out = np.empty(ts.size, dtype=np.int64)
    i = 0
    while i < ts.size:
        j = int(np.searchsorted(ts, ts[i] + 6 * 3600, side="left"))
        j = max(j, i + 1)
        o0 = _offset_at(int(ts[i]), tz)
        o1 = _offset_at(int(ts[j - 1]), tz)
        if o0 == o1:
            out[i:j] = o0
        else:
            for k in range(i, j):
                out[k] = _offset_at(int(ts[k]), tz)
        i = j
    return out


def local_clock_hours(ts: np.ndarray, tzname: str) -> np.ndarray:
    """Fractional local clock hour in [0, 24) of each timestamp."""
    off = utc_offsets(ts, tzname)
    return ((np.asarray(ts, dtype=np.int64) + off) % SECONDS_PER_DAY) / 3600.0


def local_weekdays(ts: np.ndarray, tzname: str) -> np.ndarray:
    """Local day of week, Monday=0, of each timestamp."""
    off = utc_offsets(ts, tzname)
    return ((np.asarray(ts, dtype=np.int64) + off) // SECONDS_PER_DAY + 3) % 7


def local_midnight_before(t: int, tzname: str) -> int:
    """Epoch of the local midnight at or before t."""
    tz = ZoneInfo(tzname)
    d = datetime.fromtimestamp(int(t), tz).date()
    return int(datetime(d.year, d.month, d.day, tzinfo=tz).timestamp())


def local_day_bounds(s: PowerSeries) -> list[tuple[int, int]]:
    """Half-open [day_start, day_end) epochs of every local day the series
    touches. DST days come out 23 or 25 hours long, as the zone dictates."""
    tz = ZoneInfo(s.timezone)
    d = datetime.fromtimestamp(s.start_time, tz).date()
    out = []
    while True:
        ds = int(datetime(d.year, d.month, d.day, tzinfo=tz).timestamp())
        nd = d + timedelta(days=1)
        de = int(datetime(nd.year, nd.month, nd.day, tzinfo=tz).timestamp())
        out.append((ds, de))
        if de >= s.end_time:
            break
        d = nd
    return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def resample(s: PowerSeries, new_period_s: int) -> PowerSeries:
    """Downsample by averaging. new_period_s must be an integer multiple of
    the current period; a trailing partial bucket is dropped."""
    new_period_s = int(new_period_s)
    if new_period_s <= 0 or new_period_s % s.period_s != 0:
        raise ValueError(
            f"new period {new_period_s} is not a multiple of {s.period_s}")
    f = new_period_s // s.period_s
    if f == 1:
        return PowerSeries(s.start_time, s.period_s, s.values, s.timezone)
    n_out = len(s) // f
    if n_out == 0:
        raise ValueError("series shorter than one output bucket")
    means = s.values[:n_out * f].reshape(n_out, f).mean(axis=1)
    return PowerSeries(s.start_time, new_period_s, means, s.timezone)


def clock_window_mean(s: PowerSeries, start_hour: float, end_hour: float) -> float:
    """Mean power over samples whose local clock time falls in
    [start_hour, end_hour), pooled across all covered days."""
    if not 0 <= start_hour < end_hour <= 24:
        raise ValueError("need 0 <= start_hour < end_hour <= 24")
    hours = local_clock_hours(s.timestamps(), s.timezone)
    mask = (hours >= start_hour) & (hours < end_hour)
    if not mask.any():
        raise EmptyWindowError(
            f"no samples in local window [{start_hour}, {end_hour})")
    return float(s.values[mask].mean())


def load_power_csv(path, *, period_s: int | None = None, timezone: str = "UTC",
                   max_gap_periods: int = 10,
                   timestamp_col: str = "timestamp",
                   power_col: str = "power_w") -> PowerSeries:
    """Ingest a power CSV onto a uniform grid.

    Rows are sorted by timestamp; duplicate timestamps collapse to their mean;
    gaps of at most max_gap_periods missing samples are forward-filled and
    longer gaps raise GapError (interpolating across a long outage would
    fabricate downstream evidence). Negative readings are clamped to 0 and
    counted in the returned series' meta.
    """
    path = Path(path)
    rows: list[tuple[int, float]] = []
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", line=1, path=str(path))
        header = [h.strip() for h in header]
        try:
            t_idx = header.index(timestamp_col)
            p_idx = header.index(power_col)
        except ValueError:
            raise ParseError(
                f"{path}: header must contain '{timestamp_col}' and "
                f"'{power_col}', got {header}", line=1, path=str(path))
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                t = _parse_timestamp(row[t_idx])
                p = float(row[p_idx])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed row {row!r} "
                                 f"({exc})", line=lineno, path=str(path)) from exc
            rows.append((t, p))
    if not rows:
        raise ParseError(f"{path}: no data rows", line=2, path=str(path))

    rows.sort(key=lambda r: r[0])
    ts = np.array([r[0] for r in rows], dtype=np.int64)
    vals = np.array([r[1] for r in rows], dtype=float)

    uniq, inverse, counts = np.unique(ts, return_inverse=True, return_counts=True)
    if uniq.size != ts.size:
        sums = np.zeros(uniq.size)
        np.add.at(sums, inverse, vals)
        vals = sums / counts
        ts = uniq

    if period_s is None:
        period_s = _infer_period(ts)
    period_s = int(period_s)

    rel = ts - ts[0]
    if np.any(rel % period_s != 0):
        bad = int(ts[np.nonzero(rel % period_s)[0][0]])
        raise ParseError(f"{path}: timestamp {bad} is off the {period_s}s grid",
                         path=str(path))

    pos = rel // period_s
    n = int(pos[-1]) + 1
    grid = np.full(n, np.nan)
    grid[pos] = vals

    n_filled = 0
    missing = np.isnan(grid)
    if missing.any():
        idx = np.flatnonzero(missing)
        # split into consecutive runs and forward-fill short ones
        run_starts = idx[np.flatnonzero(np.concatenate(([True], np.diff(idx) > 1)))]
        run_ends = idx[np.flatnonzero(np.concatenate((np.diff(idx) > 1, [True])))]
        for a, b in zip(run_starts, run_ends):
            run_len = int(b - a + 1)
            if run_len > max_gap_periods:
                t_a = int(ts[0] + a * period_s)
                t_b = int(ts[0] + b * period_s)
                raise GapError(
                    f"{path}: {run_len} consecutive samples missing between "
                    f"{t_a} and {t_b} (max {max_gap_periods})")
            grid[a:b + 1] = grid[a - 1]
            n_filled += run_len

    n_clamped = int((grid < 0).sum())
    if n_clamped:
        warnings.warn(f"{path}: clamped {n_clamped} negative power readings to 0",
                      stacklevel=2)
        grid = np.maximum(grid, 0.0)

    return PowerSeries(int(ts[0]), period_s, grid, timezone,
                       meta={"source": str(path), "n_gap_filled": n_filled,
                             "n_negative_clamped": n_clamped})


def write_power_csv(s: PowerSeries, path) -> None:
    """Write the `timestamp,power_w` CSV form. Floats use repr so a
    write -> load -> write cycle is byte-identical."""
    with open(path, "w", newline="") as f:
        f.write("timestamp,power_w\n")
        t = s.start_time
        for v in s.values.tolist():
            f.write(f"{t},{v!r}\n")
            t += s.period_s


def _parse_timestamp(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=_utc_tz.utc)
    return int(dt.timestamp())


def _infer_period(ts: np.ndarray) -> int:
    if ts.size < 2:
        return 1
    diffs = np.diff(ts)
    uniq, counts = np.unique(diffs, return_counts=True)
    # most common spacing; ties go to the smallest, which is the base period
    return int(uniq[np.argmax(counts)])


# ---------------------------------------------------------------------------
# Occupancy series
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OccupancySeries:
    """Boolean occupancy per fixed-width window.

    Carries the timezone so evaluation can restrict itself to local clock
    hours without outside context.
    """

    window_start: int
    window_s: int
    flags: np.ndarray
    timezone: str = "UTC"

    def __post_init__(self):
        if int(self.window_s) <= 0:
            raise ValueError("window_s must be positive")
        arr = np.array(self.flags, dtype=bool)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("flags must be a non-empty 1-D sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)
        object.__setattr__(self, "window_start", int(self.window_start))
        object.__setattr__(self, "window_s", int(self.window_s))
        ZoneInfo(self.timezone)

    def __len__(self):
        return int(self.flags.size)

    @property
    def end_time(self) -> int:
        return self.window_start + len(self) * self.window_s

    def window_starts(self) -> np.ndarray:
        return self.window_start + np.arange(len(self), dtype=np.int64) * self.window_s


def load_occupancy_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read `timestamp,occupied` rows. Returns (timestamps, bool flags),
    sorted by time. Sampling rate is arbitrary; window downstream."""
    path = Path(path)
    ts, occ = [], []
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestamp", "occupied"]:
            raise ParseError(f"{path}: expected header 'timestamp,occupied'",
                             line=1, path=str(path))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = _parse_timestamp(row[0])
                o = int(row[1])
                if o not in (0, 1):
                    raise ValueError("occupied must be 0 or 1")
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed row {row!r} "
                                 f"({exc})", line=lineno, path=str(path)) from exc
            ts.append(t)
            occ.append(bool(o))
    if not ts:
        raise ParseError(f"{path}: no data rows", line=2, path=str(path))
    order = np.argsort(np.array(ts, dtype=np.int64), kind="stable")
    return (np.array(ts, dtype=np.int64)[order],
            np.array(occ, dtype=bool)[order])


def window_occupancy(ts: np.ndarray, occupied: np.ndarray, *, window_start: int,
                     window_s: int, n_windows: int,
                     timezone: str = "UTC") -> OccupancySeries:
    """Aggregate point samples to windows: a window is occupied if any sample
    inside it is occupied."""
    flags = np.zeros(n_windows, dtype=bool)
    idx = (np.asarray(ts, dtype=np.int64) - window_start) // window_s
    ok = (idx >= 0) & (idx < n_windows) & np.asarray(occupied, dtype=bool)
    flags[idx[ok]] = True
    return OccupancySeries(window_start, window_s, flags, timezone)


def write_occupancy_csv(ts: np.ndarray, occupied: np.ndarray, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("timestamp,occupied\n")
        for t, o in zip(np.asarray(ts).tolist(), np.asarray(occupied).tolist()):
            f.write(f"{t},{1 if o else 0}\n")


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

@dataclass
class HomeEntry:
    home_id: str
    aggregate_path: str
    appliance_paths: dict = field(default_factory=dict)
    occupancy_path: str | None = None
    timezone: str = "UTC"
    characteristics: dict = field(default_factory=dict)
    hvac_circuits: int | None = None


@dataclass
class DatasetManifest:
    homes: list
    base_dir: Path | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [h.home_id for h in self.homes]
        if len(set(ids)) != len(ids):
            raise ValueError("home_ids must be unique")

    def home(self, home_id: str) -> HomeEntry:
        for h in self.homes:
            if h.home_id == home_id:
                return h
        raise KeyError(home_id)

    def resolve(self, rel_path: str) -> Path:
        p = Path(rel_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    homes = []
    for h in doc["homes"]:
        homes.append(HomeEntry(
            home_id=str(h["home_id"]),
            aggregate_path=h["aggregate_path"],
            appliance_paths=dict(h.get("appliance_paths", {})),
            occupancy_path=h.get("occupancy_path"),
            timezone=h.get("timezone", "UTC"),
            characteristics=dict(h.get("characteristics", {})),
            hvac_circuits=h.get("hvac_circuits"),
        ))
    m = DatasetManifest(homes=homes, base_dir=path.parent,
                        meta=dict(doc.get("meta", {})))
    for h in m.homes:
        for p in [h.aggregate_path, h.occupancy_path, *h.appliance_paths.values()]:
            if p is not None and not m.resolve(p).exists():
                raise FileNotFoundError(
                    f"manifest {path}: home {h.home_id} references missing file {p}")
    return m


def save_manifest(m: DatasetManifest, path) -> None:
    doc = {"meta": m.meta, "homes": []}
    for h in m.homes:
        entry = {
            "home_id": h.home_id,
            "aggregate_path": h.aggregate_path,
            "appliance_paths": h.appliance_paths,
            "timezone": h.timezone,
            "characteristics": h.characteristics,
        }
        if h.occupancy_path is not None:
            entry["occupancy_path"] = h.occupancy_path
        if h.hvac_circuits is not None:
            entry["hvac_circuits"] = h.hvac_circuits
        doc["homes"].append(entry)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
