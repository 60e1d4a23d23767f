"""Occupancy prediction from aggregate power, plus the evaluation protocol.

Three algorithm families:

* event pipeline ("ours"): detect events, strike the background-load
  magnitudes learned from the night trace, pair the remaining edges, and
  signal occupancy over the retained ON intervals with day-edge marking;
* night-threshold ("chen" / "chen-median"): per day, a window is occupied if
  its power range, standard deviation or mean exceeds the night-time
  statistic of that feature;
* supervised ("knn" / "rf"): per-window [mean, std, range] features fed to the
  classifiers in nilminfer.classify.

Evaluation scores 15-minute windows whose local start time falls inside the
configured daytime band, occupied being the positive class. energy_proxy
(TP+FP) approximates HVAC runtime cost of acting on the prediction and
miss_time (FN) approximates occupant discomfort.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .classify import knn_classify, rf_classify, RandomForestConfig
from .errors import (AlignmentError, ConfigurationError, CoverageError,
                     EmptyWindowError)
from .events import (DetectorConfig, detect_events, learn_background,
                     pair_events, remove_background)
from .series import (OccupancySeries, PowerSeries, SECONDS_PER_DAY,
                     load_occupancy_csv, load_power_csv, local_clock_hours,
                     local_day_bounds, local_midnight_before, window_occupancy)

UNSUPERVISED_ALGORITHMS = ("ours", "ours-optimised", "chen", "chen-median")
SUPERVISED_ALGORITHMS = ("knn", "rf")


@dataclass
class OccupancyConfig:
    eval_start_hour: int = 6
    eval_end_hour: int = 22
    window_s: int = 900
    pair_gap_fill_s: float = 3600.0
    mark_start_of_day: bool = True
    mark_end_of_day: bool = True
    night_start_hour: float = 1.0
    night_end_hour: float = 5.0

    def __post_init__(self):
        if not self.eval_start_hour < self.eval_end_hour:
            raise ValueError("eval_start_hour must be < eval_end_hour")
        if SECONDS_PER_DAY % self.window_s != 0:
            raise ValueError("window_s must divide 86400")


@dataclass(frozen=True)
class OccupancyMetrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n_windows(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.n_windows

    @property
    def energy_proxy(self) -> int:
        """Windows the HVAC would run for: TP + FP."""
        return self.tp + self.fp

    @property
    def miss_time(self) -> int:
        """Occupied windows predicted empty: FN."""
        return self.fn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
                "n_windows": self.n_windows,
                "accuracy_pct": self.accuracy_pct,
                "energy_proxy": self.energy_proxy,
                "miss_time": self.miss_time}


# ---------------------------------------------------------------------------
# Window statistics
# ---------------------------------------------------------------------------

def window_grid(s: PowerSeries, window_s: int) -> tuple[int, int]:
    """(anchor, n_windows) for the local-midnight-aligned window grid that
    covers the series."""
    anchor = local_midnight_before(s.start_time, s.timezone)
    n_windows = -(-(s.end_time - anchor) // window_s)
    return anchor, int(n_windows)


def window_stats(s: PowerSeries, window_s: int, anchor: int | None = None):
    """Per-window sample count, mean, population std and range on the
    midnight-aligned grid. Empty windows report NaN statistics."""
    if anchor is None:
        anchor, n_windows = window_grid(s, window_s)
    else:
        n_windows = int(-(-(s.end_time - anchor) // window_s))
    ts = s.timestamps()
    widx = (ts - anchor) // window_s
    bounds = np.searchsorted(widx, np.arange(n_windows + 1))
    counts = np.diff(bounds)
    mean = np.full(n_windows, np.nan)
    std = np.full(n_windows, np.nan)
    rng = np.full(n_windows, np.nan)
    v = s.values
    for w in range(n_windows):
        a, b = bounds[w], bounds[w + 1]
        if a == b:
            continue
        seg = v[a:b]
        mean[w] = seg.mean()
        std[w] = seg.std()
        rng[w] = seg.max() - seg.min()
    starts = anchor + np.arange(n_windows, dtype=np.int64) * window_s
    return starts, counts, mean, std, rng


def window_power_features(s: PowerSeries, window_s: int = 900):
    """Per-window [mean, population std, range] feature rows, time-ordered.

    Returns (window_starts, X); windows without samples are omitted.
    """
    if SECONDS_PER_DAY % window_s != 0:
        raise ValueError("window_s must divide the day")
    starts, counts, mean, std, rng = window_stats(s, window_s)
    valid = counts > 0
    X = np.column_stack([mean[valid], std[valid], rng[valid]])
    return starts[valid], X


# ---------------------------------------------------------------------------
# Unsupervised predictors
# ---------------------------------------------------------------------------

def _merge_intervals(intervals, gap: float):
    """Merge (start, end) intervals whose separation is < gap (gap=1 with
    integer endpoints is a plain union)."""
    ivs = sorted((a, b) for a, b in intervals if b > a)
    out = []
    for a, b in ivs:
        if out and a - out[-1][1] < gap:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def predict_occupancy_events(s: PowerSeries, cfg: OccupancyConfig | None = None,
                             det: DetectorConfig | None = None) -> OccupancySeries:
    """Signal occupancy from foreground event pairs.

    Pipeline: detect events -> learn night background -> pair edges -> drop
    background magnitudes -> drop over-long pairs -> occupied intervals are
    the union of the surviving ON intervals, with gaps shorter than
    pair_gap_fill_s bridged. Each day with any foreground activity is also
    marked occupied from midnight to the first event and from the last event
    to midnight (each half independently configurable). A day with no
    foreground pairs stays unoccupied throughout.
    """
    cfg = cfg or OccupancyConfig()
    det = det or DetectorConfig()
    if s.span_s < SECONDS_PER_DAY:
        raise CoverageError("need at least one full day of data")

    events = detect_events(s, det.steady_tol_w, det.min_event_w)
    profile = learn_background(
        s, cfg.night_start_hour, cfg.night_end_hour, det.steady_tol_w,
        det.min_event_w, det.background_cluster_tol, det.background_min_support)
    pairs = pair_events(events, det.match_tol_frac, det.max_duration_s)
    foreground = [p for p in remove_background(pairs, profile)
                  if p.duration_s <= det.max_duration_s]

    intervals = _merge_intervals(
        [(p.on_time, p.off_time) for p in foreground], gap=cfg.pair_gap_fill_s)

    times = sorted(t for p in foreground for t in (p.on_time, p.off_time))
    extra = []
    for ds, de in local_day_bounds(s):
        in_day = [t for t in times if ds <= t < de]
        if not in_day:
            continue
        if cfg.mark_start_of_day:
            extra.append((ds, in_day[0]))
        if cfg.mark_end_of_day:
            extra.append((in_day[-1], de))
    occupied = _merge_intervals(intervals + extra, gap=1)

    anchor, n_windows = window_grid(s, cfg.window_s)
    flags = np.zeros(n_windows, dtype=bool)
    w = cfg.window_s
    for a, b in occupied:
        a = max(a, anchor)
        if b <= a:
            continue
        w0 = (a - anchor) // w
        w1 = -(-(b - anchor) // w)  # ceil; window starting exactly at b excluded
        flags[int(w0):min(int(w1), n_windows)] = True
    return OccupancySeries(anchor, cfg.window_s, flags, s.timezone)


def predict_occupancy_night_threshold(s: PowerSeries,
                                      cfg: OccupancyConfig | None = None,
                                      stat: str = "max") -> OccupancySeries:
    """Night-threshold occupancy: a window is occupied when its power range,
    std or mean strictly exceeds the chosen statistic (max or median) of that
    feature over the same day's night sub-windows. Days without a usable
    night window are skipped with a warning."""
    cfg = cfg or OccupancyConfig()
    if stat not in ("max", "median"):
        raise ValueError("stat must be 'max' or 'median'")
    agg = np.max if stat == "max" else np.median

    starts, counts, mean, std, rng = window_stats(s, cfg.window_s)
    whours = local_clock_hours(starts, s.timezone)
    valid = counts > 0
    flags = np.zeros(starts.size, dtype=bool)
    skipped = []
    for ds, de in local_day_bounds(s):
        day = (starts >= ds) & (starts < de) & valid
        night = day & (whours >= cfg.night_start_hour) & (whours < cfg.night_end_hour)
        if counts[night].sum() < 2:
            skipped.append(ds)
            continue
        t_rng, t_std, t_mean = agg(rng[night]), agg(std[night]), agg(mean[night])
        flags[day] = ((rng[day] > t_rng) | (std[day] > t_std)
                      | (mean[day] > t_mean))
    if skipped:
        warnings.warn(f"night-threshold predictor skipped {len(skipped)} "
                      f"day(s) without a preceding night window", stacklevel=2)
    return OccupancySeries(int(starts[0]), cfg.window_s, flags, s.timezone)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate_occupancy(pred: OccupancySeries, truth: OccupancySeries,
                       cfg: OccupancyConfig | None = None) -> OccupancyMetrics:
    """Confusion counts over windows both series cover, restricted to windows
    whose local start hour lies in [eval_start_hour, eval_end_hour)."""
    cfg = cfg or OccupancyConfig()
    if pred.window_s != truth.window_s:
        raise AlignmentError(
            f"window widths differ: {pred.window_s} vs {truth.window_s}")
    if pred.timezone != truth.timezone:
        raise AlignmentError("timezones differ")
    if (truth.window_start - pred.window_start) % pred.window_s != 0:
        raise AlignmentError("window grids are offset")
    w = pred.window_s
    t0 = max(pred.window_start, truth.window_start)
    t1 = min(pred.end_time, truth.end_time)
    if t1 <= t0:
        raise AlignmentError("series do not overlap")
    n = (t1 - t0) // w
    p = pred.flags[(t0 - pred.window_start) // w:][:n]
    t = truth.flags[(t0 - truth.window_start) // w:][:n]
    starts = t0 + np.arange(n, dtype=np.int64) * w
    hours = local_clock_hours(starts, pred.timezone)
    m = (hours >= cfg.eval_start_hour) & (hours < cfg.eval_end_hour)
    if not m.any():
        raise EmptyWindowError("no windows inside the evaluation hours")
    tp = int((p & t & m).sum())
    tn = int((~p & ~t & m).sum())
    fp = int((p & ~t & m).sum())
    fn = int((~p & t & m).sum())
    return OccupancyMetrics(tp=tp, tn=tn, fp=fp, fn=fn)


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

def _supervised_xy(series: PowerSeries, truth_ts, truth_occ,
                   cfg: OccupancyConfig):
    """Eval-hour window features and occupancy labels for one series."""
    starts, X = window_power_features(series, cfg.window_s)
    anchor, n_windows = window_grid(series, cfg.window_s)
    truth = window_occupancy(truth_ts, truth_occ, window_start=anchor,
                             window_s=cfg.window_s, n_windows=n_windows,
                             timezone=series.timezone)
    hours = local_clock_hours(starts, series.timezone)
    keep = (hours >= cfg.eval_start_hour) & (hours < cfg.eval_end_hour)
    starts = starts[keep]
    X = X[keep]
    y = truth.flags[(starts - anchor) // cfg.window_s].astype(int)
    return starts, X, y


def _predict_supervised(algorithm, train_parts, test_series, cfg, knn_k,
                        rf_cfg) -> OccupancySeries:
    X_tr, y_tr = [], []
    for series, truth_ts, truth_occ in train_parts:
        _, X, y = _supervised_xy(series, truth_ts, truth_occ, cfg)
        X_tr.append(X)
        y_tr.append(y)
    X_tr = np.vstack(X_tr)
    y_tr = np.concatenate(y_tr)
    starts, X_te = window_power_features(test_series, cfg.window_s)
    hours = local_clock_hours(starts, test_series.timezone)
    keep = (hours >= cfg.eval_start_hour) & (hours < cfg.eval_end_hour)
    starts, X_te = starts[keep], X_te[keep]
    if algorithm == "knn":
        pred = knn_classify(X_tr, y_tr, X_te, k=min(knn_k, len(y_tr)))
    else:
        pred = rf_classify(X_tr, y_tr, X_te, rf_cfg)
    anchor, n_windows = window_grid(test_series, cfg.window_s)
    flags = np.zeros(n_windows, dtype=bool)
    flags[(starts - anchor) // cfg.window_s] = np.asarray(pred, dtype=int) == 1
    return OccupancySeries(anchor, cfg.window_s, flags, test_series.timezone)


def predict_with_algorithm(algorithm: str, test_series: PowerSeries,
                           cfg: OccupancyConfig, det: DetectorConfig,
                           train_parts=None, knn_k: int = 5,
                           rf_cfg: RandomForestConfig | None = None) -> OccupancySeries:
    if algorithm == "ours":
        return predict_occupancy_events(test_series, cfg, det)
    if algorithm == "ours-optimised":
        return predict_occupancy_events(
            test_series, replace(cfg, mark_start_of_day=False), det)
    if algorithm == "chen":
        return predict_occupancy_night_threshold(test_series, cfg, "max")
    if algorithm == "chen-median":
        return predict_occupancy_night_threshold(test_series, cfg, "median")
    if algorithm in SUPERVISED_ALGORITHMS:
        if not train_parts:
            raise ConfigurationError(
                f"algorithm {algorithm} requires occupancy-labelled training data")
        return _predict_supervised(algorithm, train_parts, test_series, cfg,
                                   knn_k, rf_cfg or RandomForestConfig())
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _load_home(manifest, entry, cfg):
    series = load_power_csv(manifest.resolve(entry.aggregate_path),
                            timezone=entry.timezone)
    if entry.occupancy_path is None:
        raise ConfigurationError(
            f"home {entry.home_id} has no occupancy ground truth")
    truth_ts, truth_occ = load_occupancy_csv(
        manifest.resolve(entry.occupancy_path))
    return series, truth_ts, truth_occ


def _split_half(series: PowerSeries):
    """Split at the local midnight closest to the middle of the span."""
    days = local_day_bounds(series)
    if len(days) < 2:
        raise CoverageError("split-half needs at least two days")
    cut = days[len(days) // 2][0]
    i = (cut - series.start_time) // series.period_s
    return series.slice(0, int(i)), series.slice(int(i), len(series))


def occupancy_experiment(manifest, protocol: str = "split-half",
                         algorithms=("ours", "chen"),
                         cfg: OccupancyConfig | None = None,
                         det: DetectorConfig | None = None,
                         knn_k: int = 5,
                         rf_cfg: RandomForestConfig | None = None,
                         jobs: int = 1) -> dict:
    """Run the per-home occupancy comparison.

    split-half trains on the first half of each home and scores everything on
    the second half; leave-one-home-out scores each full home with the other
    homes as training material. Unsupervised algorithms ignore the training
    side. Returns per-home metric rows plus per-algorithm means.
    """
    cfg = cfg or OccupancyConfig()
    det = det or DetectorConfig()
    if protocol not in ("split-half", "loho"):
        raise ValueError("protocol must be 'split-half' or 'loho'")
    for a in algorithms:
        if a not in UNSUPERVISED_ALGORITHMS + SUPERVISED_ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")

    homes = {e.home_id: _load_home(manifest, e, cfg) for e in manifest.homes}
    needs_training = any(a in SUPERVISED_ALGORITHMS for a in algorithms)

    tasks = []
    for home_id in sorted(homes):
        series, truth_ts, truth_occ = homes[home_id]
        if protocol == "split-half":
            train_series, test_series = _split_half(series)
            train_parts = [(train_series, truth_ts, truth_occ)] if needs_training else []
        else:
            test_series = series
            train_parts = [homes[h] for h in sorted(homes) if h != home_id] \
                if needs_training else []
        tasks.append((home_id, test_series, train_parts, truth_ts, truth_occ))

    def run_one(task):
        home_id, test_series, train_parts, truth_ts, truth_occ = task
        rows = []
        for algorithm in algorithms:
            pred = predict_with_algorithm(algorithm, test_series, cfg, det,
                                          train_parts, knn_k, rf_cfg)
            truth = window_occupancy(
                truth_ts, truth_occ, window_start=pred.window_start,
                window_s=pred.window_s, n_windows=len(pred),
                timezone=pred.timezone)
            metrics = evaluate_occupancy(pred, truth, cfg)
            rows.append({"home_id": home_id, "algorithm": algorithm,
                         **metrics.as_dict()})
        return rows

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            all_rows = [r for rows in pool.map(run_one, tasks) for r in rows]
    else:
        all_rows = [r for task in tasks for r in run_one(task)]
    all_rows.sort(key=lambda r: (r["home_id"], r["algorithm"]))

    summary = []
    for algorithm in algorithms:
        rows = [r for r in all_rows if r["algorithm"] == algorithm]
        summary.append({
            "algorithm": algorithm,
            "n_homes": len(rows),
            **{k: float(np.mean([r[k] for r in rows]))
               for k in ("tp", "tn", "fp", "fn", "accuracy_pct",
                         "energy_proxy", "miss_time", "n_windows")},
        })
    return {"protocol": protocol, "per_home": all_rows, "summary": summary}
