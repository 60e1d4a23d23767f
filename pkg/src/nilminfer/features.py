"""Household feature extraction, chi-squared selection and correlation
diagnostics.

The consumption catalog (22 features: consumption means, ratios, temporal
proportions, variance and day-lag autocorrelation) can be computed on any
power stream and is prefixed with a stream tag. The appliance catalog adds
HVAC- and event-derived features: max HVAC power, switch counts, circuit
count, ON-time and energy fractions, and the power statistics of the highest
power appliance found by event-pair clustering. Every feature value is
non-negative by construction, which the chi-squared scorer requires.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, UndefinedStatisticError
from .events import DetectorConfig, cluster_magnitudes, detect_events, pair_events
from .series import (PowerSeries, SECONDS_PER_DAY, load_power_csv,
                     local_clock_hours, local_weekdays)

CLOCK_WINDOWS = {
    "mean_day": (6, 22),
    "mean_evening": (18, 22),
    "mean_morning": (6, 10),
    "mean_night": (1, 5),
    "mean_noon": (10, 14),
}


@dataclass
class FeatureVector:
    """Named non-negative feature values with per-feature provenance tags and
    quality flags (zero denominators, clamped statistics)."""
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def add(self, name: str, value: float, provenance: str, flag: str | None = None):
        value = float(value)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"feature {name!r} must be finite and >= 0, "
                             f"got {value}")
        self.values[name] = value
        self.provenance[name] = provenance
        if flag:
            self.flags[name] = flag

    def merge(self, other: "FeatureVector") -> "FeatureVector":
        out = FeatureVector(dict(self.values), dict(self.provenance),
                            dict(self.flags))
        for name in other.values:
            if name in out.values:
                raise ValueError(f"duplicate feature {name!r}")
            out.values[name] = other.values[name]
            out.provenance[name] = other.provenance[name]
        out.flags.update(other.flags)
        return out


def extract_consumption_features(s: PowerSeries, prefix: str) -> FeatureVector:
    """The 22-feature consumption catalog over one stream.

    Requires at least one full week so weekday/weekend means are defined.
    Ratios with zero denominators map to 0 with a flag; autocorrelation is the
    Pearson correlation of the stream with itself shifted one day, clamped at
    0 (flagged) to keep the vector non-negative.
    """
    if s.span_s < 7 * SECONDS_PER_DAY:
        raise CoverageError(
            f"need at least one full week, got {s.span_s / SECONDS_PER_DAY:.2f} days")
    fv = FeatureVector()
    tag = prefix
    v = s.values
    ts = s.timestamps()
    hours = local_clock_hours(ts, s.timezone)
    wd = local_weekdays(ts, s.timezone)

    def put(name, value, flag=None):
        fv.add(f"{prefix}_{name}", value, tag, flag)

    mean_total = float(v.mean())
    put("mean_total", mean_total)
    weekday = v[wd < 5]
    weekend = v[wd >= 5]
    put("mean_weekday", weekday.mean())
    put("mean_weekend", weekend.mean())
    window_means = {}
    for name, (h0, h1) in CLOCK_WINDOWS.items():
        m = float(v[(hours >= h0) & (hours < h1)].mean())
        window_means[name] = m
        put(name, m)
    vmax, vmin = float(v.max()), float(v.min())
    put("max", vmax)
    put("min", vmin)

    def ratio(name, num, den):
        if den == 0:
            put(name, 0.0, flag="zero_denominator")
        else:
            put(name, num / den)

    ratio("mean_over_max", mean_total, vmax)
    ratio("min_over_mean", vmin, mean_total)
    ratio("morning_over_noon", window_means["mean_morning"], window_means["mean_noon"])
    ratio("evening_over_noon", window_means["mean_evening"], window_means["mean_noon"])
    ratio("noon_over_total", window_means["mean_noon"], mean_total)
    ratio("night_over_day", window_means["mean_night"], window_means["mean_day"])
    ratio("weekday_over_weekend", float(weekday.mean()), float(weekend.mean()))

    put("frac_above_mean", float((v > mean_total).mean()))
    put("frac_above_500w", float((v > 500.0).mean()))
    put("frac_above_1kw", float((v > 1000.0).mean()))

    put("variance", float(v.var()))
    lag = SECONDS_PER_DAY // s.period_s
    a, b = v[lag:], v[:-lag]
    if a.std() == 0 or b.std() == 0:
        put("autocorr_day", 0.0, flag="zero_variance")
    else:
        r = float(np.corrcoef(a, b)[0, 1])
        put("autocorr_day", max(r, 0.0),
            flag="clamped_negative" if r < 0 else None)
    return fv


def extract_appliance_features(hvac: PowerSeries, aggregate: PowerSeries,
                               events, pairs, *, hvac_circuits: int | None = None,
                               stream_tag: str = "hvac_submeter",
                               on_threshold_w: float = 50.0,
                               hvac_min_w: float = 1000.0,
                               cluster_tol_frac: float = 0.1) -> FeatureVector:
    """HVAC and event-stream features over a home.

    hvac_circuits falls back to the count of event-pair magnitude clusters at
    or above hvac_min_w when the metadata does not provide it (flagged). The
    highest-power-appliance statistics come from the magnitudes of the
    largest-center pair cluster.
    """
    if (hvac.start_time != aggregate.start_time
            or hvac.period_s != aggregate.period_s
            or len(hvac) != len(aggregate)):
        raise ValueError("hvac and aggregate must cover the same span")
    agg_energy = float(aggregate.values.sum())
    if agg_energy <= 0:
        raise UndefinedStatisticError(
            "aggregate has zero energy; fractions are undefined")

    fv = FeatureVector()
    fv.add("hvac_max_power", float(hvac.values.max()), stream_tag)
    fv.add("appliance_switches", float(len(events)), "event_stream")
    fv.add("hvac_on_fraction",
           float((hvac.values > on_threshold_w).mean()), stream_tag)
    frac = float(hvac.values.sum()) / agg_energy
    fv.add("hvac_energy_fraction", min(frac, 1.0), stream_tag,
           flag="clamped_above_1" if frac > 1.0 else None)

    clusters = cluster_magnitudes(
        np.array([p.magnitude_w for p in pairs]), cluster_tol_frac)
    if hvac_circuits is not None:
        fv.add("hvac_circuits", float(hvac_circuits), "metadata")
    else:
        n_big = sum(1 for c in clusters if c["center"] >= hvac_min_w)
        fv.add("hvac_circuits", float(n_big), "event_stream",
               flag="cluster_count_proxy")
    if clusters:
        top = max(clusters, key=lambda c: c["center"])["values"]
        fv.add("top_appliance_mean", float(np.mean(top)), "event_stream")
        fv.add("top_appliance_max", float(np.max(top)), "event_stream")
        fv.add("top_appliance_median", float(np.median(top)), "event_stream")
    else:
        for name in ("top_appliance_mean", "top_appliance_max",
                     "top_appliance_median"):
            fv.add(name, 0.0, "event_stream", flag="no_event_pairs")
    return fv


# ---------------------------------------------------------------------------
# Selection and correlation
# ---------------------------------------------------------------------------

def chi2_select(X, y, k: int):
    """Chi-squared k-best feature selection over non-negative features.

    Per feature, the class-wise sums of the feature act as observed counts and
    the column sum split by class priors as expected counts; the score is the
    usual sum of (obs-exp)^2/exp. Returns (indices of the top k by score,
    score ties broken toward the lower index; full score vector).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=object)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    neg = np.argwhere(X < 0)
    if neg.size:
        i, j = neg[0]
        raise ValueError(
            f"chi-squared selection requires non-negative features; "
            f"X[{i}, {j}] = {X[i, j]}")
    classes = sorted(set(y.tolist()), key=str)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    n, d = X.shape
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range for {d} features")

    col_sum = X.sum(axis=0)
    scores = np.zeros(d)
    for cls in classes:
        mask = y == cls
        observed = X[mask].sum(axis=0)
        expected = col_sum * (mask.sum() / n)
        nz = expected > 0
        scores[nz] += (observed[nz] - expected[nz]) ** 2 / expected[nz]
    order = np.lexsort((np.arange(d), -scores))
    return order[:k].copy(), scores


def pearson(a, b) -> tuple[float, float]:
    """Pearson correlation and its square. Raises when either input has zero
    variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length 1-D sequences of length >= 2")
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        raise UndefinedStatisticError("correlation undefined for zero variance")
    r = float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))
    r = max(-1.0, min(1.0, r))
    return r, r * r


# ---------------------------------------------------------------------------
# Per-home feature assembly
# ---------------------------------------------------------------------------

FEATURE_SOURCES = ("aggregate-only", "hvac-only", "both", "disagg-hart",
                   "disagg-fhmm")


@dataclass
class FeatureTable:
    home_ids: list
    vectors: dict  # source -> {home_id -> FeatureVector}

    def matrix(self, source: str):
        """(feature_ids, X) with rows ordered like home_ids and columns by
        sorted feature id."""
        vecs = self.vectors[source]
        ids = sorted(vecs[self.home_ids[0]].values)
        for h in self.home_ids:
            if sorted(vecs[h].values) != ids:
                raise ValueError(f"home {h} has inconsistent feature ids")
        X = np.array([[vecs[h].values[i] for i in ids] for h in self.home_ids])
        return np.array(ids, dtype=object), X


def _fhmm_hvac_trace(manifest, entry, aggregate, det):
    """Train per-appliance models on the first half of each submetered trace
    and decode the aggregate; returns the decoded hvac trace."""
    from .disagg import fhmm_disaggregate, train_hmm
    from .errors import DegenerateModelError

    models = []
    for name, rel in sorted(entry.appliance_paths.items()):
        trace = load_power_csv(manifest.resolve(rel), timezone=entry.timezone)
        half = trace.slice(0, max(len(trace) // 2, 1))
        k = 3 if name == "hvac" else 2
        for k_try in (k, 2):
            try:
                models.append(train_hmm(half, k_try, name=name))
                break
            except DegenerateModelError:
                if k_try == 2:
                    warnings.warn(f"skipping degenerate appliance {name} for "
                                  f"home {entry.home_id}", stacklevel=2)
    if not any(m.name == "hvac" for m in models):
        raise ValueError(f"home {entry.home_id}: no usable hvac model")
    return fhmm_disaggregate(aggregate, models).appliances["hvac"]


def build_home_features(manifest, entry, sources, det: DetectorConfig | None = None,
                        on_threshold_w: float = 50.0,
                        hvac_min_w: float = 1000.0) -> dict:
    """FeatureVector per requested source for one home. Shared inputs
    (aggregate stream, detected events, pair list) are computed once."""
    from .disagg import hart_disaggregate

    det = det or DetectorConfig()
    aggregate = load_power_csv(manifest.resolve(entry.aggregate_path),
                               timezone=entry.timezone)
    agg_fv = extract_consumption_features(aggregate, "aggregate")
    events = detect_events(aggregate, det.steady_tol_w, det.min_event_w)
    pairs = pair_events(events, det.match_tol_frac, det.max_duration_s)

    def hvac_bundle(hvac_stream, stream_tag):
        fv = extract_consumption_features(hvac_stream, "hvac")
        fv = fv.merge(extract_appliance_features(
            hvac_stream, aggregate, events, pairs,
            hvac_circuits=entry.hvac_circuits, stream_tag=stream_tag,
            on_threshold_w=on_threshold_w, hvac_min_w=hvac_min_w))
        return fv

    out = {}
    for source in sources:
        if source == "aggregate-only":
            out[source] = agg_fv
        elif source in ("hvac-only", "both"):
            if "hvac" not in entry.appliance_paths:
                raise ValueError(f"home {entry.home_id} has no submetered hvac")
            hvac = load_power_csv(manifest.resolve(entry.appliance_paths["hvac"]),
                                  timezone=entry.timezone)
            bundle = hvac_bundle(hvac, "hvac_submeter")
            out[source] = bundle if source == "hvac-only" else agg_fv.merge(bundle)
        elif source == "disagg-hart":
            hvac = hart_disaggregate(aggregate, det,
                                     hvac_min_w=hvac_min_w).appliances["hvac"]
            out[source] = agg_fv.merge(hvac_bundle(hvac, "hvac_disagg"))
        elif source == "disagg-fhmm":
            hvac = _fhmm_hvac_trace(manifest, entry, aggregate, det)
            out[source] = agg_fv.merge(hvac_bundle(hvac, "hvac_disagg"))
        else:
            raise ValueError(f"unknown feature source {source!r}")
    return out


def build_feature_table(manifest, sources, det: DetectorConfig | None = None,
                        **kwargs) -> FeatureTable:
    home_ids = sorted(e.home_id for e in manifest.homes)
    vectors: dict = {source: {} for source in sources}
    for home_id in home_ids:
        entry = manifest.home(home_id)
        per_source = build_home_features(manifest, entry, sources, det, **kwargs)
        for source, fv in per_source.items():
            vectors[source][home_id] = fv
    return FeatureTable(home_ids=home_ids, vectors=vectors)


def write_feature_csv(table: FeatureTable, source: str, path) -> None:
    """CSV with a home_id column followed by the sorted feature ids."""
    ids, X = table.matrix(source)
    with open(path, "w", newline="") as f:
        f.write("home_id," + ",".join(ids) + "\n")
        for home_id, row in zip(table.home_ids, X):
            f.write(home_id + "," + ",".join(repr(float(v)) for v in row) + "\n")
