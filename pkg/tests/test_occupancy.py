"""Occupancy predictors, evaluation protocol and experiment harness."""
from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilminfer.errors import AlignmentError, ConfigurationError
from nilminfer.occupancy import (OccupancyConfig,
                                 evaluate_occupancy, occupancy_experiment,
                                 predict_occupancy_events,
                                 predict_occupancy_night_threshold,
                                 window_power_features)
from nilminfer.series import (OccupancySeries, PowerSeries,
                              local_clock_hours)
from nilminfer.synth import DEFAULT_START, HomeSpec, gen_home

HOUR = 3600


def day_series(loads, period=60, days=1, base=100.0, start=DEFAULT_START):
    """Flat base plus rectangular loads given as (start_hour, end_hour,
    watts); noiseless, so the event pipeline sees exactly these pairs."""
    n = days * 86400 // period
    t = np.arange(n) * period
    vals = np.full(n, base)
    for h0, h1, w in loads:
        vals[(t >= h0 * HOUR) & (t < h1 * HOUR)] += w
    return PowerSeries(start, period, vals)


def flags_between(series, h0, h1):
    """Expected flag vector: occupied exactly inside [h0, h1) hours since
    series start (window grid == day grid here)."""
    n = len(series)
    starts = np.arange(n) * series.window_s
    return (starts >= h0 * HOUR) & (starts < h1 * HOUR)


# ---------------------------------------------------------------------------
# event-pipeline predictor
# ---------------------------------------------------------------------------

def test_day_with_no_foreground_pairs_is_unoccupied():
    s = day_series([], days=2)
    pred = predict_occupancy_events(s)
    assert not pred.flags.any()


def test_event_pipeline_hand_simulation():
    s = day_series([(9.0, 9.5, 500.0), (18.0, 19.0, 300.0)])
    pred = predict_occupancy_events(s)
    expected = flags_between(pred, 0.0, 9.5) | flags_between(pred, 18.0, 24.0)
    assert np.array_equal(pred.flags, expected)


def test_event_pipeline_optimised_variant():
    s = day_series([(9.0, 9.5, 500.0), (18.0, 19.0, 300.0)])
    cfg = OccupancyConfig(mark_start_of_day=False)
    pred = predict_occupancy_events(s, cfg)
    expected = flags_between(pred, 9.0, 9.5) | flags_between(pred, 18.0, 24.0)
    assert np.array_equal(pred.flags, expected)


def test_event_pipeline_gap_fill_bridges_short_gaps():
    # 45 min between pair end and next pair start: bridged (< 3600 s)
    s = day_series([(9.0, 9.5, 500.0), (10.25, 10.75, 400.0)])
    cfg = OccupancyConfig(mark_end_of_day=False, mark_start_of_day=False)
    pred = predict_occupancy_events(s, cfg)
    assert np.array_equal(pred.flags, flags_between(pred, 9.0, 10.75))
    # 90 min gap: not bridged
    s2 = day_series([(9.0, 9.5, 500.0), (11.0, 11.5, 400.0)])
    pred2 = predict_occupancy_events(s2, cfg)
    expected2 = flags_between(pred2, 9.0, 9.5) | flags_between(pred2, 11.0, 11.5)
    assert np.array_equal(pred2.flags, expected2)


def test_event_pipeline_monotone_in_pairs():
    # dropping an interior pair (same first/last events) never adds windows
    cfg = OccupancyConfig()
    more = day_series([(9.0, 9.5, 500.0), (12.0, 12.5, 400.0),
                       (18.0, 19.0, 300.0)])
    fewer = day_series([(9.0, 9.5, 500.0), (18.0, 19.0, 300.0)])
    p_more = predict_occupancy_events(more, cfg)
    p_fewer = predict_occupancy_events(fewer, cfg)
    assert not (p_fewer.flags & ~p_more.flags).any()


def test_event_pipeline_background_removed(default_corpus):
    # a home with zero occupant activity predicts all-unoccupied even though
    # fridge and hvac cycle all day
    spec = HomeSpec(seed=41, days=2)
    spec.occupant_load.rate_per_occupied_hour = 0.0
    home = gen_home(spec)
    pred = predict_occupancy_events(home.aggregate)
    cfg = OccupancyConfig()
    m = evaluate_occupancy(pred, home.occupancy, cfg)
    assert m.tp + m.fp == 0


# ---------------------------------------------------------------------------
# night-threshold predictor
# ---------------------------------------------------------------------------

def test_night_threshold_constant_day_unoccupied():
    s = day_series([], base=120.0)
    pred = predict_occupancy_night_threshold(s, stat="max")
    assert not pred.flags.any()


def test_night_threshold_single_pulse_window():
    # night is flat; one 500 W pulse inside the 10:00 window trips range/std
    s = day_series([(10.0, 10.1, 500.0)])
    pred = predict_occupancy_night_threshold(s, stat="max")
    idx = int(10.0 * HOUR // pred.window_s)
    expected = np.zeros(len(pred), dtype=bool)
    expected[idx] = True
    assert np.array_equal(pred.flags, expected)


def test_night_threshold_matches_bruteforce(default_corpus):
    home = default_corpus.homes["home_03"]
    s = home.aggregate
    cfg = OccupancyConfig()
    for stat, agg in (("max", np.max), ("median", np.median)):
        pred = predict_occupancy_night_threshold(s, cfg, stat)
        # independent per-window reimplementation
        ts = s.timestamps()
        starts = pred.window_starts()
        expected = np.zeros(len(pred), dtype=bool)
        zone = ZoneInfo(s.timezone)
        for d0 in range(0, len(pred) * pred.window_s, 86400):
            day_lo = pred.window_start + d0
            day_hi = day_lo + 86400
            feats = {}
            for w, w0 in enumerate(starts):
                if not day_lo <= w0 < day_hi:
                    continue
                seg = s.values[(ts >= w0) & (ts < w0 + cfg.window_s)]
                if seg.size == 0:
                    continue
                feats[w] = (seg.max() - seg.min(), seg.std(), seg.mean())
            night = [feats[w] for w in feats
                     if 1 <= datetime.fromtimestamp(starts[w], zone).hour < 5]
            if sum(1 for _ in night) < 1:
                continue
            thr = tuple(agg([f[i] for f in night]) for i in range(3))
            for w, f in feats.items():
                expected[w] = (f[0] > thr[0]) or (f[1] > thr[1]) or (f[2] > thr[2])
        assert np.array_equal(pred.flags, expected), stat


def test_night_threshold_median_flags_superset_of_max(default_corpus):
    for hid in ("home_01", "home_05"):
        s = default_corpus.homes[hid].aggregate
        p_max = predict_occupancy_night_threshold(s, stat="max")
        p_med = predict_occupancy_night_threshold(s, stat="median")
        assert not (p_max.flags & ~p_med.flags).any()


def test_night_threshold_skips_day_without_night():
    # series starting 06:00: first day has no night window
    start = DEFAULT_START + 6 * HOUR
    s = PowerSeries(start, 60, np.full(36 * 60, 100.0))  # 06:00 -> 18:00 next day
    with pytest.warns(UserWarning, match="skipped 1 day"):
        pred = predict_occupancy_night_threshold(s)
    first_day = pred.window_starts() < DEFAULT_START + 86400
    assert not pred.flags[first_day].any()


def test_night_threshold_rejects_unknown_stat():
    s = day_series([])
    with pytest.raises(ValueError):
        predict_occupancy_night_threshold(s, stat="mean")


# ---------------------------------------------------------------------------
# window features
# ---------------------------------------------------------------------------

def test_window_features_constant():
    s = day_series([], base=1000.0)
    starts, X = window_power_features(s, 900)
    assert X.shape == (96, 3)
    np.testing.assert_allclose(X[0], [1000.0, 0.0, 0.0])


def test_window_features_two_point():
    vals = np.tile([0.0, 1000.0], 43200)
    s = PowerSeries(DEFAULT_START, 1, vals)
    _, X = window_power_features(s, 900)
    np.testing.assert_allclose(X[0], [500.0, 500.0, 1000.0])


def test_window_features_match_bruteforce(default_corpus):
    s = default_corpus.homes["home_02"].aggregate
    starts, X = window_power_features(s, 900)
    ts = s.timestamps()
    for i in np.random.default_rng(0).choice(len(starts), 25, replace=False):
        seg = s.values[(ts >= starts[i]) & (ts < starts[i] + 900)]
        np.testing.assert_allclose(
            X[i], [seg.mean(), seg.std(), seg.max() - seg.min()], atol=1e-9)


def test_window_features_require_day_divisor():
    with pytest.raises(ValueError):
        window_power_features(day_series([]), 7 * 60)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def occ(flags, start=DEFAULT_START, window_s=900):
    return OccupancySeries(start, window_s, np.asarray(flags, dtype=bool))


def test_evaluate_identity_is_perfect():
    truth = occ([1, 1, 0, 0], start=DEFAULT_START + 6 * HOUR)
    m = evaluate_occupancy(truth, truth)
    assert (m.fp, m.fn) == (0, 0) and m.accuracy_pct == 100.0


def test_evaluate_hand_count():
    start = DEFAULT_START + 6 * HOUR  # inside evaluation hours
    truth = occ([1, 1, 0, 0], start=start)
    pred = occ([1, 0, 1, 0], start=start)
    m = evaluate_occupancy(pred, truth)
    assert (m.tp, m.fn, m.fp, m.tn) == (1, 1, 1, 1)
    assert m.accuracy_pct == 50.0
    assert m.energy_proxy == 2 and m.miss_time == 1
    assert m.n_windows == 4


def test_evaluate_matches_bruteforce_loop():
    rng = np.random.default_rng(6)
    cfg = OccupancyConfig()
    for _ in range(20):
        n = 64
        start = DEFAULT_START + int(rng.integers(0, 96)) * 900
        pred = occ(rng.integers(0, 2, n), start=start)
        truth = occ(rng.integers(0, 2, n), start=start)
        m = evaluate_occupancy(pred, truth, cfg)
        zone = ZoneInfo("UTC")
        tp = tn = fp = fn = 0
        for i in range(n):
            h = datetime.fromtimestamp(start + i * 900, zone)
            hour = h.hour + h.minute / 60
            if not (cfg.eval_start_hour <= hour < cfg.eval_end_hour):
                continue
            p, t = bool(pred.flags[i]), bool(truth.flags[i])
            tp += p and t
            tn += (not p) and (not t)
            fp += p and not t
            fn += (not p) and t
        assert (m.tp, m.tn, m.fp, m.fn) == (tp, tn, fp, fn)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), min_size=8, max_size=96),
       st.lists(st.booleans(), min_size=8, max_size=96),
       st.integers(0, 95))
def test_metric_identity(pred_flags, truth_flags, offset_windows):
    n = min(len(pred_flags), len(truth_flags))
    start = DEFAULT_START + offset_windows * 900
    pred = occ(pred_flags[:n], start=start)
    truth = occ(truth_flags[:n], start=start)
    try:
        m = evaluate_occupancy(pred, truth)
    except Exception:
        return  # spans entirely outside evaluation hours
    starts = np.arange(n) * 900 + start
    hours = local_clock_hours(starts, "UTC")
    n_eval = int(((hours >= 6) & (hours < 22)).sum())
    assert m.tp + m.tn + m.fp + m.fn == n_eval


def test_evaluate_alignment_errors():
    a = occ([1, 0, 1, 0])
    with pytest.raises(AlignmentError):
        evaluate_occupancy(a, occ([1, 0], window_s=600))
    with pytest.raises(AlignmentError):
        evaluate_occupancy(a, occ([1, 0], start=DEFAULT_START + 450))
    with pytest.raises(AlignmentError):
        evaluate_occupancy(a, occ([1, 0], start=DEFAULT_START + 86400 * 30))


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------

def test_split_half_structure(small_corpus):
    manifest = small_corpus.manifest
    res = occupancy_experiment(manifest, "split-half", ("ours", "chen"))
    assert len(res["per_home"]) == 2 * len(manifest.homes)
    for row in res["per_home"]:
        assert set(row) >= {"home_id", "algorithm", "tp", "tn", "fp", "fn",
                            "accuracy_pct", "energy_proxy", "miss_time"}
    # summary accuracy is the mean of the per-home accuracies
    for s in res["summary"]:
        accs = [r["accuracy_pct"] for r in res["per_home"]
                if r["algorithm"] == s["algorithm"]]
        assert s["accuracy_pct"] == pytest.approx(float(np.mean(accs)))


def test_split_half_single_home_two_rows(small_corpus):
    from nilminfer.series import DatasetManifest
    m = small_corpus.manifest
    single = DatasetManifest(homes=m.homes[:1], base_dir=m.base_dir)
    res = occupancy_experiment(single, "split-half", ("ours", "chen"))
    assert len(res["per_home"]) == 2
    assert {r["algorithm"] for r in res["per_home"]} == {"ours", "chen"}
    for row in res["per_home"]:
        assert row["tp"] + row["tn"] + row["fp"] + row["fn"] == row["n_windows"]


def test_rf_and_optimised_variant_run(small_corpus):
    from nilminfer.series import DatasetManifest
    m = small_corpus.manifest
    two = DatasetManifest(homes=m.homes[:2], base_dir=m.base_dir)
    res = occupancy_experiment(two, "split-half", ("ours-optimised", "rf"))
    assert len(res["per_home"]) == 4
    # the optimised variant only removes morning marking, so it can never
    # flag more windows than the standard pipeline
    std = occupancy_experiment(two, "split-half", ("ours",))
    for opt_row, std_row in zip(
            [r for r in res["per_home"] if r["algorithm"] == "ours-optimised"],
            std["per_home"]):
        assert opt_row["energy_proxy"] <= std_row["energy_proxy"]


def test_loho_each_home_tested_once(small_corpus):
    res = occupancy_experiment(small_corpus.manifest, "loho",
                               ("ours", "knn"))
    homes = [h.home_id for h in small_corpus.manifest.homes]
    for algorithm in ("ours", "knn"):
        tested = [r["home_id"] for r in res["per_home"]
                  if r["algorithm"] == algorithm]
        assert sorted(tested) == sorted(homes)


def test_supervised_beats_chance_on_corpus(small_corpus):
    res = occupancy_experiment(small_corpus.manifest, "loho", ("knn",))
    acc = res["summary"][0]["accuracy_pct"]
    assert acc > 60.0


def test_supervised_requires_ground_truth(small_corpus, tmp_path):
    import copy
    manifest = copy.deepcopy(small_corpus.manifest)
    for h in manifest.homes:
        h.occupancy_path = None
    with pytest.raises(ConfigurationError):
        occupancy_experiment(manifest, "loho", ("knn",))


def test_experiment_rejects_unknown_algorithm(small_corpus):
    with pytest.raises(ValueError):
        occupancy_experiment(small_corpus.manifest, "split-half", ("svm",))


def test_experiment_parallel_matches_serial(small_corpus):
    a = occupancy_experiment(small_corpus.manifest, "split-half",
                             ("ours",), jobs=1)
    b = occupancy_experiment(small_corpus.manifest, "split-half",
                             ("ours",), jobs=3)
    assert a == b
