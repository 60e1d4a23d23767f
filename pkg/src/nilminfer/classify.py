"""From-scratch classifiers and the household-characteristic experiment.

kNN and a bagged random forest, both with deterministic tie-breaking so every
experiment is reproducible from its seed, plus the class taxonomy used to turn
numeric household metadata into labels.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


CHARACTERISTICS = ("age", "area", "income", "floors", "rooms", "occupants")

CLASS_SETS = {
    "age": ("Old", "New"),
    "area": ("Medium", "High"),
    "income": ("Below150k", "Above150k"),
    "floors": ("One", "TwoPlus"),
    "rooms": ("LE6", "SevenToEight", "GT8"),
    "occupants": ("LE2", "GT2"),
}


@dataclass
class HouseholdRecord:
    """Per-home characteristic labels; any label may be absent (None)."""
    home_id: str
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.labels.items():
            if name not in CLASS_SETS:
                raise ValueError(f"unknown characteristic {name!r}")
            if value is not None and value not in CLASS_SETS[name]:
                raise ValueError(f"bad label {value!r} for {name}")


def label_characteristics(characteristics: dict,
                          home_id: str = "") -> HouseholdRecord:
    """Map numeric household metadata to class labels.

    Boundary values land on the class defined with ">=" (age 30 -> Old,
    area 1800 -> High) and income 150000 -> Below150k. Area below 900 sq ft
    falls outside the taxonomy and maps to an absent label, as does any
    missing field.
    """
    c = characteristics
    for key in ("age_years", "area_sqft", "income_usd_per_year",
                "floors", "rooms", "occupants"):
        v = c.get(key)
        if v is not None and v < 0:
            raise ValueError(f"{key} must be non-negative, got {v}")

    labels: dict = {}
    age = c.get("age_years")
    labels["age"] = None if age is None else ("Old" if age >= 30 else "New")
    area = c.get("area_sqft")
    if area is None or area < 900:
        labels["area"] = None
    else:
        labels["area"] = "High" if area >= 1800 else "Medium"
    income = c.get("income_usd_per_year")
    labels["income"] = None if income is None else (
        "Below150k" if income <= 150_000 else "Above150k")
    floors = c.get("floors")
    if floors is None or floors < 1:
        labels["floors"] = None
    else:
        labels["floors"] = "One" if floors == 1 else "TwoPlus"
    rooms = c.get("rooms")
    if rooms is None:
        labels["rooms"] = None
    elif rooms <= 6:
        labels["rooms"] = "LE6"
    elif rooms <= 8:
        labels["rooms"] = "SevenToEight"
    else:
        labels["rooms"] = "GT8"
    occ = c.get("occupants")
    labels["occupants"] = None if occ is None else ("LE2" if occ <= 2 else "GT2")
    return HouseholdRecord(home_id=home_id, labels=labels)


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

def _majority_vote(votes, train_y):
    """Most common vote; ties go to the class more frequent in training, then
    lexicographically."""
    votes = list(votes)
    counts: dict = {}
    for v in votes:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    cands = [v for v, c in counts.items() if c == best]
    if len(cands) == 1:
        return cands[0]
    train_freq: dict = {}
    for v in train_y:
        train_freq[v] = train_freq.get(v, 0) + 1
    cands.sort(key=lambda v: (-train_freq.get(v, 0), str(v)))
    return cands[0]


def knn_classify(train_X, train_y, test_X, k: int = 5):
    """k-nearest-neighbours with z-scored features and Euclidean distance.

    Zero-variance features are dropped from the distance; equidistant
    neighbours resolve to the lower training index; vote ties resolve to the
    most frequent training class, then lexicographically.
    """
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = list(train_y)
    if train_X.ndim != 2 or len(train_y) != train_X.shape[0]:
        raise ValueError("train_X must be 2-D with one label per row")
    if train_X.shape[0] == 0:
        raise ValueError("training set is empty")
    if not 1 <= k <= train_X.shape[0]:
        raise ValueError(f"k={k} out of range for {train_X.shape[0]} rows")
    if test_X.shape[1] != train_X.shape[1]:
        raise ValueError("feature dimensionality mismatch")

    mu = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    keep = sd > 0
    if keep.any():
        Xtr = (train_X[:, keep] - mu[keep]) / sd[keep]
        Xte = (test_X[:, keep] - mu[keep]) / sd[keep]
    else:
        Xtr = np.zeros((train_X.shape[0], 1))
        Xte = np.zeros((test_X.shape[0], 1))

    out = []
    for x in Xte:
        d2 = ((Xtr - x) ** 2).sum(axis=1)
        order = np.argsort(d2, kind="stable")[:k]
        out.append(_majority_vote([train_y[i] for i in order], train_y))
    return np.array(out, dtype=object)


@dataclass
class RandomForestConfig:
    n_trees: int = 25
    max_depth: int = 6
    seed: int = 0


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self, label=None, feature=None, threshold=None,
                 left=None, right=None):
        self.label = label
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _gini_best_split(X, y_idx, n_classes, features):
    """Best (feature, threshold, impurity) over candidate midpoints of the
    given feature columns; None when nothing splits."""
    n = y_idx.size
    best = None
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        cs, ys = col[order], y_idx[order]
        # cumulative class counts left of each split position
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        left = np.cumsum(onehot, axis=0)
        total = left[-1]
        boundaries = np.flatnonzero(cs[1:] > cs[:-1])  # split between i and i+1
        if boundaries.size == 0:
            continue
        nl = (boundaries + 1).astype(float)
        nr = n - nl
        lc = left[boundaries]
        rc = total - lc
        gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
        imp = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(imp))
        cand = (float(imp[j]), f, float((cs[boundaries[j]] + cs[boundaries[j] + 1]) / 2))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


def _build_tree(X, y_idx, classes, depth, max_depth, rng, m_features):
    counts = np.bincount(y_idx, minlength=len(classes))
    if depth >= max_depth or counts.max() == y_idx.size or y_idx.size < 2:
        return _TreeNode(label=classes[int(np.argmax(counts))])
    feats = rng.choice(X.shape[1], size=m_features, replace=False)
    feats.sort()
    best = _gini_best_split(X, y_idx, len(classes), feats)
    if best is None:
        return _TreeNode(label=classes[int(np.argmax(counts))])
    _, f, thr = best
    mask = X[:, f] <= thr
    left = _build_tree(X[mask], y_idx[mask], classes, depth + 1, max_depth,
                       rng, m_features)
    right = _build_tree(X[~mask], y_idx[~mask], classes, depth + 1, max_depth,
                        rng, m_features)
    return _TreeNode(feature=f, threshold=thr, left=left, right=right)


def _tree_predict(node, x):
    while node.label is None:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def rf_classify(train_X, train_y, test_X,
                cfg: RandomForestConfig | None = None):
    """Bagged Gini decision trees over sqrt(d) feature subsets per node.

    Deterministic for a given seed; vote ties use the same rules as kNN.
    """
    cfg = cfg or RandomForestConfig()
    if cfg.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = list(train_y)
    if train_X.shape[0] == 0:
        raise ValueError("training set is empty")

    classes = sorted(set(train_y), key=str)
    if len(classes) == 1:
        return np.array([classes[0]] * test_X.shape[0], dtype=object)
    cls_index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([cls_index[v] for v in train_y])
    n, d = train_X.shape
    m_features = max(1, int(round(np.sqrt(d))))

    votes = [[] for _ in range(test_X.shape[0])]
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed, t])
        boot = rng.integers(0, n, size=n)
        tree = _build_tree(train_X[boot], y_idx[boot], classes, 0,
                           cfg.max_depth, rng, m_features)
        for i, x in enumerate(test_X):
            votes[i].append(_tree_predict(tree, x))
    return np.array([_majority_vote(v, train_y) for v in votes], dtype=object)


def majority_baseline(train_y, test_size: int):
    """Predict the modal training class everywhere (ties lexicographic)."""
    train_y = list(train_y)
    if not train_y:
        raise ValueError("training labels are empty")
    counts: dict = {}
    for v in train_y:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    label = sorted([v for v, c in counts.items() if c == best], key=str)[0]
    return np.array([label] * test_size, dtype=object)


# ---------------------------------------------------------------------------
# Cross-validation harness
# ---------------------------------------------------------------------------

def stratified_folds(labels, n_folds: int, seed: int) -> list[np.ndarray]:
    """Index folds with per-class counts differing by at most one."""
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in sorted(set(labels.tolist()), key=str):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[j % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


def _classifier_predict(classifier, X_tr, y_tr, X_te, knn_k, rf_cfg):
    if classifier == "knn":
        return knn_classify(X_tr, y_tr, X_te, k=min(knn_k, len(y_tr)))
    if classifier == "rf":
        return rf_classify(X_tr, y_tr, X_te, rf_cfg)
    raise ValueError(f"unknown classifier {classifier!r}")


def _scan_k(X, y, k_candidates, classifier, seed, knn_k, rf_cfg):
    """Pick the chi-squared k by an inner stratified 2-fold scan on the
    training fold; ties go to the smallest k."""
    from .features import chi2_select

    d = X.shape[1]
    cands = []
    for k in k_candidates:
        kk = d if k is None else min(int(k), d)
        if kk >= 1 and kk not in cands:
            cands.append(kk)
    inner = stratified_folds(y, 2, seed + 1)
    best_k, best_acc = cands[0], -1.0
    for kk in cands:
        accs = []
        for f in range(2):
            te = inner[f]
            tr = np.setdiff1d(np.arange(len(y)), te)
            if len(set(np.asarray(y, dtype=object)[tr].tolist())) < 2 or te.size == 0:
                continue
            sel, _ = chi2_select(X[tr], np.asarray(y, dtype=object)[tr], kk)
            pred = _classifier_predict(classifier, X[tr][:, sel],
                                       np.asarray(y, dtype=object)[tr],
                                       X[te][:, sel], knn_k, rf_cfg)
            accs.append(float(np.mean(pred == np.asarray(y, dtype=object)[te])))
        acc = float(np.mean(accs)) if accs else 0.0
        if acc > best_acc:
            best_k, best_acc = kk, acc
    return best_k


def characteristics_experiment(manifest, feature_sources=("both",),
                               classifier: str = "knn", folds: int = 2,
                               seed: int = 7, knn_k: int = 5,
                               rf_cfg: RandomForestConfig | None = None,
                               k_candidates=(2, 4, 6, 8, None),
                               det=None) -> list[dict]:
    """Stratified k-fold prediction of household characteristics.

    For each characteristic and feature source: pick the chi-squared feature
    count by an inner scan on the training fold, select features, train the
    classifier, and report mean test accuracy along with the majority-class
    baseline. Characteristics with any class under 2 homes are skipped.
    """
    from .features import build_feature_table, chi2_select

    rf_cfg = rf_cfg or RandomForestConfig(seed=seed)
    table = build_feature_table(manifest, feature_sources, det=det)
    records = {e.home_id: label_characteristics(e.characteristics, e.home_id)
               for e in manifest.homes}

    results = []
    for characteristic in CHARACTERISTICS:
        labelled = [h for h in table.home_ids
                    if records[h].labels.get(characteristic) is not None]
        y_all = np.array([records[h].labels[characteristic] for h in labelled],
                         dtype=object)
        class_counts = {c: int((y_all == c).sum()) for c in set(y_all.tolist())}
        if len(class_counts) < 2 or min(class_counts.values()) < folds:
            warnings.warn(f"skipping {characteristic}: class counts "
                          f"{class_counts} too small for {folds}-fold CV",
                          stacklevel=2)
            continue
        rows_idx = np.array([table.home_ids.index(h) for h in labelled])
        fold_idx = stratified_folds(y_all, folds, seed)
        for source in feature_sources:
            ids, X_full = table.matrix(source)
            X = X_full[rows_idx]
            fold_accs, base_accs, selected = [], [], set()
            best_ks = []
            for f in range(folds):
                te = fold_idx[f]
                tr = np.setdiff1d(np.arange(len(labelled)), te)
                k_best = _scan_k(X[tr], y_all[tr], k_candidates, classifier,
                                 seed, knn_k, rf_cfg)
                sel, _ = chi2_select(X[tr], y_all[tr], k_best)
                pred = _classifier_predict(classifier, X[tr][:, sel],
                                           y_all[tr], X[te][:, sel],
                                           knn_k, rf_cfg)
                fold_accs.append(float(np.mean(pred == y_all[te])))
                base = majority_baseline(y_all[tr], te.size)
                base_accs.append(float(np.mean(base == y_all[te])))
                selected.update(ids[i] for i in sel)
                best_ks.append(k_best)
            results.append({
                "characteristic": characteristic,
                "source": source,
                "classifier": classifier,
                "accuracy_pct": 100.0 * float(np.mean(fold_accs)),
                "baseline_accuracy_pct": 100.0 * float(np.mean(base_accs)),
                "selected_features": sorted(selected),
                "chi2_k": best_ks,
                "n_homes": len(labelled),
            })
    return results
