"""Feature construction from spectra, classifiers, and propensity scores.

Three classifier families are implemented natively:

* ``gaussian_nb`` -- Gaussian naive Bayes with a variance floor so constant
  features (like the leading zero eigenvalue) stay harmless.
* ``random_forest`` -- bagged Gini decision trees with sqrt-of-p feature
  subsampling; propensities are Laplace-smoothed tree-vote fractions.
* ``gbt`` -- gradient boosted depth-limited regression trees on the
  multiclass logistic loss with shrinkage; propensities are the softmax
  of the boosted scores.

Propensity vectors sum to one; normalized scores divide by the maximum so
the best-scoring class gets exactly 1 and the rest are relative fits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .rng import child_seed, make_rng

ALGORITHMS = ("gaussian_nb", "random_forest", "gbt")

ENGINEERED_FEATURES = ("sum", "lambda2", "zero_count", "quantiles", "max")

_QUANTILE_GRID = np.linspace(0.0, 1.0, 11)

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureConfig:
    """Which classifier features to derive from each spectrum."""

    use_raw_spectrum: bool = True
    engineered: tuple[str, ...] = ("sum", "lambda2", "zero_count")

    def __post_init__(self):
        object.__setattr__(self, "engineered", tuple(self.engineered))
        unknown = [f for f in self.engineered if f not in ENGINEERED_FEATURES]
        if unknown:
            raise ValueError(f"unknown engineered feature(s) {unknown}; "
                             f"choose from {ENGINEERED_FEATURES}")
        if not self.use_raw_spectrum and not self.engineered:
            raise ValueError("at least one feature source must be enabled")

    def to_json(self) -> dict:
        return {"use_raw_spectrum": self.use_raw_spectrum,
                "engineered": list(self.engineered)}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureConfig":
        bad = set(obj) - {"use_raw_spectrum", "engineered"}
        if bad:
            raise ValueError(f"unknown feature config field(s) {sorted(bad)}")
        return cls(use_raw_spectrum=obj.get("use_raw_spectrum", True),
                   engineered=tuple(obj.get("engineered",
                                            ("sum", "lambda2", "zero_count"))))


@dataclass
class DesignMatrix:
    rows: np.ndarray
    labels: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.rows.ndim != 2 or self.rows.shape[0] != self.labels.size:
            raise ValueError("rows and labels disagree in length")
        if self.rows.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match row width")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("design matrix contains non-finite entries")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def feature_names(n: int, cfg: FeatureConfig) -> list[str]:
    names: list[str] = []
    if cfg.use_raw_spectrum:
        names += [f"lambda_{i + 1}" for i in range(n)]
    for feat in cfg.engineered:
        if feat == "quantiles":
            names += [f"q{int(round(100 * q)):03d}" for q in _QUANTILE_GRID]
        else:
            names.append(feat)
    return names


def feature_row(values: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Feature vector for one ascending spectrum."""
    vals = np.asarray(values, dtype=np.float64)
    parts: list[np.ndarray] = []
    if cfg.use_raw_spectrum:
        parts.append(vals)
    for feat in cfg.engineered:
        if feat == "sum":
            parts.append(np.array([vals.sum()]))
        elif feat == "lambda2":
            parts.append(np.array([vals[1] if vals.size > 1 else vals[0]]))
        elif feat == "zero_count":
            eps = 1e-6 * max(1.0, float(vals[-1]))
            parts.append(np.array([float(np.count_nonzero(vals < eps))]))
        elif feat == "quantiles":
            parts.append(np.quantile(vals, _QUANTILE_GRID))
        elif feat == "max":
            parts.append(np.array([vals[-1]]))
    return np.concatenate(parts)


def build_features(spectra: Sequence[np.ndarray], labels: Sequence[int],
                   cfg: FeatureConfig | None = None) -> DesignMatrix:
    """Stack per-spectrum feature rows into a labelled design matrix.

    All spectra must share one length, and every class must contribute the
    same number of rows (K simulations per candidate model).
    """
    cfg = cfg or FeatureConfig()
    if len(spectra) == 0:
        raise ValueError("no spectra given")
    if len(spectra) != len(labels):
        raise ValueError("spectra and labels disagree in length")
    width = len(spectra[0])
    for s in spectra:
        if len(s) != width:
            raise ValueError(f"mixed spectrum lengths: {len(s)} vs {width}")
    lab = np.asarray(labels, dtype=np.int64)
    if lab.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    counts = np.bincount(lab)
    if counts.min() == 0 or not np.all(counts == counts[0]):
        raise ValueError("every class must have the same number of rows")
    rows = np.stack([feature_row(np.asarray(s, dtype=np.float64), cfg)
                     for s in spectra])
    return DesignMatrix(rows, lab, feature_names(width, cfg))


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreVector:
    """Propensities ``s`` (summing to 1) and normalized scores ``s / max(s)``."""

    s: np.ndarray
    s_norm: np.ndarray

    @property
    def predicted(self) -> int:
        # ties resolve to the lowest class index (argmax takes the first)
        return int(np.argmax(self.s))


def normalize_scores(s: Sequence[float]) -> np.ndarray:
    """Divide by the maximum score; the best model maps to exactly 1."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty score vector")
    if np.any(arr < 0):
        raise ValueError("scores must be non-negative")
    top = arr.max()
    if top <= 0.0:
        raise ValueError("cannot normalize an all-zero score vector")
    return arr / top


def make_scores(s: np.ndarray) -> ScoreVector:
    return ScoreVector(np.asarray(s, dtype=np.float64), normalize_scores(s))


# ---------------------------------------------------------------------------
# Decision-tree kernels (shared by the forest and the booster)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rng_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    z = z ^ (z >> _U64(31))
    return state, z


@njit(cache=True)
def _grow_tree(X, y_class, n_classes, grad, hess, regression,
               max_depth, mtry, min_leaf, state):
    """Grow one depth-limited CART tree on the rows of X.

    Classification (``regression`` false): Gini splits on integer labels
    ``y_class``; leaves store class counts.  Regression: squared-error
    splits on ``grad``; leaves store (sum grad, sum hess) for Newton leaf
    values.  Returns parallel node arrays; feature -1 marks a leaf.
    """
    n, p = X.shape
    max_nodes = 2 * n + 1
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thr = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    counts = np.zeros((max_nodes, n_classes), dtype=np.float64)
    leaf_gh = np.zeros((max_nodes, 2), dtype=np.float64)

    idx = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    perm = np.arange(p)

    # stack of (node, start, end, depth)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0] = (0, 0, n, 0)
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        m = end - start

        if regression:
            sg = 0.0
            sh = 0.0
            for t in range(start, end):
                sg += grad[idx[t]]
                sh += hess[idx[t]]
            leaf_gh[node, 0] = sg
            leaf_gh[node, 1] = sh
        else:
            for t in range(start, end):
                counts[node, y_class[idx[t]]] += 1.0

        pure = False
        if not regression:
            for c in range(n_classes):
                if counts[node, c] == m:
                    pure = True
                    break
        if depth >= max_depth or m < 2 * min_leaf or m < 2 or pure:
            continue

        # draw the candidate feature subset (partial Fisher-Yates)
        for t in range(mtry):
            state, z = _rng_next(state)
            r = t + np.int64(z % _U64(p - t))
            perm[t], perm[r] = perm[r], perm[t]

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        if regression:
            parent_score = leaf_gh[node, 0] * leaf_gh[node, 0] / m
        else:
            parent_score = 0.0
            for c in range(n_classes):
                parent_score += counts[node, c] * counts[node, c]
            parent_score /= m

        cls_left = np.zeros(n_classes, dtype=np.float64)
        for ft in range(mtry):
            f = perm[ft]
            for t in range(m):
                vals[t] = X[idx[start + t], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            if regression:
                sl = 0.0
                total = leaf_gh[node, 0]
                for t in range(m - 1):
                    row = idx[start + order[t]]
                    sl += grad[row]
                    nl = t + 1
                    v0 = vals[order[t]]
                    v1 = vals[order[t + 1]]
                    if v0 == v1 or nl < min_leaf or (m - nl) < min_leaf:
                        continue
                    sr = total - sl
                    gain = sl * sl / nl + sr * sr / (m - nl) - parent_score
                    if gain > best_gain + 1e-12:
                        best_gain = gain
                        best_f = f
                        # the midpoint can round up onto v1 for adjacent
                        # floats; fall back to v0 so the split always
                        # separates (x <= thr strictly excludes v1)
                        mid = 0.5 * (v0 + v1)
                        best_thr = mid if mid < v1 else v0
            else:
                for c in range(n_classes):
                    cls_left[c] = 0.0
                for t in range(m - 1):
                    row = idx[start + order[t]]
                    cls_left[y_class[row]] += 1.0
                    nl = t + 1
                    v0 = vals[order[t]]
                    v1 = vals[order[t + 1]]
                    if v0 == v1 or nl < min_leaf or (m - nl) < min_leaf:
                        continue
                    score_l = 0.0
                    score_r = 0.0
                    for c in range(n_classes):
                        score_l += cls_left[c] * cls_left[c]
                        d = counts[node, c] - cls_left[c]
                        score_r += d * d
                    gain = score_l / nl + score_r / (m - nl) - parent_score
                    if gain > best_gain + 1e-12:
                        best_gain = gain
                        best_f = f
                        mid = 0.5 * (v0 + v1)
                        best_thr = mid if mid < v1 else v0

        if best_f < 0 or n_nodes + 2 > max_nodes:
            continue

        # stable partition of idx[start:end] by the chosen split
        nl = 0
        k = 0
        for t in range(start, end):
            if X[idx[t], best_f] <= best_thr:
                scratch[nl] = idx[t]
                nl += 1
        for t in range(start, end):
            if X[idx[t], best_f] > best_thr:
                scratch[nl + k] = idx[t]
                k += 1
        for t in range(m):
            idx[start + t] = scratch[t]

        feat[node] = best_f
        thr[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack[top] = (lid, start, start + nl, depth + 1)
        top += 1
        stack[top] = (rid, start + nl, end, depth + 1)
        top += 1

    return (feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes],
            counts[:n_nodes], leaf_gh[:n_nodes], state)


@njit(cache=True)
def _tree_apply(X, feat, thr, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feat[node] >= 0:
            if X[r, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@dataclass
class _Tree:
    feat: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    payload: np.ndarray  # per-node class counts (forest) or leaf value (gbt)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _tree_apply(np.ascontiguousarray(X, dtype=np.float64),
                           self.feat, self.thr, self.left, self.right)


_EMPTY_F8 = np.zeros(0, dtype=np.float64)
_EMPTY_I8 = np.zeros(0, dtype=np.int64)


# ---------------------------------------------------------------------------
# The three classifiers
# ---------------------------------------------------------------------------

@dataclass
class TrainedClassifier:
    algorithm: str
    n_classes: int
    feature_width: int
    feature_names: list[str]
    params: dict
    in_sample_accuracy: float = float("nan")


_RF_DEFAULTS = {"n_trees": 200, "max_depth": 12, "max_features": "sqrt",
                "min_leaf": 1}
_GBT_DEFAULTS = {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1,
                 "min_leaf": 1}
_NB_DEFAULTS = {"var_floor": 1e-9}


def _resolve_mtry(max_features, p: int) -> int:
    if max_features == "sqrt":
        return max(1, int(math.sqrt(p)))
    if max_features == "all" or max_features is None:
        return p
    mtry = int(max_features)
    if not 1 <= mtry <= p:
        raise ValueError(f"max_features must lie in 1..{p}")
    return mtry


def _fit_gaussian_nb(d: DesignMatrix, hyper: dict) -> dict:
    floor = float(hyper["var_floor"])
    m = d.n_classes
    means = np.zeros((m, d.rows.shape[1]))
    variances = np.zeros_like(means)
    priors = np.zeros(m)
    for c in range(m):
        rows = d.rows[d.labels == c]
        priors[c] = rows.shape[0] / d.rows.shape[0]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), floor)
    return {"means": means, "variances": variances, "priors": priors}


def _nb_scores(params: dict, x: np.ndarray) -> np.ndarray:
    means = params["means"]
    variances = params["variances"]
    priors = params["priors"]
    logp = (np.log(priors)
            - 0.5 * np.sum(np.log(2.0 * np.pi * variances)
                           + (x - means) ** 2 / variances, axis=1))
    logp -= logp.max()
    w = np.exp(logp)
    return w / w.sum()


def _fit_forest(d: DesignMatrix, hyper: dict, seed: int) -> dict:
    m = d.n_classes
    n, p = d.rows.shape
    mtry = _resolve_mtry(hyper["max_features"], p)
    trees = []
    y = d.labels
    no_grad = _EMPTY_F8
    for t in range(hyper["n_trees"]):
        tseed = child_seed(seed, t)
        boot = make_rng(tseed).integers(0, n, size=n)
        Xb = np.ascontiguousarray(d.rows[boot])
        yb = np.ascontiguousarray(y[boot])
        feat, thr, left, right, counts, _, _ = _grow_tree(
            Xb, yb, m, no_grad, no_grad, False,
            hyper["max_depth"], mtry, hyper["min_leaf"],
            _U64(child_seed(tseed, 1)))
        trees.append(_Tree(feat, thr, left, right, counts))
    return {"trees": trees}


def _forest_votes(trees: list[_Tree], X: np.ndarray, m: int) -> np.ndarray:
    votes = np.zeros((X.shape[0], m))
    for tree in trees:
        leaves = tree.apply(X)
        votes[np.arange(X.shape[0]), np.argmax(tree.payload[leaves], axis=1)] += 1.0
    return votes


def _forest_scores(params: dict, X: np.ndarray, m: int) -> np.ndarray:
    # Laplace-smoothed vote fractions: no candidate ever scores exactly zero
    votes = _forest_votes(params["trees"], X, m)
    return (votes + 1.0 / m) / (len(params["trees"]) + 1.0)


def _softmax_rows(f: np.ndarray) -> np.ndarray:
    z = f - f.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def _fit_gbt(d: DesignMatrix, hyper: dict, seed: int) -> dict:
    m = d.n_classes
    n, p = d.rows.shape
    X = d.rows
    onehot = np.zeros((n, m))
    onehot[np.arange(n), d.labels] = 1.0
    scores = np.zeros((n, m))
    lr = float(hyper["learning_rate"])
    factor = (m - 1.0) / m
    trees: list[list[tuple[_Tree, float]]] = []
    y_dummy = _EMPTY_I8
    for r in range(hyper["n_rounds"]):
        probs = _softmax_rows(scores)
        round_trees = []
        for c in range(m):
            grad = np.ascontiguousarray(onehot[:, c] - probs[:, c])
            hess = np.ascontiguousarray(probs[:, c] * (1.0 - probs[:, c]))
            feat, thr, left, right, _, leaf_gh, _ = _grow_tree(
                X, y_dummy, 1, grad, hess, True,
                hyper["max_depth"], p, hyper["min_leaf"],
                _U64(child_seed(seed, r * m + c)))
            value = factor * leaf_gh[:, 0] / (leaf_gh[:, 1] + 1e-12)
            tree = _Tree(feat, thr, left, right, value)
            leaves = tree.apply(X)
            scores[:, c] += lr * value[leaves]
            round_trees.append((tree, lr))
        trees.append(round_trees)
    return {"rounds": trees}


def _gbt_scores(params: dict, X: np.ndarray, m: int) -> np.ndarray:
    f = np.zeros((X.shape[0], m))
    for round_trees in params["rounds"]:
        for c, (tree, lr) in enumerate(round_trees):
            f[:, c] += lr * tree.payload[tree.apply(X)]
    return _softmax_rows(f)


def _raw_scores(clf: TrainedClassifier, X: np.ndarray) -> np.ndarray:
    if clf.algorithm == "gaussian_nb":
        return np.stack([_nb_scores(clf.params, X[r]) for r in range(X.shape[0])])
    if clf.algorithm == "random_forest":
        return _forest_scores(clf.params, X, clf.n_classes)
    return _gbt_scores(clf.params, X, clf.n_classes)


def train(d: DesignMatrix, algo: str = "random_forest",
          hyper: dict | None = None, seed: int = 0) -> TrainedClassifier:
    """Fit a classifier on a design matrix; deterministic given the seed."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    m = d.n_classes
    if m < 2:
        raise ValueError("training needs at least 2 classes")
    if np.bincount(d.labels, minlength=m).min() < 2:
        raise ValueError("training needs at least 2 rows per class")
    defaults = {"gaussian_nb": _NB_DEFAULTS, "random_forest": _RF_DEFAULTS,
                "gbt": _GBT_DEFAULTS}[algo]
    merged = dict(defaults)
    for key, val in (hyper or {}).items():
        if key not in defaults:
            raise ValueError(f"unknown {algo} hyperparameter {key!r}")
        merged[key] = val

    if algo == "gaussian_nb":
        params = _fit_gaussian_nb(d, merged)
    elif algo == "random_forest":
        params = _fit_forest(d, merged, seed)
    else:
        params = _fit_gbt(d, merged, seed)

    clf = TrainedClassifier(algo, m, d.rows.shape[1], list(d.feature_names),
                            params)
    preds = np.argmax(_raw_scores(clf, d.rows), axis=1)
    clf.in_sample_accuracy = float(np.mean(preds == d.labels))
    return clf


def predict_scores(clf: TrainedClassifier, features: np.ndarray) -> ScoreVector:
    """Propensity scores for one feature row; ties go to the lowest index."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.size != clf.feature_width:
        raise ValueError(f"feature width mismatch: expected {clf.feature_width}, "
                         f"got {x.shape}")
    s = _raw_scores(clf, x[None, :])[0]
    return make_scores(s)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def _tree_to_json(tree: _Tree) -> dict:
    return {"feat": tree.feat.tolist(), "thr": tree.thr.tolist(),
            "left": tree.left.tolist(), "right": tree.right.tolist(),
            "payload": tree.payload.tolist()}


def _tree_from_json(obj: dict) -> _Tree:
    return _Tree(np.asarray(obj["feat"], dtype=np.int64),
                 np.asarray(obj["thr"], dtype=np.float64),
                 np.asarray(obj["left"], dtype=np.int64),
                 np.asarray(obj["right"], dtype=np.int64),
                 np.asarray(obj["payload"], dtype=np.float64))


def save_classifier(clf: TrainedClassifier, path) -> None:
    if clf.algorithm == "gaussian_nb":
        params = {k: v.tolist() for k, v in clf.params.items()}
    elif clf.algorithm == "random_forest":
        params = {"trees": [_tree_to_json(t) for t in clf.params["trees"]]}
    else:
        params = {"rounds": [[{"lr": lr, **_tree_to_json(t)} for t, lr in rnd]
                             for rnd in clf.params["rounds"]]}
    doc = {"format_version": _FORMAT_VERSION, "algorithm": clf.algorithm,
           "n_classes": clf.n_classes, "feature_width": clf.feature_width,
           "feature_names": clf.feature_names,
           "in_sample_accuracy": clf.in_sample_accuracy, "params": params}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_classifier(path) -> TrainedClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported classifier format version {version!r}; "
                         f"this build reads version {_FORMAT_VERSION}")
    algo = doc["algorithm"]
    raw = doc["params"]
    if algo == "gaussian_nb":
        params = {k: np.asarray(v, dtype=np.float64) for k, v in raw.items()}
    elif algo == "random_forest":
        params = {"trees": [_tree_from_json(t) for t in raw["trees"]]}
    elif algo == "gbt":
        params = {"rounds": [[(_tree_from_json(t), float(t["lr"])) for t in rnd]
                             for rnd in raw["rounds"]]}
    else:
        raise ValueError(f"unknown algorithm {algo!r} in saved model")
    return TrainedClassifier(algo, int(doc["n_classes"]),
                             int(doc["feature_width"]),
                             list(doc["feature_names"]), params,
                             float(doc.get("in_sample_accuracy", float("nan"))))
