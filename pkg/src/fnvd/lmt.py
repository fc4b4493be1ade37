"""Logistic model trees: boosted logistic leaves, entropy splits, cost-complexity pruning.

A trained model is a binary tree of threshold tests (descend left iff
x[feature] < threshold) whose every node carries a linear logistic model
fitted by stagewise boosting.  Leaves classify; internal nodes keep their
models so pruning can collapse a subtree without refitting.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable

import numpy as np

from .data import Dataset, FeatureSchema, SchemaMismatch, stratified_kfold

P_CLAMP = 1e-12          # probability floor/ceiling for downstream logs
W_FLOOR = 1e-10          # boosting weight floor
GAIN_EPS = 1e-12         # float guard: information gain below this is "no gain"
PRUNE_CV_FOLDS = 5
SINGLE_CLASS_ITERS = 10  # boosting rounds when CV selection is impossible


class LmtError(ValueError):
    pass


class EmptyInput(LmtError):
    pass


class DegenerateWeights(LmtError):
    pass


class CorruptModel(LmtError):
    pass


class SchemaVersionMismatch(LmtError):
    pass


def sigmoid(f):
    """Numerically stable logistic function, clamped to [1e-12, 1-1e-12].

    Accepts scalars or arrays; evaluates e^f/(1+e^f) in the branch that never
    overflows, then clamps so downstream log() calls stay finite.
    """
    f = np.asarray(f, dtype=np.float64)
    out = np.empty_like(f)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    ef = np.exp(f[~pos])
    out[~pos] = ef / (1.0 + ef)
    out = np.clip(out, P_CLAMP, 1.0 - P_CLAMP)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LogisticLeafModel:
    """Linear logistic model: logit(p) = intercept + sum_j coeffs[j] * x[j].

    `coeffs` maps feature index to coefficient; an absent index means 0.
    """

    intercept: float
    coeffs: dict[int, float]

    def __post_init__(self) -> None:
        if not math.isfinite(self.intercept) or \
                any(not math.isfinite(c) for c in self.coeffs.values()):
            raise LmtError("non-finite coefficient")

    def logit(self, x: np.ndarray) -> float:
        return self.intercept + sum(c * float(x[j]) for j, c in self.coeffs.items())

    def logit_rows(self, X: np.ndarray) -> np.ndarray:
        f = np.full(X.shape[0], self.intercept, dtype=np.float64)
        for j, c in self.coeffs.items():
            f += c * X[:, j]
        return f


@dataclass
class Node:
    """Tree node; a leaf iff `feature` is None.  Internal nodes keep the model
    they had before splitting, which becomes the leaf model if pruning
    collapses them."""

    model: LogisticLeafModel
    feature: int | None = None
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def copy(self) -> "Node":
        if self.is_leaf:
            return Node(self.model)
        return Node(self.model, self.feature, self.threshold,
                    self.left.copy(), self.right.copy())


@dataclass(frozen=True)
class LeafTrace:
    """Replayable traversal: (feature, threshold, 'L'|'R') steps plus the leaf."""

    path: tuple[tuple[int, float, str], ...]
    leaf: LogisticLeafModel


@dataclass(frozen=True)
class TrainParams:
    seed: int
    max_boost_iters: int = 200
    cv_folds_for_iters: int = 5
    min_split: int = 15
    max_depth: int = 10
    z_max: float = 3.0
    prune: bool = True

    def __post_init__(self) -> None:
        if self.max_boost_iters < 1 or self.cv_folds_for_iters < 2 \
                or self.min_split < 2 or self.max_depth < 1:
            raise LmtError("TrainParams counts must be positive")
        if not self.z_max > 0:
            raise LmtError("z_max must be > 0")


@dataclass(frozen=True)
class LmtModel:
    schema: FeatureSchema
    root: Node
    training_meta: dict

    def leaf_count(self) -> int:
        return sum(1 for _ in iter_leaves(self.root))


def iter_leaves(node: Node):
    if node.is_leaf:
        yield node
    else:
        yield from iter_leaves(node.left)
        yield from iter_leaves(node.right)


@dataclass(frozen=True)
class Metrics:
    """Pooled binary confusion counts; violation is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision_violation(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall_violation(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def precision_regular(self) -> float:
        d = self.tn + self.fn
        return self.tn / d if d else 0.0

    @property
    def recall_regular(self) -> float:
        d = self.tn + self.fp
        return self.tn / d if d else 0.0

    def as_dict(self) -> dict:
        return {
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "accuracy": self.accuracy,
            "precision": {"violation": self.precision_violation,
                          "regular": self.precision_regular},
            "recall": {"violation": self.recall_violation,
                       "regular": self.recall_regular},
        }


# ------------------------------------------------------------------- boosting

def _boost_round(X: np.ndarray, y: np.ndarray, F: np.ndarray, z_max: float):
    """One stagewise round: pick the (intercept a, slope b, feature j) simple
    weighted regression of the working response that minimizes weighted SSE.

    Returns (a, b, j), or None when every raw weight has collapsed below the
    floor (the fit is saturated and no further round can change it).
    """
    p = sigmoid(F)
    w_raw = p * (1.0 - p)
    if np.all(w_raw < W_FLOOR):
        return None
    w = np.maximum(w_raw, W_FLOOR)
    z = np.clip((y - p) / w_raw, -z_max, z_max)

    sw = w.sum()
    zbar = float((w * z).sum() / sw)
    zc = z - zbar
    wz = w * zc
    xbar = (w @ X) / sw
    Xc = X - xbar
    sxx = w @ (Xc * Xc)
    sxz = wz @ Xc
    szz = float(wz @ zc)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(sxx > 1e-12, sxz / np.where(sxx > 1e-12, sxx, 1.0), 0.0)
    sse = szz - b * sxz
    j = int(np.argmin(sse))  # ties resolve to the lowest feature index
    bj = float(b[j])
    aj = zbar - bj * float(xbar[j])
    return aj, bj, j


def fit_logitboost(X: np.ndarray, y: np.ndarray, iters: int, z_max: float,
                   init_model: LogisticLeafModel | None = None,
                   loss_trace: list | None = None) -> LogisticLeafModel:
    """Fit a linear logistic model by `iters` boosting rounds.

    Each round computes p = sigmoid(F), weights w = max(p(1-p), 1e-10) and the
    clamped working response z = clip((y-p)/(p(1-p)), ±z_max), then adds the
    best single-feature weighted least-squares fit a + b*x_j into the
    accumulated intercept/coefficients and into F.

    When `init_model` is given, boosting warm-starts from its logits and the
    returned model aggregates its terms, so the result alone reproduces the
    final F.  `loss_trace`, if a list, receives the mean training log-loss
    before round 1 and after every round.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise EmptyInput(f"need at least 2 instances, got {n}")
    if iters < 0:
        raise LmtError("iters must be >= 0")

    intercept = init_model.intercept if init_model else 0.0
    coeffs = np.zeros(d)
    if init_model:
        for j, c in init_model.coeffs.items():
            coeffs[j] = c
    F = X @ coeffs + intercept

    def log_loss() -> float:
        p = sigmoid(F)
        return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())

    if loss_trace is not None:
        loss_trace.append(log_loss())
    for it in range(iters):
        step = _boost_round(X, y, F, z_max)
        if step is None:
            if it == 0 and init_model is None:
                raise DegenerateWeights("all boosting weights below floor")
            break
        a, b, j = step
        intercept += a
        coeffs[j] += b
        F = F + a + b * X[:, j]
        if loss_trace is not None:
            loss_trace.append(log_loss())

    return LogisticLeafModel(float(intercept),
                             {j: float(c) for j, c in enumerate(coeffs) if c != 0.0})


def select_iters_by_cv(ds: Dataset, params: TrainParams) -> int:
    """Pick the boosting iteration count by k-fold CV at the root: the count in
    1..max_boost_iters with minimal pooled misclassification (smallest on ties).
    """
    counts = np.bincount(ds.y, minlength=2)
    k = min(params.cv_folds_for_iters, int(counts.min()))
    if k < 2:
        return min(SINGLE_CLASS_ITERS, params.max_boost_iters)
    folds = stratified_kfold(ds, k, params.seed)
    miss = np.zeros(params.max_boost_iters, dtype=np.int64)
    for f in range(k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        Xtr, ytr = ds.X[tr], ds.y[tr].astype(np.float64)
        Xte, yte = ds.X[te], ds.y[te]
        Ftr = np.zeros(len(tr))
        Fte = np.zeros(len(te))
        for it in range(params.max_boost_iters):
            step = _boost_round(Xtr, ytr, Ftr, params.z_max)
            if step is not None:
                a, b, j = step
                Ftr = Ftr + a + b * Xtr[:, j]
                Fte = Fte + a + b * Xte[:, j]
            # p >= 0.5 (ties to violation) is exactly F >= 0
            miss[it] += int(((Fte >= 0).astype(np.int8) != yte).sum())
    return int(np.argmin(miss)) + 1


# -------------------------------------------------------------------- splitting

def _entropy(pos: np.ndarray, tot: np.ndarray) -> np.ndarray:
    """Binary entropy (bits) of `pos` positives among `tot`, elementwise."""
    p = pos / tot
    out = np.zeros_like(p, dtype=np.float64)
    for q in (p, 1.0 - p):
        mask = q > 0
        out[mask] -= q[mask] * np.log2(q[mask])
    return out


def select_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """Best binary split by entropy information gain over midpoint thresholds.

    Candidates are midpoints between consecutive distinct sorted values of each
    feature.  Returns (feature, threshold, gain) maximizing gain — ties resolve
    to the lowest feature index, then the lowest threshold — or None when no
    candidate has positive gain.
    """
    n, d = X.shape
    if n < 2:
        return None
    total_pos = float(y.sum())
    parent_h = float(_entropy(np.array([total_pos]), np.array([float(n)]))[0])
    best: tuple[float, int, float] | None = None  # (gain, feature, threshold)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        pos_prefix = np.cumsum(y[order], dtype=np.float64)
        cut = np.flatnonzero(xs[1:] != xs[:-1])  # split after sorted index i
        if cut.size == 0:
            continue
        n_left = (cut + 1).astype(np.float64)
        n_right = n - n_left
        pos_left = pos_prefix[cut]
        pos_right = total_pos - pos_left
        gain = parent_h - (n_left * _entropy(pos_left, n_left)
                           + n_right * _entropy(pos_right, n_right)) / n
        i = int(np.argmax(gain))  # first max = lowest threshold
        g = float(gain[i])
        if best is None or g > best[0] + 1e-15:
            thr = float((xs[cut[i]] + xs[cut[i] + 1]) / 2.0)
            best = (g, j, thr)
    if best is None or best[0] <= GAIN_EPS:
        return None
    return best[1], best[2], best[0]


# ---------------------------------------------------------------------- growing

def _grow_node(X: np.ndarray, y: np.ndarray, params: TrainParams, iters: int,
               init_model: LogisticLeafModel | None, depth: int) -> Node:
    if len(y) < 2:
        model = init_model or LogisticLeafModel(0.0, {})
    else:
        try:
            model = fit_logitboost(X, y, iters, params.z_max, init_model)
        except DegenerateWeights:
            model = init_model or LogisticLeafModel(0.0, {})
    if len(y) >= params.min_split and depth < params.max_depth:
        sel = select_split(X, y)
        if sel is not None:
            feature, threshold, _gain = sel
            mask = X[:, feature] < threshold
            left = _grow_node(X[mask], y[mask], params, iters, model, depth + 1)
            right = _grow_node(X[~mask], y[~mask], params, iters, model, depth + 1)
            return Node(model, feature, threshold, left, right)
    return Node(model)


def grow_tree(ds: Dataset, params: TrainParams) -> LmtModel:
    """Grow the unpruned tree: boosting iteration count is selected once at the
    root by CV and reused at every node; children warm-start from the parent's
    model and boost further on node-local rows."""
    if len(ds) < 2:
        raise EmptyInput("need at least 2 instances to train")
    iters = select_iters_by_cv(ds, params)
    root = _grow_node(ds.X, ds.y.astype(np.float64), params, iters, None, 0)
    meta = {"boost_iters": iters, "seed": params.seed,
            "params": {k: v for k, v in asdict(params).items()}}
    return LmtModel(ds.schema, root, meta)


# ---------------------------------------------------------------------- pruning

def _route_counts(node: Node, X: np.ndarray, y: np.ndarray, out: dict) -> None:
    """Annotate each node (by id) with its routed row count and the
    misclassification count of its own model on those rows."""
    miscount = int(((node.model.logit_rows(X) >= 0).astype(np.int8) != y).sum())
    out[id(node)] = (len(y), miscount)
    if not node.is_leaf:
        mask = X[:, node.feature] < node.threshold
        _route_counts(node.left, X[mask], y[mask], out)
        _route_counts(node.right, X[~mask], y[~mask], out)


def _subtree_stats(node: Node, counts: dict, out: dict) -> tuple[int, int]:
    """(leaf count, summed leaf miscount) per subtree, keyed by node id."""
    if node.is_leaf:
        stats = (1, counts[id(node)][1])
    else:
        ll, lm = _subtree_stats(node.left, counts, out)
        rl, rm = _subtree_stats(node.right, counts, out)
        stats = (ll + rl, lm + rm)
    out[id(node)] = stats
    return stats


def _weakest_links(root: Node, X: np.ndarray, y: np.ndarray) -> tuple[float, list[Node]]:
    """Minimum cost-complexity g over internal nodes and every node attaining it.

    g(t) = (R(t) - R(subtree_t)) / (leaves_t - 1), with R as misclassification
    counts on the training rows routed to t.
    """
    counts: dict = {}
    stats: dict = {}
    _route_counts(root, X, y, counts)
    _subtree_stats(root, counts, stats)
    n_total = len(y)
    best_g = math.inf
    argmin: list[Node] = []

    def visit(node: Node) -> None:
        nonlocal best_g, argmin
        if node.is_leaf:
            return
        leaves, sub_miss = stats[id(node)]
        own_miss = counts[id(node)][1]
        g = (own_miss - sub_miss) / n_total / (leaves - 1)
        if g < best_g - 1e-15:
            best_g, argmin = g, [node]
        elif g <= best_g + 1e-15:
            argmin.append(node)
        visit(node.left)
        visit(node.right)

    visit(root)
    return best_g, argmin


def _cost_complexity_sequence(root: Node, X: np.ndarray,
                              y: np.ndarray) -> list[tuple[float, Node]]:
    """Nested pruning sequence [(alpha_k, tree_k)]: T_0 is the full tree at
    alpha 0; each step collapses every current weakest link; the last entry is
    the root collapsed to a single leaf.  Alphas are nondecreasing."""
    work = root.copy()
    seq: list[tuple[float, Node]] = [(0.0, work.copy())]
    alpha_prev = 0.0
    while not work.is_leaf:
        g, nodes = _weakest_links(work, X, y)
        alpha = max(g, alpha_prev)  # guard: model leaves can make g negative
        to_collapse = {id(t) for t in nodes}

        def collapse(node: Node) -> None:
            if node.is_leaf:
                return
            if id(node) in to_collapse:
                node.feature, node.left, node.right = None, None, None
            else:
                collapse(node.left)
                collapse(node.right)

        collapse(work)
        seq.append((alpha, work.copy()))
        alpha_prev = alpha
    return seq


def _pick_at_penalty(seq: list[tuple[float, Node]], beta: float) -> Node:
    """The most-pruned tree whose alpha does not exceed beta."""
    chosen = seq[0][1]
    for alpha, tree in seq:
        if alpha <= beta + 1e-15:
            chosen = tree
    return chosen


def prune_tree(model: LmtModel, ds: Dataset, params: TrainParams) -> LmtModel:
    """CART cost-complexity pruning with cross-validation and the 1-SE rule.

    The candidate subtrees are the weakest-link sequence of the grown tree;
    their alphas are scored by k-fold CV (fold trees grown with the same
    parameters and iteration count, pruned at the geometric-mean penalty of
    each alpha interval) and the smallest subtree within one standard error of
    the minimal CV error wins.  Collapsed nodes keep their own fitted models.
    """
    if model.root.is_leaf:
        return model
    y = ds.y.astype(np.int8)
    seq = _cost_complexity_sequence(model.root, ds.X, y)
    if len(seq) == 1:
        return model
    counts = np.bincount(ds.y, minlength=2)
    k = min(PRUNE_CV_FOLDS, int(counts.min()))
    if k < 2:
        return model  # too few per-class rows to cross-validate; keep the tree
    folds = stratified_kfold(ds, k, params.seed)
    iters = int(model.training_meta["boost_iters"])

    alphas = [a for a, _ in seq]
    betas = [math.sqrt(alphas[i] * alphas[i + 1]) for i in range(len(seq) - 1)]
    betas.append(math.inf)

    n = len(ds)
    err = np.zeros(len(seq), dtype=np.int64)
    for f in range(k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        fold_root = _grow_node(ds.X[tr], ds.y[tr].astype(np.float64),
                               params, iters, None, 0)
        fold_seq = _cost_complexity_sequence(fold_root, ds.X[tr], y[tr])
        Xte, yte = ds.X[te], y[te]
        for i, beta in enumerate(betas):
            tree = _pick_at_penalty(fold_seq, beta)
            pred = (predict_rows_node(tree, Xte) >= 0.5).astype(np.int8)
            err[i] += int((pred != yte).sum())

    rate = err / n
    i_min = int(np.argmin(rate))
    se = math.sqrt(rate[i_min] * (1.0 - rate[i_min]) / n)
    limit = rate[i_min] + se
    chosen = i_min
    for i in range(len(seq)):
        if rate[i] <= limit + 1e-15:
            chosen = i  # last (most pruned) within one SE
    return LmtModel(model.schema, seq[chosen][1], dict(model.training_meta))


def train(ds: Dataset, params: TrainParams) -> LmtModel:
    """grow_tree, then prune_tree when params.prune."""
    model = grow_tree(ds, params)
    if params.prune:
        model = prune_tree(model, ds, params)
    return model


# ------------------------------------------------------------------- prediction

def predict_rows_node(node: Node, X: np.ndarray) -> np.ndarray:
    """Vectorized probabilities for a whole matrix under a tree node."""
    if node.is_leaf:
        return sigmoid(node.model.logit_rows(X))
    out = np.empty(X.shape[0], dtype=np.float64)
    mask = X[:, node.feature] < node.threshold
    out[mask] = predict_rows_node(node.left, X[mask])
    out[~mask] = predict_rows_node(node.right, X[~mask])
    return out


def predict_rows(model: LmtModel, X: np.ndarray) -> np.ndarray:
    return predict_rows_node(model.root, X)


def predict_proba(model: LmtModel, x: np.ndarray) -> tuple[float, LeafTrace]:
    """Descend the tree (left iff x[feature] < threshold) and apply the leaf model."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.schema.n_features,):
        raise SchemaMismatch(f"input shape {x.shape}, schema expects "
                             f"({model.schema.n_features},)")
    if not np.all(np.isfinite(x)):
        raise SchemaMismatch("non-finite input value")
    node = model.root
    path: list[tuple[int, float, str]] = []
    while not node.is_leaf:
        if float(x[node.feature]) < node.threshold:
            path.append((node.feature, node.threshold, "L"))
            node = node.left
        else:
            path.append((node.feature, node.threshold, "R"))
            node = node.right
    p = float(sigmoid(node.model.logit(x)))
    return p, LeafTrace(tuple(path), node.model)


# ------------------------------------------------------------------- evaluation

def evaluate(model_factory: Callable[[Dataset], LmtModel], ds: Dataset,
             folds, threshold: float = 0.5) -> Metrics:
    """k-fold evaluation with one pooled confusion matrix.

    For each fold the factory trains on the complement; held-out rows are
    classified violation iff p >= threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise LmtError("threshold must lie in (0, 1)")
    tp = fp = tn = fn = 0
    for f in range(folds.k):
        m = model_factory(ds.subset(folds.train_indices(f)))
        te = folds.test_indices(f)
        pred = (predict_rows(m, ds.X[te]) >= threshold).astype(np.int8)
        yte = ds.y[te]
        tp += int(((pred == 1) & (yte == 1)).sum())
        fp += int(((pred == 1) & (yte == 0)).sum())
        tn += int(((pred == 0) & (yte == 0)).sum())
        fn += int(((pred == 0) & (yte == 1)).sum())
    return Metrics(tp, fp, tn, fn)


# ---------------------------------------------------------------- serialization

MODEL_FORMAT_VERSION = 1


def _node_to_dict(node: Node, names: tuple[str, ...]) -> dict:
    model = {"intercept": node.model.intercept,
             "coeffs": {names[j]: c for j, c in sorted(node.model.coeffs.items())}}
    if node.is_leaf:
        return {"model": model}
    return {"feature": names[node.feature], "threshold": node.threshold,
            "model": model,
            "left": _node_to_dict(node.left, names),
            "right": _node_to_dict(node.right, names)}


def serialize_model(model: LmtModel) -> str:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "schema": {
            "features": list(model.schema.feature_names),
            "label": {"name": model.schema.label_name,
                      "violation": model.schema.violation_tag,
                      "regular": model.schema.regular_tag},
        },
        "tree": _node_to_dict(model.root, model.schema.feature_names),
        "training_meta": model.training_meta,
    }
    return json.dumps(doc, indent=2)


def _node_from_dict(doc: dict, schema: FeatureSchema) -> Node:
    try:
        m = doc["model"]
        coeffs = {schema.index_of(name): float(c) for name, c in m["coeffs"].items()}
        model = LogisticLeafModel(float(m["intercept"]), coeffs)
        if "feature" not in doc:
            return Node(model)
        return Node(model, schema.index_of(doc["feature"]), float(doc["threshold"]),
                    _node_from_dict(doc["left"], schema),
                    _node_from_dict(doc["right"], schema))
    except (KeyError, TypeError, ValueError, SchemaMismatch) as exc:
        if isinstance(exc, (CorruptModel, SchemaVersionMismatch)):
            raise
        raise CorruptModel(f"bad tree node: {exc}") from exc


def deserialize_model(text: str) -> LmtModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptModel("missing version field")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise SchemaVersionMismatch(f"model format version {doc['version']!r}, "
                                    f"expected {MODEL_FORMAT_VERSION}")
    try:
        s = doc["schema"]
        schema = FeatureSchema(tuple(s["features"]), s["label"]["name"],
                               s["label"]["violation"], s["label"]["regular"])
        root = _node_from_dict(doc["tree"], schema)
        meta = doc.get("training_meta", {})
    except (KeyError, TypeError) as exc:
        raise CorruptModel(f"missing field: {exc}") from exc
    return LmtModel(schema, root, meta)
