"""CART classification tree with Gini impurity and per-sample weights.

Written for small, exactly reproducible models: training is deterministic,
independent of the input sample order, and the text serialization round
trips bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, FormatError, VersionError

NUM_CLASSES = 6
FORMAT_VERSION = "1"
# Candidates whose impurity is within this of the best are treated as tied.
TIE_TOL = 1e-12
# Minimum impurity decrease for a split to be accepted.
MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class TrainingSample:
    x: tuple
    y: int
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if not 0 <= self.y < NUM_CLASSES:
            raise ValueError(f"class must be in 0..{NUM_CLASSES - 1}, got {self.y}")
        if not self.weight > 0:
            raise ValueError("sample weight must be positive")


class ClassWeighting(str, enum.Enum):
    BALANCED = "balanced"
    UNIFORM = "uniform"  # keep the weights the samples already carry


@dataclass(frozen=True)
class TrainParams:
    min_samples_split: int = 4
    min_samples_leaf: int = 3
    max_depth: int | None = None
    class_weighting: ClassWeighting = ClassWeighting.BALANCED

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


@dataclass(frozen=True)
class Leaf:
    class_weights: tuple
    predicted: int


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: int
    right: int


Node = Union[Leaf, Split]


@dataclass
class DecisionTreeModel:
    nodes: list
    root: int = 0
    feature_count: int = 19
    format_version: str = FORMAT_VERSION

    def leaf_for(self, x):
        if len(x) != self.feature_count:
            raise DimensionMismatch(
                f"model expects {self.feature_count} features, got {len(x)}"
            )
        node = self.nodes[self.root]
        while isinstance(node, Split):
            node = self.nodes[node.left if x[node.feature_index] <= node.threshold else node.right]
        return node

    def leaves(self):
        return [n for n in self.nodes if isinstance(n, Leaf)]

    def depth(self):
        def walk(i):
            node = self.nodes[i]
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def gini(class_weights) -> float:
    """1 - sum_c (w_c / W)^2 for a vector of per-class weights."""
    w = np.asarray(class_weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return 0.0
    p = w / total
    return float(1.0 - np.dot(p, p))


def leaf_prediction(class_weights) -> int:
    """Heaviest class; ties go to the lower (more desirable) class."""
    best = 0
    for c, w in enumerate(class_weights):
        if w > class_weights[best]:
            best = c
    return best


def balance_weights(samples: Sequence[TrainingSample]) -> list[TrainingSample]:
    """Reweight so every present class carries the same total weight.

    weight = N / (C * n_c) with N samples, C distinct classes present and
    n_c samples in the sample's class; the weights sum to N.
    """
    if not samples:
        raise EmptyTrainingSet("cannot balance an empty training set")
    counts = np.bincount([s.y for s in samples], minlength=NUM_CLASSES)
    n = len(samples)
    present = int(np.count_nonzero(counts))
    return [replace(s, weight=n / (present * int(counts[s.y]))) for s in samples]


# -- training ---------------------------------------------------------------


@dataclass
class _Builder:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    params: TrainParams
    nodes: list = field(default_factory=list)

    def class_weights(self, idx):
        return np.bincount(self.y[idx], weights=self.w[idx], minlength=NUM_CLASSES)

    def best_split(self, idx):
        """(feature, threshold, impurity) of the best legal split, or None.

        Among candidates within TIE_TOL of the minimum impurity the lowest
        feature index wins, then the lowest threshold.
        """
        n = len(idx)
        min_leaf = self.params.min_samples_leaf
        total = self.class_weights(idx)
        W = total.sum()
        onehot = np.zeros((n, NUM_CLASSES))
        per_feature = []
        for f in range(self.X.shape[1]):
            order = np.argsort(self.X[idx, f], kind="stable")
            vals = self.X[idx[order], f]
            onehot[:] = 0.0
            onehot[np.arange(n), self.y[idx[order]]] = self.w[idx[order]]
            left = np.cumsum(onehot, axis=0)[:-1]
            # split after position i: left holds i + 1 samples
            pos = np.nonzero(vals[:-1] != vals[1:])[0]
            pos = pos[(pos + 1 >= min_leaf) & (n - pos - 1 >= min_leaf)]
            if len(pos) == 0:
                continue
            lw = left[pos]
            rw = total - lw
            wl = lw.sum(axis=1)
            wr = rw.sum(axis=1)
            # W_side * gini_side = W_side - sum(w_c^2) / W_side
            imp = ((wl - (lw * lw).sum(axis=1) / wl) + (wr - (rw * rw).sum(axis=1) / wr)) / W
            thr = (vals[pos] + vals[pos + 1]) / 2.0
            # the midpoint of two adjacent floats can round up to the right value
            thr = np.where(thr >= vals[pos + 1], vals[pos], thr)
            per_feature.append((f, thr, imp))
        if not per_feature:
            return None
        best_imp = min(float(imp.min()) for _, _, imp in per_feature)
        for f, thr, imp in per_feature:
            hits = np.nonzero(imp <= best_imp + TIE_TOL)[0]
            if len(hits):
                k = hits[0]
                return f, float(thr[k]), float(imp[k])
        raise AssertionError("unreachable")

    def leaf(self, weights):
        weights = tuple(float(v) for v in weights)
        self.nodes.append(Leaf(weights, leaf_prediction(weights)))
        return len(self.nodes) - 1

    def build(self, idx, depth):
        weights = self.class_weights(idx)
        p = self.params
        if (
            len(idx) < p.min_samples_split
            or (p.max_depth is not None and depth >= p.max_depth)
            or np.count_nonzero(weights) <= 1
        ):
            return self.leaf(weights)
        found = self.best_split(idx)
        if found is None or gini(weights) - found[2] <= MIN_DECREASE:
            return self.leaf(weights)
        f, thr, _ = found
        node_id = len(self.nodes)
        self.nodes.append(None)  # placeholder keeps pre-order ids
        go_left = self.X[idx, f] <= thr
        left = self.build(idx[go_left], depth + 1)
        right = self.build(idx[~go_left], depth + 1)
        self.nodes[node_id] = Split(f, thr, left, right)
        return node_id


def train(samples: Sequence[TrainingSample], params: TrainParams = TrainParams()) -> DecisionTreeModel:
    """Grow a CART tree greedily from ``samples``."""
    if not samples:
        raise EmptyTrainingSet("no training samples")
    width = len(samples[0].x)
    for i, s in enumerate(samples):
        if len(s.x) != width:
            raise DimensionMismatch(f"sample {i} has {len(s.x)} features, expected {width}")
    if params.class_weighting is ClassWeighting.BALANCED:
        samples = balance_weights(samples)
    X = np.array([s.x for s in samples], dtype=float).reshape(len(samples), width)
    y = np.array([s.y for s in samples], dtype=np.int64)
    w = np.array([s.weight for s in samples], dtype=float)
    # Canonical sample order makes every floating-point sum independent of
    # the order the caller supplied.
    keys = [w, y] + [X[:, f] for f in reversed(range(width))]
    order = np.lexsort(keys)
    builder = _Builder(X[order], y[order], w[order], params)
    root = builder.build(np.arange(len(samples)), 0)
    return DecisionTreeModel(builder.nodes, root, width)


def predict_class(model: DecisionTreeModel, x) -> int:
    return model.leaf_for(x).predicted


# -- serialization ----------------------------------------------------------


def _num(v):
    return repr(float(v))


def save_model(model: DecisionTreeModel) -> str:
    lines = [
        f"lfdt {model.format_version}",
        f"features {model.feature_count}",
        f"nodes {len(model.nodes)}",
    ]
    for i, node in enumerate(model.nodes):
        if isinstance(node, Leaf):
            lines.append(f"node {i} leaf {node.predicted} " + " ".join(_num(v) for v in node.class_weights))
        else:
            lines.append(f"node {i} split {node.feature_index} {_num(node.threshold)} {node.left} {node.right}")
    lines.append(f"root {model.root}")
    return "\n".join(lines) + "\n"


def _expect(line, lineno, keyword, nargs):
    parts = line.split()
    if not parts or parts[0] != keyword or len(parts) != nargs + 1:
        raise FormatError(f"expected '{keyword}' with {nargs} value(s), got {line!r}", lineno)
    return parts[1:]


def _int(text, lineno, what):
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {text!r}", lineno) from None


def _float(text, lineno, what):
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"{what} must be a number, got {text!r}", lineno) from None
    if math.isnan(value):
        raise FormatError(f"{what} is NaN", lineno)
    return value


def load_model(text: str) -> DecisionTreeModel:
    """Parse the text format written by :func:`save_model`."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 4:
        raise FormatError("model file is truncated", len(lines) + 1)
    (version,) = _expect(lines[0], 1, "lfdt", 1)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model format version {version!r}", 1)
    (features,) = _expect(lines[1], 2, "features", 1)
    feature_count = _int(features, 2, "feature count")
    (count,) = _expect(lines[2], 3, "nodes", 1)
    count = _int(count, 3, "node count")
    if count < 1:
        raise FormatError("a model needs at least one node", 3)
    if len(lines) != count + 4:
        raise FormatError(
            f"declared {count} nodes but file has {len(lines) - 4} node line(s)",
            min(len(lines), count + 4),
        )
    nodes = [None] * count
    for offset in range(count):
        lineno = offset + 4
        parts = lines[lineno - 1].split()
        if len(parts) < 3 or parts[0] != "node":
            raise FormatError(f"expected a node line, got {lines[lineno - 1]!r}", lineno)
        node_id = _int(parts[1], lineno, "node id")
        if not 0 <= node_id < count or nodes[node_id] is not None:
            raise FormatError(f"bad or duplicate node id {node_id}", lineno)
        kind, rest = parts[2], parts[3:]
        if kind == "leaf":
            if len(rest) != 1 + NUM_CLASSES:
                raise FormatError(f"leaf needs a class and {NUM_CLASSES} weights", lineno)
            predicted = _int(rest[0], lineno, "class")
            weights = tuple(_float(v, lineno, "class weight") for v in rest[1:])
            if not 0 <= predicted < NUM_CLASSES or any(v < 0 for v in weights):
                raise FormatError("leaf class or weights out of range", lineno)
            nodes[node_id] = Leaf(weights, predicted)
        elif kind == "split":
            if len(rest) != 4:
                raise FormatError("split needs feature, threshold, left and right", lineno)
            f = _int(rest[0], lineno, "feature index")
            if not 0 <= f < feature_count:
                raise FormatError(f"feature index {f} out of range", lineno)
            thr = _float(rest[1], lineno, "threshold")
            left, right = (_int(v, lineno, "child id") for v in rest[2:])
            for child in (left, right):
                if not 0 <= child < count:
                    raise FormatError(f"child id {child} out of range", lineno)
            nodes[node_id] = Split(f, thr, left, right)
        else:
            raise FormatError(f"unknown node kind {kind!r}", lineno)
    (root,) = _expect(lines[-1], len(lines), "root", 1)
    root = _int(root, len(lines), "root id")
    if not 0 <= root < count:
        raise FormatError(f"root id {root} out of range", len(lines))

    # every node reachable exactly once from the root
    seen = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in seen:
            raise FormatError(f"node {i} is reachable twice; not a tree")
        seen.add(i)
        if isinstance(nodes[i], Split):
            stack += [nodes[i].left, nodes[i].right]
    if len(seen) != count:
        raise FormatError(f"{count - len(seen)} node(s) unreachable from the root")
    return DecisionTreeModel(nodes, root, feature_count, version)


def read_model(path) -> DecisionTreeModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def write_model(model: DecisionTreeModel, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(save_model(model))
