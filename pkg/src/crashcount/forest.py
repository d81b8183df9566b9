"""Bootstrap-aggregated CART regression trees with impurity importance.

Split search is exact CART: best sum-of-squared-error reduction, candidate
thresholds at midpoints of consecutive distinct sorted values, first-best
ties broken by lowest feature index then lowest threshold.

Rows with identical feature vectors always travel through a tree together,
so trees are grown on pattern-compressed data (unique feature rows with
multiplicity weights and response sums). Gains, leaf means and counts come
out identical to row-level CART; the compression only changes speed. Fully
binary designs (the dummy-encoded default) additionally use a
level-synchronous builder that evaluates every frontier node in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError
from .features import DesignMatrix, split as split_design

_GAIN_EPS_SCALE = 1e-12
_TINY = 1e-300


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    mtry: Optional[int] = None  # None = all features (pure bagging)

    def validate(self, p: int) -> None:
        if self.n_estimators < 1:
            raise DataError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must be >= 1")
        if self.mtry is not None and not 1 <= self.mtry <= p:
            raise DataError(f"mtry must be in 1..{p}")


@dataclass
class Tree:
    """Flat-array tree; node 0 is the root, feature == -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            cur = node[active]
            feat = self.feature[cur]
            go_left = x[active, feat] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]

    def as_dict(self) -> dict:
        def rec(i: int) -> dict:
            if self.feature[i] < 0:
                return {"value": float(self.value[i]), "n": int(self.count[i])}
            return {
                "feature_index": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": rec(int(self.left[i])),
                "right": rec(int(self.right[i])),
            }

        return rec(0)

    @staticmethod
    def from_dict(d: dict) -> "Tree":
        feature, threshold, left, right, value, count = [], [], [], [], [], []

        def rec(node: dict) -> int:
            i = len(feature)
            if "value" in node:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(float(node["value"]))
                count.append(int(node["n"]))
                return i
            feature.append(int(node["feature_index"]))
            threshold.append(float(node["threshold"]))
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            count.append(0)
            left[i] = rec(node["left"])
            right[i] = rec(node["right"])
            return i

        rec(d)
        return Tree(
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=float),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            np.asarray(value, dtype=float),
            np.asarray(count, dtype=np.int64),
        )


@dataclass
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    seed: int
    feature_names: tuple[str, ...]
    importance: np.ndarray

    @property
    def p(self) -> int:
        return len(self.feature_names)


class _TreeArrays:
    """Append-only builder for the flat node arrays."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.count: list[int] = []

    def add_leaf(self, value: float, count: float) -> int:
        i = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.count.append(int(round(count)))
        return i

    def make_split(self, node: int, feat: int, thr: float, left: int, right: int) -> None:
        self.feature[node] = int(feat)
        self.threshold[node] = float(thr)
        self.left[node] = left
        self.right[node] = right

    def freeze(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=float),
            np.asarray(self.count, dtype=np.int64),
        )


def _mtry_mask(rng: np.random.Generator, n_nodes: int, p: int, mtry: int) -> np.ndarray:
    """Per-node random feature subsets as a boolean (n_nodes, p) mask."""
    draws = rng.random((n_nodes, p))
    kth = np.partition(draws, mtry - 1, axis=1)[:, mtry - 1 : mtry]
    return draws <= kth


def _grow_binary(
    u: np.ndarray,
    w: np.ndarray,
    s: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    importance: np.ndarray,
) -> Tree:
    """Level-synchronous growth for all-binary pattern matrices."""
    p = u.shape[1]
    msl = float(params.min_samples_leaf)
    mtry = params.mtry if params.mtry is not None else p
    arrays = _TreeArrays()
    root_w = float(w.sum())
    arrays.add_leaf(float(s.sum()) / root_w, root_w)

    # frontier state: slot id per active pattern, global node id per slot
    grp = np.zeros(u.shape[0], dtype=np.int64)
    slot_ids = np.array([0], dtype=np.int64)
    act_u, act_w, act_s = u, w, s
    depth = 0
    while slot_ids.size and (params.max_depth is None or depth < params.max_depth):
        n_slots = slot_ids.size
        order = np.argsort(grp, kind="stable")
        us, ws, ss = act_u[order], act_w[order], act_s[order]
        sizes = np.bincount(grp, minlength=n_slots)
        offsets = np.zeros(n_slots, dtype=np.int64)
        np.cumsum(sizes[:-1], out=offsets[1:])
        w_tot = np.bincount(grp, weights=act_w, minlength=n_slots)
        s_tot = np.bincount(grp, weights=act_s, minlength=n_slots)
        w1 = np.add.reduceat(us * ws[:, None], offsets, axis=0)
        s1 = np.add.reduceat(us * ss[:, None], offsets, axis=0)
        w0 = w_tot[:, None] - w1
        s0 = s_tot[:, None] - s1
        base = s_tot * s_tot / w_tot
        ok = (w1 >= msl) & (w0 >= msl)
        gains = np.where(
            ok,
            s1 * s1 / np.maximum(w1, _TINY) + s0 * s0 / np.maximum(w0, _TINY) - base[:, None],
            -np.inf,
        )
        if mtry < p:
            gains = np.where(_mtry_mask(rng, n_slots, p, mtry), gains, -np.inf)
        best = np.argmax(gains, axis=1)
        best_gain = gains[np.arange(n_slots), best]
        eps = _GAIN_EPS_SCALE * (np.abs(base) + 1.0)
        do_split = best_gain > eps

        if not do_split.any():
            break
        split_slots = np.nonzero(do_split)[0]
        n_new = split_slots.size
        first_child = len(arrays.feature)
        child_left = first_child + 2 * np.arange(n_new)
        child_right = child_left + 1
        for k, slot in enumerate(split_slots):
            f = int(best[slot])
            importance[f] += best_gain[slot]
            lw, ls = float(w0[slot, f]), float(s0[slot, f])
            rw, rs = float(w1[slot, f]), float(s1[slot, f])
            arrays.add_leaf(ls / lw, lw)
            arrays.add_leaf(rs / rw, rw)
            arrays.make_split(
                int(slot_ids[slot]), f, 0.5, int(child_left[k]), int(child_right[k])
            )

        # route patterns of splitting slots to child slots, drop leaf slots
        slot_to_new = np.full(n_slots, -1, dtype=np.int64)
        slot_to_new[split_slots] = 2 * np.arange(n_new)
        keep = slot_to_new[grp] >= 0
        grp_kept = grp[keep]
        goes_right = act_u[keep, best[grp_kept]] > 0.5
        new_grp = slot_to_new[grp_kept] + goes_right
        act_u, act_w, act_s = act_u[keep], act_w[keep], act_s[keep]
        new_ids = np.empty(2 * n_new, dtype=np.int64)
        new_ids[0::2] = child_left
        new_ids[1::2] = child_right

        # prune slots that can never split again: single pattern or too small
        pat_counts = np.bincount(new_grp, minlength=2 * n_new)
        wsum = np.bincount(new_grp, weights=act_w, minlength=2 * n_new)
        viable = (pat_counts >= 2) & (wsum >= 2.0 * msl)
        remap = np.full(2 * n_new, -1, dtype=np.int64)
        remap[viable] = np.arange(int(viable.sum()))
        keep2 = remap[new_grp] >= 0
        grp = remap[new_grp[keep2]]
        act_u, act_w, act_s = act_u[keep2], act_w[keep2], act_s[keep2]
        slot_ids = new_ids[viable]
        depth += 1
    return arrays.freeze()


def _best_split_general(
    u: np.ndarray,
    w: np.ndarray,
    s: np.ndarray,
    idx: np.ndarray,
    feats: np.ndarray,
    msl: float,
) -> Optional[tuple[int, float, float]]:
    """(feature, threshold, gain) maximizing SSE reduction, or None."""
    wn, sn = w[idx], s[idx]
    w_tot, s_tot = float(wn.sum()), float(sn.sum())
    base = s_tot * s_tot / w_tot
    best: Optional[tuple[int, float, float]] = None
    eps = _GAIN_EPS_SCALE * (abs(base) + 1.0)
    for f in feats:
        v = u[idx, f]
        order = np.argsort(v, kind="stable")
        vv = v[order]
        cw = np.cumsum(wn[order])[:-1]
        cs = np.cumsum(sn[order])[:-1]
        boundary = vv[1:] != vv[:-1]
        valid = boundary & (cw >= msl) & (w_tot - cw >= msl)
        if not valid.any():
            continue
        g = np.where(
            valid,
            cs * cs / np.maximum(cw, _TINY)
            + (s_tot - cs) ** 2 / np.maximum(w_tot - cw, _TINY)
            - base,
            -np.inf,
        )
        k = int(np.argmax(g))
        gain = float(g[k])
        if gain > eps and (best is None or gain > best[2]):
            thr = 0.5 * (float(vv[k]) + float(vv[k + 1]))
            best = (int(f), thr, gain)
    return best


def _grow_general(
    u: np.ndarray,
    w: np.ndarray,
    s: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    importance: np.ndarray,
) -> Tree:
    """Stack-based growth handling arbitrary (non-binary) feature values."""
    p = u.shape[1]
    msl = float(params.min_samples_leaf)
    mtry = params.mtry if params.mtry is not None else p
    arrays = _TreeArrays()
    root = arrays.add_leaf(float(s.sum()) / float(w.sum()), float(w.sum()))
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(u.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if idx.size < 2 or (params.max_depth is not None and depth >= params.max_depth):
            continue
        if float(w[idx].sum()) < 2.0 * msl:
            continue
        if mtry < p:
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            feats = np.arange(p)
        found = _best_split_general(u, w, s, idx, feats, msl)
        if found is None:
            continue
        f, thr, gain = found
        importance[f] += gain
        left_mask = u[idx, f] <= thr
        lidx, ridx = idx[left_mask], idx[~left_mask]
        lw, ls = float(w[lidx].sum()), float(s[lidx].sum())
        rw, rs = float(w[ridx].sum()), float(s[ridx].sum())
        lnode = arrays.add_leaf(ls / lw, lw)
        rnode = arrays.add_leaf(rs / rw, rw)
        arrays.make_split(node, f, thr, lnode, rnode)
        # push right first so the left subtree is processed (and numbered) first
        stack.append((rnode, ridx, depth + 1))
        stack.append((lnode, lidx, depth + 1))
    return arrays.freeze()


def _compress(x: np.ndarray, weights: np.ndarray, wy: np.ndarray):
    """Unique feature rows with summed weights and weighted responses."""
    u, inverse = np.unique(x, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    w = np.bincount(inverse, weights=weights, minlength=u.shape[0])
    s = np.bincount(inverse, weights=wy, minlength=u.shape[0])
    return u, w, s


def _grow(
    u: np.ndarray,
    w: np.ndarray,
    s: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    importance: np.ndarray,
) -> Tree:
    keep = w > 0
    u, w, s = u[keep], w[keep], s[keep]
    all_binary = bool(np.isin(u, (0.0, 1.0)).all())
    if all_binary:
        return _grow_binary(u, w, s, params, rng, importance)
    return _grow_general(u, w, s, params, rng, importance)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent deterministic substream for tree t under a forest seed."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(tree_index))))


def bootstrap_indices(seed: int, tree_index: int, n: int) -> np.ndarray:
    """The exact n with-replacement draws tree t trains on (test hook)."""
    return tree_rng(seed, tree_index).integers(0, n, size=n)


def fit_tree(
    design: DesignMatrix,
    params: Optional[ForestParams] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tree:
    """Grow a single CART regression tree on the given rows (no bootstrap)."""
    if design.n < 1:
        raise DataError("cannot fit a tree on zero rows")
    params = params or ForestParams(n_estimators=1)
    params.validate(design.p)
    rng = rng or np.random.default_rng(0)
    y = design.y.astype(float)
    u, w, s = _compress(design.x, np.ones(design.n), y)
    return _grow(u, w, s, params, rng, np.zeros(design.p))


def fit_forest(
    design: DesignMatrix,
    params: Optional[ForestParams] = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """Bag n_estimators trees on seeded bootstrap substreams."""
    if design.n < 1:
        raise DataError("cannot fit a forest on zero rows")
    params = params or ForestParams()
    params.validate(design.p)
    y = design.y.astype(float)
    n = design.n
    u, inverse = np.unique(design.x, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    importance = np.zeros(design.p)
    trees: list[Tree] = []
    for t in range(params.n_estimators):
        rng = tree_rng(seed, t)
        if bootstrap:
            draws = rng.integers(0, n, size=n)
            mult = np.bincount(draws, minlength=n).astype(float)
        else:
            mult = np.ones(n)
        w = np.bincount(inverse, weights=mult, minlength=u.shape[0])
        s = np.bincount(inverse, weights=mult * y, minlength=u.shape[0])
        trees.append(_grow(u, w, s, params, rng, importance))
    total = importance.sum()
    if total > 0:
        importance = importance / total
    return ForestModel(
        trees=trees,
        params=params,
        seed=seed,
        feature_names=design.column_names,
        importance=importance,
    )


def predict_forest(model: ForestModel, x: np.ndarray) -> float:
    """Mean of the per-tree predictions for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise DataError(f"feature vector has shape {x.shape}, expected ({model.p},)")
    return float(predict_forest_matrix(model, x[None, :])[0])


def predict_forest_matrix(model: ForestModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise DataError(f"design has shape {x.shape}, expected (*, {model.p})")
    acc = np.zeros(x.shape[0])
    for tree in model.trees:
        acc += tree.predict(x)
    return acc / len(model.trees)


@dataclass(frozen=True)
class ForestEval:
    mae: float
    r2: float
    r2_defined: bool


def evaluate(model: ForestModel, test: DesignMatrix) -> ForestEval:
    """MAE and R^2 (about the test mean) on held-out rows."""
    if test.n == 0:
        raise DataError("cannot evaluate on an empty test set")
    pred = predict_forest_matrix(model, test.x)
    y = test.y.astype(float)
    mae = float(np.mean(np.abs(y - pred)))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return ForestEval(mae=mae, r2=math.nan, r2_defined=False)
    sse = float(np.sum((y - pred) ** 2))
    return ForestEval(mae=mae, r2=1.0 - sse / sst, r2_defined=True)


@dataclass(frozen=True)
class SweepRow:
    n_trees: int
    mae: float
    r2: float


def estimator_sweep(
    design: DesignMatrix,
    sizes: Sequence[int],
    seed: int,
    params: Optional[ForestParams] = None,
    test_fraction: float = 0.25,
) -> list[SweepRow]:
    """Fit/evaluate across ensemble sizes on one fixed train/test split."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise DataError("sweep sizes must be sorted ascending")
    if not sizes:
        return []
    base = params or ForestParams()
    train, test = split_design(design, test_fraction, seed)
    rows: list[SweepRow] = []
    for k in sizes:
        model = fit_forest(
            train,
            ForestParams(
                n_estimators=k,
                max_depth=base.max_depth,
                min_samples_leaf=base.min_samples_leaf,
                mtry=base.mtry,
            ),
            seed=seed,
        )
        ev = evaluate(model, test)
        rows.append(SweepRow(n_trees=k, mae=ev.mae, r2=ev.r2))
    return rows


def sweep_to_csv(rows: Iterable[SweepRow], sink) -> None:
    import csv
    from pathlib import Path

    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("n_trees", "mae", "r2"))
        for row in rows:
            writer.writerow((row.n_trees, repr(row.mae), repr(row.r2)))
    finally:
        if should_close:
            out.close()
