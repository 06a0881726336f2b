"""Random forest regression (CART, variance splitting) for saliency scores.

Trees are grown on bootstrap samples with a per-node random feature
subset of size ``max(1, d // 3)``.  Everything is deterministic given the
seed: tree t uses its own counter-seeded generator, its first n draws are
the bootstrap indices, and the same stream then feeds the per-node
feature sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MIN_NODE = 5
MIN_VARIANCE = 1e-8


@dataclass
class RegressionTree:
    feature: np.ndarray  # int32, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32, -1 for leaves
    right: np.ndarray  # int32
    value: np.ndarray  # float64 leaf means (internal nodes hold their mean too)


@dataclass
class ForestModel:
    trees: list
    feature_count: int
    tree_count: int
    seed: int
    label_min: float
    label_max: float


@njit(cache=True)
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _rng_next(state):
    # xorshift64*; state is a length-1 uint64 array
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= (x << np.uint64(25)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(27)
    state[0] = x
    return (x * np.uint64(0x2545F4914F6CDD1D)) & np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def _rng_below(state, n):
    return int(_rng_next(state) % np.uint64(n))


@njit(cache=True)
def _init_state(seed, tree_index):
    state = np.empty(1, dtype=np.uint64)
    s = _splitmix64(np.uint64(seed) + np.uint64(tree_index))
    if s == np.uint64(0):
        s = np.uint64(0x106689D45497FDB5)
    state[0] = s
    return state


@njit(cache=True)
def _bootstrap(state, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _rng_below(state, n)
    return out


def bootstrap_indices(seed, tree_index, n):
    """The bootstrap sample tree ``tree_index`` was trained on (for OOB use)."""
    return _bootstrap(_init_state(seed, tree_index), n)


@njit(cache=True)
def _sample_features(state, d, m, buf):
    # partial Fisher-Yates over 0..d-1, first m entries are the sample
    for i in range(d):
        buf[i] = i
    for i in range(m):
        j = i + _rng_below(state, d - i)
        buf[i], buf[j] = buf[j], buf[i]
    return buf[:m]


@njit(cache=True)
def _bootstrap_sorted(global_order, boot):
    """Per-feature bootstrap positions in ascending feature order.

    ``global_order[f]`` sorts the full training matrix by feature f; the
    bootstrap multiset inherits that order without re-sorting: walk the
    global order and emit every bootstrap position holding that row.
    """
    d, n = global_order.shape
    counts = np.zeros(n, dtype=np.int32)
    for p in range(n):
        counts[boot[p]] += 1
    starts = np.zeros(n + 1, dtype=np.int32)
    for i in range(n):
        starts[i + 1] = starts[i] + counts[i]
    fill = starts[:n].copy()
    pos_by_row = np.empty(n, dtype=np.int32)
    for p in range(n):  # stable grouping of positions by sampled row
        r = boot[p]
        pos_by_row[fill[r]] = p
        fill[r] += 1
    srt = np.empty((d, n), dtype=np.int32)
    for f in range(d):
        k = 0
        for j in range(n):
            r = global_order[f, j]
            for t in range(starts[r], starts[r + 1]):
                srt[f, k] = pos_by_row[t]
                k += 1
    return srt


@njit(cache=True)
def _grow_tree(xt, y, state, mtry, srt, min_node, min_variance):
    """CART growth over presorted per-feature position arrays.

    ``srt[f]`` holds the tree's sample positions sorted by feature f;
    splits stable-partition every row of ``srt`` so no node ever sorts.
    ``xt`` is feature-major (d, n) so each scan stays in one cached row.
    """
    d, n = xt.shape
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    value = np.zeros(max_nodes, dtype=np.float64)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_lo = np.empty(max_nodes, dtype=np.int64)
    stack_hi = np.empty(max_nodes, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1
    fbuf = np.empty(d, dtype=np.int64)
    side = np.empty(n, dtype=np.uint8)
    tmp = np.empty(n, dtype=np.int32)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        s = 0.0
        s2 = 0.0
        for i in range(lo, hi):
            yi = y[srt[0, i]]
            s += yi
            s2 += yi * yi
        mean = s / m
        value[node] = mean
        var = s2 / m - mean * mean
        if m < min_node or var < min_variance:
            continue

        feats = _sample_features(state, d, mtry, fbuf)
        best_score = np.inf
        best_feat = -1
        best_thr = 0.0
        for fi in range(mtry):
            f = feats[fi]
            sl = 0.0
            nl = 0
            prev_v = xt[f, srt[f, lo]]
            run_best = np.inf
            run_thr = 0.0
            for j in range(m - 1):
                p = srt[f, lo + j]
                sl += y[p]
                nl += 1
                v_next = xt[f, srt[f, lo + j + 1]]
                if v_next == prev_v:
                    continue
                sr = s - sl
                nr = m - nl
                score = -(sl * sl / nl + sr * sr / nr)
                if score < run_best:
                    run_best = score
                    thr = 0.5 * (prev_v + v_next)
                    if thr >= v_next:  # midpoint rounded into the upper value
                        thr = prev_v
                    run_thr = thr
                prev_v = v_next
            if run_best < best_score:
                best_score = run_best
                best_feat = f
                best_thr = run_thr
        if best_feat < 0:
            continue  # node constant on every sampled feature

        nl = 0
        for i in range(lo, hi):
            p = srt[best_feat, i]
            if xt[best_feat, p] <= best_thr:
                side[p] = 1
                nl += 1
            else:
                side[p] = 0
        if nl == 0 or nl == m:
            continue  # degenerate split; keep the node as a leaf

        # stable partition of every presorted row
        for f in range(d):
            a = 0
            b = nl
            for i in range(lo, hi):
                p = srt[f, i]
                if side[p] == 1:
                    tmp[a] = p
                    a += 1
                else:
                    tmp[b] = p
                    b += 1
            for i in range(m):
                srt[f, lo + i] = tmp[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
        stack_node[top] = rid
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
    )


@njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def train_forest(
    features,
    labels,
    tree_count=200,
    seed=0,
    mtry=None,
    min_node=MIN_NODE,
    min_variance=MIN_VARIANCE,
):
    """Train the forest; fully deterministic given the seed.

    ``mtry`` defaults to ``max(1, d // 3)`` candidate features per node.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, d = x.shape
    if n < 10:
        raise ValueError(f"need at least 10 training rows, got {n}")
    bad = ~np.isfinite(x)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"non-finite feature at row {r}, column {c}")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("labels must lie in [0, 1]")
    if tree_count < 1:
        raise ValueError("tree_count must be >= 1")
    if mtry is None:
        mtry = max(1, d // 3)
    if not (1 <= mtry <= d):
        raise ValueError(f"mtry must lie in [1, {d}]")
    global_order = np.ascontiguousarray(
        np.argsort(x, axis=0, kind="stable").T.astype(np.int32)
    )
    trees = []
    for t in range(tree_count):
        state = _init_state(seed, t)
        boot = _bootstrap(state, n)
        srt = _bootstrap_sorted(global_order, boot)
        xt = np.ascontiguousarray(x[boot].T)
        arrs = _grow_tree(xt, y[boot], state, mtry, srt, min_node, min_variance)
        trees.append(RegressionTree(*arrs))
    return ForestModel(
        trees=trees,
        feature_count=d,
        tree_count=tree_count,
        seed=int(seed),
        label_min=float(y.min()),
        label_max=float(y.max()),
    )


def predict(model, features):
    """Mean leaf value over all trees; one score per input row."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.feature_count:
        raise ValueError(
            f"feature dimension {x.shape[1]} != {model.feature_count}"
        )
    if not np.isfinite(x).all():
        raise ValueError("non-finite feature value")
    acc = np.zeros(x.shape[0], dtype=np.float64)
    for tree in model.trees:
        acc += _predict_tree(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value, x
        )
    out = acc / model.tree_count
    return float(out[0]) if single else out
