"""Multi-level region partition: graph-based finest level + merge hierarchy."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi
from skimage.segmentation import felzenszwalb as _sk_felzenszwalb

from .imgcore import check_image, rgb_to_lab


@dataclass
class MultisegConfig:
    level_count: int = 15
    felz_k: float = 150.0
    felz_sigma: float = 0.8
    felz_min_size: int = 50
    coarsest_regions: int = 8
    merge_schedule: list | None = None  # derived from the finest map when None


@dataclass
class MultiLevelPartition:
    levels: list  # label maps, index 0 = finest
    merge_parents: list  # for level l>0: array mapping level l-1 ids -> level l ids
    region_counts: list
    schedule_warnings: list = field(default_factory=list)


def _canonical_labels(labels):
    """Relabel to contiguous 0-based ids ordered by first raster-scan pixel."""
    flat = labels.ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return order[inverse].reshape(labels.shape)


def felzenszwalb_segment(img, k=150.0, min_size=50, sigma=0.8):
    """Graph-based finest partition (Felzenszwalb-Huttenlocher).

    The raw output is split into 4-connected pieces and relabeled in
    deterministic raster order so every region id is contiguous.
    """
    img = check_image(img, channels=3)
    raw = _sk_felzenszwalb(img, scale=k, sigma=sigma, min_size=min_size)
    # enforce 4-connected regions
    out = np.zeros(raw.shape, dtype=np.int64)
    nxt = 0
    s4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    for rid in np.unique(raw):
        comp, n = ndi.label(raw == rid, structure=s4)
        out[comp > 0] = comp[comp > 0] + nxt - 1
        nxt += n
    return _canonical_labels(out)


def region_adjacency(labels):
    """Set of adjacent region-id pairs (4-connectivity), each pair sorted."""
    pairs = []
    a, b = labels[:, :-1], labels[:, 1:]
    m = a != b
    pairs.append(np.column_stack([a[m], b[m]]))
    a, b = labels[:-1, :], labels[1:, :]
    m = a != b
    pairs.append(np.column_stack([a[m], b[m]]))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    p = np.concatenate(pairs)
    p = np.sort(p, axis=1)
    return np.unique(p, axis=0)


def default_schedule(finest_count, level_count, coarsest=8):
    """Geometric interpolation of target region counts, finest to coarsest."""
    if level_count == 1:
        return [finest_count]
    lo = min(coarsest, finest_count)
    t = np.linspace(0.0, 1.0, level_count)
    targets = np.rint(finest_count * (lo / finest_count) ** t).astype(int)
    # enforce strict decrease where possible
    out = [int(targets[0])]
    for v in targets[1:]:
        out.append(min(int(v), out[-1] - 1))
    return [max(1, v) for v in out]


def build_hierarchy(finest, img, cfg):
    """Agglomerative merging by mean-Lab distance on the adjacency graph.

    Snapshots are taken the first time the region count reaches each
    scheduled target; ties break toward the smallest (id, id) pair.
    """
    img = check_image(img, channels=3)
    finest = np.asarray(finest, dtype=np.int64)
    n0 = int(finest.max()) + 1
    if cfg.merge_schedule:
        schedule = cfg.merge_schedule
        if any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise ValueError("merge schedule must be strictly decreasing")
    else:
        # the derived schedule may repeat the floor target; repeats become
        # duplicated levels with a warning, keeping the level count stable
        schedule = default_schedule(n0, cfg.level_count, cfg.coarsest_regions)

    lab = rgb_to_lab(img)
    flat = finest.ravel()
    areas = np.bincount(flat, minlength=n0).astype(np.float64)
    sums = np.stack(
        [np.bincount(flat, weights=lab[..., c].ravel(), minlength=n0) for c in range(3)],
        axis=1,
    )

    # live agglomeration state on "current" ids; current ids are a growing
    # sequence (merged regions get fresh ids n0, n0+1, ...)
    parent = {}
    means = {i: sums[i] / areas[i] for i in range(n0)}
    sizes = {i: areas[i] for i in range(n0)}
    adj = {i: set() for i in range(n0)}
    for a, b in region_adjacency(finest):
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))

    heap = []
    for a in range(n0):
        for b in adj[a]:
            if a < b:
                d = float(np.linalg.norm(means[a] - means[b]))
                heapq.heappush(heap, (d, a, b))

    levels = [finest.copy()]
    merge_parents = []
    region_counts = [n0]
    warnings = []

    def snapshot_labels(live_ids):
        # map every original finest id through the union-find-ish parents
        root = np.arange(n0 + len(parent), dtype=np.int64)
        for child, par in parent.items():
            root[child] = par
        # path-compress (parents always point to higher ids, iterate top-down)
        for i in range(len(root)):
            while root[i] != root[root[i]]:
                root[i] = root[root[i]]
        remap = {rid: j for j, rid in enumerate(sorted(live_ids))}
        lut = np.array([remap[root[i]] for i in range(n0)], dtype=np.int64)
        return lut[finest], root, remap

    live = set(range(n0))
    next_id = n0
    prev_labels = finest
    prev_live_sorted = sorted(live)

    for target in schedule[1:]:
        if len(live) <= target:
            warnings.append(
                f"schedule target {target} unreachable at {len(live)} regions"
            )
            levels.append(levels[-1].copy())
            merge_parents.append(np.arange(region_counts[-1], dtype=np.int64))
            region_counts.append(region_counts[-1])
            continue
        while len(live) > target and heap:
            d, a, b = heapq.heappop(heap)
            if a not in live or b not in live:
                continue
            # merge a and b into a fresh id
            m = next_id
            next_id += 1
            parent[a] = m
            parent[b] = m
            live.discard(a)
            live.discard(b)
            live.add(m)
            sizes[m] = sizes[a] + sizes[b]
            means[m] = (means[a] * sizes[a] + means[b] * sizes[b]) / sizes[m]
            nbrs = (adj[a] | adj[b]) - {a, b}
            adj[m] = set()
            for nb in nbrs:
                if nb not in live:
                    continue
                adj[m].add(nb)
                adj[nb].discard(a)
                adj[nb].discard(b)
                adj[nb].add(m)
                lo, hi = (nb, m) if nb < m else (m, nb)
                dd = float(np.linalg.norm(means[lo] - means[hi]))
                heapq.heappush(heap, (dd, lo, hi))
            del adj[a], adj[b], means[a], means[b], sizes[a], sizes[b]
        labels, root, remap = snapshot_labels(live)
        # parent map: previous-level region id -> this-level region id
        pmap = np.empty(len(prev_live_sorted), dtype=np.int64)
        for j, rid in enumerate(prev_live_sorted):
            r = rid
            while r in parent:
                r = parent[r]
            pmap[j] = remap[r]
        levels.append(labels)
        merge_parents.append(pmap)
        region_counts.append(len(live))
        prev_labels = labels
        prev_live_sorted = sorted(live)

    return MultiLevelPartition(levels, merge_parents, region_counts, warnings)


def build_partition(img, cfg):
    finest = felzenszwalb_segment(img, cfg.felz_k, cfg.felz_min_size, cfg.felz_sigma)
    return build_hierarchy(finest, img, cfg)
