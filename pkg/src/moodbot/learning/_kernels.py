"""Numba kernels for CART growth and prediction.

The growth kernel works on presorted feature columns: `sorted_idx[f]`
holds row ids ordered by feature f and `sorted_val[f]` the matching
feature values. Splitting a node stably partitions both arrays, so no
re-sorting and no random matrix access happens while the tree grows;
bootstrap samples reuse the parent presort via `expand_presort`.

Split choice is deterministic: candidates are scanned in ascending
(feature, threshold) order and a candidate only replaces the incumbent
when its weighted impurity is smaller by more than `TIE_TOL`, so exact
ties resolve to the lowest feature index, then the lowest threshold.
"""

import numpy as np
from numba import njit

LEAF = -1
TIE_TOL = 1e-12


@njit(cache=True)
def grow_tree(
    sorted_idx,
    sorted_val,
    y_reg,
    y_clf,
    is_clf,
    n_classes,
    max_depth,
    min_leaf,
    mtry,
    feat_rand,
):
    """Grow a CART tree; `sorted_idx`/`sorted_val` are consumed as scratch.

    max_depth < 0 means unbounded. Returns flat node arrays trimmed to
    the node count: feature (LEAF for leaves), threshold, left, right,
    value (mean target / modal class), counts (per-class, classification).
    """
    d, n = sorted_idx.shape
    max_nodes = 2 * n + 1

    node_feature = np.full(max_nodes, LEAF, dtype=np.int32)
    node_threshold = np.zeros(max_nodes, dtype=np.float64)
    node_left = np.full(max_nodes, LEAF, dtype=np.int32)
    node_right = np.full(max_nodes, LEAF, dtype=np.int32)
    node_value = np.zeros(max_nodes, dtype=np.float64)
    node_counts = np.zeros((max_nodes, n_classes), dtype=np.int64)

    stack = np.empty((max_nodes, 4), dtype=np.int64)  # start, end, depth, node_id
    tmp_idx = np.empty(n, dtype=np.int32)
    tmp_val = np.empty(n, dtype=np.float64)
    go_left = np.empty(n, dtype=np.uint8)
    inv = np.empty(n + 1, dtype=np.float64)  # 1/i lookup: no division per candidate
    inv[0] = 0.0
    for i in range(1, n + 1):
        inv[i] = 1.0 / i
    pool = np.empty(d, dtype=np.int32)
    for f in range(d):
        pool[f] = f
    chosen = np.empty(d, dtype=np.int32)
    seg_counts = np.zeros(n_classes, dtype=np.int64)
    left_counts = np.zeros(n_classes, dtype=np.int64)

    n_nodes = 1
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = 0
    rand_cursor = 0
    n_rand = feat_rand.shape[0]

    while top >= 0:
        start = stack[top, 0]
        end = stack[top, 1]
        depth = stack[top, 2]
        nid = stack[top, 3]
        top -= 1
        m = end - start

        # Segment label statistics (row set is identical in every column).
        tot1 = 0.0
        tot2 = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(n_classes):
            seg_counts[k] = 0
        for i in range(start, end):
            r = sorted_idx[0, i]
            if is_clf:
                seg_counts[y_clf[r]] += 1
            else:
                v = y_reg[r]
                tot1 += v
                tot2 += v * v
                if v < ymin:
                    ymin = v
                if v > ymax:
                    ymax = v

        if is_clf:
            best_k = 0
            best_c = seg_counts[0]
            pure = False
            for k in range(n_classes):
                node_counts[nid, k] = seg_counts[k]
                if seg_counts[k] > best_c:
                    best_c = seg_counts[k]
                    best_k = k
                if seg_counts[k] == m:
                    pure = True
            node_value[nid] = float(best_k)
        else:
            node_value[nid] = tot1 / m
            pure = ymin == ymax

        if pure or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # Choose the feature subset for this node (ascending for tie order).
        if mtry < d:
            for j in range(mtry):
                u = feat_rand[rand_cursor % n_rand]
                rand_cursor += 1
                k = j + int(u * (d - j))
                if k >= d:
                    k = d - 1
                t = pool[j]
                pool[j] = pool[k]
                pool[k] = t
                chosen[j] = pool[j]
            n_chosen = mtry
            for a in range(1, n_chosen):  # insertion sort
                key = chosen[a]
                b = a - 1
                while b >= 0 and chosen[b] > key:
                    chosen[b + 1] = chosen[b]
                    b -= 1
                chosen[b + 1] = key
        else:
            for j in range(d):
                chosen[j] = j
            n_chosen = d

        best_imp = np.inf
        best_f = -1
        best_t = 0.0
        best_nl = 0

        for jf in range(n_chosen):
            f = chosen[jf]
            s1 = 0.0
            s2 = 0.0
            for k in range(n_classes):
                left_counts[k] = 0
            for i in range(start, end - 1):
                if is_clf:
                    left_counts[y_clf[sorted_idx[f, i]]] += 1
                else:
                    v = y_reg[sorted_idx[f, i]]
                    s1 += v
                    s2 += v * v
                nl = i - start + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                xi = sorted_val[f, i]
                xj = sorted_val[f, i + 1]
                if xj == xi:
                    continue
                if is_clf:
                    gl = 1.0
                    gr = 1.0
                    for k in range(n_classes):
                        pl = left_counts[k] * inv[nl]
                        pr = (seg_counts[k] - left_counts[k]) * inv[nr]
                        gl -= pl * pl
                        gr -= pr * pr
                    imp = nl * gl + nr * gr
                else:
                    r1 = tot1 - s1
                    r2 = tot2 - s2
                    imp = (s2 - s1 * s1 * inv[nl]) + (r2 - r1 * r1 * inv[nr])
                if imp < best_imp - TIE_TOL:
                    best_imp = imp
                    best_f = f
                    best_t = 0.5 * (xi + xj)
                    best_nl = nl

        if best_f < 0:
            continue  # no admissible split: stay a leaf

        # Mark each row's side once, then stably partition every column.
        for i in range(start, start + best_nl):
            go_left[sorted_idx[best_f, i]] = 1
        for i in range(start + best_nl, end):
            go_left[sorted_idx[best_f, i]] = 0
        for f in range(d):
            write_l = start
            n_tmp = 0
            for i in range(start, end):
                r = sorted_idx[f, i]
                v = sorted_val[f, i]
                if go_left[r] == 1:
                    sorted_idx[f, write_l] = r
                    sorted_val[f, write_l] = v
                    write_l += 1
                else:
                    tmp_idx[n_tmp] = r
                    tmp_val[n_tmp] = v
                    n_tmp += 1
            for j in range(n_tmp):
                sorted_idx[f, write_l + j] = tmp_idx[j]
                sorted_val[f, write_l + j] = tmp_val[j]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_feature[nid] = best_f
        node_threshold[nid] = best_t
        node_left[nid] = left_id
        node_right[nid] = right_id

        mid = start + best_nl
        top += 1
        stack[top, 0] = start
        stack[top, 1] = mid
        stack[top, 2] = depth + 1
        stack[top, 3] = left_id
        top += 1
        stack[top, 0] = mid
        stack[top, 1] = end
        stack[top, 2] = depth + 1
        stack[top, 3] = right_id

    return (
        node_feature[:n_nodes].copy(),
        node_threshold[:n_nodes].copy(),
        node_left[:n_nodes].copy(),
        node_right[:n_nodes].copy(),
        node_value[:n_nodes].copy(),
        node_counts[:n_nodes].copy(),
    )


@njit(cache=True)
def predict_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        nid = 0
        while feature[nid] != LEAF:
            if X[i, feature[nid]] <= threshold[nid]:
                nid = left[nid]
            else:
                nid = right[nid]
        out[i] = value[nid]
    return out


@njit(cache=True)
def expand_presort(sorted_idx, sorted_val, counts, offsets, out_idx, out_val):
    """Presort columns for a bootstrap sample from the parent's presort.

    `counts[r]` is row r's multiplicity in the sample and `offsets[r]`
    the position of its first copy in the row-sorted sample.
    """
    d, n = sorted_idx.shape
    for f in range(d):
        pos = 0
        for i in range(n):
            r = sorted_idx[f, i]
            c = counts[r]
            if c > 0:
                v = sorted_val[f, i]
                o = offsets[r]
                for j in range(c):
                    out_idx[f, pos] = o + j
                    out_val[f, pos] = v
                    pos += 1


def presort_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable per-feature row orderings and the matching sorted values,
    both shaped (d, n)."""
    order = np.argsort(X, axis=0, kind="stable")
    vals = np.take_along_axis(X, order, axis=0)
    return (
        np.ascontiguousarray(order.T.astype(np.int32)),
        np.ascontiguousarray(vals.T),
    )
