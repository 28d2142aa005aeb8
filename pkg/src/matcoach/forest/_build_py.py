"""Pure-Python tree kernel; the fallback twin of the compiled extension.

Both kernels must produce bit-identical trees. Everything that touches
floats therefore runs in a pinned order: candidate scores accumulate over
classes in ascending index order using plain IEEE double ops, candidates
are scanned feature-ascending then threshold-ascending, and ties keep the
first candidate. Random draws come from a counter-based generator so this
backend can fetch them in vectorised blocks while the compiled one steps
a scalar state, consuming identical streams.
"""

from __future__ import annotations

import numpy as np

from .. import rng

BACKEND = "python"


def build_tree(
    codes: np.ndarray,
    uvals: np.ndarray,
    uoff: np.ndarray,
    y: np.ndarray,
    class_weight: np.ndarray,
    n_select: int,
    min_samples_split: int,
    max_depth: int,
    bootstrap: bool,
    seed: int,
):
    n, d = codes.shape
    K = class_weight.shape[0]
    cw = class_weight.tolist()

    pos = 0  # draws consumed from the counter-based stream

    def draw(count: int) -> np.ndarray:
        nonlocal pos
        block = rng.splitmix64_block(seed, pos, count)
        pos += count
        return block

    if bootstrap:
        idx = (draw(n) % np.uint64(n)).astype(np.int64)
    else:
        idx = np.arange(n, dtype=np.int64)

    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    proba = np.zeros((cap, K), dtype=np.float64)

    node_count = 0
    # (start, end, depth, parent, is_left); preorder via push-right-then-left
    stack = [(0, n, 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        me = node_count
        node_count += 1
        if parent >= 0:
            if is_left:
                left[parent] = me
            else:
                right[parent] = me

        slice_idx = idx[start:end]
        m = end - start
        counts = np.bincount(y[slice_idx], minlength=K)
        counts_l = counts.tolist()

        pure = int(np.count_nonzero(counts)) <= 1
        stop = pure or m < min_samples_split or (max_depth >= 0 and depth >= max_depth)

        best_f = -1
        if not stop:
            if n_select >= d:
                feats = range(d)
            else:
                perm = list(range(d))
                raw = draw(n_select)
                for i in range(n_select):
                    j = i + int(raw[i] % np.uint64(d - i))
                    perm[i], perm[j] = perm[j], perm[i]
                feats = sorted(perm[:n_select])

            best_score = -np.inf
            best_cut = -1
            best_thr = 0.0
            for f in feats:
                base = int(uoff[f])
                V = int(uoff[f + 1]) - base
                if V < 2:
                    continue
                col = codes[slice_idx, f].astype(np.int64)
                hist = np.bincount(col * K + y[slice_idx], minlength=V * K).reshape(V, K)
                nz = np.nonzero(hist.sum(axis=1))[0]
                if len(nz) < 2:
                    continue
                cum = [0] * K
                prev = -1
                for v in nz.tolist():
                    if prev >= 0:
                        # left branch takes codes <= prev
                        wl = 0.0
                        ssl = 0.0
                        for k in range(K):
                            wc = cw[k] * cum[k]
                            wl += wc
                            ssl += wc * wc
                        wr = 0.0
                        ssr = 0.0
                        for k in range(K):
                            wc = cw[k] * (counts_l[k] - cum[k])
                            wr += wc
                            ssr += wc * wc
                        score = ssl / wl + ssr / wr
                        if score > best_score:
                            best_score = score
                            best_f = f
                            best_cut = prev
                            best_thr = 0.5 * (float(uvals[base + prev]) + float(uvals[base + v]))
                    row = hist[v].tolist()
                    for k in range(K):
                        cum[k] += row[k]
                    prev = v

        if best_f < 0:
            # leaf: balanced-weighted class frequencies
            wtot = 0.0
            for k in range(K):
                wtot += cw[k] * counts_l[k]
            for k in range(K):
                proba[me, k] = (cw[k] * counts_l[k]) / wtot
            continue

        feature[me] = best_f
        threshold[me] = best_thr
        mask = codes[slice_idx, best_f] <= best_cut
        nl = int(np.count_nonzero(mask))
        merged = np.concatenate([slice_idx[mask], slice_idx[~mask]])
        idx[start:end] = merged
        stack.append((start + nl, end, depth + 1, me, False))
        stack.append((start, start + nl, depth + 1, me, True))

    return (
        feature[:node_count].copy(),
        threshold[:node_count].copy(),
        left[:node_count].copy(),
        right[:node_count].copy(),
        proba[:node_count].copy(),
    )


def apply_tree(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    X: np.ndarray,
) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    while True:
        f = feature[node]
        live = np.nonzero(f >= 0)[0]
        if live.size == 0:
            return node
        cur = node[live]
        go_left = X[live, f[live]] <= threshold[cur]
        node[live] = np.where(go_left, left[cur], right[cur])
