# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernel; must stay bit-identical to the Python fallback.

Same pinned arithmetic order, same candidate scan order, same tie rule,
same draw consumption from the counter-based generator. Compile with -O2
only: fast-math or FMA contraction would change scores and break parity.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.uint64_t u64
ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.float64_t f64

BACKEND = "compiled"

cdef u64 _GAMMA = <u64>0x9E3779B97F4A7C15


cdef inline u64 _next(u64* state) nogil:
    cdef u64 z
    state[0] = state[0] + _GAMMA
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


def build_tree(
    i32[:, ::1] codes,
    f64[::1] uvals,
    i64[::1] uoff,
    i64[::1] y,
    f64[::1] class_weight,
    int n_select,
    int min_samples_split,
    int max_depth,
    bint bootstrap,
    object seed,
):
    cdef i64 n = codes.shape[0]
    cdef i64 d = codes.shape[1]
    cdef i64 K = class_weight.shape[0]
    cdef u64 state = <u64>seed

    cdef i64 cap = 2 * n + 1
    feature_arr = np.full(cap, -1, dtype=np.int32)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    proba_arr = np.zeros((cap, K), dtype=np.float64)
    cdef i32[::1] feature = feature_arr
    cdef f64[::1] threshold = threshold_arr
    cdef i32[::1] left = left_arr
    cdef i32[::1] right = right_arr
    cdef f64[:, ::1] proba = proba_arr

    cdef i64[::1] idx = np.empty(n, dtype=np.int64)
    cdef i64[::1] tmp = np.empty(n, dtype=np.int64)
    cdef i64[::1] perm = np.empty(d, dtype=np.int64)
    cdef i64[::1] counts = np.empty(K, dtype=np.int64)
    cdef i64[::1] cum = np.empty(K, dtype=np.int64)

    cdef i64 vmax = 0
    cdef i64 f
    for f in range(d):
        if uoff[f + 1] - uoff[f] > vmax:
            vmax = uoff[f + 1] - uoff[f]
    cdef i64[::1] hist = np.empty(vmax * K, dtype=np.int64)

    cdef i64 stack_cap = n + 2
    cdef i64[::1] st_start = np.empty(stack_cap, dtype=np.int64)
    cdef i64[::1] st_end = np.empty(stack_cap, dtype=np.int64)
    cdef i64[::1] st_depth = np.empty(stack_cap, dtype=np.int64)
    cdef i64[::1] st_parent = np.empty(stack_cap, dtype=np.int64)
    cdef i64[::1] st_left = np.empty(stack_cap, dtype=np.int64)

    cdef i64 node_count = 0
    cdef i64 sp, start, end, depth, parent, is_left, me, m, i, j, k, v, ri
    cdef i64 nonzero, s_count, fi, base, V, prev, rowtot, nl, a, b, key
    cdef i64 best_f, best_cut
    cdef f64 best_score, best_thr, wl, ssl, wr, ssr, wc, score, wtot
    cdef bint stop

    with nogil:
        if bootstrap:
            for i in range(n):
                idx[i] = <i64>(_next(&state) % <u64>n)
        else:
            for i in range(n):
                idx[i] = i

        sp = 0
        st_start[0] = 0
        st_end[0] = n
        st_depth[0] = 0
        st_parent[0] = -1
        st_left[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            start = st_start[sp]
            end = st_end[sp]
            depth = st_depth[sp]
            parent = st_parent[sp]
            is_left = st_left[sp]
            me = node_count
            node_count += 1
            if parent >= 0:
                if is_left:
                    left[parent] = <i32>me
                else:
                    right[parent] = <i32>me

            m = end - start
            for k in range(K):
                counts[k] = 0
            for i in range(start, end):
                counts[y[idx[i]]] += 1
            nonzero = 0
            for k in range(K):
                if counts[k] > 0:
                    nonzero += 1
            stop = nonzero <= 1 or m < min_samples_split or (max_depth >= 0 and depth >= max_depth)

            best_f = -1
            best_cut = -1
            best_score = -INFINITY
            best_thr = 0.0
            if not stop:
                for i in range(d):
                    perm[i] = i
                if n_select >= d:
                    s_count = d
                else:
                    s_count = n_select
                    for i in range(s_count):
                        j = i + <i64>(_next(&state) % <u64>(d - i))
                        v = perm[i]
                        perm[i] = perm[j]
                        perm[j] = v
                    # insertion sort the selected features ascending
                    for i in range(1, s_count):
                        key = perm[i]
                        j = i - 1
                        while j >= 0 and perm[j] > key:
                            perm[j + 1] = perm[j]
                            j -= 1
                        perm[j + 1] = key

                for fi in range(s_count):
                    f = perm[fi]
                    base = uoff[f]
                    V = uoff[f + 1] - base
                    if V < 2:
                        continue
                    for i in range(V * K):
                        hist[i] = 0
                    for i in range(start, end):
                        ri = idx[i]
                        hist[<i64>codes[ri, f] * K + y[ri]] += 1
                    for k in range(K):
                        cum[k] = 0
                    prev = -1
                    for v in range(V):
                        rowtot = 0
                        for k in range(K):
                            rowtot += hist[v * K + k]
                        if rowtot == 0:
                            continue
                        if prev >= 0:
                            wl = 0.0
                            ssl = 0.0
                            for k in range(K):
                                wc = class_weight[k] * <f64>cum[k]
                                wl += wc
                                ssl += wc * wc
                            wr = 0.0
                            ssr = 0.0
                            for k in range(K):
                                wc = class_weight[k] * <f64>(counts[k] - cum[k])
                                wr += wc
                                ssr += wc * wc
                            score = ssl / wl + ssr / wr
                            if score > best_score:
                                best_score = score
                                best_f = f
                                best_cut = prev
                                best_thr = 0.5 * (uvals[base + prev] + uvals[base + v])
                        for k in range(K):
                            cum[k] += hist[v * K + k]
                        prev = v

            if best_f < 0:
                wtot = 0.0
                for k in range(K):
                    wtot += class_weight[k] * <f64>counts[k]
                for k in range(K):
                    proba[me, k] = (class_weight[k] * <f64>counts[k]) / wtot
                continue

            feature[me] = <i32>best_f
            threshold[me] = best_thr
            nl = 0
            a = 0
            b = 0
            for i in range(start, end):
                if codes[idx[i], best_f] <= best_cut:
                    nl += 1
            b = nl
            for i in range(start, end):
                if codes[idx[i], best_f] <= best_cut:
                    tmp[a] = idx[i]
                    a += 1
                else:
                    tmp[b] = idx[i]
                    b += 1
            for i in range(m):
                idx[start + i] = tmp[i]

            st_start[sp] = start + nl
            st_end[sp] = end
            st_depth[sp] = depth + 1
            st_parent[sp] = me
            st_left[sp] = 0
            sp += 1
            st_start[sp] = start
            st_end[sp] = start + nl
            st_depth[sp] = depth + 1
            st_parent[sp] = me
            st_left[sp] = 1
            sp += 1

    return (
        feature_arr[:node_count].copy(),
        threshold_arr[:node_count].copy(),
        left_arr[:node_count].copy(),
        right_arr[:node_count].copy(),
        proba_arr[:node_count].copy(),
    )


def apply_tree(
    i32[::1] feature,
    f64[::1] threshold,
    i32[::1] left,
    i32[::1] right,
    f64[:, ::1] X,
):
    cdef i64 n = X.shape[0]
    out_arr = np.zeros(n, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef i64 i, node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return out_arr
