"""Numpy implementations of the tree kernels; bit-identical to the compiled ones."""

import numpy as np


def best_split(X, y, order, start, end, features, min_leaf):
    n = end - start
    best_f, best_thr, best_score = -1, 0.0, np.inf
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    if not size_ok.any():
        return best_f, best_thr, best_score
    p_tot = int(y[order[0, start:end]].sum())
    for f in features:
        seg = order[f, start:end]
        v = X[seg, f]
        pl = np.cumsum(y[seg], dtype=np.int64)[:-1]
        pr = p_tot - pl
        valid = size_ok & (v[:-1] < v[1:])
        if not valid.any():
            continue
        score = (pl * (nl - pl)) / nl + (pr * (nr - pr)) / nr
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if score[i] < best_score:
            thr = 0.5 * (v[i] + v[i + 1])
            if thr >= v[i + 1]:
                thr = v[i]
            best_f, best_thr, best_score = int(f), float(thr), float(score[i])
    return best_f, best_thr, best_score


def partition(order, X, start, end, feature, threshold):
    seg = order[:, start:end]
    goes_left = X[seg, feature] <= threshold
    perm = np.argsort(~goes_left, axis=1, kind="stable")
    order[:, start:end] = np.take_along_axis(seg, perm, axis=1)
    return int(goes_left[0].sum())


def predict(feature, threshold, left, right, value, X):
    node = np.zeros(len(X), dtype=np.intp)
    rows = np.arange(len(X))
    while True:
        f = feature[node]
        inner = f >= 0
        if not inner.any():
            break
        r, nd = rows[inner], node[inner]
        go_left = X[r, f[inner]] <= threshold[nd]
        node[inner] = np.where(go_left, left[nd], right[nd])
    return value[node]
