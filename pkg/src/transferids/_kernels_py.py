"""Pure numpy/Python versions of the compiled kernels (same signatures, same results)."""
from __future__ import annotations

import numpy as np


def best_split(X, y, idx, features, n_classes):
    n = idx.shape[0]
    best_f, best_t, best_s = -1, 0.0, -np.inf
    if n < 2:
        return best_f, best_t, best_s
    labels = y[idx]
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    total = onehot.sum(axis=0)
    pos_l = np.arange(1, n, dtype=np.float64)
    pos_r = n - pos_l
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        if not v[0] < v[-1]:
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        sumsq_l = (left * left).sum(axis=1)
        sumsq_r = (right * right).sum(axis=1)
        score = sumsq_l.astype(np.float64) / pos_l + sumsq_r.astype(np.float64) / pos_r
        valid = v[:-1] < v[1:]
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_s:
            best_s = float(score[i])
            best_f = int(f)
            t = (v[i] + v[i + 1]) / 2.0
            if t >= v[i + 1]:
                t = v[i]
            best_t = float(t)
    return best_f, best_t, best_s


def tree_apply(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return node


def svm_dual_cd_epoch(X, y, alpha, w, qii, C, order):
    d = X.shape[1]
    pg_max, pg_min = -np.inf, np.inf
    for i in order:
        if qii[i] <= 0.0:
            continue
        g = y[i] * (float(X[i] @ w[:d]) + w[d]) - 1.0
        a_old = alpha[i]
        if a_old == 0.0:
            pg = min(g, 0.0)
        elif a_old == C:
            pg = max(g, 0.0)
        else:
            pg = g
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0:
            a_new = min(max(a_old - g / qii[i], 0.0), C)
            alpha[i] = a_new
            delta = (a_new - a_old) * y[i]
            w[:d] += delta * X[i]
            w[d] += delta
    return pg_max, pg_min
