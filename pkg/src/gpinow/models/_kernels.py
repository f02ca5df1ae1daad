"""Compiled inner loops for the learners.

Everything here works on plain float64/int64 arrays so the Python layer
stays in charge of validation, RNG and model objects.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def sorted_values(X, order):
    """``xs[f, q] = X[order[f, q], f]``, contiguous per feature."""
    n, p = X.shape
    xs = np.empty((p, n))
    for f in range(p):
        for q in range(n):
            xs[f, q] = X[order[f, q], f]
    return xs


@njit(cache=True)
def grow_tree(X, y, order, xs, col_mask, node_keys, n_try, max_depth, min_split, min_leaf, l2, max_nodes):
    """Grow one regression tree level by level.

    ``order[f]`` lists row indices sorted by ``X[:, f]`` and ``xs[f]`` the
    matching sorted values.  Split gain is the
    reduction of ``sum^2 / (count + l2)`` (plain SSE reduction when l2 = 0).
    When ``n_try`` is below the number of allowed columns, each node only
    considers the ``n_try`` allowed columns with the smallest ``node_keys``
    entries.  Ties go to the lowest column, then the lowest threshold.
    """
    n, p = X.shape
    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, LEAF, dtype=np.int64)
    right = np.full(max_nodes, LEAF, dtype=np.int64)
    value = np.zeros(max_nodes)
    coverage = np.zeros(max_nodes, dtype=np.int64)

    node_of = np.zeros(n, dtype=np.int64)
    n_nodes = 1
    frontier = np.zeros(1, dtype=np.int64)
    n_allowed = 0
    for f in range(p):
        if col_mask[f]:
            n_allowed += 1
    sample_features = n_try < n_allowed

    node_sum = np.zeros(max_nodes)
    node_min = np.full(max_nodes, np.inf)
    node_max = np.full(max_nodes, -np.inf)
    for r in range(n):
        node_sum[0] += y[r]
        coverage[0] += 1
        if y[r] < node_min[0]:
            node_min[0] = y[r]
        if y[r] > node_max[0]:
            node_max[0] = y[r]

    slot = np.full(max_nodes, -1, dtype=np.int64)
    depth = 0
    while frontier.shape[0] > 0:
        m = frontier.shape[0]
        for k in range(m):
            nd = frontier[k]
            value[nd] = node_sum[nd] / (coverage[nd] + l2)
        n_split = 0
        slot[:] = -1
        for k in range(m):
            nd = frontier[k]
            cnt = coverage[nd]
            if (depth < max_depth and cnt >= min_split and cnt >= 2 * min_leaf
                    and node_max[nd] > node_min[nd] and n_nodes + 2 * (n_split + 1) <= max_nodes):
                slot[nd] = n_split
                n_split += 1
        if n_split == 0:
            break
        split_nodes = np.empty(n_split, dtype=np.int64)
        for k in range(m):
            nd = frontier[k]
            if slot[nd] >= 0:
                split_nodes[slot[nd]] = nd

        allowed = np.zeros((n_split, p), dtype=np.bool_)
        for s in range(n_split):
            if sample_features:
                nd = split_nodes[s]
                cand = np.empty(n_allowed, dtype=np.int64)
                keys = np.empty(n_allowed)
                c = 0
                for f in range(p):
                    if col_mask[f]:
                        cand[c] = f
                        keys[c] = node_keys[nd, f]
                        c += 1
                picked = np.argsort(keys)[:n_try]
                for q in range(n_try):
                    allowed[s, cand[picked[q]]] = True
            else:
                for f in range(p):
                    allowed[s, f] = col_mask[f]

        best_gain = np.zeros(n_split)
        best_feat = np.full(n_split, -1, dtype=np.int64)
        best_thr = np.zeros(n_split)
        lcnt = np.zeros(n_split, dtype=np.int64)
        lsum = np.zeros(n_split)
        last_x = np.zeros(n_split)
        for f in range(p):
            if not col_mask[f]:
                continue
            lcnt[:] = 0
            lsum[:] = 0.0
            for q in range(n):
                r = order[f, q]
                s = slot[node_of[r]]
                if s < 0 or (sample_features and not allowed[s, f]):
                    continue
                x = xs[f, q]
                if lcnt[s] > 0 and x > last_x[s]:
                    nd = split_nodes[s]
                    cnt = coverage[nd]
                    nl = lcnt[s]
                    nr = cnt - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        tot = node_sum[nd]
                        sl = lsum[s]
                        sr = tot - sl
                        gain = sl * sl / (nl + l2) + sr * sr / (nr + l2) - tot * tot / (cnt + l2)
                        if gain > best_gain[s]:
                            best_gain[s] = gain
                            best_feat[s] = f
                            a = last_x[s]
                            t = a + (x - a) / 2.0
                            if t >= x:
                                t = a
                            best_thr[s] = t
                lcnt[s] += 1
                lsum[s] += y[r]
                last_x[s] = x

        n_children = 0
        for s in range(n_split):
            if best_feat[s] >= 0:
                n_children += 2
        if n_children == 0:
            break
        next_frontier = np.empty(n_children, dtype=np.int64)
        c = 0
        for s in range(n_split):
            if best_feat[s] < 0:
                continue
            nd = split_nodes[s]
            feature[nd] = best_feat[s]
            threshold[nd] = best_thr[s]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            next_frontier[c] = n_nodes
            next_frontier[c + 1] = n_nodes + 1
            c += 2
            n_nodes += 2
        for r in range(n):
            nd = node_of[r]
            if feature[nd] >= 0:
                if X[r, feature[nd]] <= threshold[nd]:
                    child = left[nd]
                else:
                    child = right[nd]
                node_of[r] = child
                node_sum[child] += y[r]
                coverage[child] += 1
                if y[r] < node_min[child]:
                    node_min[child] = y[r]
                if y[r] > node_max[child]:
                    node_max[child] = y[r]
        frontier = next_frontier
        depth += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], coverage[:n_nodes], node_of


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        nd = 0
        while feature[nd] >= 0:
            if X[i, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = value[nd]
    return out


@njit(cache=True)
def boost(X, y, order, col_masks, max_depth, min_split, min_leaf, l2, learning_rate, max_nodes):
    """Residual boosting on squared loss; trees are stacked row-wise."""
    n_rounds = col_masks.shape[0]
    n = X.shape[0]
    base = 0.0
    for r in range(n):
        base += y[r]
    base /= n
    fitted = np.full(n, base)
    resid = np.empty(n)
    no_keys = np.zeros((1, 1))
    xs = sorted_values(X, order)
    feats = np.full((n_rounds, max_nodes), LEAF, dtype=np.int64)
    thrs = np.zeros((n_rounds, max_nodes))
    lefts = np.full((n_rounds, max_nodes), LEAF, dtype=np.int64)
    rights = np.full((n_rounds, max_nodes), LEAF, dtype=np.int64)
    vals = np.zeros((n_rounds, max_nodes))
    covs = np.zeros((n_rounds, max_nodes), dtype=np.int64)
    sizes = np.zeros(n_rounds, dtype=np.int64)
    for t in range(n_rounds):
        for r in range(n):
            resid[r] = y[r] - fitted[r]
        f, th, le, ri, va, co, leaf_of = grow_tree(
            X, resid, order, xs, col_masks[t], no_keys, X.shape[1], max_depth,
            min_split, min_leaf, l2, max_nodes)
        k = f.shape[0]
        sizes[t] = k
        feats[t, :k] = f
        thrs[t, :k] = th
        lefts[t, :k] = le
        rights[t, :k] = ri
        vals[t, :k] = va
        covs[t, :k] = co
        for r in range(n):
            fitted[r] += learning_rate * va[leaf_of[r]]
    return base, feats, thrs, lefts, rights, vals, covs, sizes


@njit(cache=True)
def coordinate_descent(G, c, active, lam, alpha, max_iter, tol):
    """Cyclic coordinate descent on standardized data.

    Minimizes 1/2 b'Gb - c'b + lam * (alpha |b|_1 + (1 - alpha)/2 |b|^2)
    where G = Z'Z/n and c = Z'(y - mean y)/n.
    """
    p = c.shape[0]
    beta = np.zeros(p)
    grad = c.copy()  # c - G beta
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    for it in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            if not active[j]:
                continue
            gjj = G[j, j]
            rho = grad[j] + gjj * beta[j]
            if rho > l1:
                new = (rho - l1) / (gjj + l2)
            elif rho < -l1:
                new = (rho + l1) / (gjj + l2)
            else:
                new = 0.0
            d = new - beta[j]
            if d != 0.0:
                for k in range(p):
                    grad[k] -= d * G[k, j]
                beta[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        if max_delta < tol:
            return beta, it + 1, True
    return beta, max_iter, False


@njit(cache=True)
def _piece_value(eta, lin, eps, bi, bj, t):
    return 0.5 * eta * t * t + lin * t + eps * (abs(bi + t) + abs(bj - t))


@njit(cache=True)
def _best_step(eta, lin, eps, bi, bj, lo, hi):
    """Exact minimizer over [lo, hi] of the convex piecewise quadratic

        0.5 eta t^2 + lin t + eps (|bi + t| + |bj - t|).
    """
    cands = np.empty(8)
    cands[0] = lo
    cands[1] = hi
    nc = 2
    for bp in (-bi, bj):
        if lo < bp < hi:
            cands[nc] = bp
            nc += 1
    if eta > 0.0:
        for si in (-1.0, 1.0):
            for sj in (-1.0, 1.0):
                # stationary point of the piece where sign(bi+t)=si, sign(bj-t)=sj
                t = -(lin + eps * (si - sj)) / eta
                if lo < t < hi and (bi + t) * si >= 0.0 and (bj - t) * sj >= 0.0:
                    cands[nc] = t
                    nc += 1
    best_t = 0.0
    best_v = _piece_value(eta, lin, eps, bi, bj, 0.0)
    for q in range(nc):
        v = _piece_value(eta, lin, eps, bi, bj, cands[q])
        if v < best_v:
            best_v = v
            best_t = cands[q]
    return best_t


@njit(cache=True)
def svr_smo(K, y, C, eps, tol, max_iter):
    """Pairwise dual updates for epsilon-SVR on beta = alpha - alpha*.

    Dual: min 1/2 beta'K beta + eps |beta|_1 - y'beta,
          sum(beta) = 0, -C <= beta <= C.
    Each step picks the maximal KKT-violating pair and minimizes the dual
    exactly along beta_i += t, beta_j -= t.
    Returns (beta, bias, iterations, converged, final_violation).
    """
    n = y.shape[0]
    beta = np.zeros(n)
    Kb = np.zeros(n)
    it = 0
    converged = False
    viol = 0.0
    lo_max = 0.0
    hi_min = 0.0
    while True:
        # admissible interval for the bias implied by each point's KKT condition
        lo_max = -np.inf
        hi_min = np.inf
        i_up = -1
        j_dn = -1
        for k in range(n):
            F = y[k] - Kb[k]
            b_k = beta[k]
            if b_k >= C:
                lo = -np.inf
                hi = F - eps
            elif b_k <= -C:
                lo = F + eps
                hi = np.inf
            elif b_k > 0.0:
                lo = F - eps
                hi = F - eps
            elif b_k < 0.0:
                lo = F + eps
                hi = F + eps
            else:
                lo = F - eps
                hi = F + eps
            if lo > lo_max:
                lo_max = lo
                i_up = k
            if hi < hi_min:
                hi_min = hi
                j_dn = k
        viol = lo_max - hi_min
        if viol < tol or i_up == j_dn or i_up < 0 or j_dn < 0:
            converged = True
            break
        if it >= max_iter:
            break
        i = i_up
        j = j_dn
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        # d/dt of the smooth part at t = 0
        lin = (Kb[i] - y[i]) - (Kb[j] - y[j])
        lo_t = max(-C - beta[i], beta[j] - C)
        hi_t = min(C - beta[i], beta[j] + C)
        t = _best_step(eta, lin, eps, beta[i], beta[j], lo_t, hi_t)
        if t == 0.0:
            break
        beta[i] += t
        beta[j] -= t
        for k in range(n):
            Kb[k] += t * (K[k, i] - K[k, j])
        it += 1
    if np.isfinite(lo_max) and np.isfinite(hi_min):
        bias = 0.5 * (lo_max + hi_min)
    elif np.isfinite(lo_max):
        bias = lo_max
    else:
        bias = hi_min
    return beta, bias, it, converged, viol
