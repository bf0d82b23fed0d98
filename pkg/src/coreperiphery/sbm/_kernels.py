"""Compiled Metropolis-Hastings label-switching steps.

State arrays are mutated in place:

* ``theta``  block of every node
* ``sizes``  block sizes
* ``m``      symmetric block edge counts, internal edges once on the diagonal
* ``dsum``   summed degree of each block

``counters`` accumulates ``[proposed, accepted, noop, rejected_empty, ops]``
where ``ops`` counts neighbor visits plus block-pair term evaluations.
"""
import numpy as np
from numba import njit

PROPOSED, ACCEPTED, NOOP, EMPTY, OPS = range(5)


@njit(cache=True)
def _pair_ll(m, sizes, logp, log1mp, a, b):
    if a == b:
        cap = sizes[a] * (sizes[a] - 1) // 2
    else:
        cap = sizes[a] * sizes[b]
    e = m[a, b]
    out = 0.0
    if e > 0:
        out += e * logp[a, b]
    if cap - e > 0:
        out += (cap - e) * log1mp[a, b]
    return out


@njit(cache=True)
def _affected_ll(m, sizes, logp, log1mp, r, s):
    n_blocks = sizes.shape[0]
    tot = 0.0
    for t in range(n_blocks):
        tot += _pair_ll(m, sizes, logp, log1mp, r, t)
    for t in range(n_blocks):
        if t != r:
            tot += _pair_ll(m, sizes, logp, log1mp, s, t)
    return tot


@njit(cache=True)
def _add(m, a, b, x):
    if a == b:
        m[a, a] += x
    else:
        m[a, b] += x
        m[b, a] += x


@njit(cache=True)
def _move(theta, sizes, m, dsum, kcount, i, deg, r, s):
    for t in range(sizes.shape[0]):
        k = kcount[t]
        if k != 0:
            _add(m, r, t, -k)
            _add(m, s, t, k)
    sizes[r] -= 1
    sizes[s] += 1
    dsum[r] -= deg
    dsum[s] += deg
    theta[i] = s


@njit(cache=True)
def _neighbor_prob(kcount, deg, m, dsum, target, eps):
    n_blocks = dsum.shape[0]
    tot = 0.0
    for t in range(n_blocks):
        if kcount[t] == 0:
            continue
        e = m[t, target]
        if t == target:
            e *= 2
        tot += kcount[t] / deg * (e + eps) / (dsum[t] + eps * n_blocks)
    return tot


@njit(cache=True)
def _neighbor_draw(indptr, indices, theta, m, dsum, i, eps):
    n_blocks = dsum.shape[0]
    deg = indptr[i + 1] - indptr[i]
    j = indices[indptr[i] + np.random.randint(deg)]
    t = theta[j]
    if np.random.random() * (dsum[t] + eps * n_blocks) < eps * n_blocks:
        return np.random.randint(n_blocks)
    u = np.random.random() * dsum[t]
    acc = 0.0
    for s in range(n_blocks):
        e = m[t, s]
        if s == t:
            e *= 2
        acc += e
        if u < acc:
            return s
    return n_blocks - 1


@njit(cache=True)
def log_acceptance(indptr, indices, theta, sizes, m, dsum, logp, log1mp, kcount, i, s, neighborhood, eps):
    """Log MH ratio for moving node ``i`` to block ``s``; state is left unchanged.

    Returns -inf when the move would empty a block and 0 for a no-op.
    ``kcount`` is scratch space of length n_blocks.
    """
    r = theta[i]
    if s == r:
        return 0.0
    if sizes[r] == 1:
        return -np.inf
    n_blocks = sizes.shape[0]
    for t in range(n_blocks):
        kcount[t] = 0
    start = indptr[i]
    stop = indptr[i + 1]
    deg = stop - start
    for q in range(start, stop):
        kcount[theta[indices[q]]] += 1
    use_nbr = neighborhood and deg > 0
    fwd = 0.0
    if use_nbr:
        fwd = _neighbor_prob(kcount, deg, m, dsum, s, eps)
    old = _affected_ll(m, sizes, logp, log1mp, r, s)
    nr = sizes[r]
    ns = sizes[s]
    _move(theta, sizes, m, dsum, kcount, i, deg, r, s)
    new = _affected_ll(m, sizes, logp, log1mp, r, s)
    rev = 0.0
    if use_nbr:
        rev = _neighbor_prob(kcount, deg, m, dsum, r, eps)
    _move(theta, sizes, m, dsum, kcount, i, deg, s, r)
    log_a = new - old + np.log(ns + 1.0) - np.log(nr)
    if use_nbr:
        log_a += np.log(rev) - np.log(fwd)
    return log_a


@njit(cache=True)
def label_steps(indptr, indices, theta, sizes, m, dsum, logp, log1mp,
                n_steps, neighborhood, eps, seed, counters):
    """Run ``n_steps`` single-node label-switching proposals."""
    np.random.seed(seed)
    n_nodes = theta.shape[0]
    n_blocks = sizes.shape[0]
    kcount = np.zeros(n_blocks, dtype=np.int64)
    for _ in range(n_steps):
        i = np.random.randint(n_nodes)
        r = theta[i]
        start = indptr[i]
        stop = indptr[i + 1]
        deg = stop - start
        use_nbr = neighborhood and deg > 0
        if use_nbr:
            s = _neighbor_draw(indptr, indices, theta, m, dsum, i, eps)
        else:
            s = np.random.randint(n_blocks)
        counters[PROPOSED] += 1
        if s == r:
            counters[NOOP] += 1
            continue
        if sizes[r] == 1:
            counters[EMPTY] += 1
            continue
        for t in range(n_blocks):
            kcount[t] = 0
        for q in range(start, stop):
            kcount[theta[indices[q]]] += 1
        fwd = 0.0
        if use_nbr:
            fwd = _neighbor_prob(kcount, deg, m, dsum, s, eps)
        old = _affected_ll(m, sizes, logp, log1mp, r, s)
        nr = sizes[r]
        ns = sizes[s]
        _move(theta, sizes, m, dsum, kcount, i, deg, r, s)
        new = _affected_ll(m, sizes, logp, log1mp, r, s)
        log_a = new - old + np.log(ns + 1.0) - np.log(nr)
        if use_nbr:
            rev = _neighbor_prob(kcount, deg, m, dsum, r, eps)
            log_a += np.log(rev) - np.log(fwd)
            counters[OPS] += 2 * n_blocks
        counters[OPS] += deg + 4 * n_blocks
        if log_a >= 0.0 or np.log(np.random.random()) < log_a:
            counters[ACCEPTED] += 1
        else:
            _move(theta, sizes, m, dsum, kcount, i, deg, s, r)


@njit(cache=True)
def count_occupancy(counts, theta):
    for i in range(theta.shape[0]):
        counts[i, theta[i]] += 1
