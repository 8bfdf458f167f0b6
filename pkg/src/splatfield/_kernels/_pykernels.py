"""Pure numpy fallback for the compiled kernels.

Queries are processed in fixed-size chunks so peak memory stays bounded at
large K; the chunk size does not depend on the thread count, so results are
reproducible. ``num_threads`` is accepted for signature parity and ignored.
"""

import numpy as np

_CHUNK_ELEMS = 1 << 21


def _chunks(Q, K):
    step = max(1, _CHUNK_ELEMS // max(K, 1))
    for start in range(0, Q, step):
        yield slice(start, min(Q, start + step))


def _mahalanobis2(x, mu, prec):
    # (q, k, d) differences against per-primitive precision matrices
    diff = x[:, None, :] - mu[None, :, :]
    row = np.einsum("kij,qkj->qki", prec, diff)
    return np.einsum("qki,qki->qk", diff, row)


def basis_matrix(x, mu, prec, num_threads=1):
    Q, K = x.shape[0], mu.shape[0]
    out = np.empty((Q, K))
    for sl in _chunks(Q, K):
        out[sl] = np.exp(-0.5 * _mahalanobis2(x[sl], mu, prec))
    return out


def shepard_eval(x, mu, prec, w, amp, floor, num_threads=1):
    Q, K, C = x.shape[0], mu.shape[0], amp.shape[1]
    values = np.empty((Q, C))
    mass = np.empty(Q)
    for sl in _chunks(Q, K * max(C, 1)):
        wphi = w * np.exp(-0.5 * _mahalanobis2(x[sl], mu, prec))
        m = wphi.sum(axis=1)
        mass[sl] = m
        values[sl] = (wphi[:, :, None] * amp[None, :, :]).sum(axis=1) / (m + floor)[:, None]
    return values, mass


def shepard_weight_sums(x, mu, prec, w, floor, num_threads=1):
    Q, K = x.shape[0], mu.shape[0]
    total = np.empty(Q)
    mass = np.empty(Q)
    for sl in _chunks(Q, K):
        wphi = w * np.exp(-0.5 * _mahalanobis2(x[sl], mu, prec))
        m = wphi.sum(axis=1)
        mass[sl] = m
        total[sl] = (wphi / (m + floor)[:, None]).sum(axis=1)
    return total, mass


def moment_sum(x, mu, prec, w, order, floor, num_threads=1):
    Q, K = x.shape[0], mu.shape[0]
    moments = np.empty(Q)
    mass = np.empty(Q)
    for sl in _chunks(Q, K):
        xs = x[sl]
        wphi = w * np.exp(-0.5 * _mahalanobis2(xs, mu, prec))
        m = wphi.sum(axis=1)
        mass[sl] = m
        if order == 0:
            acc = m
        else:
            r = np.sqrt(((xs[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2))
            acc = (wphi * r**order).sum(axis=1)
        moments[sl] = acc / (m + floor)
    return moments, mass


def farthest_point_indices(pts, K, anchor):
    idx = np.empty(K, dtype=np.intp)
    if K == 0:
        return idx
    best = int(np.argmin(((pts - anchor) ** 2).sum(axis=1)))
    idx[0] = best
    mind = ((pts - pts[best]) ** 2).sum(axis=1)
    for j in range(1, K):
        best = int(np.argmax(mind))
        idx[j] = best
        np.minimum(mind, ((pts - pts[best]) ** 2).sum(axis=1), out=mind)
    return idx
