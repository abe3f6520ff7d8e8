"""Pure numpy versions of the batch evaluators in ``_kernels.pyx``."""

import numpy as np

POSITIVE = 1e-15
_CHUNK = 1 << 15


def _plogp_sum(x, axes):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(x > 0, -x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
    return t.sum(axis=axes)


def _rates(Q, pS, pSU, pSV, hU, hV):
    h_a_s = _plogp_sum(Q, axes=2) @ pS
    pau = np.einsum("nsa,su->nau", Q, pSU)
    pav = np.einsum("nsa,sv->nav", Q, pSV)
    ra = _plogp_sum(pau, axes=(1, 2)) - hU - h_a_s
    rb = _plogp_sum(pav, axes=(1, 2)) - hV - h_a_s
    return np.maximum(ra, 0.0), np.maximum(rb, 0.0)


def star_batch(Q, pS, pSU, pSV, hU, hV, dmat, W, ncomp):
    Q = np.asarray(Q, dtype=float)
    outs = [_star_chunk(Q[i : i + _CHUNK], pS, pSU, pSV, hU, hV, dmat, W)
            for i in range(0, len(Q), _CHUNK)]
    if not outs:
        return np.empty(0), np.empty(0), np.empty(0)
    return tuple(np.concatenate(parts) for parts in zip(*outs))


def _star_chunk(Q, pS, pSU, pSV, hU, hV, dmat, W):
    ra, rb = _rates(Q, pS, pSU, pSV, hU, hV)
    S = Q.shape[1]
    live = (Q > POSITIVE) & (pS > POSITIVE)[None, :, None]
    mask = (live * (1 << np.arange(S))[None, :, None]).sum(axis=1)  # (N, K)
    Wm = W[mask]  # (N, K, S, C); padded components carry zero weight
    weights = Q.transpose(0, 2, 1)[..., None] * Wm
    cost = np.einsum("nksc,sh->nkch", weights, dmat)
    dist = cost.min(axis=3).sum(axis=(1, 2))
    return ra, rb, dist


def qb_batch(Q, pS, pSU, pSV, hU, hV, dmat):
    Q = np.asarray(Q, dtype=float)
    ra, rb = _rates(Q, pS, pSU, pSV, hU, hV)
    dist = np.einsum("s,nsa,sa->n", pS, Q, dmat)
    return ra, rb, dist
