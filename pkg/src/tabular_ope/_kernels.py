"""Hot loops: episode rollout and visit tallying.

Each kernel exists twice, a numba version (``*_numba``) and a vectorised
numpy version (``*_numpy``). Both consume the same precomputed cumulative
tables and the same counter-based uniforms, so they return identical arrays.
:func:`rollout` and :func:`tally` dispatch on :data:`tabular_ope._jit.BACKEND`.
"""

import numpy as np

from . import _jit
from ._jit import njit
from ._rng import STREAM_EPISODE, uniform, uniform_array

NOISE_DETERMINISTIC = 0
NOISE_BERNOULLI = 1

# per-step counter slots
_SLOT_INIT = 0
_SLOT_ACTION = 1
_SLOT_NEXT = 2
_SLOT_REWARD = 3


def cumulative(p):
    """Cumulative table along the last axis, pinned to exactly 1 at the last positive entry.

    Sampling picks the first index whose cumulative value exceeds the uniform
    draw, so pinning guarantees zero-probability tail entries are never chosen.
    """
    p = np.asarray(p, dtype=np.float64)
    c = np.cumsum(p, axis=-1)
    k = p.shape[-1]
    positive = p > 0
    last = k - 1 - np.argmax(positive[..., ::-1], axis=-1)
    idx = np.arange(k)
    c = np.where(idx >= last[..., None], 1.0, c)
    return np.ascontiguousarray(c)


@njit(inline="always")
def _pick(cum, u):
    k = cum.shape[0]
    for j in range(k):
        if u < cum[j]:
            return j
    return k - 1


@njit(nogil=True)
def rollout_numba(P_cum, d1_cum, mu_cum, r, noise, key, n, first):
    H, S, A = r.shape
    states = np.empty((n, H), dtype=np.int64)
    actions = np.empty((n, H), dtype=np.int64)
    rewards = np.empty((n, H), dtype=np.float64)
    four = np.uint64(4)
    shift = np.uint64(4)
    tag = np.uint64(STREAM_EPISODE)
    for i in range(n):
        stream = (np.uint64(first + i) << shift) | tag
        s = _pick(d1_cum, uniform(key, stream, np.uint64(_SLOT_INIT)))
        for t in range(H):
            base = np.uint64(t) * four
            states[i, t] = s
            a = _pick(mu_cum[t, s], uniform(key, stream, base + np.uint64(_SLOT_ACTION)))
            actions[i, t] = a
            mean = r[t, s, a]
            if noise == NOISE_BERNOULLI:
                u = uniform(key, stream, base + np.uint64(_SLOT_REWARD))
                rewards[i, t] = 1.0 if u < mean else 0.0
            else:
                rewards[i, t] = mean
            if t < H - 1:
                s = _pick(P_cum[t, s, a], uniform(key, stream, base + np.uint64(_SLOT_NEXT)))
    return states, actions, rewards


def _pick_rows(cum_rows, u):
    return np.minimum((u[:, None] >= cum_rows).sum(axis=1), cum_rows.shape[1] - 1)


def rollout_numpy(P_cum, d1_cum, mu_cum, r, noise, key, n, first):
    H, S, A = r.shape
    ep = np.arange(first, first + n, dtype=np.uint64)
    stream = (ep << np.uint64(4)) | np.uint64(STREAM_EPISODE)
    states = np.empty((n, H), dtype=np.int64)
    actions = np.empty((n, H), dtype=np.int64)
    rewards = np.empty((n, H), dtype=np.float64)
    u0 = uniform_array(key, stream, np.uint64(_SLOT_INIT))
    s = _pick_rows(np.broadcast_to(d1_cum, (n, S)), u0)
    for t in range(H):
        base = np.uint64(t * 4)
        states[:, t] = s
        a = _pick_rows(mu_cum[t, s], uniform_array(key, stream, base + np.uint64(_SLOT_ACTION)))
        actions[:, t] = a
        mean = r[t, s, a]
        if noise == NOISE_BERNOULLI:
            u = uniform_array(key, stream, base + np.uint64(_SLOT_REWARD))
            rewards[:, t] = np.where(u < mean, 1.0, 0.0)
        else:
            rewards[:, t] = mean
        if t < H - 1:
            s = _pick_rows(P_cum[t, s, a], uniform_array(key, stream, base + np.uint64(_SLOT_NEXT)))
    return states, actions, rewards


@njit(nogil=True)
def tally_numba(states, actions, rewards, S, A):
    n, H = states.shape
    n_sa = np.zeros((H, S, A), dtype=np.int64)
    n_sas = np.zeros((max(H - 1, 0), S, A, S), dtype=np.int64)
    r_sum = np.zeros((H, S, A), dtype=np.float64)
    n_init = np.zeros(S, dtype=np.int64)
    for i in range(n):
        n_init[states[i, 0]] += 1
        for t in range(H):
            s = states[i, t]
            a = actions[i, t]
            n_sa[t, s, a] += 1
            r_sum[t, s, a] += rewards[i, t]
            if t < H - 1:
                n_sas[t, s, a, states[i, t + 1]] += 1
    return n_sa, n_sas, r_sum, n_init


def tally_numpy(states, actions, rewards, S, A):
    n, H = states.shape
    t = np.arange(H)[None, :]
    cell = ((t * S + states) * A + actions).ravel()
    n_sa = np.bincount(cell, minlength=H * S * A).reshape(H, S, A).astype(np.int64)
    r_sum = np.bincount(cell, weights=rewards.ravel(), minlength=H * S * A).reshape(H, S, A)
    if H > 1:
        trans = ((((t[:, :-1] * S + states[:, :-1]) * A + actions[:, :-1]) * S) + states[:, 1:]).ravel()
        n_sas = np.bincount(trans, minlength=(H - 1) * S * A * S).reshape(H - 1, S, A, S).astype(np.int64)
    else:
        n_sas = np.zeros((0, S, A, S), dtype=np.int64)
    n_init = np.bincount(states[:, 0], minlength=S).astype(np.int64)
    return n_sa, n_sas, r_sum, n_init


def rollout(P_cum, d1_cum, mu_cum, r, noise, key, n, first=0):
    args = (
        np.ascontiguousarray(P_cum),
        np.ascontiguousarray(d1_cum),
        np.ascontiguousarray(mu_cum),
        np.ascontiguousarray(r, dtype=np.float64),
        int(noise),
        np.uint64(key),
        int(n),
        int(first),
    )
    if _jit.BACKEND == "numba":
        return rollout_numba(*args)
    return rollout_numpy(*args)


def tally(states, actions, rewards, S, A):
    states = np.ascontiguousarray(states, dtype=np.int64)
    actions = np.ascontiguousarray(actions, dtype=np.int64)
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    if _jit.BACKEND == "numba":
        return tally_numba(states, actions, rewards, int(S), int(A))
    return tally_numpy(states, actions, rewards, int(S), int(A))
