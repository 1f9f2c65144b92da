"""Compiled inner loops of the receiver (exact log-MAP, no max-log shortcuts)."""

from __future__ import annotations

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, inline="always")
def maxstar(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def detect_frames(y, images, labels, priors, noise, out):
    """Per-bit extrinsic LLRs over an exhaustive candidate list.

    y[B, F, M], images[B, C, M], labels[C, nb] (uint8), priors[B, F, nb].
    Uses ext_k = APP_k - prior_k, which equals excluding the bit's own prior.
    """
    nb_batch, n_frames, m = y.shape
    n_cand, nb = labels.shape
    metric = np.empty(n_cand)
    for b in range(nb_batch):
        for f in range(n_frames):
            for c in range(n_cand):
                d = 0.0
                for j in range(m):
                    e = y[b, f, j] - images[b, c, j]
                    d += e.real * e.real + e.imag * e.imag
                acc = -d / noise
                for k in range(nb):
                    if labels[c, k]:
                        acc -= priors[b, f, k]
                metric[c] = acc
            for k in range(nb):
                top0 = NEG_INF
                top1 = NEG_INF
                for c in range(n_cand):
                    if labels[c, k]:
                        if metric[c] > top1:
                            top1 = metric[c]
                    elif metric[c] > top0:
                        top0 = metric[c]
                s0 = 0.0
                s1 = 0.0
                for c in range(n_cand):
                    if labels[c, k]:
                        s1 += np.exp(metric[c] - top1)
                    else:
                        s0 += np.exp(metric[c] - top0)
                out[b, f, k] = (top0 + np.log(s0)) - (top1 + np.log(s1)) - priors[b, f, k]


@njit(cache=True)
def bcjr(grid, k, next_state, outputs, info_bit, app, info):
    """Forward-backward over a zero-terminated trellis indexed by register input.

    grid[B, T, n_out] are channel LLRs (0 where punctured).  Fills
    app[B, T, n_out] with a-posteriori LLRs of every output and info[B, k]
    with those of the information bits.
    """
    nb_batch, steps, n_out = grid.shape
    n_states = next_state.shape[0]
    gamma = np.empty((steps, n_states, 2))
    alpha = np.empty((steps + 1, n_states))
    beta = np.empty((steps + 1, n_states))
    num = np.empty(n_out + 1)
    den = np.empty(n_out + 1)
    joint = np.empty((n_states, 2))
    for b in range(nb_batch):
        for t in range(steps):
            for s in range(n_states):
                for a in range(2):
                    if t >= k and a == 1:
                        gamma[t, s, a] = NEG_INF
                        continue
                    g = 0.0
                    for o in range(n_out):
                        v = 0.5 * grid[b, t, o]
                        g += -v if outputs[s, a, o] else v
                    gamma[t, s, a] = g
        alpha[0, :] = NEG_INF
        alpha[0, 0] = 0.0
        for t in range(steps):
            alpha[t + 1, :] = NEG_INF
            for s in range(n_states):
                if alpha[t, s] == NEG_INF:
                    continue
                for a in range(2):
                    ns = next_state[s, a]
                    alpha[t + 1, ns] = maxstar(alpha[t + 1, ns], alpha[t, s] + gamma[t, s, a])
            top = alpha[t + 1].max()
            for s in range(n_states):
                alpha[t + 1, s] -= top
        beta[steps, :] = NEG_INF
        beta[steps, 0] = 0.0
        for t in range(steps - 1, -1, -1):
            for s in range(n_states):
                acc = NEG_INF
                for a in range(2):
                    acc = maxstar(acc, gamma[t, s, a] + beta[t + 1, next_state[s, a]])
                beta[t, s] = acc
            top = beta[t].max()
            for s in range(n_states):
                beta[t, s] -= top
        for t in range(steps):
            top = NEG_INF
            for s in range(n_states):
                for a in range(2):
                    j = alpha[t, s] + gamma[t, s, a] + beta[t + 1, next_state[s, a]]
                    joint[s, a] = j
                    if j > top:
                        top = j
            num[:] = 0.0
            den[:] = 0.0
            for s in range(n_states):
                for a in range(2):
                    e = np.exp(joint[s, a] - top)
                    for o in range(n_out):
                        if outputs[s, a, o]:
                            den[o] += e
                        else:
                            num[o] += e
                    if info_bit[s, a]:
                        den[n_out] += e
                    else:
                        num[n_out] += e
            for o in range(n_out):
                app[b, t, o] = np.log(num[o]) - np.log(den[o])
            if t < k:
                info[b, t] = np.log(num[n_out]) - np.log(den[n_out])
