"""Iterative APP detection and BCJR decoding.

LLRs are natural-log ratios ``ln P(b=0)/P(b=1)`` clipped to +-50.  All
marginalisations are exact log-MAP (max-star with the correction term),
never max-log.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import entr, expit

from . import _kernels
from .bicm import LLR_CLIP, BicmChain, SlotPlan, map_symbols
from .codes import ConvCode

#: Largest number of bits per cooperation frame the exhaustive detector accepts.
DETECTOR_MAX_BITS = 20


class DetectorCapExceeded(ValueError):
    pass


@lru_cache(maxsize=32)
def candidates(plan: SlotPlan) -> tuple[np.ndarray, np.ndarray]:
    """All frame labels ``[C, sum(m)]`` and their symbol vectors ``[C, M]``."""
    nb = plan.bits_per_frame
    if nb > DETECTOR_MAX_BITS:
        raise DetectorCapExceeded(f"{nb} bits per frame exceeds the exhaustive cap {DETECTOR_MAX_BITS}")
    idx = np.arange(1 << nb)
    labels = ((idx[:, None] >> np.arange(nb - 1, -1, -1)) & 1).astype(np.uint8)
    return labels, map_symbols(labels, plan)[:, 0, :]


def _clip(llr):
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)


def app_detect(y: np.ndarray, g: np.ndarray, plan: SlotPlan, priors: np.ndarray | None, n0: float) -> np.ndarray:
    """Extrinsic bit LLRs of every frame from the whitened observation.

    ``y[..., F, M]`` with ``y = z G + w`` and white noise of complex
    variance ``2 n0``; ``g[..., M, M]`` is shared by the ``F`` frames of a
    codeword.  ``priors[..., F, sum(m)]`` are a-priori LLRs; the result has
    the same shape and never depends on a bit's own prior.
    """
    labels, symbols = candidates(plan)
    y = np.asarray(y, dtype=complex)
    nb = labels.shape[1]
    batch = y.shape[:-2]
    n_frames = y.shape[-2]
    if y.shape[-1] != plan.slots or g.shape[-2:] != (plan.slots, plan.slots):
        raise ValueError("dimension mismatch between observation, channel and slot plan")
    priors = np.zeros(batch + (n_frames, nb)) if priors is None else np.asarray(priors, dtype=float)
    # Noise-free images of every candidate for every codeword: [..., C, M].
    images = np.einsum("cm,...mn->...cn", symbols, g)
    yf = np.ascontiguousarray(y.reshape((-1, n_frames, plan.slots)))
    imf = np.ascontiguousarray(np.broadcast_to(images, batch + images.shape[-2:]).reshape((-1,) + images.shape[-2:]))
    pf = np.ascontiguousarray(_clip(priors).reshape((-1, n_frames, nb)))
    out = np.empty(pf.shape)
    _kernels.detect_frames(yf, imf, labels, pf, max(2 * n0, 1e-12), out)
    return _clip(out.reshape(priors.shape))


@dataclass
class DecoderOutput:
    extrinsic: np.ndarray  # coded-bit extrinsic LLRs [..., N]
    info_llr: np.ndarray  # a-posteriori LLRs of information bits [..., K]

    @property
    def decisions(self) -> np.ndarray:
        return (self.info_llr < 0).astype(np.uint8)


def bcjr_decode(code: ConvCode, llr: np.ndarray, k: int) -> DecoderOutput:
    """Log-MAP forward-backward decoding of a zero-terminated codeword.

    ``llr[..., N]`` are channel LLRs of the coded bits in code order.
    """
    llr = np.asarray(llr, dtype=float)
    batch = llr.shape[:-1]
    flat = llr.reshape((-1, llr.shape[-1]))
    steps = code.steps(k)
    grid = np.ascontiguousarray(code.depuncture(flat, k))  # [B, T, n_out]
    app = np.empty(grid.shape)
    info = np.empty((flat.shape[0], k))
    _kernels.bcjr(grid, k, code.next_state, code.outputs, code.info_bit, app, info)
    extrinsic = _clip(app[:, code.keep_mask(steps)] - flat)
    return DecoderOutput(
        extrinsic.reshape(batch + (-1,)),
        _clip(info).reshape(batch + (k,)),
    )


def llr_mutual_information(llr: np.ndarray) -> float:
    """Bit mutual information implied by LLR magnitudes, assuming consistent LLRs."""
    p = expit(-np.abs(np.asarray(llr, dtype=float)))
    return float(1.0 - np.mean(entr(p) + entr(1 - p)) / np.log(2))


@dataclass
class TurboResult:
    decisions: np.ndarray  # [..., K]
    info_llr: np.ndarray
    mi_trace: list[float]  # detector extrinsic MI after each iteration


def turbo_loop(
    y: np.ndarray, g: np.ndarray, n0: float, chain: BicmChain, n_iter: int = 10, trace: bool = True
) -> TurboResult:
    """Alternate APP detection and BCJR decoding ``n_iter`` times.

    ``y[..., F, M]`` is the whitened observation and ``g[..., M, M]`` the
    matching effective channel.  ``n_iter = 1`` is plain BICM reception.
    With ``trace=False`` the mutual-information trace is left empty.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    plan, inter = chain.plan, chain.interleaver
    batch = y.shape[:-2]
    priors = np.zeros(batch + (chain.n_coded,))
    mi = []
    for _ in range(n_iter):
        ext = app_detect(y, g, plan, priors.reshape(batch + (chain.n_frames, -1)), n0)
        ext = ext.reshape(batch + (chain.n_coded,))
        if trace:
            mi.append(llr_mutual_information(ext))
        dec = bcjr_decode(chain.code, inter.deinterleave(ext), chain.k_info)
        priors = inter.interleave(dec.extrinsic)
    return TurboResult(dec.decisions, dec.info_llr, mi)
