"""Transmit chain: coded bits -> interleaver -> per-slot Gray QAM -> frames.

Bits travel in "channel order": cooperation frame after cooperation frame,
``sum(m)`` bits per frame, slot ``k`` taking ``m_k`` consecutive bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .bounds import BoundConfig, MatryoshkaChannel, build_matryoshka, slot_block_index
from .codes import ConvCode
from .precoder import Precoder, for_bound_config

LLR_CLIP = 50.0


@dataclass(frozen=True)
class SlotPlan:
    """Bits per symbol in each slot of the cooperation frame."""

    m: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        if not m or min(m) < 0 or sum(m) == 0:
            raise ValueError("slot plan needs non-negative entries with a positive sum")
        for v in m:
            if v > 1 and v % 2:
                raise ValueError(f"odd constellation size m={v} is not supported")

    @classmethod
    def uniform(cls, m: int, slots: int) -> "SlotPlan":
        return cls((m,) * slots)

    @property
    def slots(self) -> int:
        return len(self.m)

    @property
    def bits_per_frame(self) -> int:
        return sum(self.m)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.m)])

    def rate(self, rc) -> Fraction:
        """Information bits per channel use, ``Rc * sum(m) / M``."""
        return Fraction(rc) * Fraction(sum(self.m), len(self.m))

    def bit_slots(self) -> np.ndarray:
        """Slot index of each bit within one frame."""
        return np.repeat(np.arange(self.slots), self.m)


def _gray_to_index(label: int, bits: int) -> int:
    idx, shift = label, 1
    while shift < bits:
        idx ^= idx >> shift
        shift <<= 1
    return idx


@lru_cache(maxsize=None)
def qam(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray-labelled unit-energy constellation with ``2^m`` points.

    Returns ``(points, labels)`` where ``labels[i]`` are the ``m`` bits
    (first bit = most significant) of ``points[i]``.  BPSK for ``m = 1``;
    square QAM otherwise, first half of the label on the in-phase axis.
    """
    if m < 1 or (m > 1 and m % 2):
        raise ValueError(f"unsupported constellation size m={m}")
    idx = np.arange(1 << m)
    labels = ((idx[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)
    if m == 1:
        return np.array([1.0 + 0j, -1.0 + 0j]), labels
    half = m // 2
    levels = 1 << half

    def axis(values):
        i = np.array([_gray_to_index(int(v), half) for v in values])
        return (levels - 1) - 2 * i

    i_part = axis(idx >> half)
    q_part = axis(idx & (levels - 1))
    scale = np.sqrt(2 * (levels**2 - 1) / 3)
    return (i_part + 1j * q_part) / scale, labels


def map_symbols(bits: np.ndarray, plan: SlotPlan) -> np.ndarray:
    """Map channel-ordered bits ``[..., F * sum(m)]`` to symbols ``[..., F, M]``."""
    bits = np.asarray(bits, dtype=np.int64)
    per = plan.bits_per_frame
    if bits.shape[-1] % per:
        raise ValueError(f"{bits.shape[-1]} bits do not fill whole frames of {per}")
    frames = bits.reshape(bits.shape[:-1] + (-1, per))
    out = np.zeros(frames.shape[:-1] + (plan.slots,), dtype=complex)
    off = plan.offsets
    for k, mk in enumerate(plan.m):
        if mk == 0:
            continue
        weights = 1 << np.arange(mk - 1, -1, -1)
        label = frames[..., off[k] : off[k + 1]] @ weights
        out[..., k] = qam(mk)[0][label]
    return out


def demap_llr_reference(y, h, noise_var: float, m: int, prior=None) -> np.ndarray:
    """Exact per-bit LLRs ``ln P(b=0|y)/P(b=1|y)`` for ``y = h z + w``.

    ``noise_var`` is the complex noise variance.  Optional ``prior`` LLRs
    (``[..., m]``) are included, so the result is the a-posteriori LLR.
    """
    points, labels = qam(m)
    y = np.asarray(y)[..., None]
    h = np.asarray(h)[..., None]
    metric = -np.abs(y - h * points) ** 2 / noise_var
    if prior is not None:
        metric = metric - np.asarray(prior)[..., None, :] @ labels.T.astype(float)
    zero = labels.T == 0
    l0 = logsumexp(np.where(zero, metric[..., None, :], -np.inf), axis=-1)
    l1 = logsumexp(np.where(~zero, metric[..., None, :], -np.inf), axis=-1)
    return l0 - l1


@dataclass(frozen=True, eq=False)
class InterleaverPlan:
    """``perm[p]`` is the coded-bit index sent at channel position ``p``."""

    perm: np.ndarray
    blocks: np.ndarray
    seed: int

    def __post_init__(self):
        n = len(self.perm)
        if not np.array_equal(np.sort(self.perm), np.arange(n)):
            raise ValueError("interleaver is not a permutation")

    @property
    def n(self) -> int:
        return len(self.perm)

    def interleave(self, coded: np.ndarray) -> np.ndarray:
        return np.asarray(coded)[..., self.perm]

    def deinterleave(self, values: np.ndarray) -> np.ndarray:
        out = np.empty_like(values)
        out[..., self.perm] = values
        return out

    def code_blocks(self) -> np.ndarray:
        """Matryoshka block carrying each coded bit."""
        out = np.empty_like(self.blocks)
        out[self.perm] = self.blocks
        return out


def _spread_order(positions: np.ndarray, frames: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Order positions round-robin over frames so neighbours land in distinct frames."""
    positions = rng.permutation(positions)
    frame_ids = np.unique(frames[positions])
    rank = {f: r for r, f in enumerate(rng.permutation(frame_ids))}
    # Within each frame, the j-th visited position gets round j.
    seen: dict[int, int] = {}
    rounds = np.empty(len(positions), dtype=np.int64)
    for i, p in enumerate(positions):
        f = int(frames[p])
        rounds[i] = seen.get(f, 0)
        seen[f] = rounds[i] + 1
    keys = np.array([rank[int(frames[p])] for p in positions])
    return positions[np.lexsort((keys, rounds))]


def build_interleaver(
    n: int,
    channel: MatryoshkaChannel,
    systematic_positions,
    seed: int,
    position_blocks: np.ndarray | None = None,
    position_frames: np.ndarray | None = None,
) -> InterleaverPlan:
    """Diversity-constrained interleaver.

    Systematic bits fill the Matryoshka blocks in decreasing diversity order,
    parity bits take what is left.  Within a block, consecutive coded bits go
    to distinct cooperation frames (round-robin over a seeded frame order).
    ``position_blocks`` maps channel positions to blocks; by default blocks
    are contiguous runs of ``channel.lengths``.
    """
    if n != channel.n:
        raise ValueError(f"N={n} does not match channel length {channel.n}")
    blocks = channel.block_of_position() if position_blocks is None else np.asarray(position_blocks)
    if len(blocks) != n:
        raise ValueError("position_blocks has the wrong length")
    counts = np.bincount(blocks, minlength=len(channel.lengths))
    if tuple(counts) != channel.lengths:
        raise ValueError(f"block sizes {tuple(counts)} do not match {channel.lengths}")
    frames = np.arange(n) if position_frames is None else np.asarray(position_frames)
    sys_pos = np.unique(np.asarray(systematic_positions, dtype=np.int64))
    if len(sys_pos) > n or (len(sys_pos) and (sys_pos.min() < 0 or sys_pos.max() >= n)):
        raise ValueError("systematic positions outside the codeword")
    parity = np.setdiff1d(np.arange(n), sys_pos)
    rng = np.random.default_rng(seed)
    slots = np.concatenate(
        [_spread_order(np.flatnonzero(blocks == b), frames, rng) for b in range(len(channel.lengths))]
    )
    perm = np.empty(n, dtype=np.int64)
    perm[slots] = np.concatenate([sys_pos, parity])
    return InterleaverPlan(perm, blocks, seed)


@dataclass(frozen=True, eq=False)
class BicmChain:
    """Code + interleaver + slot plan + precoder for one cooperation protocol."""

    code: ConvCode
    plan: SlotPlan
    interleaver: InterleaverPlan
    precoder: Precoder
    k_info: int
    channel: MatryoshkaChannel

    @property
    def n_coded(self) -> int:
        return self.interleaver.n

    @property
    def n_frames(self) -> int:
        return self.n_coded // self.plan.bits_per_frame

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Channel-ordered coded bits for ``info[..., K]``."""
        return self.interleaver.interleave(self.code.encode(info))

    def transmit_symbols(self, info: np.ndarray) -> np.ndarray:
        """QAM symbol vectors ``z[..., F, M]`` (before precoding)."""
        return map_symbols(self.encode(info), self.plan)


def build_chain(code: ConvCode, plan: SlotPlan, bound_cfg: BoundConfig, n_coded: int, seed: int) -> BicmChain:
    """Assemble the chain whose interleaver honours the equivalent Matryoshka channel."""
    if bound_cfg.plan != plan.m:
        raise ValueError("slot plan differs from the bound configuration's")
    channel = build_matryoshka(bound_cfg, n_coded)
    k = code.k_for_length(n_coded)
    slot_block = slot_block_index(bound_cfg)
    per_frame = slot_block[plan.bit_slots()]
    n_frames = n_coded // plan.bits_per_frame
    position_blocks = np.tile(per_frame, n_frames)
    position_frames = np.repeat(np.arange(n_frames), plan.bits_per_frame)
    inter = build_interleaver(
        n_coded, channel, code.systematic_positions(k), seed, position_blocks, position_frames
    )
    return BicmChain(code, plan, inter, for_bound_config(bound_cfg), k, channel)
