"""Diversity-order bounds for coded transmission over SSAF relay channels.

The equivalent channel seen by the channel decoder after APP detection is a
nested block-fading ("Matryoshka") channel: block ``i`` carries ``D[i]``
fading variables, each block's set contained in the previous one.  The
functions here build that channel for every protocol/precoder configuration,
evaluate the Singleton-like bound on it, and provide the closed forms.

All rate arithmetic is exact (``fractions.Fraction``) so floors are never
ambiguous.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

STRATEGIES = ("none", "single_precoder", "multi_precoder")

#: Exhaustive codeword enumeration limit for :func:`code_diversity_oracle`.
ORACLE_MAX_DIMENSION = 20


def as_fraction(rate) -> Fraction:
    """Parse ``rate`` (``"p/q"``, int, Fraction) into an exact Fraction.

    Floats are accepted only when they convert to a short exact fraction.
    """
    if isinstance(rate, Fraction):
        return rate
    if isinstance(rate, str):
        return Fraction(rate.strip())
    if isinstance(rate, float):
        frac = Fraction(rate).limit_denominator(1000)
        if abs(float(frac) - rate) > 1e-12:
            raise ValueError(f"cannot represent rate {rate!r} exactly")
        return frac
    return Fraction(rate)


def _check_rate(rc: Fraction) -> Fraction:
    rc = as_fraction(rc)
    if not 0 < rc <= 1:
        raise ValueError(f"coding rate must lie in (0, 1], got {rc}")
    return rc


def _floor(x: Fraction) -> int:
    return math.floor(x)


@dataclass(frozen=True)
class MatryoshkaChannel:
    """Nested block-fading channel ``M(D, L)``.

    ``diversities[i]`` is the number of fading variables observed by block
    ``i`` and ``lengths[i]`` its size in coded bits.  Diversities are
    non-increasing; the first one is the channel's maximum diversity.
    """

    diversities: tuple[int, ...]
    lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "diversities", tuple(int(d) for d in self.diversities))
        object.__setattr__(self, "lengths", tuple(int(n) for n in self.lengths))
        if not self.diversities:
            raise ValueError("empty Matryoshka channel")
        if len(self.diversities) != len(self.lengths):
            raise ValueError("diversities and lengths differ in size")
        if min(self.diversities) < 1 or min(self.lengths) < 1:
            raise ValueError("diversities and lengths must be >= 1")
        if any(b > a for a, b in zip(self.diversities, self.diversities[1:])):
            raise ValueError(f"diversities must be non-increasing: {self.diversities}")

    @property
    def n(self) -> int:
        return sum(self.lengths)

    @property
    def max_diversity(self) -> int:
        return self.diversities[0]

    def block_of_position(self) -> np.ndarray:
        """Block index of every bit position in block-contiguous order."""
        return np.repeat(np.arange(len(self.lengths)), self.lengths)

    def __str__(self):
        return f"M({list(self.diversities)}, {list(self.lengths)})"


@dataclass(frozen=True)
class BoundConfig:
    """Protocol/precoder parameters that determine the equivalent channel."""

    beta: int
    rc: Fraction
    alpha: int = 0
    s: int = 1
    slot_plan: tuple[int, ...] | None = None
    strategy: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "rc", _check_rate(self.rc))
        if self.slot_plan is not None:
            object.__setattr__(self, "slot_plan", tuple(int(m) for m in self.slot_plan))
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.beta == 1 and self.alpha > 0:
            raise ValueError("frame stretching (alpha > 0) needs at least two relays")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 1 <= self.s <= self.m_slots:
            raise ValueError(f"spreading s={self.s} outside [1, M={self.m_slots}]")
        if self.strategy == "none" and self.s != 1:
            raise ValueError("strategy 'none' requires s = 1")
        if self.strategy == "multi_precoder":
            if self.alpha != 0:
                raise ValueError("multi_precoder requires alpha = 0")
            if (self.beta + 1) % self.s:
                raise ValueError("multi_precoder requires s to divide beta + 1")
        if self.slot_plan is not None:
            if len(self.slot_plan) != self.m_slots:
                raise ValueError(f"slot plan needs {self.m_slots} entries")
            if min(self.slot_plan) < 0 or sum(self.slot_plan) == 0:
                raise ValueError("slot plan entries must be >= 0 with a positive sum")

    @property
    def m_slots(self) -> int:
        return self.beta + 1 + self.alpha

    @property
    def plan(self) -> tuple[int, ...]:
        return self.slot_plan if self.slot_plan is not None else (1,) * self.m_slots


def row_diversity(beta: int, alpha: int, row: int) -> int:
    """Fading variables seen by the symbol sent on ``row`` (0-based) of H."""
    m_slots = beta + 1 + alpha
    return min(beta + 1, m_slots - row)


def slot_groups(cfg: BoundConfig) -> list[tuple[int, ...]]:
    """Slots mixed together by the precoder, one tuple per precoding group.

    The single precoder couples the first slot with the ``s - 1`` last ones;
    the multi-precoder repeats that pairing on the remaining slots.
    """
    m_slots = cfg.m_slots
    if cfg.strategy == "none" or cfg.s == 1:
        return [(k,) for k in range(m_slots)]
    if cfg.strategy == "single_precoder":
        mixed = (0,) + tuple(range(m_slots - cfg.s + 1, m_slots))
        rest = [(k,) for k in range(1, m_slots - cfg.s + 1)]
        return [mixed] + rest
    free = list(range(m_slots))
    groups = []
    while free:
        top = free.pop(0)
        low = [free.pop() for _ in range(cfg.s - 1)]
        groups.append(tuple(sorted([top] + low)))
    return groups


def _group_blocks(cfg: BoundConfig) -> tuple[list[int], list[Fraction]]:
    """Diversity and fractional length (share of N) of every slot group."""
    plan = cfg.plan
    total = sum(plan)
    divs, shares = [], []
    for group in slot_groups(cfg):
        divs.append(max(row_diversity(cfg.beta, cfg.alpha, k) for k in group))
        shares.append(Fraction(sum(plan[k] for k in group), total))
    return divs, shares


def slot_block_index(cfg: BoundConfig) -> np.ndarray:
    """Matryoshka block index of each slot, consistent with build_matryoshka."""
    divs, shares = _group_blocks(cfg)
    order = sorted({d for d, sh in zip(divs, shares) if sh > 0}, reverse=True)
    out = np.full(cfg.m_slots, -1, dtype=int)
    for group, d, sh in zip(slot_groups(cfg), divs, shares):
        for k in group:
            out[k] = order.index(d) if sh > 0 else -1
    return out


def build_matryoshka(cfg: BoundConfig, n: int) -> MatryoshkaChannel:
    """Equivalent channel at the detector output for ``n`` coded bits.

    Block lengths follow the slot plan (``m_k N / sum(m)`` per slot); groups
    of precoded slots collapse into one block with the diversity of their
    best slot; blocks of equal diversity are merged, so the ``1 + alpha``
    full-diversity rows of a stretched frame form the first block.
    """
    plan = cfg.plan
    if n % sum(plan):
        raise ValueError(f"N={n} not divisible by sum of slot plan {sum(plan)}")
    divs, shares = _group_blocks(cfg)
    merged: dict[int, int] = {}
    for d, sh in zip(divs, shares):
        length = sh * n
        if length.denominator != 1:
            raise ValueError(f"block length {length} is not an integer")
        if length:
            merged[d] = merged.get(d, 0) + int(length)
    ds = sorted(merged, reverse=True)
    return MatryoshkaChannel(tuple(ds), tuple(merged[d] for d in ds))


def delta_max_generic(ch: MatryoshkaChannel, rc) -> int:
    """Upper bound on the diversity of a rate-``rc`` code over ``ch``.

    Returns ``D[i]`` for the block ``i`` in which the ``K``-th bit falls,
    ``K = rc * N``.  A non-integral ``K`` is rounded up with a warning.
    """
    rc = _check_rate(rc)
    k = rc * ch.n
    if k.denominator != 1:
        warnings.warn(f"Rc*N = {k} is not an integer; using ceil", stacklevel=2)
    k = math.ceil(k)
    cum = 0
    for d, length in zip(ch.diversities, ch.lengths):
        cum += length
        if k <= cum:
            return d
    raise AssertionError("unreachable: K <= N")


def delta_closed_form(beta: int, alpha: int, s: int, rc) -> int:
    """``min(s + floor((beta+1+alpha)(1-rc)), beta+1)``.

    Covers the non-precoded bound (s=1, alpha=0), the single-precoder bound
    (alpha=0), the stretched-frame bound (s=1) and its precoded variant.
    """
    rc = _check_rate(rc)
    if beta < 1 or alpha < 0 or s < 1:
        raise ValueError("need beta >= 1, alpha >= 0, s >= 1")
    if beta == 1 and alpha > 0:
        raise ValueError("frame stretching (alpha > 0) needs at least two relays")
    m_slots = beta + 1 + alpha
    return min(s + _floor(m_slots * (1 - rc)), beta + 1)


def delta_multi_precoder(beta: int, s: int, rc) -> int:
    """Bound with ``(beta+1)/s`` independent rotations of size ``s``."""
    rc = _check_rate(rc)
    if s < 1 or (beta + 1) % s:
        raise ValueError(f"s={s} must divide beta+1={beta + 1}")
    n_rot = (beta + 1) // s
    return min((beta + 1) - n_rot + 1 + _floor((1 - rc) * n_rot), beta + 1)


def delta_unequal_m(beta: int, s: int, m: Sequence[int], rc) -> int:
    """Bound for per-slot spectral efficiencies ``m`` (length beta+1).

    With ``s > 1`` the first slot's symbol is precoded with the ``s-1``
    last ones, so its bits are counted together.
    """
    rc = _check_rate(rc)
    m = [int(v) for v in m]
    if len(m) != beta + 1:
        raise ValueError(f"need {beta + 1} spectral efficiencies, got {len(m)}")
    if min(m) < 0 or sum(m) == 0:
        raise ValueError("spectral efficiencies must be >= 0, not all zero")
    if not 1 <= s <= beta + 1:
        raise ValueError("s outside [1, beta+1]")
    merged = [m[0] + sum(m[beta + 1 - g] for g in range(1, s))] + m[1 : beta + 2 - s]
    total = sum(m)
    cum = 0
    for i, mi in enumerate(merged, start=1):
        cum += mi
        if rc <= Fraction(cum, total):
            return beta + 2 - i
    raise AssertionError("unreachable: rc <= 1")


def max_full_diversity_rate(beta: int, alpha: int = 0, s: int = 1) -> Fraction:
    """Largest coding rate that still reaches diversity beta+1."""
    return min(Fraction(s + alpha, beta + 1 + alpha), Fraction(1))


# -- brute-force achievability oracle ---------------------------------------


def gf2_rank(mat: np.ndarray) -> int:
    a = (np.array(mat, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if a[r, c]), None)
        if pivot is None:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        for r in range(rows):
            if r != rank and a[r, c]:
                a[r] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass(frozen=True, eq=False)
class BinaryLinearCode:
    """Binary linear code given by a full-rank ``K x N`` generator matrix."""

    generator: np.ndarray
    systematic_positions: tuple[int, ...] | None = None

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.uint8) & 1
        if g.ndim != 2:
            raise ValueError("generator must be a 2-D matrix")
        object.__setattr__(self, "generator", g)
        if gf2_rank(g) != g.shape[0]:
            raise ValueError("generator matrix is rank deficient")
        if self.systematic_positions is not None:
            pos = tuple(int(p) for p in self.systematic_positions)
            object.__setattr__(self, "systematic_positions", pos)
            if len(pos) != self.k or not np.array_equal(g[:, pos], np.eye(self.k, dtype=np.uint8)):
                raise ValueError("declared systematic positions do not hold an identity")

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def systematic(self) -> bool:
        return self.systematic_positions is not None

    @classmethod
    def systematic_from_parity(cls, parity: np.ndarray) -> "BinaryLinearCode":
        parity = np.asarray(parity, dtype=np.uint8)
        k = parity.shape[0]
        gen = np.hstack([np.eye(k, dtype=np.uint8), parity])
        return cls(gen, tuple(range(k)))

    def permuted(self, perm: Sequence[int]) -> "BinaryLinearCode":
        """Code whose position ``p`` carries original bit ``perm[p]``."""
        perm = np.asarray(perm)
        gen = self.generator[:, perm]
        sys_pos = None
        if self.systematic:
            inverse = np.argsort(perm)
            sys_pos = tuple(int(inverse[p]) for p in self.systematic_positions)
        return BinaryLinearCode(gen, sys_pos)


class EnumerationCapExceeded(ValueError):
    pass


def _pack_columns(gen: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pack selected generator columns of each row into uint64 words."""
    k = gen.shape[0]
    n_words = max(1, -(-len(cols) // 64))
    out = np.zeros((k, n_words), dtype=np.uint64)
    for j, c in enumerate(cols):
        out[:, j // 64] |= gen[:, c].astype(np.uint64) << np.uint64(j % 64)
    return out


def code_diversity_oracle(code: BinaryLinearCode, ch: MatryoshkaChannel) -> int:
    """Exact diversity of ``code`` on ``ch`` by enumerating all codewords.

    Position ``p`` of the code is sent on block ``ch.block_of_position()[p]``.
    The pairwise error diversity of two codewords is the diversity of the
    first block where they differ, so by linearity the result is the minimum
    of that quantity over non-zero codewords.
    """
    if code.n != ch.n:
        raise ValueError(f"code length {code.n} != channel length {ch.n}")
    if code.k > ORACLE_MAX_DIMENSION:
        raise EnumerationCapExceeded(f"K={code.k} exceeds 2^{ORACLE_MAX_DIMENSION} codewords")
    blocks = ch.block_of_position()
    # Codewords are built by doubling: cw[2^j : 2^(j+1)] = cw[:2^j] ^ row_j.
    # first_block tracks, per codeword, the first block with a non-zero bit.
    first_block = np.full(1 << code.k, len(ch.lengths), dtype=np.int64)
    for b in range(len(ch.lengths) - 1, -1, -1):
        rows = _pack_columns(code.generator, np.flatnonzero(blocks == b))
        words = np.zeros((1 << code.k, rows.shape[1]), dtype=np.uint64)
        for j in range(code.k):
            half = 1 << j
            words[half : 2 * half] = words[:half] ^ rows[j]
        first_block[np.any(words != 0, axis=1)] = b
    hit = first_block[1:]
    if np.any(hit == len(ch.lengths)):
        raise AssertionError("non-zero codeword with no non-zero bit; generator rank deficient")
    return int(np.asarray(ch.diversities)[hit].min())


# -- tables -------------------------------------------------------------------


@dataclass
class BoundTable:
    rc: Fraction
    betas: list[int]
    s_values: list[int]
    cells: dict[tuple[int, int], int]

    def rows(self) -> list[list[str]]:
        out = []
        for beta in self.betas:
            out.append([str(beta)] + [str(self.cells.get((beta, s), "")) for s in self.s_values])
        return out

    def to_text(self) -> str:
        header = ["beta\\s"] + [str(s) for s in self.s_values]
        body = self.rows()
        widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
        lines = [f"delta_max,2 for Rc = {self.rc}"]
        for r in [header] + body:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rc", "beta", "s", "delta"])
        for (beta, s), d in sorted(self.cells.items()):
            writer.writerow([str(self.rc), beta, s, d])
        return buf.getvalue()


def emit_bound_tables(rc, beta_range: Iterable[int], s_range: Iterable[int]) -> BoundTable:
    """Single-precoder bound over a (beta, s) grid; cells with s > beta+1 are left out."""
    rc = _check_rate(rc)
    betas, s_values = list(beta_range), list(s_range)
    cells = {
        (beta, s): delta_closed_form(beta, 0, s, rc)
        for beta in betas
        for s in s_values
        if s <= beta + 1
    }
    return BoundTable(rc, betas, s_values, cells)


def bound_for(cfg: BoundConfig) -> int:
    """Closed-form bound matching the configuration's strategy."""
    if cfg.slot_plan is not None and len(set(cfg.slot_plan)) > 1:
        if cfg.alpha:
            return delta_max_generic(build_matryoshka(cfg, sum(cfg.plan) * cfg.rc.denominator), cfg.rc)
        return delta_unequal_m(cfg.beta, cfg.s, cfg.slot_plan, cfg.rc)
    if cfg.strategy == "multi_precoder":
        return delta_multi_precoder(cfg.beta, cfg.s, cfg.rc)
    return delta_closed_form(cfg.beta, cfg.alpha, cfg.s, cfg.rc)
