"""Recursive systematic convolutional (RSC) codes with optional puncturing.

Generators are octal, most significant bit = current input (D^0).  The
trellis is indexed by the shift-register input ``a`` rather than the
information bit ``u = a ^ feedback(state)``; zero-tail termination then
simply forces ``a = 0`` for the last ``memory`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


def _taps(poly: int, memory: int) -> np.ndarray:
    return np.array([(poly >> (memory - i)) & 1 for i in range(memory + 1)], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class ConvCode:
    name: str
    feedback: int
    feedforward: tuple[int, ...]
    puncture: tuple[tuple[int, ...], ...] | None = None
    # Trellis tables, filled in __post_init__.
    next_state: np.ndarray = field(init=False, repr=False)
    outputs: np.ndarray = field(init=False, repr=False)
    info_bit: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        polys = (self.feedback,) + tuple(self.feedforward)
        memory = max(p.bit_length() for p in polys) - 1
        fb = _taps(self.feedback, memory)
        if memory < 1 or not fb[0]:
            raise ValueError("feedback polynomial must include the D^0 term")
        ffs = [_taps(g, memory) for g in self.feedforward]
        n_states = 1 << memory
        nxt = np.zeros((n_states, 2), dtype=np.int64)
        out = np.zeros((n_states, 2, 1 + len(ffs)), dtype=np.uint8)
        info = np.zeros((n_states, 2), dtype=np.uint8)
        for state in range(n_states):
            reg = [(state >> (memory - 1 - i)) & 1 for i in range(memory)]
            fb_sum = sum(int(fb[i + 1]) & reg[i] for i in range(memory)) & 1
            for a in (0, 1):
                full = [a] + reg
                u = a ^ fb_sum
                nxt[state, a] = (a << (memory - 1)) | (state >> 1)
                info[state, a] = u
                out[state, a, 0] = u
                for j, g in enumerate(ffs):
                    out[state, a, 1 + j] = sum(int(g[i]) & full[i] for i in range(memory + 1)) & 1
        object.__setattr__(self, "next_state", nxt)
        object.__setattr__(self, "outputs", out)
        object.__setattr__(self, "info_bit", info)
        pattern = self.puncture_pattern
        if pattern.shape[1] != self.n_out or not pattern[:, 0].all():
            raise ValueError("puncturing must keep every systematic bit")

    @property
    def memory(self) -> int:
        return int(np.log2(self.next_state.shape[0]))

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_out(self) -> int:
        return self.outputs.shape[2]

    @property
    def puncture_pattern(self) -> np.ndarray:
        if self.puncture is None:
            return np.ones((1, self.n_out), dtype=bool)
        return np.array(self.puncture, dtype=bool)

    @property
    def rate(self) -> Fraction:
        """Nominal rate (input steps per kept output bit over a puncturing period)."""
        p = self.puncture_pattern
        return Fraction(p.shape[0], int(p.sum()))

    def steps(self, k: int) -> int:
        """Trellis length for ``k`` information bits including the zero tail."""
        return k + self.memory

    def keep_mask(self, steps: int) -> np.ndarray:
        p = self.puncture_pattern
        reps = -(-steps // p.shape[0])
        return np.tile(p, (reps, 1))[:steps]

    def n_coded(self, k: int) -> int:
        return int(self.keep_mask(self.steps(k)).sum())

    def k_for_length(self, n: int) -> int:
        """Number of information bits producing exactly ``n`` coded bits."""
        guess = int(n * self.rate) - self.memory
        for k in range(max(1, guess - 4), guess + 5):
            if self.n_coded(k) == n:
                return k
        raise ValueError(f"{self.name}: no information length gives N={n}")

    def systematic_positions(self, k: int) -> np.ndarray:
        """Indices of the systematic bits (tail included) in the coded vector."""
        mask = self.keep_mask(self.steps(k))
        flat_index = np.cumsum(mask.ravel()) - 1
        return flat_index.reshape(mask.shape)[:, 0].copy()

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode ``info[..., K]`` to ``[..., N]`` coded bits (zero-terminated)."""
        info = np.asarray(info, dtype=np.uint8)
        batch, k = info.shape[:-1], info.shape[-1]
        t = self.steps(k)
        state = np.zeros(batch, dtype=np.int64)
        full = np.empty(batch + (t, self.n_out), dtype=np.uint8)
        fb = self.info_bit[:, 0]  # u produced by a = 0 equals the feedback sum
        for step in range(t):
            if step < k:
                a = info[..., step] ^ fb[state]
            else:
                a = np.zeros(batch, dtype=np.int64)
            full[..., step, :] = self.outputs[state, a]
            state = self.next_state[state, a]
        return full[..., self.keep_mask(t)]

    def depuncture(self, values: np.ndarray, k: int, fill=0.0) -> np.ndarray:
        """Scatter ``[..., N]`` values back onto the ``[..., T, n_out]`` trellis grid."""
        mask = self.keep_mask(self.steps(k))
        out = np.full(values.shape[:-1] + mask.shape, fill, dtype=values.dtype)
        out[..., mask] = values
        return out


CODES = {
    "rsc-23-35": ConvCode("rsc-23-35", 0o23, (0o35,)),
    "rsc-133-171": ConvCode("rsc-133-171", 0o133, (0o171,)),
    "rsc-2of3-punct": ConvCode("rsc-2of3-punct", 0o7, (0o5,), ((1, 1), (1, 0))),
    "rsc-1of3": ConvCode("rsc-1of3", 0o7, (0o5, 0o3)),
}


def get_code(name: str) -> ConvCode:
    try:
        return CODES[name]
    except KeyError:
        raise KeyError(f"unknown code {name!r}; known: {sorted(CODES)}") from None
