"""Real orthogonal space-time precoders built from algebraic rotations.

A rotation of size ``s`` mixes ``s`` symbols of the cooperation frame.  The
placement rule pairs the highest-diversity slot with the ``s - 1``
lowest-diversity ones, which is what makes the mixed block inherit full
diversity while the untouched slots keep theirs.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .bounds import BoundConfig, MatryoshkaChannel
from .channel import row_fading_sets

#: Angle of the real 2x2 cyclotomic rotation.
CYCLOTOMIC_THETA = 4.15881461

ORTHOGONALITY_TOL = 1e-12

STRATEGIES = ("identity", "single", "multi", "full")


@dataclass(frozen=True, eq=False)
class Precoder:
    matrix: np.ndarray
    spreading: int
    strategy: str = "identity"
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", s)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("precoder must be a square matrix")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown precoder strategy {self.strategy!r}")
        err = np.abs(s @ s.T - np.eye(s.shape[0])).max()
        if err > ORTHOGONALITY_TOL:
            raise ValueError(f"precoder is not orthogonal (max error {err:.2e})")
        support = np.count_nonzero(s, axis=1)
        if support.max() > self.spreading:
            raise ValueError("a row mixes more symbols than the declared spreading")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def identity(m: int) -> Precoder:
    return Precoder(np.eye(m), 1, "identity", f"identity{m}")


def cyclotomic_2x2(theta: float = CYCLOTOMIC_THETA) -> Precoder:
    c, s = np.cos(theta), np.sin(theta)
    return Precoder(np.array([[c, s], [s, -c]]), 2, "full", "cyclotomic2")


def _data_path(name: str):
    return resources.files("ssafsim") / "data" / f"{name}.txt"


def load_rotation(name: str) -> np.ndarray:
    """Read a rotation matrix shipped as a checksummed text file.

    Header lines ``# key: value`` carry the name, size and a SHA-256 of the
    numeric body; the body is row-major decimal.
    """
    path = _data_path(name)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"rotation data file for {name!r} is missing") from exc
    header, body = {}, []
    for line in text.splitlines(keepends=True):
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    digest = hashlib.sha256("".join(body).encode()).hexdigest()
    if header.get("sha256") != digest:
        raise ValueError(f"checksum mismatch in rotation data file {path}")
    if header.get("name") != name:
        raise ValueError(f"data file names {header.get('name')!r}, expected {name!r}")
    mat = np.array([[float(v) for v in line.split()] for line in body])
    if mat.shape != (int(header["size"]),) * 2:
        raise ValueError(f"rotation {name!r} has shape {mat.shape}")
    return mat


def kruskemper_4x4() -> Precoder:
    """4x4 rotation from the totally real quartic field of discriminant 725."""
    return Precoder(load_rotation("kruskemper4"), 4, "full", "kruskemper4")


def rotation(size: int) -> Precoder:
    """Best available full-diversity rotation of a given size."""
    if size == 1:
        return identity(1)
    if size == 2:
        return cyclotomic_2x2()
    if size == 4:
        return kruskemper_4x4()
    raise ValueError(f"no rotation of size {size} available (have 1, 2, 4)")


def _embed(rot: Precoder, m: int, groups: list[list[int]], strategy: str) -> Precoder:
    s = np.eye(m)
    for coords in groups:
        s[np.ix_(coords, coords)] = rot.matrix
    full = len(groups) == 1 and len(groups[0]) == m
    return Precoder(s, rot.size, "full" if full else strategy, f"{rot.name}-{strategy}{m}")


def embed_single(rot: Precoder, m: int) -> Precoder:
    """Apply ``rot`` to the first coordinate and the ``s - 1`` last ones."""
    s = rot.size
    if s > m:
        raise ValueError(f"rotation size {s} exceeds frame length {m}")
    coords = [0] + list(range(m - s + 1, m))
    return _embed(rot, m, [coords], "single")


def embed_multi(rot: Precoder, m: int) -> Precoder:
    """Tile ``m / s`` copies of ``rot``, each pairing the best free slot with the worst ones."""
    s = rot.size
    if m % s:
        raise ValueError(f"rotation size {s} does not divide frame length {m}")
    free = list(range(m))
    groups = []
    while free:
        top = free.pop(0)
        low = [free.pop() for _ in range(s - 1)]
        groups.append(sorted([top] + low))
    return _embed(rot, m, groups, "multi")


def make_precoder(m: int, s: int, strategy: str) -> Precoder:
    """Precoder for a frame of ``m`` slots; ``strategy`` as in :class:`BoundConfig`."""
    if s == 1 or strategy == "none":
        return identity(m)
    rot = rotation(s)
    if strategy == "single_precoder":
        return embed_single(rot, m)
    if strategy == "multi_precoder":
        return embed_multi(rot, m)
    raise ValueError(f"unknown strategy {strategy!r}")


def min_product_distance(s: np.ndarray, radius: int = 4) -> float:
    """Normalised minimum product distance of the lattice ``Z^n S``.

    Exhaustive over non-zero integer vectors with entries in
    ``[-radius, radius]``; the product is scaled to a unit-volume lattice
    and its ``n``-th root taken.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    values = np.arange(-radius, radius + 1)
    best = np.inf
    # Chunk over the first coordinate to keep memory flat.
    rest = np.array(list(itertools.product(values, repeat=n - 1))).reshape(-1, n - 1)
    for first in values:
        v = np.hstack([np.full((len(rest), 1), first), rest])
        if first == 0:
            v = v[np.any(v != 0, axis=1)]
        prod = np.prod(np.abs(v @ s), axis=1)
        best = min(best, prod.min())
    volume = abs(np.linalg.det(s))
    return float((best / volume) ** (1.0 / n))


def equivalent_channel(
    precoder: Precoder, beta: int, alpha: int, n: int, slot_plan: tuple[int, ...] | None = None
) -> MatryoshkaChannel:
    """Detector-output channel derived from the precoder's support.

    Symbol ``z_k`` reaches every row ``r`` of H with ``S[k, r] != 0``; its
    bits see the union of those rows' fading variables (ideal relay links).
    Bits are then grouped by fading set.
    """
    rows = row_fading_sets(beta, alpha)
    m = beta + 1 + alpha
    if precoder.size != m:
        raise ValueError("precoder size does not match the frame length")
    plan = slot_plan or (1,) * m
    total = sum(plan)
    if n % total:
        raise ValueError("N not divisible by the slot plan")
    by_set: dict[frozenset, int] = {}
    for k in range(m):
        if plan[k] == 0:
            continue
        seen = frozenset().union(*(rows[r] for r in np.flatnonzero(precoder.matrix[k])))
        by_set[seen] = by_set.get(seen, 0) + plan[k] * n // total
    sets = sorted(by_set, key=len, reverse=True)
    for outer, inner in zip(sets, sets[1:]):
        if not inner < outer:
            raise ValueError("fading sets are not nested")
    return MatryoshkaChannel(tuple(len(x) for x in sets), tuple(by_set[x] for x in sets))


def for_bound_config(cfg: BoundConfig) -> Precoder:
    return make_precoder(cfg.m_slots, cfg.s, cfg.strategy)
