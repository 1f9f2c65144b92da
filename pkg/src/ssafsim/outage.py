"""Gaussian-input mutual information of the whitened channel and outage curves."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import binomtest

from .channel import ProtocolConfig, ebn0_to_n0, realize

OUTAGE_COLUMNS = ("snr_db", "p_out", "ci_low", "ci_high", "trials")

# Fading draws per batch; bounds memory at ~100 MB for M <= 8.
_BATCH = 1 << 16


def instantaneous_mi(g: np.ndarray, n0: float) -> np.ndarray:
    """Bits per channel use of ``y = z G + w`` with white noise ``2 n0``.

    ``g[..., M, M]``; Gaussian input with unit symbol energy.  Batched.
    """
    g = np.asarray(g)
    m = g.shape[-1]
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    a = np.eye(m) + np.swapaxes(g.conj(), -1, -2) @ g / (2 * n0)
    # a is Hermitian PD, so the log-determinant is real.
    _, logdet = np.linalg.slogdet(a)
    return np.maximum(logdet.real / np.log(2) / m, 0.0)


@dataclass
class OutagePoint:
    snr_db: float
    p_out: float
    ci_low: float
    ci_high: float
    trials: int


def outage_probability(
    rate,
    snr_db,
    cfg: ProtocolConfig,
    trials: int,
    seed: int = 0,
    precoder: np.ndarray | None = None,
) -> list[OutagePoint]:
    """Monte Carlo ``P(I < R)`` on an Eb/N0 grid, with 95 % Wilson intervals.

    Each grid point uses its own stream ``SeedSequence(seed, spawn_key=(i,))``
    so that a point is reproducible on its own.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r = float(Fraction(rate))
    out = []
    for i, snr in enumerate(np.atleast_1d(np.asarray(snr_db, dtype=float))):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        n0 = float(ebn0_to_n0(snr, r))
        point_cfg = cfg.with_n0(n0)
        hits = 0
        done = 0
        while done < trials:
            size = min(_BATCH, trials - done)
            g = realize(point_cfg, rng, size=size).effective(precoder)
            hits += int(np.count_nonzero(instantaneous_mi(g, n0) < r))
            done += size
        ci = binomtest(hits, trials).proportion_ci(confidence_level=0.95, method="wilson")
        out.append(OutagePoint(float(snr), hits / trials, float(ci.low), float(ci.high), trials))
    return out


def rayleigh_outage(rate, snr_db, energy: float = 1.0) -> np.ndarray:
    """Closed-form outage of the scalar channel ``y = sqrt(E) h z + w``."""
    r = float(Fraction(rate))
    n0 = ebn0_to_n0(snr_db, r)
    return 1.0 - np.exp(-(2**r - 1) * 2 * n0 / energy)


def outage_csv(points: list[OutagePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OUTAGE_COLUMNS)
    for p in points:
        writer.writerow([f"{p.snr_db:g}", f"{p.p_out:.6e}", f"{p.ci_low:.6e}", f"{p.ci_high:.6e}", p.trials])
    return buf.getvalue()
