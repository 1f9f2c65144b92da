"""Seeded Monte Carlo WER experiments, presets and result files.

Every SNR point is split into fixed-size chunks; chunk ``c`` of point ``p``
draws from ``SeedSequence(seed, spawn_key=(p, c))``.  Chunks are consumed in
index order and the stopping rule is applied to that ordered stream, so the
result depends only on the configuration and the master seed, never on the
number of workers.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bicm import BicmChain, SlotPlan, build_chain
from .bounds import BoundConfig, EnumerationCapExceeded, bound_for, build_matryoshka
from .channel import ProtocolConfig, ebn0_to_n0, realize, simulate_frame
from .codes import CODES, get_code
from .receiver import DETECTOR_MAX_BITS, turbo_loop

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "snr_db",
    "frames",
    "bit_errors",
    "word_errors",
    "ber",
    "wer",
    "seed",
    "interleaver_seed",
    "config_hash",
)
TIMING_COLUMNS = ("snr_db", "frames", "wall_time_s")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class CapExceeded(ValueError):
    """A configuration needs more than an exhaustive cap allows (CLI exit code 3)."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    protocol: ProtocolConfig
    code: str
    slot_plan: tuple[int, ...]
    n_coded: int
    s: int = 1
    strategy: str = "none"
    n_iter: int = 10
    snr_db: tuple[float, ...] = tuple(float(x) for x in range(0, 25, 3))
    min_word_errors: int = 100
    max_frames: int = 100_000
    batch: int = 100
    seed: int = 0
    interleaver_seed: int = 0
    outage_trials: int = 0  # 0 disables the outage overlay

    @property
    def rc(self) -> Fraction:
        return get_code(self.code).rate

    @property
    def rate(self) -> Fraction:
        """Information bits per channel use used for the Eb/N0 axis."""
        return self.rc * Fraction(sum(self.slot_plan), len(self.slot_plan))

    def bound_config(self) -> BoundConfig:
        p = self.protocol
        return BoundConfig(p.beta, self.rc, p.alpha, self.s, self.slot_plan, self.strategy)

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = [float(x) for x in self.snr_db]
        return d

    def config_hash(self) -> str:
        """Short digest of everything that affects the simulated numbers."""
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ResultRow:
    snr_db: float
    frames: int
    bit_errors: int
    word_errors: int
    info_bits: int  # per codeword
    seed: int
    interleaver_seed: int
    config_hash: str
    wall_time: float = field(default=0.0, compare=False)

    @property
    def wer(self) -> float:
        return self.word_errors / self.frames if self.frames else float("nan")

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.info_bits) if self.frames else float("nan")


@dataclass(frozen=True)
class Validation:
    delta: int
    channel: str
    k_info: int


def validate(cfg: ExperimentConfig) -> Validation:
    """Check a configuration; the bound module runs first.

    Raises :class:`ConfigError` or :class:`CapExceeded`.
    """
    if cfg.code not in CODES:
        raise ConfigError(f"unknown code {cfg.code!r}; known: {sorted(CODES)}")
    try:
        bcfg = cfg.bound_config()
        delta = bound_for(bcfg)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"bound configuration rejected: {exc}") from exc
    if len(cfg.slot_plan) != cfg.protocol.m_slots:
        raise ConfigError(f"slot plan needs {cfg.protocol.m_slots} entries")
    try:
        plan = SlotPlan(cfg.slot_plan)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if plan.bits_per_frame > DETECTOR_MAX_BITS:
        raise CapExceeded(f"{plan.bits_per_frame} bits per frame exceeds the detector cap {DETECTOR_MAX_BITS}")
    if cfg.n_coded % plan.bits_per_frame:
        raise ConfigError(f"N={cfg.n_coded} is not a multiple of {plan.bits_per_frame} bits per frame")
    try:
        channel = build_matryoshka(bcfg, cfg.n_coded)
        k = get_code(cfg.code).k_for_length(cfg.n_coded)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.n_iter < 1 or cfg.batch < 1 or cfg.max_frames < 1 or cfg.min_word_errors < 1:
        raise ConfigError("n_iter, batch, max_frames and min_word_errors must be positive")
    if not cfg.snr_db:
        raise ConfigError("empty SNR grid")
    return Validation(delta, str(channel), k)


def build_experiment_chain(cfg: ExperimentConfig) -> BicmChain:
    return build_chain(
        get_code(cfg.code), SlotPlan(cfg.slot_plan), cfg.bound_config(), cfg.n_coded, cfg.interleaver_seed
    )


def simulate_chunk(cfg: ExperimentConfig, chain: BicmChain, snr_db: float, rng: np.random.Generator, size: int):
    """``(bit_errors, word_errors)`` over ``size`` codewords, one fading draw each."""
    n0 = float(ebn0_to_n0(snr_db, float(cfg.rate)))
    proto = cfg.protocol.with_n0(n0)
    info = rng.integers(0, 2, (size, chain.k_info), dtype=np.uint8)
    z = chain.transmit_symbols(info)
    real = realize(proto, rng, size=size)
    s = chain.precoder.matrix
    y = simulate_frame(z, s, real, rng) @ real.psi_inv
    res = turbo_loop(y, real.effective(s), n0, chain, cfg.n_iter, trace=False)
    wrong = np.count_nonzero(res.decisions != info, axis=1)
    return int(wrong.sum()), int(np.count_nonzero(wrong))


def _chunk_size(cfg: ExperimentConfig, index: int) -> int:
    return max(0, min(cfg.batch, cfg.max_frames - index * cfg.batch))


def _chunk_rng(cfg: ExperimentConfig, point: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(point, index)))


# Per-process state for pool workers.
_WORKER: dict = {}


def _worker_init(cfg: ExperimentConfig):
    _WORKER["cfg"] = cfg
    _WORKER["chain"] = build_experiment_chain(cfg)


def _worker_run(point: int, snr: float, index: int):
    cfg, chain = _WORKER["cfg"], _WORKER["chain"]
    return simulate_chunk(cfg, chain, snr, _chunk_rng(cfg, point, index), _chunk_size(cfg, index))


def _run_point(cfg, point, snr, submit):
    """Consume chunk results in index order until the stopping rule fires."""
    bits = words = frames = 0
    index = 0
    pending = {}
    n_chunks = -(-cfg.max_frames // cfg.batch)
    ahead = 0
    while True:
        # Keep a window of chunks in flight; results past the stop are discarded.
        while ahead < n_chunks and len(pending) < submit.window:
            pending[ahead] = submit(point, snr, ahead)
            ahead += 1
        b, w = pending.pop(index).result()
        bits, words, frames = bits + b, words + w, frames + _chunk_size(cfg, index)
        index += 1
        if words >= cfg.min_word_errors or index >= n_chunks:
            for fut in pending.values():
                fut.cancel()
            return bits, words, frames


class _Inline:
    """Synchronous stand-in for an executor."""

    window = 1

    def __init__(self, cfg):
        self.cfg = cfg
        self.chain = build_experiment_chain(cfg)

    def __call__(self, point, snr, index):
        result = simulate_chunk(self.cfg, self.chain, snr, _chunk_rng(self.cfg, point, index), _chunk_size(self.cfg, index))
        return _Done(result)


class _Done:
    def __init__(self, value):
        self.value = value

    def result(self):
        return self.value

    def cancel(self):
        return False


class _Pool:
    def __init__(self, executor, workers):
        self.executor = executor
        self.window = 2 * workers

    def __call__(self, point, snr, index):
        return self.executor.submit(_worker_run, point, snr, index)


def run_wer(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list[ResultRow]:
    """Simulate every SNR point until ``min_word_errors`` or ``max_frames``.

    ``progress(row)`` is called after each point.
    """
    check = validate(cfg)
    log.info("%s: predicted diversity %d on %s", cfg.name, check.delta, check.channel)
    digest = cfg.config_hash()
    rows = []
    executor = ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(cfg,)) if workers > 1 else None
    try:
        submit = _Pool(executor, workers) if executor else _Inline(cfg)
        for point, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            bits, words, frames = _run_point(cfg, point, float(snr), submit)
            elapsed = time.perf_counter() - t0
            row = ResultRow(float(snr), frames, bits, words, check.k_info, cfg.seed, cfg.interleaver_seed, digest, elapsed)
            rows.append(row)
            log.info("%s: %g dB  frames=%d  word errors=%d  WER=%.3e", cfg.name, snr, frames, words, row.wer)
            if progress:
                progress(row)
    finally:
        if executor:
            executor.shutdown(cancel_futures=True)
    return rows


# -- presets ------------------------------------------------------------------


def _ssaf(beta: int, alpha: int = 0, energies=None) -> ProtocolConfig:
    return ProtocolConfig(beta=beta, alpha=alpha, energies=energies, relay_mode="ideal")


def _strategy(s: int) -> str:
    return "single_precoder" if s > 1 else "none"


def presets() -> dict[str, tuple[ExperimentConfig, ...]]:
    """The four experiment families, each a tuple of variants."""
    e1 = tuple(
        ExperimentConfig(f"E1-s{s}", _ssaf(1), "rsc-23-35", (6, 6), 1296, s=s, strategy=_strategy(s))
        for s in (1, 2)
    )
    e2 = (
        ExperimentConfig("E2-rc13-16qam", _ssaf(2), "rsc-1of3", (4, 4, 4), 1296),
        ExperimentConfig("E2-rc23-qpsk-s2", _ssaf(2), "rsc-2of3-punct", (2, 2, 2), 1296, s=2, strategy=_strategy(2)),
        ExperimentConfig("E2-rc23-qpsk", _ssaf(2), "rsc-2of3-punct", (2, 2, 2), 1296),
        ExperimentConfig("E2-unequal-642", _ssaf(2), "rsc-1of3", (6, 4, 2), 1296),
        ExperimentConfig("E2-orthogonal", _ssaf(2, energies=(1.0, 0.0, 0.0)), "rsc-2of3-punct", (6, 0, 0), 1296),
    )
    e3 = (
        ExperimentConfig("E3-s4-full", _ssaf(3), "rsc-133-171", (2,) * 4, 1296, s=4, strategy="single_precoder"),
        ExperimentConfig("E3-s2-single", _ssaf(3), "rsc-133-171", (2,) * 4, 1296, s=2, strategy="single_precoder"),
        ExperimentConfig("E3-s2-multi", _ssaf(3), "rsc-133-171", (2,) * 4, 1296, s=2, strategy="multi_precoder"),
        ExperimentConfig("E3-alpha2", _ssaf(3, alpha=2), "rsc-133-171", (2,) * 6, 1296),
    )
    e4 = tuple(
        ExperimentConfig(f"E4-s{s}", _ssaf(2), "rsc-2of3-punct", (1, 1, 1), 1440, s=s, strategy=_strategy(s))
        for s in (1, 2)
    )
    return {"E1": e1, "E2": e2, "E3": e3, "E4": e4}


def find_preset(name: str) -> tuple[ExperimentConfig, ...]:
    """A whole family (``E4``) or one variant (``E4-s2``)."""
    table = presets()
    if name in table:
        return table[name]
    for family in table.values():
        for cfg in family:
            if cfg.name == name:
                return (cfg,)
    known = sorted(table) + [c.name for f in table.values() for c in f]
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(known)}")


# -- output -------------------------------------------------------------------


def _metadata(cfg: ExperimentConfig, check: Validation) -> list[str]:
    return [
        f"# experiment: {cfg.name}",
        f"# snr axis: Eb/N0 in dB, Eb = Es/R, R = Rc*sum(m)/M = {cfg.rate} bit per channel use",
        f"# predicted diversity: {check.delta} on {check.channel}",
        f"# config hash: {cfg.config_hash()}",
    ]


def emit_csv(rows: list[ResultRow], cfg: ExperimentConfig | None = None) -> str:
    """Result table; ``#`` lines carry metadata when ``cfg`` is given."""
    buf = io.StringIO()
    if cfg is not None:
        buf.write("\n".join(_metadata(cfg, validate(cfg))) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                f"{r.snr_db:g}",
                r.frames,
                r.bit_errors,
                r.word_errors,
                f"{r.ber:.6e}",
                f"{r.wer:.6e}",
                r.seed,
                r.interleaver_seed,
                r.config_hash,
            ]
        )
    return buf.getvalue()


def parse_csv(text: str) -> list[dict[str, str]]:
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(lines))


def emit_timing(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIMING_COLUMNS)
    for r in rows:
        writer.writerow([f"{r.snr_db:g}", r.frames, f"{r.wall_time:.3f}"])
    return buf.getvalue()


def emit_plotdata(rows: list[ResultRow], outage=None) -> str:
    """``snr_db, wer`` (plus ``p_out``) for plotting.

    ``outage`` is a list of outage points on the same SNR grid; a different
    grid raises ``ValueError``.
    """
    snr = [r.snr_db for r in rows]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if outage is None:
        writer.writerow(["snr_db", "wer"])
        for r in rows:
            writer.writerow([f"{r.snr_db:g}", f"{r.wer:.6e}"])
        return buf.getvalue()
    osnr = [p.snr_db for p in outage]
    if len(osnr) != len(snr) or not np.allclose(osnr, snr, rtol=0, atol=1e-9):
        raise ValueError(f"outage grid {osnr} does not match the WER grid {snr}")
    writer.writerow(["snr_db", "wer", "p_out"])
    for r, p in zip(rows, outage):
        writer.writerow([f"{r.snr_db:g}", f"{r.wer:.6e}", f"{p.p_out:.6e}"])
    return buf.getvalue()


def write_outputs(out_dir: Path, cfg: ExperimentConfig, rows: list[ResultRow], outage=None) -> dict[str, Path]:
    """Write ``<name>.csv``, ``<name>_plot.csv`` and ``<name>_timing.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out_dir / f"{cfg.name}.csv",
        "plotdata": out_dir / f"{cfg.name}_plot.csv",
        "timing": out_dir / f"{cfg.name}_timing.csv",
    }
    paths["results"].write_text(emit_csv(rows, cfg))
    paths["plotdata"].write_text(emit_plotdata(rows, outage))
    paths["timing"].write_text(emit_timing(rows))
    return paths


# -- config files -------------------------------------------------------------

#: Every accepted key, by section, with a one-line description.
CONFIG_KEYS = {
    "experiment": {
        "name": "label used for output file names",
        "snr": "Eb/N0 grid in dB as lo:hi:step (inclusive) or a comma list",
        "seed": "master seed (unsigned integer)",
        "min_word_errors": "stop a point after this many word errors (default 100)",
        "max_frames": "stop a point after this many codewords (default 100000)",
        "batch": "codewords per chunk; part of the random stream layout (default 100)",
        "outage_trials": "fading draws per point for the outage overlay; 0 disables (default 0)",
    },
    "protocol": {
        "beta": "number of relays",
        "alpha": "extra slots of the stretched frame (default 0)",
        "energies": "comma list of M source energy shares (default 1, 0.5, ...)",
        "relay_mode": "faded | ideal | off (default ideal)",
        "normalization": "instantaneous | statistical relay gains (default instantaneous)",
        "g_sd": "average power gain of the source-destination link (default 1)",
        "g_sr": "average power gain of source-relay links (default 100)",
        "g_rd": "average power gain of relay-destination links (default 1)",
        "g_rr": "average power gain of inter-relay links (default 100)",
    },
    "bicm": {
        "code": "code registry name",
        "slot_plan": "comma list of bits per symbol in each slot",
        "n_coded": "coded bits per codeword N",
        "interleaver_seed": "seed of the interleaver permutation (default 0)",
    },
    "precoder": {
        "s": "spreading factor (default 1)",
        "strategy": "none | single_precoder | multi_precoder (default none)",
    },
    "receiver": {
        "iterations": "detector/decoder iterations (default 10)",
    },
}


def parse_snr(text: str) -> tuple[float, ...]:
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return tuple(round(lo + i * step, 10) for i in range(n))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad SNR grid {text!r}; use lo:hi:step or a comma list") from None


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def load_config(text: str) -> ExperimentConfig:
    """Build an experiment from INI-style text (see :data:`CONFIG_KEYS`)."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    get = lambda sec, key, default=None: parser.get(sec, key, fallback=default)  # noqa: E731
    try:
        energies = get("protocol", "energies")
        proto = ProtocolConfig(
            beta=int(get("protocol", "beta", "0")),
            alpha=int(get("protocol", "alpha", "0")),
            energies=tuple(float(v) for v in energies.split(",")) if energies else None,
            relay_mode=get("protocol", "relay_mode", "ideal"),
            normalization=get("protocol", "normalization", "instantaneous"),
            g_sd=float(get("protocol", "g_sd", "1")),
            g_sr=float(get("protocol", "g_sr", "100")),
            g_rd=float(get("protocol", "g_rd", "1")),
            g_rr=float(get("protocol", "g_rr", "100")),
        )
        for sec, key in (("bicm", "code"), ("bicm", "slot_plan"), ("bicm", "n_coded")):
            if get(sec, key) is None:
                raise ConfigError(f"missing key {key!r} in [{sec}]")
        cfg = ExperimentConfig(
            name=get("experiment", "name", "experiment"),
            protocol=proto,
            code=get("bicm", "code"),
            slot_plan=_ints(get("bicm", "slot_plan")),
            n_coded=int(get("bicm", "n_coded")),
            s=int(get("precoder", "s", "1")),
            strategy=get("precoder", "strategy", "none"),
            n_iter=int(get("receiver", "iterations", "10")),
            snr_db=parse_snr(get("experiment", "snr", "0:24:3")),
            min_word_errors=int(get("experiment", "min_word_errors", "100")),
            max_frames=int(get("experiment", "max_frames", "100000")),
            batch=int(get("experiment", "batch", "100")),
            seed=int(get("experiment", "seed", "0")),
            interleaver_seed=int(get("bicm", "interleaver_seed", "0")),
            outage_trials=int(get("experiment", "outage_trials", "0")),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.seed < 0:
        raise ConfigError("seed must be unsigned")
    validate(cfg)
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that :func:`load_config` reads back to an equal config."""
    p = cfg.protocol
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "name": cfg.name,
        "snr": ", ".join(f"{x:g}" for x in cfg.snr_db),
        "seed": str(cfg.seed),
        "min_word_errors": str(cfg.min_word_errors),
        "max_frames": str(cfg.max_frames),
        "batch": str(cfg.batch),
        "outage_trials": str(cfg.outage_trials),
    }
    parser["protocol"] = {
        "beta": str(p.beta),
        "alpha": str(p.alpha),
        "energies": ", ".join(repr(e) for e in p.energies),
        "relay_mode": p.relay_mode,
        "normalization": p.normalization,
        "g_sd": repr(p.g_sd),
        "g_sr": repr(p.g_sr),
        "g_rd": repr(p.g_rd),
        "g_rr": repr(p.g_rr),
    }
    parser["bicm"] = {
        "code": cfg.code,
        "slot_plan": ", ".join(str(m) for m in cfg.slot_plan),
        "n_coded": str(cfg.n_coded),
        "interleaver_seed": str(cfg.interleaver_seed),
    }
    parser["precoder"] = {"s": str(cfg.s), "strategy": cfg.strategy}
    parser["receiver"] = {"iterations": str(cfg.n_iter)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
