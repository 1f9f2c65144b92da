"""Sequential slotted amplify-and-forward (SSAF) channel.

Slot ``i`` (1-based, ``i = 1..M``) carries source symbol ``x_i`` with energy
``E_i`` while the relay that listened in slot ``i-1`` forwards its scaled
observation with energy ``1 - E_i``.  Relays take turns round-robin.  Over a
cooperation frame the destination sees ``y = x H + w_c`` with ``H`` upper
triangular and coloured noise ``w_c`` of covariance ``2 N0 Theta``.

Arrays follow a row-vector convention (``y = z S H``) and every function
accepts leading batch axes: one fading draw per codeword, many codewords at
once.  Per-link AWGN is circularly symmetric with ``E|w|^2 = 2 N0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

RELAY_MODES = ("faded", "ideal", "off")
NORMALIZATIONS = ("instantaneous", "statistical")


def effective_relay_index(i: int, beta: int) -> int:
    """Physical relay (1-based) acting as the ``i``-th effective relay."""
    if i < 1 or beta < 1:
        raise ValueError("need i >= 1 and beta >= 1")
    return (i - 1) % beta + 1


@dataclass(frozen=True)
class ProtocolConfig:
    """Static parameters of an M-slot, beta-relay SSAF protocol.

    ``relay_mode`` selects how the source-relay and inter-relay links behave:
    ``faded`` draws them with gains ``g_sr``/``g_rr`` and adds relay noise,
    ``ideal`` makes them unit and noiseless, ``off`` disables cooperation.
    """

    beta: int
    alpha: int = 0
    energies: tuple[float, ...] | None = None
    n0: float = 0.5
    g_sd: float = 1.0
    g_sr: float = 100.0
    g_rd: float = 1.0
    g_rr: float = 100.0
    relay_mode: str = "faded"
    normalization: str = "instantaneous"

    def __post_init__(self):
        if self.beta < 1 or self.alpha < 0:
            raise ValueError("need beta >= 1 and alpha >= 0")
        if self.beta == 1 and self.alpha > 0:
            raise ValueError("a single relay cannot listen and forward in consecutive slots")
        if self.energies is None:
            object.__setattr__(self, "energies", (1.0,) + (0.5,) * (self.m_slots - 1))
        e = tuple(float(v) for v in self.energies)
        object.__setattr__(self, "energies", e)
        if len(e) != self.m_slots:
            raise ValueError(f"need {self.m_slots} slot energies, got {len(e)}")
        if any(not 0.0 <= v <= 1.0 for v in e):
            raise ValueError("slot energies must lie in [0, 1]")
        if self.n0 < 0:
            raise ValueError("n0 must be >= 0")
        if self.relay_mode not in RELAY_MODES:
            raise ValueError(f"relay_mode must be one of {RELAY_MODES}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")

    @property
    def m_slots(self) -> int:
        return self.beta + 1 + self.alpha

    @property
    def relay_noise_var(self) -> float:
        return 2 * self.n0 if self.relay_mode == "faded" else 0.0

    def with_n0(self, n0: float) -> "ProtocolConfig":
        return replace(self, n0=n0)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with ``E|x|^2 = var``."""
    scale = np.sqrt(var / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class FadingRealization:
    """Physical link fadings; leading axes of every array are batch axes.

    ``h_rr[..., j, l]`` is the link from relay ``j`` to relay ``l``
    (0-based); its diagonal is unused.
    """

    h_sd: np.ndarray
    h_sr: np.ndarray
    h_rd: np.ndarray
    h_rr: np.ndarray

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.shape(self.h_sd)


def draw_fading(cfg: ProtocolConfig, rng: np.random.Generator, size=()) -> FadingRealization:
    """Quasi-static fading: one draw per codeword (per entry of ``size``)."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    b = cfg.beta
    h_sd = complex_normal(rng, size, cfg.g_sd)
    h_rd = complex_normal(rng, size + (b,), cfg.g_rd)
    if cfg.relay_mode == "faded":
        h_sr = complex_normal(rng, size + (b,), cfg.g_sr)
        h_rr = complex_normal(rng, size + (b, b), cfg.g_rr)
    else:
        h_sr = np.ones(size + (b,), dtype=complex)
        h_rr = np.ones(size + (b, b), dtype=complex)
    return FadingRealization(h_sd, h_sr, h_rd, h_rr)


def _slot_links(fading: FadingRealization, cfg: ProtocolConfig):
    """Per-slot effective fadings ĥ_{s r_i}, ĥ_{r_i d}, ĥ_{r_i r_{i+1}} (0-based i)."""
    m = cfg.m_slots
    idx = np.array([effective_relay_index(i, cfg.beta) - 1 for i in range(1, m + 1)])
    h_sr = fading.h_sr[..., idx]
    h_rd = fading.h_rd[..., idx]
    h_rr = fading.h_rr[..., idx[:-1], idx[1:]]
    return h_sr, h_rd, h_rr


def relay_gains(fading: FadingRealization, cfg: ProtocolConfig) -> np.ndarray:
    """Amplification ``gamma_i`` of the relay listening in slot ``i`` (i=1..M-1).

    Instantaneous mode scales each relay so that ``E|gamma_i y_{r_i}|^2 = 1``
    given the fading draw; statistical mode uses link gains instead.
    Returned with shape ``batch + (M-1,)``.
    """
    m = cfg.m_slots
    batch = fading.batch_shape
    if cfg.relay_mode == "off":
        return np.zeros(batch + (m - 1,))
    e = np.asarray(cfg.energies)
    sigma_r = cfg.relay_noise_var
    if cfg.normalization == "statistical":
        p_sr = np.full(batch + (m,), cfg.g_sr if cfg.relay_mode == "faded" else 1.0)
        p_rr = np.full(batch + (m - 1,), cfg.g_rr if cfg.relay_mode == "faded" else 1.0)
    else:
        h_sr, _, h_rr = _slot_links(fading, cfg)
        p_sr, p_rr = np.abs(h_sr) ** 2, np.abs(h_rr) ** 2
    gamma = np.zeros(batch + (m - 1,))
    prev_power = np.zeros(batch)
    prev_gamma = np.zeros(batch)
    for i in range(m - 1):
        inter = p_rr[..., i - 1] if i > 0 else np.zeros(batch)
        power = e[i] * p_sr[..., i] + (1 - e[i]) * prev_gamma**2 * inter * prev_power + sigma_r
        if np.any(power <= 0):
            raise ValueError("relay receives zero power; gain undefined")
        gamma[..., i] = 1 / np.sqrt(power)
        prev_power, prev_gamma = power, gamma[..., i]
    return gamma


def cascade_coefficients(fading: FadingRealization, gamma: np.ndarray, cfg: ProtocolConfig) -> np.ndarray:
    """``C[..., i, j]``: coefficient of relay observation ``y_{r_i}`` in ``y_{d_j}``.

    Non-zero only for ``j > i``; the relay in slot ``i`` forwards in slot
    ``i+1`` and its signal keeps propagating through the relay chain.
    """
    m = cfg.m_slots
    e = np.asarray(cfg.energies)
    _, h_rd, h_rr = _slot_links(fading, cfg)
    c = np.zeros(fading.batch_shape + (m, m), dtype=complex)
    for i in range(m - 2, -1, -1):
        hop = np.sqrt(1 - e[i + 1]) * gamma[..., i]
        c[..., i, i + 1] = hop * h_rd[..., i]
        c[..., i, i + 2 :] = (hop * h_rr[..., i])[..., None] * c[..., i + 1, i + 2 :]
    return c


def build_H(fading: FadingRealization, gamma: np.ndarray, cfg: ProtocolConfig) -> np.ndarray:
    """Upper-triangular cooperation-frame channel matrix (row = transmitted slot)."""
    e = np.asarray(cfg.energies)
    h_sr, _, _ = _slot_links(fading, cfg)
    c = cascade_coefficients(fading, gamma, cfg)
    h = (np.sqrt(e) * h_sr)[..., :, None] * c
    diag = np.sqrt(e) * np.asarray(fading.h_sd)[..., None]
    idx = np.arange(cfg.m_slots)
    h[..., idx, idx] = diag
    return h


def noise_covariance(fading: FadingRealization, gamma: np.ndarray, cfg: ProtocolConfig) -> np.ndarray:
    """Normalised covariance ``Theta = E[w_c^H w_c] / (2 N0)``.

    ``w_c = w_d + w_r C``; destination noise gives the identity and each
    relay's noise arrives through its cascade row of ``C``.
    """
    c = cascade_coefficients(fading, gamma, cfg)
    ratio = 1.0 if cfg.relay_mode == "faded" else 0.0
    eye = np.eye(cfg.m_slots)
    return eye + ratio * np.conj(np.swapaxes(c, -1, -2)) @ c


def whiten(theta: np.ndarray) -> np.ndarray:
    """Inverse of the upper Cholesky factor ``Psi`` with ``Theta = Psi^H Psi``."""
    try:
        lower = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError as exc:
        raise ValueError("noise covariance is not positive definite") from exc
    psi = np.conj(np.swapaxes(lower, -1, -2))
    eye = np.broadcast_to(np.eye(theta.shape[-1]), theta.shape)
    return np.linalg.solve(psi, eye)


@dataclass(frozen=True)
class ChannelRealization:
    """Everything the receiver knows about one (batch of) cooperation channel(s)."""

    cfg: ProtocolConfig
    fading: FadingRealization
    gamma: np.ndarray
    H: np.ndarray
    theta: np.ndarray
    psi_inv: np.ndarray = field(repr=False)

    @classmethod
    def from_fading(cls, cfg: ProtocolConfig, fading: FadingRealization) -> "ChannelRealization":
        gamma = relay_gains(fading, cfg)
        h = build_H(fading, gamma, cfg)
        theta = noise_covariance(fading, gamma, cfg)
        return cls(cfg, fading, gamma, h, theta, whiten(theta))

    def effective(self, precoder: np.ndarray | None = None) -> np.ndarray:
        """Whitened effective matrix ``G = S H Psi^{-1}``."""
        hp = self.H @ self.psi_inv
        return hp if precoder is None else np.asarray(precoder) @ hp


def realize(cfg: ProtocolConfig, rng: np.random.Generator, size=()) -> ChannelRealization:
    return ChannelRealization.from_fading(cfg, draw_fading(cfg, rng, size))


def simulate_frame(
    z: np.ndarray,
    precoder: np.ndarray | None,
    realization: ChannelRealization,
    rng: np.random.Generator,
    return_relays: bool = False,
):
    """Transmit symbol vectors ``z[..., F, M]`` through the slot-by-slot cascade.

    Noise is drawn per link (destination and each relay), not from
    ``Theta``, so the colouring is produced by the protocol itself.  With
    ``return_relays`` the scaled relay transmissions ``gamma_i y_{r_i}``
    are returned as well (shape ``z.shape[:-1] + (M-1,)``).
    """
    cfg = realization.cfg
    m = cfg.m_slots
    z = np.asarray(z)
    if z.shape[-1] != m:
        raise ValueError(f"symbol vectors must have length M={m}, got {z.shape[-1]}")
    x = z if precoder is None else z @ np.asarray(precoder)
    e = np.asarray(cfg.energies)
    fading, gamma = realization.fading, realization.gamma
    h_sr, h_rd, h_rr = _slot_links(fading, cfg)
    # Broadcast per-codeword quantities over the frame axis.
    expand = lambda a: np.asarray(a)[..., None]  # noqa: E731
    h_sd = expand(fading.h_sd)
    sigma_d = 2 * cfg.n0
    sigma_r = cfg.relay_noise_var
    y_d = np.empty(x.shape, dtype=complex)
    relay_out = np.zeros(x.shape[:-1] + (m - 1,), dtype=complex)
    forwarded = np.zeros(x.shape[:-1], dtype=complex)  # gamma_{i-1} y_{r_{i-1}}
    for i in range(m):
        src = np.sqrt(e[i]) * x[..., i]
        y_d[..., i] = h_sd * src + complex_normal(rng, x.shape[:-1], sigma_d)
        if i > 0:
            y_d[..., i] += np.sqrt(1 - e[i]) * expand(h_rd[..., i - 1]) * forwarded
        if i == m - 1:
            break
        y_r = expand(h_sr[..., i]) * src
        if i > 0:
            y_r = y_r + np.sqrt(1 - e[i]) * expand(h_rr[..., i - 1]) * forwarded
        if sigma_r:
            y_r = y_r + complex_normal(rng, x.shape[:-1], sigma_r)
        forwarded = expand(gamma[..., i]) * y_r
        relay_out[..., i] = forwarded
    if return_relays:
        return y_d, relay_out
    return y_d


def row_fading_sets(beta: int, alpha: int = 0) -> list[frozenset[str]]:
    """Fading variables each row of H depends on when relay links are ideal.

    Row ``i`` mixes the direct link with every relay-destination link used
    in slots ``i+1..M``; names are ``"sd"`` and ``"r<j>d"`` (1-based relay).
    """
    m = beta + 1 + alpha
    sets = []
    for i in range(1, m + 1):
        relays = {f"r{effective_relay_index(t, beta)}d" for t in range(i, m)}
        sets.append(frozenset({"sd"} | relays))
    return sets


def ebn0_to_n0(ebn0_db, rate: float, es: float = 1.0):
    """Per-dimension ``N0`` (half the complex noise variance) for a given Eb/N0.

    Eb/N0 is defined with ``Eb = Es / R`` and ``N0`` the one-sided noise
    density, i.e. the complex noise variance ``2 * n0``.
    """
    ebn0 = 10 ** (np.asarray(ebn0_db, dtype=float) / 10)
    return es / (2 * rate * ebn0)
