"""Spatial modulation (SM), spatial multiplexing (SMX) and Monte Carlo BER.

Bit conventions
---------------
All bit groups are big-endian.  For SM the first ``log2(n_tx)`` bits pick
the active SA and the rest pick a Gray-labelled constellation point.  For
SMX each stream takes ``log2(M)`` consecutive bits.  Candidate ``i`` in the
ML search is the transmit vector whose bit pattern is the binary expansion
of ``i``, so ties (lowest index wins) are deterministic.

SNR convention
--------------
``snr = Es / N0`` with ``Es = 1`` the total transmit energy per channel use
and ``N0`` the complex noise variance per receive dimension.  The channel
gain is left in H.

Randomness
----------
Trials are cut into fixed-size blocks.  Block ``b`` of SNR point ``s`` draws
from ``numpy.random.Philox`` keyed by ``SeedSequence([seed, s, b])``, so a
curve depends only on ``(seed, config)`` and never on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import erfc

from .channel import ChannelMatrix, LinkConfig, channel_metrics, los_channel
from .physics import absorption_noise_psd

__all__ = [
    "PRNG_ID",
    "SmConfig",
    "SmxConfig",
    "BerCurve",
    "constellation",
    "sm_encode",
    "sm_decode",
    "smx_encode",
    "smx_decode",
    "candidate_set",
    "ml_detect",
    "run_ber",
    "qfunc",
    "noise_scale",
]

PRNG_ID = "numpy.random.Philox-4x64-10/SeedSequence(seed, snr_index, block_index)"
BLOCK_TRIALS = 1 << 14
DEFAULT_CANDIDATE_CAP = 1 << 16
COND_CAP = 1e6


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _log2(n: int) -> int:
    return n.bit_length() - 1


def _gray(i):
    return i ^ (i >> 1)


def constellation(M: int) -> np.ndarray:
    """Unit-energy Gray-labelled constellation, indexed by bit label.

    ``M = 2`` is BPSK (``0 -> +1``), ``M = 4`` is QPSK with the zero label at
    ``exp(j pi/4)``, other PSK orders up to 8, and square QAM for even
    ``log2(M) >= 4``.
    """
    if not _is_pow2(M) or M < 2:
        raise ValueError("constellation order must be a power of two >= 2")
    m = _log2(M)
    labels = np.arange(M)
    if M == 2:
        return np.array([1.0, -1.0], dtype=complex)
    if M <= 8:
        offset = 0.0 if M == 2 else np.pi / M
        pos = np.arange(M)
        pts = np.exp(1j * (2 * np.pi * pos / M + offset))
        out = np.empty(M, dtype=complex)
        out[_gray(pos)] = pts
        return out
    if m % 2:
        raise ValueError("QAM orders above 8 must be square (even log2(M))")
    side = 1 << (m // 2)
    levels = 2 * np.arange(side) - (side - 1)
    out = np.empty(M, dtype=complex)
    for label in labels:
        hi, lo = label >> (m // 2), label & (side - 1)
        # invert Gray on each axis
        i_re = _inv_gray(hi)
        i_im = _inv_gray(lo)
        out[label] = levels[i_re] + 1j * levels[i_im]
    return out / np.sqrt(np.mean(np.abs(out) ** 2))


def _inv_gray(g: int) -> int:
    n = 0
    while g:
        n ^= g
        g >>= 1
    return n


def _bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _int_to_bits(v: int, n: int) -> np.ndarray:
    return np.array([(v >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int8)


@dataclass(frozen=True)
class SmConfig:
    n_tx: int
    M: int = 2

    def __post_init__(self):
        if not _is_pow2(self.n_tx) or not _is_pow2(self.M) or self.M < 2:
            raise ValueError("n_tx and M must be powers of two (M >= 2)")

    @property
    def bits_per_symbol(self) -> int:
        return _log2(self.n_tx) + _log2(self.M)

    @property
    def name(self) -> str:
        return f"SM-{self.n_tx}x{self.M}"


@dataclass(frozen=True)
class SmxConfig:
    """Spatial multiplexing of ``n_streams`` independent streams.

    ``tx_indices`` selects the tx SAs that carry the streams; by default they
    are spread as evenly as possible over the array (first and last SA
    included).
    """

    n_streams: int
    M: int = 2
    tx_indices: Optional[tuple] = None

    def __post_init__(self):
        if self.n_streams < 1:
            raise ValueError("n_streams must be >= 1")
        if not _is_pow2(self.M) or self.M < 2:
            raise ValueError("M must be a power of two >= 2")
        if self.tx_indices is not None:
            object.__setattr__(self, "tx_indices", tuple(int(i) for i in self.tx_indices))
            if len(self.tx_indices) != self.n_streams:
                raise ValueError("tx_indices must name one SA per stream")

    @property
    def bits_per_symbol(self) -> int:
        return self.n_streams * _log2(self.M)

    @property
    def name(self) -> str:
        return f"SMX-{self.n_streams}x{self.M}"

    def columns(self, n_tx: int) -> np.ndarray:
        if self.tx_indices is not None:
            cols = np.array(self.tx_indices)
        elif self.n_streams == 1:
            cols = np.array([0])
        else:
            cols = np.round(np.linspace(0, n_tx - 1, self.n_streams)).astype(int)
        if np.any(cols < 0) or np.any(cols >= n_tx) or len(set(cols.tolist())) != len(cols):
            raise ValueError(f"invalid stream-to-SA mapping {cols.tolist()} for {n_tx} SAs")
        return cols


SchemeConfig = Union[SmConfig, SmxConfig]


def _check_bits(bits, n):
    bits = np.asarray(bits).ravel()
    if bits.size != n:
        raise ValueError(f"expected {n} bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    return bits


def sm_encode(bits, cfg: SmConfig):
    """Map bits to ``(active SA index, symbol)``."""
    bits = _check_bits(bits, cfg.bits_per_symbol)
    na = _log2(cfg.n_tx)
    return _bits_to_int(bits[:na]), complex(constellation(cfg.M)[_bits_to_int(bits[na:])])


def sm_decode(index: int, symbol: complex, cfg: SmConfig) -> np.ndarray:
    const = constellation(cfg.M)
    label = int(np.argmin(np.abs(const - symbol)))
    return np.concatenate([_int_to_bits(index, _log2(cfg.n_tx)),
                           _int_to_bits(label, _log2(cfg.M))])


def smx_encode(bits, cfg: SmxConfig) -> np.ndarray:
    """Per-stream symbols scaled so the vector carries unit total energy."""
    bits = _check_bits(bits, cfg.bits_per_symbol)
    m = _log2(cfg.M)
    const = constellation(cfg.M)
    syms = [const[_bits_to_int(bits[i * m:(i + 1) * m])] for i in range(cfg.n_streams)]
    return np.array(syms, dtype=complex) / math.sqrt(cfg.n_streams)


def smx_decode(x, cfg: SmxConfig) -> np.ndarray:
    const = constellation(cfg.M) / math.sqrt(cfg.n_streams)
    m = _log2(cfg.M)
    return np.concatenate([_int_to_bits(int(np.argmin(np.abs(const - s))), m)
                           for s in np.asarray(x)])


def candidate_set(cfg: SchemeConfig, n_tx: int) -> np.ndarray:
    """All transmit vectors, shape ``(n_tx, 2**bits_per_symbol)``, column i <-> bits of i."""
    nb = cfg.bits_per_symbol
    C = 1 << nb
    X = np.zeros((n_tx, C), dtype=complex)
    idx = np.arange(C)
    if isinstance(cfg, SmConfig):
        if n_tx != cfg.n_tx:
            raise ValueError(f"SM needs {cfg.n_tx} tx SAs, channel has {n_tx}")
        m = _log2(cfg.M)
        active = idx >> m
        X[active, idx] = constellation(cfg.M)[idx & (cfg.M - 1)]
    else:
        cols = cfg.columns(n_tx)
        m = _log2(cfg.M)
        const = constellation(cfg.M) / math.sqrt(cfg.n_streams)
        for s, col in enumerate(cols):
            shift = (cfg.n_streams - 1 - s) * m
            X[col, :] = const[(idx >> shift) & (cfg.M - 1)]
    return X


def _bit_table(nb: int) -> np.ndarray:
    C = 1 << nb
    return ((np.arange(C)[:, None] >> np.arange(nb - 1, -1, -1)[None, :]) & 1).astype(np.int8)


def _as_matrix(H) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)


def ml_detect(y, H, cfg: SchemeConfig, noise_variance: float = 0.0,
              max_candidates: int = DEFAULT_CANDIDATE_CAP) -> np.ndarray:
    """Exhaustive maximum-likelihood detection.

    Parameters
    ----------
    y : array_like
        Received vector ``(n_rx,)`` or a batch ``(n_rx, B)``.
    H : ChannelMatrix or array_like
        Channel ``(n_rx, n_tx)``.
    noise_variance : float
        Unused by the Euclidean metric under white Gaussian noise; kept so
        detectors with noise-aware metrics share the signature.

    Returns
    -------
    np.ndarray
        Detected bits, ``(bits_per_symbol,)`` or ``(B, bits_per_symbol)``.
    """
    Hm = _as_matrix(H)
    nb = cfg.bits_per_symbol
    if (1 << nb) > max_candidates:
        raise ValueError(f"candidate space 2**{nb} exceeds cap {max_candidates}")
    X = candidate_set(cfg, Hm.shape[1])
    idx = _ml_indices(np.asarray(y, dtype=complex), Hm @ X)
    bits = _bit_table(nb)[idx]
    return bits


def _ml_indices(y: np.ndarray, HX: np.ndarray) -> np.ndarray:
    single = y.ndim == 1
    Y = y[:, None] if single else y
    diff = Y[:, :, None] - HX[:, None, :]
    metric = np.einsum("rbc,rbc->bc", diff.real, diff.real) + \
        np.einsum("rbc,rbc->bc", diff.imag, diff.imag)
    idx = np.argmin(metric, axis=1)
    return idx[0] if single else idx


def qfunc(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class BerCurve:
    snr_points_db: tuple
    ber: tuple
    errors: tuple
    trials: int
    seed: int
    scheme: str
    bits_per_use: int
    noise_model: str = "white"
    metadata: dict = field(default_factory=dict, compare=False)

    def rows(self):
        """(snr_db, ber, trials, errors, scheme) per SNR point."""
        for s, b, e in zip(self.snr_points_db, self.ber, self.errors):
            yield s, b, self.trials, e, self.scheme


def noise_scale(link: LinkConfig, noise_model: str) -> float:
    """Multiplier on the white noise variance for the chosen noise model.

    ``colored_absorption`` adds the absorption noise PSD of the link's
    carrier and range on top of the thermal floor ``k_B T`` of the medium.
    """
    if noise_model == "white":
        return 1.0
    if noise_model != "colored_absorption":
        raise ValueError(f"unknown noise model {noise_model!r}")
    if link is None:
        raise ValueError("colored_absorption noise needs a LinkConfig")
    n_abs = absorption_noise_psd(link.catalog, link.medium, link.constants, link.f, link.D)
    return 1.0 + n_abs / (link.constants.k_B * link.medium.T)


def _block_errors(HX, bit_table, n_rx, n_bits, count, n0, seed, s_idx, b_idx):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, s_idx, b_idx])))
    C = HX.shape[1]
    sent = rng.integers(0, C, size=count)
    noise = rng.standard_normal((2, n_rx, count))
    y = HX[:, sent]
    if n0 > 0:
        y = y + math.sqrt(n0 / 2.0) * (noise[0] + 1j * noise[1])
    det = _ml_indices(y, HX)
    return int(np.count_nonzero(bit_table[sent] != bit_table[det]))


def run_ber(link_or_H, cfg: SchemeConfig, snr_points_db: Sequence[float], trials: int,
            seed: int, noise_model: str = "white", threads: int = 1,
            max_candidates: int = DEFAULT_CANDIDATE_CAP,
            block_trials: int = BLOCK_TRIALS) -> BerCurve:
    """Monte Carlo bit error rate of ``cfg`` over a fixed channel.

    Parameters
    ----------
    link_or_H : LinkConfig, ChannelMatrix or array_like
        Link (channel built with :func:`los_channel`) or an explicit matrix.
    snr_points_db : sequence of float
        Es/N0 values in dB; ``inf`` means noiseless.
    trials : int
        Channel uses per SNR point.
    seed : int
        Master seed; the same seed reproduces the curve bit for bit.
    noise_model : {"white", "colored_absorption"}

    Returns
    -------
    BerCurve
        Conditioning beyond ``COND_CAP`` is flagged in ``metadata`` rather
        than raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    link = link_or_H if isinstance(link_or_H, LinkConfig) else None
    H = los_channel(link) if link is not None else link_or_H
    Hm = _as_matrix(H)
    nb = cfg.bits_per_symbol
    if (1 << nb) > max_candidates:
        raise ValueError(f"candidate space 2**{nb} exceeds cap {max_candidates}")
    X = candidate_set(cfg, Hm.shape[1])
    HX = Hm @ X
    table = _bit_table(nb)
    scale = noise_scale(link, noise_model)
    n_rx = Hm.shape[0]

    metrics = channel_metrics(Hm)
    meta = {"condition_number": metrics.condition_number,
            "degenerate": bool(metrics.condition_number > COND_CAP),
            "noise_scale": scale, "prng": PRNG_ID, "block_trials": block_trials}

    blocks = [(b, min(block_trials, trials - b * block_trials))
              for b in range(-(-trials // block_trials))]
    errors = []
    for s_idx, snr_db in enumerate(snr_points_db):
        n0 = 0.0 if math.isinf(snr_db) and snr_db > 0 else scale * 10.0 ** (-snr_db / 10.0)
        job = lambda bc: _block_errors(HX, table, n_rx, nb, bc[1], n0, seed, s_idx, bc[0])
        if threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                counts = list(pool.map(job, blocks))
        else:
            counts = [job(bc) for bc in blocks]
        errors.append(int(sum(counts)))

    total_bits = trials * nb
    return BerCurve(tuple(float(s) for s in snr_points_db),
                    tuple(e / total_bits for e in errors), tuple(errors), int(trials),
                    int(seed), cfg.name, nb, noise_model, meta)
