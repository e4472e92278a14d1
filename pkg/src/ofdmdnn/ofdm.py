"""Baseband OFDM primitives: QPSK mapping, unitary (I)DFT, cyclic prefix,
amplitude clipping, and frame assembly.

Conventions used throughout the package:

* QPSK is Gray mapped with unit symbol energy: bit pair (b0, b1) maps to
  ((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2).
* The DFT/IDFT pair is unitary (both directions scaled by 1/sqrt(N)), so
  signal power is identical in time and frequency domain.
* All array operations act on the last axis, so a leading batch axis can be
  carried through the whole transmit chain for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

#: Seed of the fixed pseudo-random pilot bit pattern. The pilot sequence is
#: the QPSK modulation of 2*N bits drawn once from this generator; it is a
#: repo constant so training and deployment always agree on the pilots.
PILOT_BIT_SEED = 0x0FD5EED


@dataclass(frozen=True)
class ClipConfig:
    """Amplitude clipping threshold expressed as a clipping ratio.

    The threshold is ``A = clip_ratio * sigma_ref``. ``sigma_ref`` is the rms
    of the unclipped time-domain signal; under the unitary DFT convention and
    unit-energy QPSK the ensemble rms is exactly 1, so the default applies
    the clipping ratio directly.
    """

    clip_ratio: float
    sigma_ref: float = 1.0

    def __post_init__(self):
        if not self.clip_ratio > 0:
            raise ValueError(f"clip_ratio must be positive, got {self.clip_ratio}")
        if not self.sigma_ref > 0:
            raise ValueError(f"sigma_ref must be positive, got {self.sigma_ref}")

    @property
    def threshold(self) -> float:
        return self.clip_ratio * self.sigma_ref


@dataclass(frozen=True)
class FrameConfig:
    """Static description of one OFDM frame (one pilot block + one data block).

    ``pilot_indices`` defaults to ``n_pilots`` evenly spaced subcarriers
    starting at 0. ``cp_len == 0`` encodes the no-CP scenario. ``clip`` is
    None when the transmitter applies no clipping.
    """

    n_subcarriers: int = 64
    cp_len: int = 16
    n_pilots: int = 64
    pilot_indices: tuple[int, ...] | None = None
    clip: ClipConfig | None = None

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.cp_len < 0:
            raise ValueError("cp_len must be >= 0")
        if self.cp_len > n:
            raise ValueError(f"cp_len {self.cp_len} exceeds n_subcarriers {n}")
        if not 1 <= self.n_pilots <= n:
            raise ValueError(f"n_pilots must be in [1, {n}], got {self.n_pilots}")
        if self.pilot_indices is None:
            idx = tuple(int(i * n // self.n_pilots) for i in range(self.n_pilots))
            object.__setattr__(self, "pilot_indices", idx)
        else:
            idx = tuple(int(i) for i in self.pilot_indices)
            object.__setattr__(self, "pilot_indices", idx)
        if len(set(self.pilot_indices)) != self.n_pilots:
            raise ValueError("pilot_indices must hold n_pilots distinct entries")
        if list(self.pilot_indices) != sorted(self.pilot_indices):
            raise ValueError("pilot_indices must be sorted")
        if self.pilot_indices[0] < 0 or self.pilot_indices[-1] >= n:
            raise ValueError("pilot_indices out of range")

    @property
    def block_len(self) -> int:
        """Time-domain samples per OFDM block, CP included."""
        return self.n_subcarriers + self.cp_len

    @property
    def frame_len(self) -> int:
        """Time-domain samples per frame (pilot block + data block)."""
        return 2 * self.block_len

    @property
    def n_data_bits(self) -> int:
        return 2 * self.n_subcarriers


@dataclass(frozen=True)
class TxFrame:
    """One assembled transmit frame."""

    pilot_block: np.ndarray
    data_block: np.ndarray
    data_bits: np.ndarray
    time_signal: np.ndarray


def qpsk_modulate(bits) -> np.ndarray:
    """Map bits {0,1} to Gray-coded unit-energy QPSK symbols.

    Bit pair (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2); the last axis
    must have even length and shrinks by a factor of two.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2 != 0:
        raise ValueError(f"bit count must be even, got {bits.shape[-1]}")
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("bits must be 0 or 1")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2))
    sym = (1.0 - 2.0 * pairs[..., 0]) + 1j * (1.0 - 2.0 * pairs[..., 1])
    return sym / math.sqrt(2.0)


def qpsk_demodulate_hard(symbols) -> np.ndarray:
    """Hard-decision QPSK demapping; inverse of :func:`qpsk_modulate`.

    Decision rule: b0 = (Re < 0), b1 = (Im < 0), so a boundary value of
    exactly 0 maps to bit 0.
    """
    symbols = np.asarray(symbols)
    bits = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],), dtype=np.int8)
    bits[..., 0::2] = symbols.real < 0
    bits[..., 1::2] = symbols.imag < 0
    return bits


def dft(x, n: int | None = None) -> np.ndarray:
    """Unitary DFT along the last axis (scaled by 1/sqrt(N))."""
    x = np.asarray(x)
    if n is not None and x.shape[-1] != n:
        raise ValueError(f"expected length {n}, got {x.shape[-1]}")
    return np.fft.fft(x, axis=-1) / math.sqrt(x.shape[-1])


def idft(x, n: int | None = None) -> np.ndarray:
    """Unitary inverse DFT along the last axis (scaled by sqrt(N))."""
    x = np.asarray(x)
    if n is not None and x.shape[-1] != n:
        raise ValueError(f"expected length {n}, got {x.shape[-1]}")
    return np.fft.ifft(x, axis=-1) * math.sqrt(x.shape[-1])


def add_cp(t, cp_len: int) -> np.ndarray:
    """Prepend the cyclic prefix: the last ``cp_len`` samples of the block."""
    t = np.asarray(t)
    if cp_len < 0:
        raise ValueError("cp_len must be >= 0")
    if cp_len > t.shape[-1]:
        raise ValueError(f"cp_len {cp_len} exceeds block length {t.shape[-1]}")
    if cp_len == 0:
        return t.copy()
    return np.concatenate([t[..., -cp_len:], t], axis=-1)


def remove_cp(t, cp_len: int) -> np.ndarray:
    """Drop the first ``cp_len`` samples."""
    t = np.asarray(t)
    if cp_len < 0:
        raise ValueError("cp_len must be >= 0")
    if cp_len >= t.shape[-1] and cp_len > 0:
        raise ValueError("cp_len leaves no samples")
    return t[..., cp_len:].copy()


def clip_signal(t, clip: ClipConfig) -> np.ndarray:
    """Clip sample magnitudes to the threshold A, preserving phase.

    Samples with |x| <= A pass unchanged; larger samples are scaled down to
    magnitude exactly A. An infinite threshold is the identity.
    """
    t = np.asarray(t, dtype=np.complex128)
    a = clip.threshold
    if not np.isfinite(a):
        return t.copy()
    mag = np.abs(t)
    # A / max(|x|, A) is 1 below threshold and A/|x| above; avoids 0/0.
    scale = a / np.maximum(mag, a)
    return t * scale


@lru_cache(maxsize=8)
def pilot_symbols(n_subcarriers: int = 64) -> np.ndarray:
    """The fixed pilot sequence: QPSK modulation of 2*N bits drawn from
    :data:`PILOT_BIT_SEED`. Identical for every frame, known to the receiver."""
    rng = np.random.default_rng(PILOT_BIT_SEED)
    bits = rng.integers(0, 2, size=2 * n_subcarriers)
    sym = qpsk_modulate(bits)
    sym.flags.writeable = False
    return sym


def build_frame(data_bits, cfg: FrameConfig, rng: np.random.Generator) -> TxFrame:
    """Assemble one transmit frame from data bits.

    The pilot block carries the fixed pilot sequence at ``cfg.pilot_indices``;
    when fewer pilots than subcarriers are configured the remaining tones are
    filled with random QPSK symbols (drawn from ``rng``) that the receiver
    does not know and that never count towards the BER. The time-domain
    signal is the concatenation of CP-extended IDFT blocks, clipped when the
    config says so.
    """
    n = cfg.n_subcarriers
    data_bits = np.asarray(data_bits)
    if data_bits.shape != (cfg.n_data_bits,):
        raise ValueError(
            f"expected {cfg.n_data_bits} data bits, got shape {data_bits.shape}"
        )

    pilot_block = np.zeros(n, dtype=np.complex128)
    idx = np.asarray(cfg.pilot_indices)
    pilot_block[idx] = pilot_symbols(n)[idx]
    if cfg.n_pilots < n:
        filler_mask = np.ones(n, dtype=bool)
        filler_mask[idx] = False
        filler_bits = rng.integers(0, 2, size=2 * (n - cfg.n_pilots))
        pilot_block[filler_mask] = qpsk_modulate(filler_bits)

    data_block = qpsk_modulate(data_bits)
    time_signal = np.concatenate(
        [add_cp(idft(pilot_block), cfg.cp_len), add_cp(idft(data_block), cfg.cp_len)]
    )
    if cfg.clip is not None:
        time_signal = clip_signal(time_signal, cfg.clip)
    return TxFrame(
        pilot_block=pilot_block,
        data_block=data_block,
        data_bits=data_bits.astype(np.int8),
        time_signal=time_signal,
    )
