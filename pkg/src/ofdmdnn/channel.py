"""Statistical multipath channel, time-domain propagation, and AWGN.

The channel is a sample-spaced tapped delay line: ``n_paths`` rays with
integer delays drawn uniformly over [0, max_delay], each with a circularly
symmetric complex Gaussian gain whose variance follows an exponential
power-delay profile. Gains are scaled so the ensemble tap energy
``E[sum |h(l)|^2]`` is exactly 1, which makes the SNR convention
``sigma_w^2 = 10^(-snr_db/10)`` hold against nominal unit received power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ofdm import FrameConfig, TxFrame, dft


@dataclass(frozen=True)
class ChannelConfig:
    """Tapped-delay-line parameters.

    ``decay_const`` is the exponential power-delay-profile time constant in
    samples; per-path gain variance is proportional to exp(-delay/decay_const).
    ``fading=False`` replaces the random tap draw by the identity channel
    h = [1] (pure-AWGN calibration runs).
    """

    n_paths: int = 24
    max_delay: int = 16
    decay_const: float = 4.0
    fading: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.max_delay < 0:
            raise ValueError("max_delay must be >= 0")
        if not self.decay_const > 0:
            raise ValueError("decay_const must be positive")
        if not self.fading and self.max_delay != 0:
            raise ValueError("the identity channel requires max_delay == 0")

    @property
    def n_taps(self) -> int:
        return self.max_delay + 1


def path_gain_std(cfg: ChannelConfig) -> np.ndarray:
    """Per-delay standard deviation (per real/imag component) of one path gain.

    Chosen so that with delays uniform over [0, max_delay] the expected total
    tap energy over all paths is exactly 1.
    """
    profile = np.exp(-np.arange(cfg.n_taps) / cfg.decay_const)
    variance = profile / (cfg.n_paths * profile.mean())
    return np.sqrt(variance / 2.0)


def sample_channel(cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw one channel realization: complex taps h(0..max_delay).

    Paths with coinciding delays add up. Consumes, in order, ``n_paths``
    integer delays and ``2*n_paths`` standard normals from ``rng`` (nothing
    for a non-fading channel).
    """
    if not cfg.fading:
        return np.ones(1, dtype=np.complex128)
    delays = rng.integers(0, cfg.max_delay + 1, size=cfg.n_paths)
    raw = rng.standard_normal(2 * cfg.n_paths)
    std = path_gain_std(cfg)[delays]
    gains = (raw[0::2] + 1j * raw[1::2]) * std
    taps = np.zeros(cfg.n_taps, dtype=np.complex128)
    np.add.at(taps, delays, gains)
    return taps


def circular_convolve(x, taps) -> np.ndarray:
    """Circular convolution y(n) = sum_l h(l) x((n-l) mod N) on the last axis."""
    x = np.asarray(x)
    taps = np.asarray(taps)
    n = x.shape[-1]
    y = np.zeros(np.broadcast_shapes(x.shape[:-1], taps.shape[:-1]) + (n,),
                 dtype=np.complex128)
    idx = np.arange(n)
    for l in range(taps.shape[-1]):
        y += taps[..., l, None] * x[..., (idx - l) % n]
    return y


def linear_convolve(x, taps) -> np.ndarray:
    """Linear convolution with the channel taps; output keeps the full tail
    (length ``len(x) + max_delay``)."""
    x = np.asarray(x, dtype=np.complex128)
    taps = np.asarray(taps)
    n = x.shape[-1]
    d = taps.shape[-1] - 1
    lead = np.broadcast_shapes(x.shape[:-1], taps.shape[:-1])
    y = np.zeros(lead + (n + d,), dtype=np.complex128)
    tmp = np.empty(lead + (n,), dtype=np.complex128)
    for l in range(d + 1):
        np.multiply(taps[..., l, None], x, out=tmp)
        y[..., l:l + n] += tmp
    return y


def noise_sigma2(snr_db: float) -> float:
    """Per-sample complex noise variance for the given SNR in dB; 0 at +inf."""
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. circularly symmetric complex Gaussian noise with total variance
    ``sigma2`` per sample, split equally between real and imaginary parts.

    Draws ``2 * prod(shape)`` standard normals from ``rng`` (real parts
    first within each sample pair).
    """
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    raw = rng.standard_normal(2 * int(np.prod(shape)))
    noise = (raw[0::2] + 1j * raw[1::2]).reshape(shape)
    return noise * math.sqrt(sigma2 / 2.0)


def add_awgn(y, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at the given SNR; ``snr_db = inf`` is a
    noiseless sentinel and consumes no randomness."""
    y = np.asarray(y, dtype=np.complex128)
    sigma2 = noise_sigma2(snr_db)
    if sigma2 == 0.0:
        return y.copy()
    return y + complex_noise(y.shape, sigma2, rng)


def frequency_response(taps, n: int) -> np.ndarray:
    """Per-subcarrier channel gain H(k) = sum_l h(l) exp(-2j pi k l / N).

    This is the plain (non-unitary) DFT of the zero-padded taps, which is the
    scaling that makes Y = X * H exact when the blocks use the unitary DFT.
    """
    taps = np.asarray(taps)
    if taps.shape[-1] > n:
        raise ValueError(f"channel has {taps.shape[-1]} taps, exceeds N={n}")
    return np.fft.fft(taps, n=n, axis=-1)


def transmit_frame(
    frame: TxFrame,
    taps: np.ndarray,
    snr_db: float,
    cfg: FrameConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one frame and demodulate both blocks.

    The frame's time signal passes through the physical (linear) channel
    convolution, then AWGN is added. With a CP each block is windowed after
    its prefix, which realizes circular convolution when the CP covers the
    channel delay. Without a CP each block keeps its own N-sample window of
    the contiguous stream, so inter-block interference leaks in naturally.

    Returns the frequency-domain pilot and data blocks (Y_pilot, Y_data).
    """
    rx = add_awgn(linear_convolve(frame.time_signal, taps), snr_db, rng)
    return receive_blocks(rx, cfg)


def receive_blocks(rx, cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Window and DFT the pilot and data blocks of a received frame stream."""
    rx = np.asarray(rx)
    n, cp = cfg.n_subcarriers, cfg.cp_len
    pilot = rx[..., cp:cp + n]
    data = rx[..., cfg.block_len + cp:cfg.block_len + cp + n]
    return dft(pilot), dft(data)
