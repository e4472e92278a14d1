"""Baseline receivers: LS and LMMSE channel estimation plus one-tap
zero-forcing detection.

The LMMSE estimator uses empirical second-order channel statistics
(cross-correlations between all tones and the pilot tones) estimated by
Monte Carlo from the same generative channel model, cached to a versioned
JSON file so sweeps do not have to re-estimate them.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, frequency_response, noise_sigma2, path_gain_std
from .ofdm import FrameConfig, pilot_symbols, qpsk_demodulate_hard

logger = logging.getLogger(__name__)

STATS_FORMAT_VERSION = 1

#: Magnitude below which an estimated channel gain counts as a dead fade and
#: is replaced before the zero-forcing division.
FADE_GUARD = 1e-12


@dataclass(frozen=True)
class PilotPattern:
    """Pilot subcarrier indices and the known symbols placed there."""

    indices: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if not np.allclose(np.abs(self.values), 1.0):
            raise ValueError("pilot symbols must have unit magnitude")

    @classmethod
    def from_frame_config(cls, cfg: FrameConfig) -> "PilotPattern":
        idx = cfg.pilot_indices
        return cls(indices=idx, values=pilot_symbols(cfg.n_subcarriers)[list(idx)])

    @property
    def n_pilots(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class CorrelationStats:
    """Empirical channel correlations at and against the pilot tones.

    ``r_full_pilot[k, p] = E[H(k) conj(H(p_j))]`` over all N tones k and
    pilot tones p_j; ``r_pilot_pilot`` is the pilot-tone Gram matrix,
    Hermitian by construction.
    """

    r_full_pilot: np.ndarray
    r_pilot_pilot: np.ndarray
    n_draws: int
    pattern_indices: tuple[int, ...]
    n_subcarriers: int
    channel: ChannelConfig


def estimate_correlation_stats(
    cfg: ChannelConfig,
    pattern: PilotPattern,
    n_draws: int,
    rng: np.random.Generator,
    n_subcarriers: int = 64,
) -> CorrelationStats:
    """Estimate tone correlations from ``n_draws`` independent channel draws.

    Draws are vectorized (they need not reproduce per-frame generator
    streams; only the ensemble matters). ``r_pilot_pilot`` is averaged with
    its conjugate transpose so it is Hermitian to machine precision.
    """
    if n_draws < 10_000:
        raise ValueError("n_draws must be at least 10^4 for usable statistics")
    n = n_subcarriers
    idx = np.asarray(pattern.indices)
    std = path_gain_std(cfg)

    if cfg.fading:
        corr = np.zeros((n, n), dtype=np.complex128)
        remaining = n_draws
        while remaining > 0:
            m = min(remaining, 20_000)
            delays = rng.integers(0, cfg.max_delay + 1, size=(m, cfg.n_paths))
            raw = rng.standard_normal((m, 2 * cfg.n_paths))
            gains = (raw[:, 0::2] + 1j * raw[:, 1::2]) * std[delays]
            taps = np.zeros((m, cfg.n_taps), dtype=np.complex128)
            np.add.at(taps, (np.arange(m)[:, None], delays), gains)
            h = frequency_response(taps, n)
            corr += h.T @ h.conj()
            remaining -= m
        corr /= n_draws
    else:  # identity channel: H(k) = 1 for every tone
        corr = np.ones((n, n), dtype=np.complex128)

    r_fp = corr[:, idx]
    r_pp = corr[np.ix_(idx, idx)]
    r_pp = (r_pp + r_pp.conj().T) / 2.0
    return CorrelationStats(
        r_full_pilot=r_fp,
        r_pilot_pilot=r_pp,
        n_draws=n_draws,
        pattern_indices=tuple(int(i) for i in idx),
        n_subcarriers=n,
        channel=cfg,
    )


def ls_estimate(y_pilot, pattern: PilotPattern) -> np.ndarray:
    """Least-squares channel estimate at the pilot tones: H_LS(p) = Y(p)/X(p)."""
    y_pilot = np.asarray(y_pilot)
    return y_pilot[..., list(pattern.indices)] / pattern.values


@lru_cache(maxsize=32)
def _interp_matrix(indices: tuple[int, ...], n: int) -> np.ndarray:
    """Dense matrix mapping pilot-tone values to all N tones by piecewise
    linear interpolation with cyclic wraparound."""
    p = len(indices)
    if p < 2:
        raise ValueError("linear interpolation needs at least 2 pilot tones")
    mat = np.zeros((n, p))
    idx = np.asarray(indices)
    for seg in range(p):
        a = idx[seg]
        b_next = idx[(seg + 1) % p]
        span = (b_next - a) % n
        if span == 0:
            raise ValueError("duplicate pilot indices")
        for step in range(span):
            tone = (a + step) % n
            w = step / span
            mat[tone, seg] += 1.0 - w
            mat[tone, (seg + 1) % p] += w
    return mat


def interpolate_linear(sparse_estimate, indices, n: int) -> np.ndarray:
    """Interpolate a pilot-tone estimate to all N tones (real and imaginary
    parts independently, cyclic in the subcarrier index)."""
    sparse_estimate = np.asarray(sparse_estimate)
    mat = _interp_matrix(tuple(int(i) for i in indices), n)
    return sparse_estimate @ mat.T


def mmse_weights(stats: CorrelationStats, snr_db: float) -> np.ndarray:
    """LMMSE combining matrix A with H_hat = A @ H_LS at the pilot tones.

    A = R_fp (R_pp + sigma_w^2 I)^-1, computed by solving the Hermitian
    system instead of forming an inverse. With sigma_w^2 = 0 a singular
    pilot Gram matrix raises ``numpy.linalg.LinAlgError``.
    """
    sigma2 = noise_sigma2(snr_db)
    m = stats.r_pilot_pilot + sigma2 * np.eye(stats.r_pilot_pilot.shape[0])
    # R_fp M^-1 = (M^-1 R_fp^H)^H because M is Hermitian.
    return np.linalg.solve(m, stats.r_full_pilot.conj().T).conj().T


def mmse_estimate(
    y_pilot, pattern: PilotPattern, stats: CorrelationStats, snr_db: float
) -> np.ndarray:
    """Per-tone LMMSE channel estimate on all N tones from the pilot LS
    estimate and the cached second-order statistics."""
    if tuple(stats.pattern_indices) != tuple(pattern.indices):
        raise ValueError("statistics were computed for a different pilot pattern")
    h_ls = ls_estimate(y_pilot, pattern)
    return h_ls @ mmse_weights(stats, snr_db).T


def equalize_and_detect(y_data, h_est) -> np.ndarray:
    """One-tap zero-forcing equalization followed by hard QPSK decisions.

    Estimated gains below :data:`FADE_GUARD` in magnitude are replaced by a
    guard value with the same phase (or 1 for an exact zero) so deep fades
    produce garbage bits instead of crashing a Monte Carlo run.
    """
    y_data = np.asarray(y_data)
    h_est = np.asarray(h_est, dtype=np.complex128)
    mag = np.abs(h_est)
    dead = mag < FADE_GUARD
    if dead.any():
        logger.debug("equalizer fade guard hit on %d tones", int(dead.sum()))
        phase = np.where(mag == 0, 1.0 + 0j, h_est / np.where(mag == 0, 1.0, mag))
        h_est = np.where(dead, FADE_GUARD * phase, h_est)
    return qpsk_demodulate_hard(y_data / h_est)


def save_stats(stats: CorrelationStats, path) -> None:
    """Write a correlation cache as versioned JSON with (re, im) pairs."""
    def cplx(mat):
        return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(mat)]

    doc = {
        "format_version": STATS_FORMAT_VERSION,
        "kind": "correlation-stats",
        "n_subcarriers": stats.n_subcarriers,
        "pattern_indices": list(stats.pattern_indices),
        "n_draws": stats.n_draws,
        "channel": {
            "n_paths": stats.channel.n_paths,
            "max_delay": stats.channel.max_delay,
            "decay_const": stats.channel.decay_const,
            "fading": stats.channel.fading,
        },
        "r_full_pilot_shape": list(stats.r_full_pilot.shape),
        "r_pilot_pilot_shape": list(stats.r_pilot_pilot.shape),
        "r_full_pilot": cplx(stats.r_full_pilot),
        "r_pilot_pilot": cplx(stats.r_pilot_pilot),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))


def load_stats(path) -> CorrelationStats:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != STATS_FORMAT_VERSION or doc.get("kind") != "correlation-stats":
        raise ValueError(f"unrecognized stats file format: {path}")

    def mat(entries, shape):
        arr = np.array([[complex(re, im) for re, im in row] for row in entries])
        if list(arr.shape) != list(shape):
            raise ValueError("stats matrix shape mismatch")
        return arr

    return CorrelationStats(
        r_full_pilot=mat(doc["r_full_pilot"], doc["r_full_pilot_shape"]),
        r_pilot_pilot=mat(doc["r_pilot_pilot"], doc["r_pilot_pilot_shape"]),
        n_draws=int(doc["n_draws"]),
        pattern_indices=tuple(int(i) for i in doc["pattern_indices"]),
        n_subcarriers=int(doc["n_subcarriers"]),
        channel=ChannelConfig(**doc["channel"]),
    )
