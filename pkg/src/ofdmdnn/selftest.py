"""Built-in invariant checks behind the ``selftest`` CLI subcommand.

Each check re-derives its expected value from an independent oracle
(analytic identity, closed-form distribution, or brute-force enumeration)
and prints one PASS/FAIL line.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from . import channel as ch
from . import neuralnet as nn
from . import ofdm
from .estimators import equalize_and_detect
from .experiments import evaluate_ber
from .simulate import ScenarioConfig, simulate_frames


def _q(x: float) -> float:
    """Gaussian tail probability."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def check_qpsk_roundtrip() -> tuple[bool, str]:
    for bits in product((0, 1), repeat=4):
        back = ofdm.qpsk_demodulate_hard(ofdm.qpsk_modulate(np.array(bits)))
        if list(back) != list(bits):
            return False, f"roundtrip failed for {bits}"
    return True, "all 4-bit patterns"


def check_dft_unitarity(n_cases: int = 1000) -> tuple[bool, str]:
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.choice([4, 64]))
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        err = np.abs(ofdm.idft(ofdm.dft(x)) - x).max()
        perr = abs(
            np.sum(np.abs(ofdm.dft(x)) ** 2) - np.sum(np.abs(x) ** 2)
        )
        worst = max(worst, err, perr)
    return worst < 1e-9, f"max deviation {worst:.2e}"


def check_cp_equivalence(n_cases: int = 1000) -> tuple[bool, str]:
    rng = np.random.default_rng(2)
    cfg = ch.ChannelConfig()
    worst = 0.0
    for _ in range(n_cases):
        x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        taps = ch.sample_channel(cfg, rng)
        y_lin = ofdm.remove_cp(ch.linear_convolve(ofdm.add_cp(x, 16), taps), 16)[:64]
        y_circ = ch.circular_convolve(x, taps)
        worst = max(worst, np.abs(y_lin - y_circ).max())
    return worst < 1e-9, f"max deviation {worst:.2e}"


def check_clipping() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    x = ofdm.idft(ofdm.qpsk_modulate(rng.integers(0, 2, (2000, 128))))
    clipped = ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=1.0))
    bound_ok = np.abs(clipped).max() <= 1.0 + 1e-12
    ident = ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=math.inf))
    ident_ok = np.array_equal(ident, x)
    return bound_ok and ident_ok, f"max clipped magnitude {np.abs(clipped).max():.6f}"


def check_channel_energy(n_draws: int = 100_000) -> tuple[bool, str]:
    rng = np.random.default_rng(4)
    cfg = ch.ChannelConfig()
    total = 0.0
    for _ in range(n_draws):
        taps = ch.sample_channel(cfg, rng)
        total += float(np.sum(np.abs(taps) ** 2))
    mean = total / n_draws
    return abs(mean - 1.0) < 0.02, f"mean tap energy {mean:.4f}"


def check_awgn_variance() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    noise = ch.add_awgn(np.zeros(1_000_000, dtype=complex), 10.0, rng)
    var = float(np.mean(np.abs(noise) ** 2))
    corr = float(np.corrcoef(noise.real, noise.imag)[0, 1])
    ok = abs(var - 0.1) < 0.001 and abs(corr) < 0.01
    return ok, f"variance {var:.5f}, re/im correlation {corr:+.4f}"


def check_awgn_ber() -> tuple[bool, str]:
    ebn0_db = 4.0
    snr_db = ebn0_db + 10.0 * math.log10(2.0)
    scenario = ScenarioConfig(
        scenario_id="selftest-awgn",
        frame=ofdm.FrameConfig(),
        channel=ch.ChannelConfig(n_paths=1, max_delay=0, fading=False),
    )
    point = evaluate_ber("perfect_csi", scenario, snr_db, 1_000_000, seed=5)
    expect = _q(math.sqrt(2.0 * 10.0 ** (ebn0_db / 10.0)))
    std = math.sqrt(expect * (1 - expect) / point.n_bits)
    ok = abs(point.ber - expect) < 3 * std
    return ok, f"ber {point.ber:.4e} vs Q-oracle {expect:.4e} (3 std {3*std:.1e})"


def check_gradient() -> tuple[bool, str]:
    rng = np.random.default_rng(6)
    params = nn.init_params(nn.default_layer_specs(), rng)
    x = rng.standard_normal((4, 256))
    t = rng.integers(0, 2, size=(4, 16)).astype(float)
    err = nn.gradient_check(params, x, t, n_coords=200, rng=rng)
    return err < 1e-5, f"max relative error {err:.2e}"


def check_adam() -> tuple[bool, str]:
    # Scalar quadratic (theta - 3)^2 from theta = 0.
    params = nn.MlpParams(layers=[nn.Layer(
        weight=np.zeros((1, 1)), bias=np.zeros(1), activation="none")])
    state = nn.AdamState.for_params(params)
    cfg = nn.TrainConfig(learning_rate=0.05, batch_size=1, n_steps=500)
    x = np.array([[1.0]])
    t = np.array([[3.0]])
    for _ in range(500):
        nn.train_batch(params, x, t, state, cfg)
    theta = float(params.layers[0].weight[0, 0] + params.layers[0].bias[0])
    return abs(theta - 3.0) < 0.05, f"theta {theta:.4f} (target 3)"


def check_noiseless_detection() -> tuple[bool, str]:
    scenario = ScenarioConfig(
        scenario_id="selftest-noiseless",
        frame=ofdm.FrameConfig(),
        channel=ch.ChannelConfig(),
    )
    batch = simulate_frames(scenario, math.inf, 7, ("selftest",), 0, 200)
    pred = equalize_and_detect(batch.y_data, batch.h_freq)
    errors = int(np.count_nonzero(pred != batch.bits))
    return errors == 0, f"{errors} bit errors over {batch.bits.size} noiseless bits"


CHECKS = [
    ("qpsk-roundtrip", check_qpsk_roundtrip),
    ("dft-unitarity-parseval", check_dft_unitarity),
    ("cp-circular-equivalence", check_cp_equivalence),
    ("clipping-threshold", check_clipping),
    ("channel-energy-normalization", check_channel_energy),
    ("awgn-calibration", check_awgn_variance),
    ("awgn-qfunction-ber", check_awgn_ber),
    ("gradient-finite-difference", check_gradient),
    ("adam-quadratic", check_adam),
    ("noiseless-perfect-csi", check_noiseless_detection),
]


def run_selftest() -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= ok
        print(f"selftest {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return all_ok
