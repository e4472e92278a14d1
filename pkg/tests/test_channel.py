"""Multipath channel statistics, propagation, and noise injection."""

import math

import numpy as np
import pytest

from ofdmdnn import channel as ch
from ofdmdnn import ofdm


class TestSampleChannel:
    def test_flat_degenerate_case(self):
        cfg = ch.ChannelConfig(n_paths=1, max_delay=0)
        rng = np.random.default_rng(0)
        energies = [np.abs(ch.sample_channel(cfg, rng)[0]) ** 2 for _ in range(20000)]
        assert abs(np.mean(energies) - 1.0) < 0.02

    def test_ensemble_energy_normalized(self):
        # Monte Carlo oracle: mean total tap energy over 10^5 draws must be
        # 1 within 2%.
        cfg = ch.ChannelConfig()
        rng = np.random.default_rng(1)
        total = 0.0
        for _ in range(100_000):
            taps = ch.sample_channel(cfg, rng)
            total += np.sum(np.abs(taps) ** 2)
        assert abs(total / 100_000 - 1.0) < 0.02

    def test_tap_energy_decays_monotonically(self):
        # Monte Carlo against the exponential profile for decay_const=4.
        cfg = ch.ChannelConfig()
        rng = np.random.default_rng(2)
        acc = np.zeros(cfg.n_taps)
        n = 100_000
        for _ in range(n):
            acc += np.abs(ch.sample_channel(cfg, rng)) ** 2
        means = acc / n
        assert np.all(np.diff(means) < 0)
        expected = np.exp(-np.arange(cfg.n_taps) / cfg.decay_const)
        expected /= expected.sum()
        np.testing.assert_allclose(means, expected, rtol=0.08)

    def test_identity_channel(self):
        cfg = ch.ChannelConfig(n_paths=1, max_delay=0, fading=False)
        taps = ch.sample_channel(cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(taps, [1.0 + 0j])

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            ch.ChannelConfig(n_paths=0)
        with pytest.raises(ValueError):
            ch.ChannelConfig(max_delay=-1)
        with pytest.raises(ValueError):
            ch.ChannelConfig(decay_const=0.0)
        with pytest.raises(ValueError):
            ch.ChannelConfig(max_delay=3, fading=False)


class TestConvolutions:
    def test_circular_identity(self):
        x = np.arange(8.0) + 1j
        np.testing.assert_allclose(ch.circular_convolve(x, [1.0]), x, atol=1e-14)

    def test_circular_shift(self):
        out = ch.circular_convolve(np.array([1.0, 2.0, 3.0, 4.0]), [0.0, 1.0])
        np.testing.assert_allclose(out, [4, 1, 2, 3], atol=1e-14)

    def test_convolution_theorem(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        taps = ch.sample_channel(ch.ChannelConfig(), rng)
        lhs = ofdm.dft(ch.circular_convolve(x, taps))
        rhs = ofdm.dft(x) * ch.frequency_response(taps, 64)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_linear_identity(self):
        x = np.arange(6.0)
        np.testing.assert_allclose(ch.linear_convolve(x, [1.0]), x, atol=1e-14)

    def test_linear_hand_example(self):
        out = ch.linear_convolve(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(out, [1, 2, 1], atol=1e-14)

    def test_cp_turns_linear_into_circular(self):
        # The module's central theorem: with cp_len >= max delay, windowing
        # after the prefix reproduces the circular model sample-exactly.
        rng = np.random.default_rng(4)
        cfg = ch.ChannelConfig()
        for _ in range(100):
            x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
            taps = ch.sample_channel(cfg, rng)
            via_cp = ch.linear_convolve(ofdm.add_cp(x, 16), taps)[16:80]
            np.testing.assert_allclose(via_cp, ch.circular_convolve(x, taps),
                                       atol=1e-10)


class TestAwgn:
    def test_infinite_snr_is_identity(self):
        y = np.ones(16, dtype=complex)
        np.testing.assert_array_equal(ch.add_awgn(y, math.inf, None), y)

    def test_noise_variance_at_10db(self):
        # Sample-variance oracle: sigma_w^2 = 10^(-1) = 0.1 within 1%.
        rng = np.random.default_rng(5)
        noise = ch.add_awgn(np.zeros(1_000_000, dtype=complex), 10.0, rng)
        assert abs(np.mean(np.abs(noise) ** 2) - 0.1) < 0.001

    def test_real_imag_uncorrelated(self):
        rng = np.random.default_rng(6)
        noise = ch.add_awgn(np.zeros(1_000_000, dtype=complex), 0.0, rng)
        corr = np.corrcoef(noise.real, noise.imag)[0, 1]
        assert abs(corr) < 0.01

    def test_equal_split_between_components(self):
        rng = np.random.default_rng(7)
        noise = ch.add_awgn(np.zeros(500_000, dtype=complex), 10.0, rng)
        assert abs(np.var(noise.real) - 0.05) < 0.002
        assert abs(np.var(noise.imag) - 0.05) < 0.002


class TestFrequencyResponse:
    def test_identity_channel(self):
        np.testing.assert_allclose(ch.frequency_response([1.0], 8), np.ones(8))

    def test_single_delay_phase_ramp(self):
        out = ch.frequency_response([0.0, 1.0], 4)
        np.testing.assert_allclose(out, [1, -1j, -1, 1j], atol=1e-12)

    def test_too_many_taps_rejected(self):
        with pytest.raises(ValueError):
            ch.frequency_response(np.ones(5), 4)


class TestTransmitFrame:
    def _frame(self, cfg, seed=0):
        bits = np.random.default_rng(seed).integers(0, 2, 2 * cfg.n_subcarriers)
        return ofdm.build_frame(bits, cfg, np.random.default_rng(seed + 1))

    def test_noiseless_with_cp_matches_freq_model(self):
        cfg = ofdm.FrameConfig()
        frame = self._frame(cfg)
        rng = np.random.default_rng(8)
        taps = ch.sample_channel(ch.ChannelConfig(), rng)
        y_pilot, y_data = ch.transmit_frame(frame, taps, math.inf, cfg, rng)
        h = ch.frequency_response(taps, 64)
        np.testing.assert_allclose(y_data, frame.data_block * h, atol=1e-9)
        np.testing.assert_allclose(y_pilot, frame.pilot_block * h, atol=1e-9)

    def test_flat_channel_needs_no_cp(self):
        cfg = ofdm.FrameConfig(cp_len=0)
        frame = self._frame(cfg)
        y_pilot, y_data = ch.transmit_frame(
            frame, np.array([1.0 + 0j]), math.inf, cfg, np.random.default_rng(0))
        np.testing.assert_allclose(y_data, frame.data_block, atol=1e-10)
        np.testing.assert_allclose(y_pilot, frame.pilot_block, atol=1e-10)

    def test_no_cp_dispersive_channel_leaks_isi(self):
        cfg = ofdm.FrameConfig(cp_len=0)
        frame = self._frame(cfg)
        rng = np.random.default_rng(9)
        taps = ch.sample_channel(ch.ChannelConfig(), rng)
        _, y_data = ch.transmit_frame(frame, taps, math.inf, cfg, rng)
        ideal = frame.data_block * ch.frequency_response(taps, 64)
        assert np.linalg.norm(y_data - ideal) > 1e-3

    def test_deterministic_given_seed(self):
        cfg = ofdm.FrameConfig()
        frame = self._frame(cfg)
        taps = ch.sample_channel(ch.ChannelConfig(), np.random.default_rng(1))
        a = ch.transmit_frame(frame, taps, 10.0, cfg, np.random.default_rng(42))
        b = ch.transmit_frame(frame, taps, 10.0, cfg, np.random.default_rng(42))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
