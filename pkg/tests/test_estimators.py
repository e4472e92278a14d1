"""LS / LMMSE estimation, interpolation, and one-tap detection."""

import math

import numpy as np
import pytest

from ofdmdnn import estimators as est
from ofdmdnn import ofdm
from ofdmdnn.channel import ChannelConfig
from ofdmdnn.simulate import ScenarioConfig, frame_rng, simulate_frames


def q_func(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def full_pattern():
    return est.PilotPattern.from_frame_config(ofdm.FrameConfig())


def sparse_pattern():
    return est.PilotPattern.from_frame_config(ofdm.FrameConfig(n_pilots=8))


def default_stats(pattern, n_draws=100_000, seed=0):
    return est.estimate_correlation_stats(
        ChannelConfig(), pattern, n_draws, np.random.default_rng(seed))


class TestCorrelationStats:
    def test_flat_channel_all_ones(self):
        cfg = ChannelConfig(n_paths=4, max_delay=0)
        stats = est.estimate_correlation_stats(
            cfg, full_pattern(), 20_000, np.random.default_rng(0))
        np.testing.assert_allclose(stats.r_full_pilot, 1.0, atol=0.02)
        np.testing.assert_allclose(stats.r_pilot_pilot, 1.0, atol=0.02)

    def test_diagonal_is_unit_energy(self):
        stats = default_stats(full_pattern())
        np.testing.assert_allclose(np.diag(stats.r_pilot_pilot).real, 1.0, atol=0.02)
        assert np.abs(np.diag(stats.r_pilot_pilot).imag).max() < 1e-12

    def test_hermitian_by_construction(self):
        stats = default_stats(sparse_pattern(), n_draws=20_000)
        diff = stats.r_pilot_pilot - stats.r_pilot_pilot.conj().T
        assert np.abs(diff).max() < 1e-12

    def test_too_few_draws_rejected(self):
        with pytest.raises(ValueError):
            est.estimate_correlation_stats(
                ChannelConfig(), full_pattern(), 5000, np.random.default_rng(0))

    def test_save_load_roundtrip(self, tmp_path):
        stats = default_stats(sparse_pattern(), n_draws=10_000)
        path = tmp_path / "stats.json"
        est.save_stats(stats, path)
        back = est.load_stats(path)
        np.testing.assert_array_equal(back.r_full_pilot, stats.r_full_pilot)
        np.testing.assert_array_equal(back.r_pilot_pilot, stats.r_pilot_pilot)
        assert back.pattern_indices == stats.pattern_indices
        assert back.n_draws == stats.n_draws
        assert back.channel == stats.channel

    def test_load_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(ValueError):
            est.load_stats(path)


class TestLsEstimate:
    def test_noiseless_exactness(self):
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        batch = simulate_frames(scenario, math.inf, 0, ("ls",), 0, 32)
        h_ls = est.ls_estimate(batch.y_pilot, full_pattern())
        np.testing.assert_allclose(h_ls, batch.h_freq, atol=1e-10)

    def test_unit_pilot_division(self):
        pattern = est.PilotPattern(indices=(0,), values=np.array([1.0 + 0j]))
        out = est.ls_estimate(np.array([2.0 + 2.0j]), pattern)
        np.testing.assert_allclose(out, [2.0 + 2.0j])

    def test_mse_equals_noise_variance(self):
        # At 10 dB the LS error on unit-magnitude pilots is exactly the
        # noise sample variance sigma_w^2 = 0.1 (Monte Carlo, 10^4 frames).
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        pattern = full_pattern()
        err_sq = 0.0
        n = 0
        for start in range(0, 10_000, 2000):
            batch = simulate_frames(scenario, 10.0, 1, ("lsmse",), start, 2000)
            h_ls = est.ls_estimate(batch.y_pilot, pattern)
            err_sq += np.sum(np.abs(h_ls - batch.h_freq) ** 2)
            n += h_ls.size
        assert abs(err_sq / n - 0.1) < 0.01


class TestInterpolation:
    def test_full_grid_is_identity(self):
        vals = np.arange(64.0) + 1j
        out = est.interpolate_linear(vals, range(64), 64)
        np.testing.assert_allclose(out, vals, atol=1e-12)

    def test_midpoint(self):
        out = est.interpolate_linear(np.array([0.0, 8.0]), (0, 8), 64)
        assert abs(out[4] - 4.0) < 1e-12

    def test_cyclic_wraparound(self):
        idx = tuple(range(0, 64, 8))
        vals = np.zeros(8, dtype=complex)
        vals[0] = 2.0   # tone 0
        vals[7] = 1.0   # tone 56
        out = est.interpolate_linear(vals, idx, 64)
        # tone 60 sits halfway between pilot 56 and pilot 0 (cyclically)
        assert abs(out[60] - 1.5) < 1e-12

    def test_flat_input_gives_flat_output(self):
        out = est.interpolate_linear(np.full(8, 3.0 - 1j), range(0, 64, 8), 64)
        np.testing.assert_allclose(out, 3.0 - 1j, atol=1e-12)

    def test_fewer_than_two_pilots_rejected(self):
        with pytest.raises(ValueError):
            est.interpolate_linear(np.array([1.0]), (0,), 64)


class TestMmseEstimate:
    def test_matches_ls_at_infinite_snr_full_pilots(self):
        pattern = full_pattern()
        stats = default_stats(pattern)
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        batch = simulate_frames(scenario, math.inf, 2, ("mmse",), 0, 16)
        h_ls = est.ls_estimate(batch.y_pilot, pattern)
        h_mmse = est.mmse_estimate(batch.y_pilot, pattern, stats, math.inf)
        np.testing.assert_allclose(h_mmse, h_ls, atol=1e-6)

    def test_flat_channel_shrinks_noise(self):
        # On a flat channel every pilot sees the same gain, so LMMSE should
        # average across pilots: its per-tone error variance must come out
        # well below the single-pilot LS error variance.
        cfg = ChannelConfig(n_paths=4, max_delay=0)
        pattern = full_pattern()
        stats = est.estimate_correlation_stats(
            cfg, pattern, 50_000, np.random.default_rng(3))
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), cfg)
        batch = simulate_frames(scenario, 10.0, 3, ("flatmmse",), 0, 2000)
        h_ls = est.ls_estimate(batch.y_pilot, pattern)
        h_mmse = est.mmse_estimate(batch.y_pilot, pattern, stats, 10.0)
        var_ls = np.mean(np.abs(h_ls - batch.h_freq) ** 2)
        var_mmse = np.mean(np.abs(h_mmse - batch.h_freq) ** 2)
        assert var_mmse < 0.25 * var_ls

    def test_beats_ls_interpolation_at_10db(self):
        # Monte Carlo oracle behind the estimator-quality ordering claim.
        pattern = full_pattern()
        stats = default_stats(pattern)
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        mse_ls = mse_mmse = 0.0
        for start in range(0, 10_000, 2500):
            batch = simulate_frames(scenario, 10.0, 4, ("ord",), start, 2500)
            h_ls = est.interpolate_linear(
                est.ls_estimate(batch.y_pilot, pattern), pattern.indices, 64)
            h_mmse = est.mmse_estimate(batch.y_pilot, pattern, stats, 10.0)
            mse_ls += np.sum(np.abs(h_ls - batch.h_freq) ** 2)
            mse_mmse += np.sum(np.abs(h_mmse - batch.h_freq) ** 2)
        assert mse_mmse < mse_ls

    @pytest.mark.slow
    def test_mse_ordering_across_snr_grid(self):
        pattern = full_pattern()
        stats = default_stats(pattern)
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        for snr in (5.0, 10.0, 15.0, 20.0):
            mse_ls = mse_mmse = 0.0
            for start in range(0, 10_000, 2500):
                batch = simulate_frames(scenario, snr, 5, ("grid",), start, 2500)
                h_ls = est.interpolate_linear(
                    est.ls_estimate(batch.y_pilot, pattern), pattern.indices, 64)
                h_mmse = est.mmse_estimate(batch.y_pilot, pattern, stats, snr)
                mse_ls += np.sum(np.abs(h_ls - batch.h_freq) ** 2)
                mse_mmse += np.sum(np.abs(h_mmse - batch.h_freq) ** 2)
            assert mse_mmse <= mse_ls, f"ordering violated at {snr} dB"

    def test_pattern_mismatch_rejected(self):
        stats = default_stats(sparse_pattern(), n_draws=10_000)
        with pytest.raises(ValueError):
            est.mmse_estimate(np.zeros(64, dtype=complex), full_pattern(),
                              stats, 10.0)


class TestEqualizeAndDetect:
    def test_perfect_csi_noiseless_recovery(self):
        scenario = ScenarioConfig("t", ofdm.FrameConfig(), ChannelConfig())
        batch = simulate_frames(scenario, math.inf, 6, ("eq",), 0, 64)
        bits = est.equalize_and_detect(batch.y_data, batch.h_freq)
        np.testing.assert_array_equal(bits, batch.bits)

    def test_awgn_ber_matches_q_function(self):
        # Analytic oracle: per-bit QPSK error rate Q(sqrt(2 Eb/N0)) at
        # Eb/N0 = 4 dB is 1.2501e-2; >= 10^6 bits keeps 3 binomial std
        # around 3.4e-4.
        ebn0_db = 4.0
        snr_db = ebn0_db + 10.0 * math.log10(2.0)
        scenario = ScenarioConfig(
            "t", ofdm.FrameConfig(),
            ChannelConfig(n_paths=1, max_delay=0, fading=False))
        errors = bits = 0
        for start in range(0, 8192, 2048):
            batch = simulate_frames(scenario, snr_db, 7, ("qfun",), start, 2048)
            pred = est.equalize_and_detect(batch.y_data, np.ones((1, 64)))
            errors += int(np.count_nonzero(pred != batch.bits))
            bits += batch.bits.size
        expect = q_func(math.sqrt(2.0 * 10 ** (ebn0_db / 10.0)))
        assert bits >= 1_000_000
        assert abs(errors / bits - expect) < 3 * math.sqrt(expect * (1 - expect) / bits)

    def test_zero_symbols_decode_to_zero_bits(self):
        bits = est.equalize_and_detect(np.zeros(64, dtype=complex),
                                       np.ones(64, dtype=complex))
        assert not bits.any()

    def test_dead_fade_does_not_crash(self):
        y = np.ones(4, dtype=complex)
        h = np.array([0.0, 1e-15, 1.0, 1e-9], dtype=complex)
        bits = est.equalize_and_detect(y, h)
        assert bits.shape == (8,)
        assert np.isfinite(bits).all()
