"""Signal-chain primitives: QPSK, unitary DFT, cyclic prefix, clipping,
frame assembly."""

import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdmdnn import ofdm

S = 1 / math.sqrt(2)


class TestQpsk:
    def test_mapping_examples(self):
        np.testing.assert_allclose(
            ofdm.qpsk_modulate([0, 0]), [S + S * 1j], atol=1e-5)
        np.testing.assert_allclose(
            ofdm.qpsk_modulate([1, 1]), [-S - S * 1j], atol=1e-5)
        np.testing.assert_allclose(
            ofdm.qpsk_modulate([0, 1, 1, 0]), [S - S * 1j, -S + S * 1j], atol=1e-5)

    def test_unit_energy(self):
        sym = ofdm.qpsk_modulate(np.random.default_rng(0).integers(0, 2, 256))
        np.testing.assert_allclose(np.abs(sym), 1.0, atol=1e-12)

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            ofdm.qpsk_modulate([0, 1, 0])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            ofdm.qpsk_modulate([0, 2])

    def test_demod_sign_rule(self):
        assert list(ofdm.qpsk_demodulate_hard([S + S * 1j])) == [0, 0]
        assert list(ofdm.qpsk_demodulate_hard([-0.1 + 0.9j])) == [1, 0]

    def test_demod_boundary_zero_is_bit_zero(self):
        assert list(ofdm.qpsk_demodulate_hard([0.0 + 0.0j])) == [0, 0]

    def test_exhaustive_roundtrip(self):
        for bits in product((0, 1), repeat=4):
            back = ofdm.qpsk_demodulate_hard(ofdm.qpsk_modulate(np.array(bits)))
            assert list(back) == list(bits)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=64).filter(
        lambda b: len(b) % 2 == 0))
    def test_roundtrip_property(self, bits):
        back = ofdm.qpsk_demodulate_hard(ofdm.qpsk_modulate(np.array(bits)))
        assert list(back) == bits


class TestDft:
    def test_impulse(self):
        np.testing.assert_allclose(ofdm.dft([1, 0, 0, 0], 4), [0.5] * 4, atol=1e-12)

    @pytest.mark.parametrize("n", [4, 64])
    def test_unitarity_and_parseval(self, n):
        rng = np.random.default_rng(n)
        for _ in range(50):
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            spec = ofdm.dft(x)
            np.testing.assert_allclose(ofdm.idft(spec), x, atol=1e-10)
            assert abs(np.sum(np.abs(spec) ** 2) - np.sum(np.abs(x) ** 2)) < 1e-10

    def test_length_check(self):
        with pytest.raises(ValueError):
            ofdm.dft([1, 2, 3], 4)
        with pytest.raises(ValueError):
            ofdm.idft([1, 2, 3], 4)


class TestCyclicPrefix:
    def test_add_example(self):
        out = ofdm.add_cp(np.array([1, 2, 3, 4]), 2)
        np.testing.assert_array_equal(out, [3, 4, 1, 2, 3, 4])

    def test_add_zero_is_identity(self):
        t = np.arange(8.0)
        np.testing.assert_array_equal(ofdm.add_cp(t, 0), t)

    @pytest.mark.parametrize("cp_len", [0, 8, 16])
    def test_remove_inverts_add(self, cp_len):
        rng = np.random.default_rng(cp_len)
        t = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        np.testing.assert_array_equal(ofdm.remove_cp(ofdm.add_cp(t, cp_len), cp_len), t)

    def test_too_long_cp_rejected(self):
        with pytest.raises(ValueError):
            ofdm.add_cp(np.zeros(4), 5)


class TestClipping:
    def test_below_threshold_unchanged(self):
        x = np.array([0.5 * np.exp(1j * np.pi / 3)])
        np.testing.assert_array_equal(
            ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=1.0)), x)

    def test_above_threshold_keeps_phase(self):
        x = np.array([2.0 * np.exp(1j * np.pi / 4)])
        out = ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=1.0))
        np.testing.assert_allclose(out, [np.exp(1j * np.pi / 4)], atol=1e-12)

    def test_clipped_ofdm_rms(self):
        # Monte Carlo oracle over >= 10^5 time samples of unit-power OFDM:
        # the CR=1 clipped rms measured from the magnitude distribution is
        # 0.796 (the complex-Gaussian limit is sqrt(1 - e^-1) = 0.795).
        rng = np.random.default_rng(42)
        x = ofdm.idft(ofdm.qpsk_modulate(rng.integers(0, 2, size=(4000, 128))))
        out = ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=1.0))
        rms = np.sqrt(np.mean(np.abs(out) ** 2))
        assert abs(rms - 0.796) < 0.01
        assert np.abs(out).max() <= 1.0 + 1e-12

    def test_infinite_threshold_is_identity(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        np.testing.assert_array_equal(
            ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=math.inf)), x)

    @given(st.floats(0.2, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_magnitude_bound_property(self, ratio):
        rng = np.random.default_rng(7)
        x = 3 * (rng.standard_normal(128) + 1j * rng.standard_normal(128))
        out = ofdm.clip_signal(x, ofdm.ClipConfig(clip_ratio=ratio))
        assert np.abs(out).max() <= ratio + 1e-9

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            ofdm.ClipConfig(clip_ratio=0.0)


class TestBuildFrame:
    def test_time_signal_length_with_cp(self):
        cfg = ofdm.FrameConfig()
        frame = ofdm.build_frame(np.zeros(128, dtype=int), cfg,
                                 np.random.default_rng(0))
        assert frame.time_signal.shape == (160,)

    def test_time_signal_length_without_cp(self):
        cfg = ofdm.FrameConfig(cp_len=0)
        frame = ofdm.build_frame(np.zeros(128, dtype=int), cfg,
                                 np.random.default_rng(0))
        assert frame.time_signal.shape == (128,)

    def test_pilots_fixed_for_any_seed(self):
        cfg = ofdm.FrameConfig(n_pilots=8)
        idx = list(cfg.pilot_indices)
        expected = ofdm.pilot_symbols(64)[idx]
        for seed in (0, 1, 99):
            frame = ofdm.build_frame(np.zeros(128, dtype=int), cfg,
                                     np.random.default_rng(seed))
            np.testing.assert_array_equal(frame.pilot_block[idx], expected)

    def test_filler_tones_are_unit_qpsk(self):
        cfg = ofdm.FrameConfig(n_pilots=8)
        frame = ofdm.build_frame(np.zeros(128, dtype=int), cfg,
                                 np.random.default_rng(3))
        np.testing.assert_allclose(np.abs(frame.pilot_block), 1.0, atol=1e-12)

    def test_deterministic_given_seed(self):
        cfg = ofdm.FrameConfig(n_pilots=8, clip=ofdm.ClipConfig(1.0))
        bits = np.random.default_rng(5).integers(0, 2, 128)
        a = ofdm.build_frame(bits, cfg, np.random.default_rng(11))
        b = ofdm.build_frame(bits, cfg, np.random.default_rng(11))
        np.testing.assert_array_equal(a.time_signal, b.time_signal)

    def test_clip_applied_to_time_signal(self):
        cfg = ofdm.FrameConfig(clip=ofdm.ClipConfig(clip_ratio=1.0))
        bits = np.random.default_rng(6).integers(0, 2, 128)
        frame = ofdm.build_frame(bits, cfg, np.random.default_rng(0))
        assert np.abs(frame.time_signal).max() <= 1.0 + 1e-12

    def test_wrong_bit_count_rejected(self):
        with pytest.raises(ValueError):
            ofdm.build_frame(np.zeros(100, dtype=int), ofdm.FrameConfig(),
                             np.random.default_rng(0))


class TestFrameConfig:
    def test_default_pilot_indices_evenly_spaced(self):
        cfg = ofdm.FrameConfig(n_pilots=8)
        assert cfg.pilot_indices == tuple(range(0, 64, 8))

    def test_full_pilots_cover_everything(self):
        assert ofdm.FrameConfig().pilot_indices == tuple(range(64))

    @pytest.mark.parametrize("kwargs", [
        {"cp_len": -1},
        {"cp_len": 65},
        {"n_pilots": 0},
        {"n_pilots": 65},
        {"n_pilots": 2, "pilot_indices": (3, 3)},
        {"n_pilots": 2, "pilot_indices": (8, 3)},
        {"n_pilots": 1, "pilot_indices": (64,)},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ofdm.FrameConfig(**kwargs)
