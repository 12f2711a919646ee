from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featlink import baseband as bb
from featlink import channel as chan


def cfg_for(n=2, m=4, c=48, h=256, w=128, **kw):
    return bb.LinkConfig(n_antennas=n, quant_bits=m, feature_channels=c,
                         image_height=h, image_width=w, **kw)


class TestStreamMapping:
    def test_stream_length(self):
        cfg = cfg_for(n=2, c=48)
        s = bb.map_to_streams(np.zeros(cfg.map_shape), cfg)
        assert s.shape == (2, 3072)

    def test_channel_major_layout(self):
        cfg = cfg_for(n=4, c=8, h=64, w=64)
        p = np.arange(np.prod(cfg.map_shape)).reshape(cfg.map_shape)
        s = bb.map_to_streams(p, cfg)
        # stream i holds channels 2i, 2i+1
        assert np.array_equal(s[1], np.concatenate([p[2].ravel(), p[3].ravel()]))

    def test_single_stream_is_flatten(self):
        cfg = cfg_for(n=1, c=24)
        p = np.random.default_rng(0).standard_normal(cfg.map_shape)
        assert np.array_equal(bb.map_to_streams(p, cfg)[0], p.ravel())

    @pytest.mark.parametrize("n,c", [(1, 24), (2, 48), (4, 96)])
    def test_round_trip(self, n, c):
        cfg = cfg_for(n=n, c=c)
        p = np.random.default_rng(n).standard_normal(cfg.map_shape)
        assert np.array_equal(bb.unmap_from_streams(bb.map_to_streams(p, cfg), cfg), p)

    def test_indivisible_channels_rejected(self):
        with pytest.raises(ValueError):
            cfg_for(n=4, c=50)

    def test_image_size_checked(self):
        with pytest.raises(ValueError):
            cfg_for(h=200)

    def test_wrong_map_shape(self):
        cfg = cfg_for()
        with pytest.raises(ValueError):
            bb.map_to_streams(np.zeros((47, 16, 8)), cfg)


class TestActivation:
    def test_values(self):
        assert bb.activate(0.0) == 0.0
        xs = np.linspace(0, 30, 200)
        ys = bb.activate(xs)
        assert np.all(np.diff(ys) >= 0) and ys[-1] == pytest.approx(1.0)
        assert np.max(np.abs(bb.activate(-xs) + ys)) <= 1e-15


class TestQuantizer:
    def test_examples(self):
        assert bb.quantize(0.3, 2) == 2
        assert bb.quantize(1.0, 2) == 3
        assert bb.quantize(-1.0, 4) == 0
        assert bb.dequantize(2, 2) == 0.25
        assert bb.dequantize(0, 2) == -0.75

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 8])
    def test_indices_fixed_point(self, m):
        idx = np.arange(2 ** m)
        assert np.array_equal(bb.quantize(bb.dequantize(idx, m), m), idx)

    @pytest.mark.parametrize("m", [1, 2, 4, 8])
    def test_error_bound_sweep(self, m):
        x = np.random.default_rng(m).uniform(-1, 1, 10 ** 6)
        x[:2] = [-1.0, 1.0]
        err = np.abs(bb.dequantize(bb.quantize(x, m), m) - x)
        assert err.max() <= 2.0 ** -m + 1e-15
        assert err.max() <= 2.0 ** (1 - m)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            bb.quantize(np.array([0.0, np.nan]), 3)
        with pytest.raises(ValueError):
            bb.quantize(0.0, 0)


class TestBitPacking:
    def test_examples(self):
        assert bb.pack_bits([[2]], 2, "natural").bits.tolist() == [[1, 0]]
        assert bb.pack_bits([[2]], 2, "gray").bits.tolist() == [[1, 1]]

    def test_gray_neighbors_differ_in_one_bit(self):
        m = 5
        bits = bb.pack_bits([np.arange(2 ** m)], m, "gray").bits[0].reshape(-1, m)
        assert np.all(np.sum(bits[1:] != bits[:-1], axis=1) == 1)

    def test_odd_length_padded(self):
        s = bb.pack_bits(np.array([[1, 2, 3], [0, 7, 5]]), 3)
        assert s.bits.shape == (2, 10) and s.padding_bits == 1
        assert np.all(s.bits[:, -1] == 0)
        assert np.array_equal(bb.unpack_bits(s, 3), [[1, 2, 3], [0, 7, 5]])

    @settings(max_examples=50, deadline=None)
    @given(m=st.integers(1, 10), n=st.integers(1, 4), length=st.integers(1, 30),
           coding=st.sampled_from(bb.BIT_CODINGS), seed=st.integers(0, 1000))
    def test_round_trip(self, m, n, length, coding, seed):
        idx = np.random.default_rng(seed).integers(0, 2 ** m, (n, length))
        assert np.array_equal(bb.unpack_bits(bb.pack_bits(idx, m, coding), m, coding), idx)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            bb.pack_bits([[4]], 2)


class TestQpsk:
    def test_zero_bits_symbol(self):
        x = bb.qpsk_modulate(bb.BitStreams(np.array([[0, 0]], np.uint8)))
        assert x[0, 0] == pytest.approx((1 + 1j) / np.sqrt(2))
        assert abs(x[0, 0]) ** 2 == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [1, 2, 4, 8])
    def test_unit_column_energy(self, n):
        bits = np.random.default_rng(n).integers(0, 2, (n, 400), dtype=np.uint8)
        x = bb.qpsk_modulate(bb.BitStreams(bits))
        assert np.max(np.abs(np.sum(np.abs(x) ** 2, axis=0) - 1)) <= 1e-12

    def test_constellation_zero_mean(self):
        bits = np.random.default_rng(0).integers(0, 2, (1, 2 * 10 ** 6), dtype=np.uint8)
        assert abs(np.mean(bb.qpsk_modulate(bb.BitStreams(bits)))) < 5e-3

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            bb.qpsk_modulate(bb.BitStreams(np.zeros((1, 3), np.uint8)))

    def test_zero_tie_breaks_to_bit_zero(self):
        assert bb.hard_decide(np.array([0.0 + 0.0j, -0.0 - 1j])).tolist() == [0, 0, 0, 1]

    def test_noiseless_demod_recovers_bits(self):
        ch = chan.draw_channel(4, 300.0, 2)
        bits = np.random.default_rng(1).integers(0, 2, (4, 256), dtype=np.uint8)
        y = chan.transmit(chan.precode(bb.qpsk_modulate(bb.BitStreams(bits)), ch), ch, 1)
        rx = bb.qpsk_demodulate(chan.combine(y, ch), ch)
        assert np.array_equal(rx.bits, bits)

    def test_degenerate_row_decided_on_raw_symbols(self):
        ch = chan.ChannelRealization.from_matrix(np.diag([1.0, 0.0]), 10.0)
        yp = np.array([[1 + 1j, -1 - 1j], [-0.1 + 0.2j, 0.3 - 0.4j]])
        rx = bb.qpsk_demodulate(yp, ch)
        assert rx.bits.tolist() == [[0, 0, 1, 1], [1, 0, 0, 1]]

    def test_siso_rayleigh_ber_matches_closed_form(self):
        # 0 dB: 0.5 * (1 - sqrt(0.5 / 1.5)) = 0.211325; fast fading, 1e7 bits
        rng = np.random.default_rng(7)
        n_sym = 5 * 10 ** 6
        bits = rng.integers(0, 2, (1, 2 * n_sym), dtype=np.uint8)
        x = bb.qpsk_modulate(bb.BitStreams(bits))[0]
        h = (rng.standard_normal(n_sym) + 1j * rng.standard_normal(n_sym)) / np.sqrt(2)
        noise = (rng.standard_normal(n_sym) + 1j * rng.standard_normal(n_sym)) / np.sqrt(2)
        y = np.abs(h) * x + noise  # combining with U^H = conj phase
        ber = np.mean(bb.hard_decide(y[None]) != bits)
        # both bits of a symbol share one fade, so inflate the binomial variance by 2
        assert abs(ber - 0.211325) < 3 * np.sqrt(2 * 0.21 * 0.79 / (2 * n_sym))


class TestCompressionRatio:
    def test_values(self):
        assert bb.compression_ratio(4, 96) == Fraction(1, 16)
        assert bb.compression_ratio(2, 24) == Fraction(1, 128)
        assert bb.compression_ratio(8, 96) == Fraction(1, 8)
        assert bb.compression_ratio(cfg_for(m=4, c=96, n=4)) == Fraction(1, 16)


class TestTransportFrame:
    @pytest.mark.parametrize("n", [1, 2, 4])
    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_noiseless_round_trip_is_bit_exact(self, n, m):
        cfg = cfg_for(n=n, m=m, c=24 if n < 4 else 48, h=128, w=64)
        rng = np.random.default_rng(10 * n + m)
        p_c = rng.standard_normal(cfg.map_shape) * 2
        ch = chan.draw_channel(n, 300.0, n + m)
        assert ch.sigma.min() >= 1e-6
        rx, rep = bb.transport_frame(p_c, ch, cfg, seed=3)
        sent_idx = bb.quantize(np.tanh(p_c), m)
        assert np.array_equal(bb.quantize(rx, m), sent_idx)
        assert rep.bit_errors == [0] * n
        assert np.max(np.abs(rep.noise)) <= 2.0 ** -m + 1e-7

    def test_pure_noise_gives_half_ber(self):
        cfg = cfg_for(n=2, m=8, c=256, h=512, w=512)  # 2**20 bits per stream
        ch = chan.draw_channel(2, -300.0, 1)
        p_c = np.random.default_rng(0).standard_normal(cfg.map_shape)
        _, rep = bb.transport_frame(p_c, ch, cfg, seed=2)
        assert rep.bits_sent >= 10 ** 6
        for ber in rep.per_stream_ber:
            assert abs(ber - 0.5) < 0.005

    def test_strong_stream_beats_weak_stream(self):
        # averaged over channel draws at 15 dB, stream 1 errors << stream 2 errors
        cfg = cfg_for(n=2, m=4, c=48, h=128, w=128)
        errs = np.zeros(2)
        p_c = np.random.default_rng(1).standard_normal(cfg.map_shape)
        for seed in range(200):
            ch = chan.draw_channel(2, 15.0, seed)
            _, rep = bb.transport_frame(p_c, ch, cfg, seed)
            errs += rep.bit_errors
        assert errs[0] * 50 < errs[1]

    def test_report_fields(self):
        cfg = cfg_for(n=2, m=3, c=2, h=64, w=64)
        ch = chan.draw_channel(2, 5.0, 0)
        rx, rep = bb.transport_frame(np.zeros(cfg.map_shape), ch, cfg, 0)
        d = rep.to_dict()
        assert set(d) == {"per_stream_ber", "bit_errors", "bits_sent", "padding_bits",
                          "degenerate_streams", "equivalent_snrs_db", "cr"}
        # L is a multiple of 16 for valid image sizes, so no padding here
        assert d["padding_bits"] == 0 and d["bits_sent"] == 3 * 16
        assert d["cr"] == "1/1024"
        assert rx.dtype == np.float32 and rx.shape == cfg.map_shape

    def test_antenna_mismatch(self):
        cfg = cfg_for(n=2)
        with pytest.raises(ValueError):
            bb.transport_frame(np.zeros(cfg.map_shape), chan.draw_channel(4, 0, 0), cfg, 0)

    def test_ber_non_increasing_in_snr(self):
        cfg = cfg_for(n=2, m=8, c=256, h=256, w=256)  # 2**18 bits per stream per frame
        p_c = np.random.default_rng(2).standard_normal(cfg.map_shape)
        prev = None
        for snr in (-5, 0, 5, 10, 15):
            errs = np.zeros(2)
            bits = 0
            for seed in range(4):
                _, rep = bb.transport_frame(p_c, chan.draw_channel(2, snr, seed), cfg, seed)
                errs += rep.bit_errors
                bits += rep.bits_sent
            ber = errs / bits
            assert bits >= 10 ** 6
            if prev is not None:
                assert np.all(ber <= prev)
            prev = ber
