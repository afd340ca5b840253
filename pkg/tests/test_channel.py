"""Tests for payload accounting, fading, latency, and wire quantization."""

import math

import numpy as np
import pytest

from hybridlm.channel import (
    ChannelSpec,
    LatencySpec,
    PayloadSpec,
    decode_round,
    dequantize_prob,
    encode_round,
    payload_bits,
    quantize_prob,
    quantize_vocab,
    sample_snr,
    token_throughput,
    uplink_latency,
)
from hybridlm.compression import compress, reconstruct
from hybridlm.dist import ProbVec, sort_desc


class TestPayload:
    def test_full_vocabulary_reference_size(self):
        spec = PayloadSpec(vocab_size=32_000, b_prob=8)
        assert spec.b_index == 15
        bits = payload_bits(32_000, spec)
        assert bits == 736_000
        assert bits / 8 == 92_000  # 92 kB

    def test_zero_entries(self):
        assert payload_bits(0, PayloadSpec()) == 0

    def test_thirty_entries(self):
        assert payload_bits(30, PayloadSpec(vocab_size=32_000, b_prob=8)) == 690

    def test_linear_in_entries(self):
        spec = PayloadSpec(vocab_size=1024, b_prob=8)
        slope = spec.b_prob + spec.b_index
        for n in (1, 7, 100):
            assert payload_bits(n, spec) == n * slope

    def test_index_width(self):
        assert PayloadSpec(vocab_size=1024).b_index == 10
        assert PayloadSpec(vocab_size=1025).b_index == 11


class TestSampleSnr:
    def test_fixed(self):
        spec = ChannelSpec(fading="fixed", mean_snr_db=10.0)
        assert sample_snr(spec, np.random.default_rng(0)) == pytest.approx(10.0)

    def test_rayleigh_mean(self):
        spec = ChannelSpec(fading="rayleigh", mean_snr_db=10.0)
        rng = np.random.default_rng(1)
        draws = np.array([sample_snr(spec, rng) for _ in range(1_000_000)])
        assert abs(draws.mean() - 10.0) / 10.0 < 0.01

    def test_rician_mean(self):
        spec = ChannelSpec(fading="rician", mean_snr_db=10.0, rician_k_db=10.0)
        rng = np.random.default_rng(2)
        draws = np.array([sample_snr(spec, rng) for _ in range(200_000)])
        assert abs(draws.mean() - 10.0) / 10.0 < 0.01

    def test_rician_high_k_deterministic_limit(self):
        spec = ChannelSpec(fading="rician", mean_snr_db=10.0, rician_k_db=60.0)
        rng = np.random.default_rng(3)
        draws = np.array([sample_snr(spec, rng) for _ in range(10_000)])
        assert np.all(np.abs(draws - 10.0) / 10.0 < 0.01)

    def test_floor(self):
        spec = ChannelSpec(fading="rayleigh", mean_snr_db=-200.0)
        rng = np.random.default_rng(4)
        assert all(sample_snr(spec, rng) >= 1e-9 for _ in range(100))

    def test_bad_fading_kind(self):
        with pytest.raises(ValueError):
            ChannelSpec(fading="awgn")


class TestUplinkLatency:
    def test_reference_value(self):
        tau = uplink_latency(736_000, 10e6, 10.0)
        assert tau == pytest.approx(736_000 / (1e7 * math.log2(11.0)))
        assert tau == pytest.approx(0.021275, abs=1e-5)

    def test_zero_bits(self):
        assert uplink_latency(0, 10e6, 10.0) == 0.0

    def test_unit_case(self):
        assert uplink_latency(1, 1.0, 1.0) == pytest.approx(1.0)

    def test_invalid_snr(self):
        with pytest.raises(ValueError):
            uplink_latency(100, 1e6, 0.0)


class TestTokenThroughput:
    LAT = LatencySpec(tau_slm_s=25.6e-3, tau_llm_s=104.6e-3)

    def test_reference_full_payload(self):
        tau = uplink_latency(736_000, 10e6, 10.0)
        tp = token_throughput(self.LAT, tau, skipped=False)
        assert tp == pytest.approx(6.60, abs=0.01)

    def test_skipped(self):
        assert token_throughput(self.LAT, 0.0, skipped=True) == pytest.approx(39.0625)

    def test_vanishes_with_slow_link(self):
        assert token_throughput(self.LAT, 1e9, skipped=False) < 1e-8

    def test_strictly_decreasing_in_each_latency(self):
        base = token_throughput(self.LAT, 0.01, skipped=False)
        assert token_throughput(self.LAT, 0.02, skipped=False) < base
        slower = LatencySpec(tau_slm_s=30e-3, tau_llm_s=104.6e-3)
        assert token_throughput(slower, 0.01, skipped=False) < base
        slower = LatencySpec(tau_slm_s=25.6e-3, tau_llm_s=120e-3)
        assert token_throughput(slower, 0.01, skipped=False) < base

    def test_rayleigh_mean_below_fixed_snr_value(self):
        # Latency is convex in SNR, so fading averages strictly under the
        # fixed-SNR throughput at the same mean.
        spec = ChannelSpec(fading="rayleigh", mean_snr_db=10.0)
        rng = np.random.default_rng(5)
        bits = 736_000
        fixed_tp = token_throughput(
            self.LAT, uplink_latency(bits, 10e6, 10.0), skipped=False
        )
        tps = [
            token_throughput(
                self.LAT, uplink_latency(bits, 10e6, sample_snr(spec, rng)), False
            )
            for _ in range(100_000)
        ]
        assert np.mean(tps) < fixed_tp


class TestQuantization:
    def test_code_round_trip_exact(self):
        for code in (0, 1, 127, 255):
            assert quantize_prob(dequantize_prob(code, 8), 8) == code

    def test_quantize_vocab_preserves_positive_draft(self):
        p = ProbVec(np.array([0.9995, 0.0003, 0.0002]))
        c = compress(sort_desc(p), 1, d=2)
        qc = quantize_vocab(c, PayloadSpec(vocab_size=3, b_prob=8))
        assert qc.draft_prob == pytest.approx(1 / 255)

    def test_quantize_error_bounded(self):
        rng = np.random.default_rng(6)
        spec = PayloadSpec(vocab_size=64, b_prob=8)
        p = ProbVec(rng.dirichlet(np.ones(64)))
        c = compress(sort_desc(p), 16, d=int(np.argmax(p.probs)))
        qc = quantize_vocab(c, spec)
        assert np.max(np.abs(qc.entry_probs - c.entry_probs)) <= 0.5 / 255 + 1e-12

    def test_reconstruct_after_quantization_valid(self):
        rng = np.random.default_rng(7)
        spec = PayloadSpec(vocab_size=128, b_prob=8)
        for _ in range(50):
            p = ProbVec(rng.dirichlet(np.full(128, 0.2)) + 1e-12)
            c = compress(sort_desc(p), int(rng.integers(1, 129)), d=int(np.argmax(p.probs)))
            r = reconstruct(quantize_vocab(c, spec))
            assert abs(r.probs.sum() - 1.0) < 1e-9


class TestWireTranscript:
    def test_round_trip(self):
        p = ProbVec(np.array([0.5, 0.25, 0.15, 0.1]))
        spec = PayloadSpec(vocab_size=4, b_prob=8)
        c = quantize_vocab(compress(sort_desc(p), 2, d=3), spec)
        blob = encode_round(17, c, spec)
        # header 10 bytes + 3 records (draft outside top-2) of 3 bytes
        assert len(blob) == 10 + 3 * 3
        round_idx, back = decode_round(blob, spec, vocab_size=4)
        assert round_idx == 17
        assert back.k == c.k
        np.testing.assert_array_equal(back.entry_ids, c.entry_ids)
        np.testing.assert_allclose(back.entry_probs, c.entry_probs, atol=1e-12)
        assert back.draft_id == c.draft_id
        assert back.draft_prob == pytest.approx(c.draft_prob)

    def test_draft_in_topk_no_extra_record(self):
        p = ProbVec(np.array([0.5, 0.25, 0.15, 0.1]))
        spec = PayloadSpec(vocab_size=4, b_prob=8)
        c = quantize_vocab(compress(sort_desc(p), 2, d=0), spec)
        blob = encode_round(0, c, spec)
        assert len(blob) == 10 + 2 * 3

    def test_accounting_uses_bit_formula(self):
        spec = PayloadSpec(vocab_size=4, b_prob=8)
        p = ProbVec(np.array([0.5, 0.25, 0.15, 0.1]))
        c = compress(sort_desc(p), 2, d=3)
        bits = payload_bits(c.n_transmitted, spec)
        assert bits == 3 * (8 + 2)
        blob = encode_round(0, quantize_vocab(c, spec), spec)
        assert bits != len(blob) * 8  # byte-aligned transcript differs
