"""Uplink modeling: payload bits, block-fading SNR, Shannon latency, throughput.

Only the vocabulary-distribution uplink is priced; token-index exchanges and
the downlink are treated as free. Probabilities cross the wire as fixed-point
integers of ``b_prob`` bits.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .compression import CompressedVocab

# Deep fades keep rounds finite rather than stalling the simulation.
SNR_FLOOR = 1e-9

FADING_KINDS = ("fixed", "rayleigh", "rician")


@dataclass(frozen=True)
class ChannelSpec:
    fading: str = "rayleigh"
    mean_snr_db: float = 10.0
    bandwidth_hz: float = 10e6
    rician_k_db: float = 10.0

    def __post_init__(self) -> None:
        if self.fading not in FADING_KINDS:
            raise ValueError(f"fading must be one of {FADING_KINDS}, got {self.fading!r}")
        if not self.bandwidth_hz > 0.0:
            raise ValueError("bandwidth must be positive")

    @property
    def mean_snr_linear(self) -> float:
        return 10.0 ** (self.mean_snr_db / 10.0)


@dataclass(frozen=True)
class LatencySpec:
    tau_slm_s: float = 25.6e-3
    tau_llm_s: float = 104.6e-3

    def __post_init__(self) -> None:
        if self.tau_slm_s < 0.0 or self.tau_llm_s < 0.0:
            raise ValueError("compute latencies must be non-negative")


@dataclass(frozen=True)
class PayloadSpec:
    """Bit widths of one transmitted (index, probability) record."""

    vocab_size: int = 32_000
    b_prob: int = 8
    b_index: int = field(init=False)

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise ValueError("vocabulary size must be >= 2")
        if self.b_prob < 1:
            raise ValueError("b_prob must be >= 1")
        object.__setattr__(self, "b_index", math.ceil(math.log2(self.vocab_size)))


def payload_bits(n_entries: int, spec: PayloadSpec) -> int:
    """Uplink payload for n transmitted (index, probability) records."""
    if n_entries < 0:
        raise ValueError("entry count must be non-negative")
    return n_entries * (spec.b_prob + spec.b_index)


def sample_snr(spec: ChannelSpec, rng: np.random.Generator) -> float:
    """One block-fading SNR draw, floored to keep latency finite."""
    mean = spec.mean_snr_linear
    if spec.fading == "fixed":
        snr = mean
    elif spec.fading == "rayleigh":
        snr = mean * rng.exponential(1.0)
    else:
        k = 10.0 ** (spec.rician_k_db / 10.0)
        los = math.sqrt(k / (k + 1.0))
        sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
        re = los + rng.normal(0.0, sigma)
        im = rng.normal(0.0, sigma)
        snr = mean * (re * re + im * im)
    return float(max(snr, SNR_FLOOR))


def uplink_latency(bits: int, bandwidth_hz: float, snr_linear: float) -> float:
    """Shannon-capacity transmission time; zero bits cost zero seconds."""
    if bits == 0:
        return 0.0
    if not snr_linear > 0.0:
        raise ValueError("SNR must be positive")
    return bits / (bandwidth_hz * math.log2(1.0 + snr_linear))


def token_throughput(lat: LatencySpec, tau_comm_s: float, skipped: bool) -> float:
    """Tokens per second for one round."""
    if skipped:
        return 1.0 / lat.tau_slm_s
    return 1.0 / (lat.tau_slm_s + tau_comm_s + lat.tau_llm_s)


def quantize_prob(p: float, b_prob: int) -> int:
    """Linear fixed-point code: round(p * (2^b - 1))."""
    return int(round(p * ((1 << b_prob) - 1)))


def dequantize_prob(code: int, b_prob: int) -> float:
    return code / ((1 << b_prob) - 1)


def quantize_vocab(c: CompressedVocab, spec: PayloadSpec) -> CompressedVocab:
    """Wire-quantized payload with dequantized values.

    The draft entry is floored at one code step so it keeps a positive
    probability; the server-side acceptance test divides by it.
    """
    scale = (1 << spec.b_prob) - 1
    codes = np.round(c.entry_probs * scale)
    draft_code = max(quantize_prob(c.draft_prob, spec.b_prob), 1)
    return CompressedVocab(
        k=c.k,
        entry_ids=c.entry_ids,
        entry_probs=codes / scale,
        draft_id=c.draft_id,
        draft_prob=draft_code / scale,
        vocab_size=c.vocab_size,
    )


# Byte-exact transcript format: little-endian header
# {round: u32, draft_index: u16, k: u16, n_entries: u16} followed by
# n_entries records of {index: u16, prob_q: u8}. Payload *accounting* always
# uses the bit formula above, never this byte-aligned size.
_HEADER = struct.Struct("<IHHH")
_RECORD = struct.Struct("<HB")


def encode_round(round_idx: int, c: CompressedVocab, spec: PayloadSpec) -> bytes:
    if spec.b_prob > 8:
        raise ValueError("transcript records store probabilities in one byte")
    if c.vocab_size > 0xFFFF:
        raise ValueError("transcript indexes are 16-bit")
    ids = list(c.entry_ids)
    probs = list(c.entry_probs)
    if not c.draft_in_topk:
        ids.append(c.draft_id)
        probs.append(c.draft_prob)
    out = bytearray(_HEADER.pack(round_idx, c.draft_id, c.k, len(ids)))
    for i, p in zip(ids, probs):
        out += _RECORD.pack(int(i), quantize_prob(float(p), spec.b_prob))
    return bytes(out)


def decode_round(blob: bytes, spec: PayloadSpec, vocab_size: int) -> tuple[int, CompressedVocab]:
    round_idx, draft_id, k, n_entries = _HEADER.unpack_from(blob, 0)
    ids = []
    probs = []
    off = _HEADER.size
    for _ in range(n_entries):
        idx, code = _RECORD.unpack_from(blob, off)
        ids.append(idx)
        probs.append(dequantize_prob(code, spec.b_prob))
        off += _RECORD.size
    draft_in_topk = draft_id in ids[:k]
    draft_prob = probs[ids.index(draft_id)] if draft_in_topk else probs[-1]
    c = CompressedVocab(
        k=k,
        entry_ids=np.array(ids[:k], dtype=int),
        entry_probs=np.array(probs[:k]),
        draft_id=draft_id,
        draft_prob=max(draft_prob, dequantize_prob(1, spec.b_prob)),
        vocab_size=vocab_size,
    )
    return round_idx, c
