"""Round-by-round orchestration of draft, skip, compress, transmit, verify.

One round: the device drafts a token and estimates its uncertainty; below
the threshold it keeps the draft and skips the uplink entirely, otherwise it
ships a (possibly truncated, quantized) vocabulary payload over the fading
channel and the server accepts or resamples. Latency per round is the device
compute time, plus - on transmitted rounds - the Shannon uplink time and the
server compute time.

For skipped rounds the simulator also evaluates the counterfactual server
verdict from the oracle's hidden distribution; this feeds the true-skip-rate
metric only and never influences decisions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import seeding
from .channel import encode_round, payload_bits, quantize_vocab, sample_snr, uplink_latency
from .compression import (
    SoftplusConfig,
    compress,
    reconstruct,
    select_k_offline,
    select_k_online,
)
from .config import PolicySpec, RunConfig
from .dist import sample, softmax, sort_desc, tvd
from .oracle import (
    EOS_TOKEN,
    CalibrationSet,
    OracleSpec,
    TraceExhausted,
    calibrate,
    make_oracle,
)
from .specdec import (
    distorted_resample_dist,
    resample_dist,
    round_bias,
    verify_draft,
)
from .uncertainty import estimate_u


@dataclass(frozen=True)
class RoundRecord:
    seq: int
    round: int
    u: float | None
    delta: int
    k_used: int | None
    payload_bits: int
    snr_linear: float | None
    tau_comm_s: float
    verdict: str  # "skipped" | "accepted" | "rejected"
    fallback_used: bool
    bias: float | None
    tvd_pq: float | None
    bound_at_selection: float | None
    token: int
    latency_s: float
    counterfactual_accept: bool | None
    eos: bool

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "round": self.round,
            "u": self.u,
            "delta": self.delta,
            "k_used": self.k_used,
            "payload_bits": self.payload_bits,
            "snr_linear": self.snr_linear,
            "tau_comm_s": self.tau_comm_s,
            "verdict": self.verdict,
            "fallback_used": self.fallback_used,
            "bias": self.bias,
            "tvd_pq": self.tvd_pq,
            "bound_at_selection": self.bound_at_selection,
            "token": self.token,
            "latency_s": self.latency_s,
            "counterfactual_accept": self.counterfactual_accept,
            "eos": self.eos,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


RECORD_FIELDS = [
    "seq",
    "round",
    "u",
    "delta",
    "k_used",
    "payload_bits",
    "snr_linear",
    "tau_comm_s",
    "verdict",
    "fallback_used",
    "bias",
    "tvd_pq",
    "bound_at_selection",
    "token",
    "latency_s",
    "counterfactual_accept",
    "eos",
]


@dataclass(frozen=True)
class SimReport:
    n_rounds: int
    tr: float
    tsr: float | None
    mean_bias: float | None
    mean_throughput_tokens_per_s: float
    mean_k: float | None
    mean_payload_bits: float
    acceptance_rate_given_tx: float | None

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "tr": self.tr,
            "tsr": self.tsr,
            "mean_bias": self.mean_bias,
            "mean_throughput_tokens_per_s": self.mean_throughput_tokens_per_s,
            "mean_k": self.mean_k,
            "mean_payload_bits": self.mean_payload_bits,
            "acceptance_rate_given_tx": self.acceptance_rate_given_tx,
        }


def _should_transmit(
    policy: PolicySpec, u: float | None, seed: int, t: int
) -> bool:
    if policy.variant == "hlm":
        return True
    if policy.variant in ("slm_only", "llm_only"):
        return False
    if policy.variant == "rand_hlm":
        return seeding.round_rng(seed, t, seeding.SKIP).random() >= policy.skip_prob
    return u > policy.u_th


def resolve_k_star(cfg: RunConfig, calib: CalibrationSet | None) -> int | None:
    """Fixed compressed size for the offline policy, from the calibration table."""
    policy = cfg.policy
    if policy.variant != "cu_hlm_offline":
        return None
    if policy.k_star is not None:
        return policy.k_star
    if calib is None:
        raise ValueError("cu_hlm_offline without explicit k_star needs calibration")
    sel = select_k_offline(
        calib.utv_k_grid, calib.utv_values, policy.theta, cfg.oracle.vocab_size
    )
    return sel.k_star


def run_round(
    t: int,
    sequence: list[int],
    oracle_inst,
    cfg: RunConfig,
    calib: CalibrationSet | None,
    seed: int,
    seq_index: int = 0,
    k_star: int | None = None,
    transcript: list[bytes] | None = None,
) -> RoundRecord:
    policy = cfg.policy
    vocab = cfg.oracle.vocab_size
    inputs = oracle_inst.next_round(sequence)
    y = softmax(inputs.llm_logits)

    if policy.variant == "llm_only":
        token = sample(y, seeding.round_rng(seed, t, seeding.VERIFY))
        return RoundRecord(
            seq=seq_index,
            round=t,
            u=None,
            delta=0,
            k_used=None,
            payload_bits=0,
            snr_linear=None,
            tau_comm_s=0.0,
            verdict="skipped",
            fallback_used=False,
            bias=None,
            tvd_pq=None,
            bound_at_selection=None,
            token=token,
            latency_s=cfg.latency.tau_llm_s,
            counterfactual_accept=None,
            eos=_is_eos(token, cfg.oracle, inputs.eos),
        )

    x = softmax(inputs.slm_logits)
    d = sample(x, seeding.round_rng(seed, t, seeding.DRAFT))
    x_d = float(x.probs[d])
    y_d = float(y.probs[d])

    u = None
    if policy.uses_uncertainty:
        u = estimate_u(
            inputs.slm_logits,
            d,
            cfg.uncertainty,
            seeding.round_rng(seed, t, seeding.UNCERTAINTY),
        ).u

    if not _should_transmit(policy, u, seed, t):
        cf_rng = seeding.round_rng(seed, t, seeding.COUNTERFACTUAL)
        cf_accept = y_d >= x_d or cf_rng.random() < y_d / x_d
        return RoundRecord(
            seq=seq_index,
            round=t,
            u=u,
            delta=0,
            k_used=None,
            payload_bits=0,
            snr_linear=None,
            tau_comm_s=0.0,
            verdict="skipped",
            fallback_used=False,
            bias=None,
            tvd_pq=None,
            bound_at_selection=None,
            token=d,
            latency_s=cfg.latency.tau_slm_s,
            counterfactual_accept=bool(cf_accept),
            eos=_is_eos(d, cfg.oracle, inputs.eos),
        )

    # Transmitted round: choose k, build the payload, cross the channel.
    x_sorted = sort_desc(x)
    rank_d = x_sorted.rank_of(d)
    bound_at_selection = None
    if policy.variant in ("hlm", "u_hlm", "rand_hlm"):
        k = vocab
    elif policy.variant == "cu_hlm_offline":
        k = k_star if k_star is not None else vocab
    else:  # cu_hlm_online
        if calib is None:
            raise ValueError("cu_hlm_online requires a calibration set")
        sel = select_k_online(
            x_sorted,
            rank_d,
            u,
            calib.model,
            policy.theta,
            SoftplusConfig(eta=policy.eta),
        )
        k = sel.k_star
        bound_at_selection = sel.bound_value_at_k

    c = compress(x_sorted, k, d)
    c_wire = quantize_vocab(c, cfg.payload) if cfg.quantize_wire else c
    if transcript is not None:
        transcript.append(encode_round(t, c_wire, cfg.payload))
    bits = payload_bits(c.n_transmitted, cfg.payload)
    snr = sample_snr(cfg.channel, seeding.round_rng(seed, t, seeding.CHANNEL))
    tau_comm = uplink_latency(bits, cfg.channel.bandwidth_hz, snr)

    x_hat = reconstruct(c_wire)
    q, fallback = distorted_resample_dist(x_hat, y)
    verdict = verify_draft(
        d, c_wire.draft_prob, y_d, q, seeding.round_rng(seed, t, seeding.VERIFY)
    )

    bias = round_bias(x, y, q)
    tvd_xy = tvd(x, y)
    tvd_pq = tvd(resample_dist(x, y), q) if tvd_xy > 0.0 else None

    token = verdict.token
    return RoundRecord(
        seq=seq_index,
        round=t,
        u=u,
        delta=1,
        k_used=k,
        payload_bits=bits,
        snr_linear=snr,
        tau_comm_s=tau_comm,
        verdict="accepted" if verdict.accepted else "rejected",
        fallback_used=fallback,
        bias=bias,
        tvd_pq=tvd_pq,
        bound_at_selection=bound_at_selection,
        token=token,
        latency_s=cfg.latency.tau_slm_s + tau_comm + cfg.latency.tau_llm_s,
        counterfactual_accept=None,
        eos=_is_eos(token, cfg.oracle, inputs.eos),
    )


def _is_eos(token: int, oracle_spec: OracleSpec, trace_eos: bool) -> bool:
    if oracle_spec.kind == "trace":
        return trace_eos
    return oracle_spec.eos_prob > 0.0 and token == EOS_TOKEN


def ensure_calibration(cfg: RunConfig, calib: CalibrationSet | None) -> CalibrationSet | None:
    """Calibrate on the fly when the policy needs statistics it wasn't given."""
    if calib is not None:
        return calib
    needs = cfg.policy.variant == "cu_hlm_online" or (
        cfg.policy.variant == "cu_hlm_offline" and cfg.policy.k_star is None
    )
    if not needs:
        return None
    cal_seed = (
        cfg.calibration.seed if cfg.calibration.seed is not None else cfg.seed + 1
    )
    return calibrate(
        cfg.oracle,
        cfg.calibration.n_rounds,
        cfg.uncertainty,
        seed=cal_seed,
        delta_u_gate=cfg.calibration.delta_u_gate,
    )


def run_sequence(
    cfg: RunConfig,
    calib: CalibrationSet | None = None,
    seq_index: int = 0,
    transcript: list[bytes] | None = None,
) -> list[RoundRecord]:
    """One autoregressive sequence of at most r_max rounds."""
    calib = ensure_calibration(cfg, calib)
    k_star = resolve_k_star(cfg, calib)
    oracle_inst = make_oracle(cfg.oracle)
    seed = cfg.seed + seq_index
    sequence: list[int] = []
    records: list[RoundRecord] = []
    for t in range(cfg.r_max):
        try:
            rec = run_round(
                t, sequence, oracle_inst, cfg, calib, seed, seq_index, k_star, transcript
            )
        except TraceExhausted:
            break
        records.append(rec)
        sequence.append(rec.token)
        if rec.eos:
            break
    return records


def run_many(
    cfg: RunConfig,
    calib: CalibrationSet | None = None,
    transcript: list[bytes] | None = None,
) -> tuple[SimReport, list[RoundRecord]]:
    """All configured sequences plus the aggregate report."""
    calib = ensure_calibration(cfg, calib)
    records: list[RoundRecord] = []
    for i in range(cfg.n_sequences):
        records.extend(run_sequence(cfg, calib, seq_index=i, transcript=transcript))
    return metrics(records), records


def metrics(records: list[RoundRecord]) -> SimReport:
    """Aggregate a record stream into the summary report."""
    if not records:
        raise ValueError("no records to aggregate")
    n = len(records)
    deltas = np.array([r.delta for r in records])
    tr = float(deltas.mean())
    cf = [r.counterfactual_accept for r in records if r.delta == 0 and r.counterfactual_accept is not None]
    tsr = float(np.mean(cf)) if cf else None
    biases = [r.bias for r in records if r.bias is not None]
    mean_bias = float(np.mean(biases)) if biases else None
    total_latency = float(sum(r.latency_s for r in records))
    ks = [r.k_used for r in records if r.k_used is not None]
    mean_k = float(np.mean(ks)) if ks else None
    mean_payload = float(np.mean([r.payload_bits for r in records]))
    tx = [r for r in records if r.delta == 1]
    acc = (
        float(np.mean([1.0 if r.verdict == "accepted" else 0.0 for r in tx]))
        if tx
        else None
    )
    return SimReport(
        n_rounds=n,
        tr=tr,
        tsr=tsr,
        mean_bias=mean_bias,
        mean_throughput_tokens_per_s=n / total_latency,
        mean_k=mean_k,
        mean_payload_bits=mean_payload,
        acceptance_rate_given_tx=acc,
    )
