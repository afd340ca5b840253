"""Distribution sources standing in for the device and server models.

The synthetic oracle produces correlated long-tailed logit pairs: a shared
Zipf-shaped base (under a context-keyed rank permutation) plus independent
per-model noise scaled by a divergence knob. A trace oracle replays logit
pairs dumped from real models as JSONL. Calibration runs the oracle with
full knowledge of both sides to fit the uncertainty-rejection line, estimate
the non-deterministic-acceptance rate, and tabulate the expected compression
bound per candidate k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .compression import default_k_grid, tail_gap_after_fill
from .dist import ProbVec, sample, softmax, sort_desc, tvd
from .specdec import rejection_prob, resample_dist, verify
from .uncertainty import LinearRejectionModel, UncertaintyConfig, estimate_u, fit_linear

EOS_TOKEN = 0


class TraceExhausted(Exception):
    """Raised when a trace oracle runs out of recorded rounds."""


@dataclass(frozen=True)
class OracleSpec:
    kind: str = "synthetic"  # "synthetic" or "trace"
    vocab_size: int = 32_000
    zipf_s: float = 4.0
    divergence: float = 1.0
    eos_prob: float = 0.0
    trace_path: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("synthetic", "trace"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "synthetic":
            if not self.zipf_s > 0.0:
                raise ValueError("zipf_s must be positive")
            if not np.isfinite(self.divergence) or self.divergence < 0.0:
                raise ValueError("divergence must be finite and non-negative")
            if not 0.0 <= self.eos_prob < 1.0:
                raise ValueError("eos_prob must be in [0, 1)")
        elif self.trace_path is None:
            raise ValueError("trace oracle requires a path")


@dataclass(frozen=True)
class RoundInputs:
    slm_logits: np.ndarray
    llm_logits: np.ndarray
    context_fingerprint: int
    eos: bool = False


class SyntheticOracle:
    """Deterministic logit-pair generator keyed by (seed, sequence so far)."""

    def __init__(self, spec: OracleSpec):
        self.spec = spec
        v = spec.vocab_size
        self._base_sorted = -spec.zipf_s * np.log(np.arange(1, v + 1, dtype=np.float64))

    def next_round(self, sequence: list[int]) -> RoundInputs:
        spec = self.spec
        fp = seeding.sequence_fingerprint(sequence)
        perm = seeding.context_rng(spec.seed, fp, seeding.ORACLE_PERM).permutation(
            spec.vocab_size
        )
        base = np.empty(spec.vocab_size)
        base[perm] = self._base_sorted
        noise_a = seeding.context_rng(spec.seed, fp, seeding.ORACLE_NOISE_SLM).normal(
            size=spec.vocab_size
        )
        noise_b = seeding.context_rng(spec.seed, fp, seeding.ORACLE_NOISE_LLM).normal(
            size=spec.vocab_size
        )
        slm = base + spec.divergence * noise_a
        llm = base + spec.divergence * noise_b
        if spec.eos_prob > 0.0:
            slm = self._inject_eos(slm)
            llm = self._inject_eos(llm)
        return RoundInputs(slm_logits=slm, llm_logits=llm, context_fingerprint=fp)

    def _inject_eos(self, logits: np.ndarray) -> np.ndarray:
        # Mix a point mass at the EOS token into the softmax output, then
        # return to logit space so downstream softmax recovers the mixture.
        x = softmax(logits).probs.copy()
        x *= 1.0 - self.spec.eos_prob
        x[EOS_TOKEN] += self.spec.eos_prob
        return np.log(x)


class TraceOracle:
    """Sequential replay of recorded logit pairs."""

    def __init__(self, spec: OracleSpec):
        self.spec = spec
        self._records = read_trace(spec.trace_path)
        self._cursor = 0
        trace_vocab = len(self._records[0]["slm_logits"])
        if trace_vocab != spec.vocab_size:
            raise ValueError(
                f"trace vocabulary size {trace_vocab} does not match the "
                f"configured {spec.vocab_size}; payload widths would be wrong"
            )

    def next_round(self, sequence: list[int]) -> RoundInputs:
        if self._cursor >= len(self._records):
            raise TraceExhausted(f"trace ended after {self._cursor} rounds")
        rec = self._records[self._cursor]
        self._cursor += 1
        return RoundInputs(
            slm_logits=np.asarray(rec["slm_logits"], dtype=np.float64),
            llm_logits=np.asarray(rec["llm_logits"], dtype=np.float64),
            context_fingerprint=seeding.sequence_fingerprint(sequence),
            eos=bool(rec.get("eos", False)),
        )


def make_oracle(spec: OracleSpec):
    if spec.kind == "synthetic":
        return SyntheticOracle(spec)
    return TraceOracle(spec)


def read_trace(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records:
        raise ValueError(f"trace {path} contains no records")
    lengths = {len(r["slm_logits"]) for r in records} | {
        len(r["llm_logits"]) for r in records
    }
    if len(lengths) != 1:
        raise ValueError("trace records disagree on vocabulary size")
    return records


def write_trace(path: str | Path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


@dataclass(frozen=True)
class CalibrationSet:
    """Fitted statistics a simulation run needs before deploying skip/compress policies."""

    pairs: list[tuple[float, float]]
    rows: list[tuple[float, float, float, float]]  # (u, beta, x_d, y_d) audit rows
    delta_hat: float
    utv_k_grid: np.ndarray
    utv_values: np.ndarray
    model: LinearRejectionModel


def calibrate(
    spec: OracleSpec,
    n_rounds: int,
    ucfg: UncertaintyConfig,
    k_grid: np.ndarray | None = None,
    seed: int | None = None,
    delta_u_gate: float | None = None,
) -> CalibrationSet:
    """Run the oracle with full two-sided knowledge and fit the policy inputs.

    Sequences advance by the exact (uncompressed) verification outcome.
    ``delta_u_gate``, when set, estimates the non-deterministic-acceptance
    rate only over rounds with uncertainty above the gate.
    """
    if n_rounds < 2:
        raise ValueError("calibration needs at least two rounds")
    if seed is None:
        seed = spec.seed
    if k_grid is None:
        k_grid = default_k_grid(spec.vocab_size)
    k_grid = np.asarray(k_grid, dtype=int)

    oracle = make_oracle(spec)
    rows: list[tuple[float, float, float, float]] = []
    utv_acc = np.zeros(k_grid.size)
    utv_count = 0
    sequence: list[int] = []

    for t in range(n_rounds):
        try:
            inputs = oracle.next_round(sequence)
        except TraceExhausted:
            break
        x = softmax(inputs.slm_logits)
        y = softmax(inputs.llm_logits)
        d = sample(x, seeding.round_rng(seed, t, seeding.DRAFT))
        u = estimate_u(
            inputs.slm_logits, d, ucfg, seeding.round_rng(seed, t, seeding.UNCERTAINTY)
        ).u
        beta_d = rejection_prob(float(x.probs[d]), float(y.probs[d]))
        rows.append((u, beta_d, float(x.probs[d]), float(y.probs[d])))

        divergence_tvd = tvd(x, y)
        if divergence_tvd > 0.0:
            x_sorted = sort_desc(x)
            rank = x_sorted.rank_of(d)
            for j, k in enumerate(k_grid):
                utv_acc[j] += tail_gap_after_fill(x_sorted, int(k), rank) / divergence_tvd
            utv_count += 1

        if divergence_tvd > 0.0:
            verdict = verify(
                d, x, y, resample_dist(x, y), seeding.round_rng(seed, t, seeding.VERIFY)
            )
            token = verdict.token
        else:
            token = d
        if spec.eos_prob > 0.0 and token == EOS_TOKEN:
            sequence = []
        else:
            sequence.append(token)

    if len(rows) < 2:
        raise ValueError("calibration produced fewer than two usable rounds")

    pairs = [(r[0], r[1]) for r in rows]
    if delta_u_gate is None:
        delta_rows = rows
    else:
        delta_rows = [r for r in rows if r[0] > delta_u_gate]
    delta_hat = (
        float(np.mean([1.0 if r[3] < r[2] else 0.0 for r in delta_rows]))
        if delta_rows
        else 0.0
    )
    utv_values = utv_acc / utv_count if utv_count > 0 else np.full(k_grid.size, np.nan)
    model = fit_linear(pairs)
    return CalibrationSet(
        pairs=pairs,
        rows=rows,
        delta_hat=delta_hat,
        utv_k_grid=k_grid,
        utv_values=utv_values,
        model=model,
    )
