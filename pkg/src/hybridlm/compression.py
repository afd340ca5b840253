"""Top-k vocabulary compression with provable resampling-distortion bounds.

The device transmits only the k most probable tokens (plus the draft token's
entry); the server rebuilds a full distribution by spreading the residual
mass uniformly over the untransmitted tokens. Two upper bounds control the
total variation distance between the exact and distorted resampling
distributions:

* an exact-denominator bound, computable with knowledge of both the device
  and server distributions, used offline through its time average; and
* a device-only bound whose denominator replaces the cross-distribution TVD
  with a softplus-smoothed lower bound driven by the draft probability and
  the predicted rejection probability, used online per round.

Both bounds share the same numerator: the l1 gap between the true and
reconstructed tails beyond rank k, which a per-k closed form evaluates from
prefix sums without materializing each reconstruction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import ProbVec, SortedProbVec, TokenId, tvd
from .uncertainty import LinearRejectionModel

# Softplus argument above which exp() underflow makes the asymptote exact.
_SOFTPLUS_CUTOFF = 30.0


@dataclass(frozen=True)
class SoftplusConfig:
    """Sharpness of the softplus ReLU smoothing; approximation error <= ln2/eta."""

    eta: float = 10.0

    def __post_init__(self) -> None:
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")

    @property
    def max_error(self) -> float:
        return math.log(2.0) / self.eta


@dataclass(frozen=True, eq=False)
class CompressedVocab:
    """Uplink payload: top-k entries plus the draft token's entry.

    Entries are rank-ordered (non-increasing probability). The draft entry is
    always carried; it only counts as an extra transmitted record when the
    draft sits outside the top-k.
    """

    k: int
    entry_ids: np.ndarray
    entry_probs: np.ndarray
    draft_id: TokenId
    draft_prob: float
    vocab_size: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.vocab_size:
            raise ValueError(f"k={self.k} out of range [1, {self.vocab_size}]")
        if np.any(np.diff(self.entry_probs) > 1e-12):
            raise ValueError("entry probabilities must be non-increasing")
        if not self.draft_prob > 0.0:
            raise ValueError("draft entry must have positive probability")

    @property
    def draft_in_topk(self) -> bool:
        return bool(np.any(self.entry_ids == self.draft_id))

    @property
    def n_transmitted(self) -> int:
        return self.k + (0 if self.draft_in_topk else 1)


def compress(x_sorted: SortedProbVec, k: int, d: TokenId) -> CompressedVocab:
    """Truncate to the top-k ranks, attaching the draft token's exact entry."""
    vocab = len(x_sorted)
    if not 1 <= k <= vocab:
        raise ValueError(f"k={k} out of range [1, {vocab}]")
    rank = x_sorted.rank_of(d)
    c = CompressedVocab(
        k=k,
        entry_ids=x_sorted.perm[:k].copy(),
        entry_probs=x_sorted.probs[:k].copy(),
        draft_id=d,
        draft_prob=float(x_sorted.probs[rank]),
        vocab_size=vocab,
    )
    if c.entry_probs.sum() + (0.0 if c.draft_in_topk else c.draft_prob) > 1.0 + 1e-9:
        raise ValueError("transmitted mass exceeds 1")
    return c


def reconstruct(c: CompressedVocab) -> ProbVec:
    """Rebuild a full distribution from the payload.

    Transmitted entries keep their value; the residual mass is spread
    uniformly over untransmitted tokens. Quantized payloads can leave a
    negative residual (clamp the fill to zero, renormalize) or, with nothing
    untransmitted, a total off 1 (renormalize the transmitted values).
    """
    x_hat = np.zeros(c.vocab_size)
    x_hat[c.entry_ids] = c.entry_probs
    x_hat[c.draft_id] = c.draft_prob
    transmitted = np.zeros(c.vocab_size, dtype=bool)
    transmitted[c.entry_ids] = True
    transmitted[c.draft_id] = True
    slots = int(c.vocab_size - transmitted.sum())
    residual = 1.0 - x_hat[transmitted].sum()
    if slots > 0 and residual > 0.0:
        x_hat[~transmitted] = residual / slots
    else:
        x_hat = x_hat / x_hat.sum()
    return ProbVec(x_hat)


def residual_mass(x_sorted: SortedProbVec, k: int) -> float:
    """Probability mass beyond the top-k ranks."""
    if not 1 <= k <= len(x_sorted):
        raise ValueError(f"k={k} out of range [1, {len(x_sorted)}]")
    return max(0.0, 1.0 - float(x_sorted.prefix[k]))


def softplus(z: float, cfg: SoftplusConfig) -> float:
    """Numerically stable ln(1 + exp(eta*z))/eta."""
    w = cfg.eta * z
    if w > _SOFTPLUS_CUTOFF:
        return z + math.exp(-w) / cfg.eta
    if w < -_SOFTPLUS_CUTOFF:
        return math.exp(w) / cfg.eta
    return math.log1p(math.exp(w)) / cfg.eta


def smoothed_tvd(x: ProbVec, y: ProbVec, cfg: SoftplusConfig) -> float:
    """Softplus-smoothed one-sided mass sum(x_i * softplus(y_i/x_i - 1)).

    Upper-approximates tvd(x, y) with per-instance error at most ln2/eta;
    requires strictly positive x (softmax outputs satisfy this).
    """
    xs = x.probs
    if np.any(xs <= 0.0):
        raise ValueError("smoothed TVD requires strictly positive device probabilities")
    z = y.probs / xs - 1.0
    w = cfg.eta * z
    out = np.empty_like(w)
    hi = w > _SOFTPLUS_CUTOFF
    lo = w < -_SOFTPLUS_CUTOFF
    mid = ~(hi | lo)
    out[hi] = z[hi] + np.exp(-w[hi]) / cfg.eta
    out[lo] = np.exp(w[lo]) / cfg.eta
    out[mid] = np.log1p(np.exp(w[mid])) / cfg.eta
    return float((xs * out).sum())


def _tail_l1_ranks(x: ProbVec, x_hat: ProbVec, k: int) -> float:
    """l1 gap between x and its reconstruction over ranks k+1..|V| of x."""
    order = np.argsort(-x.probs, kind="stable")
    tail = order[k:]
    return float(np.abs(x.probs[tail] - x_hat.probs[tail]).sum())


def utv_bound(x: ProbVec, x_hat: ProbVec, y: ProbVec, k: int) -> float:
    """Exact-denominator upper bound on tvd of the resampling distributions."""
    denom = tvd(x, y)
    if denom <= 0.0:
        raise ValueError("bound undefined when device and server distributions match")
    return _tail_l1_ranks(x, x_hat, k) / denom


def online_denominator(x_d: float, beta_hat: float, cfg: SoftplusConfig) -> float:
    """Device-only lower bound on the smoothed cross-distribution TVD."""
    if not 0.0 < x_d <= 1.0:
        raise ValueError(f"draft probability must be in (0, 1], got {x_d}")
    if not 0.0 <= beta_hat <= 1.0:
        raise ValueError(f"predicted rejection probability must be in [0, 1], got {beta_hat}")
    return (1.0 - x_d) * softplus(-1.0, cfg) + x_d * softplus(-beta_hat, cfg)


def utv_bound_online(
    x_sorted: SortedProbVec,
    x_hat: ProbVec,
    x_d: float,
    beta_hat: float,
    k: int,
    cfg: SoftplusConfig,
) -> float:
    """Device-computable upper bound on the resampling distortion.

    Same tail numerator as the exact bound; the denominator uses only the
    draft probability and the predicted rejection probability.
    """
    tail = float(np.abs(x_sorted.probs[k:] - x_hat.probs[x_sorted.perm[k:]]).sum())
    return tail / online_denominator(x_d, beta_hat, cfg)


def tail_gap_after_fill(x_sorted: SortedProbVec, k: int, draft_rank: int) -> float:
    """Closed-form tail numerator sum(|x_i - x_hat_i|, ranks > k).

    Equivalent to compressing at k (draft entry included), reconstructing,
    and summing the tail l1 gap, but computed from prefix sums: with the
    untransmitted range filled by its own mean, the absolute deviations are
    twice the positive part, 2*(sum of above-mean entries - count*mean).
    """
    s = x_sorted.probs
    prefix = x_sorted.prefix
    vocab = s.size
    if draft_rank < k:
        m = vocab - k
        mass = 1.0 - prefix[k]
        range_sum = float(prefix[vocab] - prefix[k])
        exclude_draft = False
    else:
        m = vocab - k - 1
        mass = 1.0 - prefix[k] - s[draft_rank]
        range_sum = float(prefix[vocab] - prefix[k] - s[draft_rank])
        exclude_draft = True
    if m <= 0:
        return 0.0
    fill = max(mass, 0.0) / m
    # Count and sum of tail entries >= fill; the tail s[k:] is non-increasing.
    c = int(np.searchsorted(-s[k:], -fill, side="right"))
    above = float(prefix[k + c] - prefix[k])
    if exclude_draft and s[draft_rank] >= fill:
        c -= 1
        above -= float(s[draft_rank])
    # The last term vanishes when the vector sums exactly to 1; keeping it
    # makes the identity hold for any construction drift within tolerance.
    return max(2.0 * (above - c * fill) + (m * fill - range_sum), 0.0)


@dataclass(frozen=True)
class KSelection:
    """Chosen compressed vocabulary size and the bound value that justified it."""

    k_star: int
    bound_value_at_k: float
    policy: str  # "offline" or "online"
    theta: float
    eta: float | None = None
    saturated: bool = False


def select_k_offline(
    k_grid: np.ndarray, expected_bounds: np.ndarray, theta: float, vocab_size: int
) -> KSelection:
    """Smallest k whose time-averaged exact bound stays within theta.

    The calibration table lives on a sparse grid; the crossing is refined to
    an exact integer k by linear interpolation between the bracketing grid
    points.
    """
    k_grid = np.asarray(k_grid, dtype=int)
    vals = np.asarray(expected_bounds, dtype=float)
    if k_grid.size != vals.size or k_grid.size == 0:
        raise ValueError("table grid and values must be non-empty and equal length")
    ok = np.nonzero(vals <= theta)[0]
    if ok.size == 0:
        return KSelection(
            k_star=vocab_size,
            bound_value_at_k=float(vals[-1]),
            policy="offline",
            theta=theta,
            saturated=True,
        )
    j = int(ok[0])
    if j == 0:
        return KSelection(int(k_grid[0]), float(vals[0]), "offline", theta)
    k_lo, k_hi = int(k_grid[j - 1]), int(k_grid[j])
    v_lo, v_hi = float(vals[j - 1]), float(vals[j])
    for k in range(k_lo + 1, k_hi + 1):
        frac = (k - k_lo) / (k_hi - k_lo)
        v = v_lo + frac * (v_hi - v_lo)
        if v <= theta:
            return KSelection(k, v, "offline", theta)
    return KSelection(k_hi, v_hi, "offline", theta)


def select_k_online(
    x_sorted: SortedProbVec,
    draft_rank: int,
    u: float,
    model: LinearRejectionModel,
    theta: float,
    cfg: SoftplusConfig,
) -> KSelection:
    """Smallest k whose device-only bound stays within theta for this round.

    Scans geometrically (k = 1, 2, 4, ...) assuming the tail numerator shrinks
    with k, then refines linearly inside the bracketing octave; if the probe
    sees the numerator grow, falls back to a full ascending scan.
    """
    if not theta > 0.0:
        vocab = len(x_sorted)
        num = tail_gap_after_fill(x_sorted, vocab, draft_rank)
        denom = online_denominator(
            float(x_sorted.probs[draft_rank]),
            float(np.clip(model.a * u + model.b, 0.0, 1.0)),
            cfg,
        )
        return KSelection(vocab, num / denom, "online", theta, cfg.eta, saturated=True)
    vocab = len(x_sorted)
    x_d = float(x_sorted.probs[draft_rank])
    beta_hat = float(np.clip(model.a * u + model.b, 0.0, 1.0))
    denom = online_denominator(x_d, beta_hat, cfg)

    def bound_at(k: int) -> float:
        return tail_gap_after_fill(x_sorted, k, draft_rank) / denom

    probes: list[int] = []
    k = 1
    while k < vocab:
        probes.append(k)
        k *= 2
    probes.append(vocab)

    monotone = True
    prev_num = float("inf")
    hit = None
    for i, kp in enumerate(probes):
        num = tail_gap_after_fill(x_sorted, kp, draft_rank)
        if num > prev_num + 1e-12:
            monotone = False
            break
        prev_num = num
        if num / denom <= theta:
            hit = i
            break

    if not monotone:
        for k in range(1, vocab + 1):
            b = bound_at(k)
            if b <= theta:
                return KSelection(k, b, "online", theta, cfg.eta)
        return KSelection(vocab, bound_at(vocab), "online", theta, cfg.eta, saturated=True)

    if hit is None:
        # theta > 0 means k = vocab (zero numerator) always qualifies.
        return KSelection(vocab, 0.0, "online", theta, cfg.eta)
    lo = 1 if hit == 0 else probes[hit - 1] + 1
    for k in range(lo, probes[hit] + 1):
        b = bound_at(k)
        if b <= theta:
            return KSelection(k, b, "online", theta, cfg.eta)
    b = bound_at(probes[hit])
    return KSelection(probes[hit], b, "online", theta, cfg.eta)


def default_k_grid(vocab_size: int, points: int = 64) -> np.ndarray:
    """Logarithmic k grid over [1, vocab_size] for the calibration table."""
    grid = np.unique(
        np.round(np.logspace(0.0, math.log10(vocab_size), points)).astype(int)
    )
    grid[-1] = vocab_size
    return np.unique(grid)


def save_utv_table(path: str | Path, k_grid: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mean_utv"])
        for k, v in zip(k_grid, values):
            writer.writerow([int(k), f"{v:.9g}"])


def load_utv_table(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "mean_utv"]:
            raise ValueError(f"unexpected table header: {header}")
        rows = [(int(r[0]), float(r[1])) for r in reader]
    ks = np.array([r[0] for r in rows], dtype=int)
    vs = np.array([r[1] for r in rows], dtype=float)
    return ks, vs
