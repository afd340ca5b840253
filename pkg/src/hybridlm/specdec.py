"""Speculative draft verification: acceptance cases, resampling, and bias.

The device proposes a draft token from its distribution x; the server holds
the reference distribution y and either accepts the draft or resamples a
replacement so that the combined output law equals y exactly. Under top-k
compression the server resamples from a distorted distribution q instead,
and the per-round bias measures how far the combined law drifts from y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import ProbVec, TokenId, sample


@dataclass(frozen=True)
class Verdict:
    """Outcome of one verification round.

    ``token`` is the draft when accepted, the resampled replacement otherwise.
    ``accept_prob`` is the probability the acceptance test used, min(1, y_d/x_d).
    """

    accepted: bool
    token: TokenId
    accept_prob: float


def rejection_prob(x_d: float, y_d: float) -> float:
    """Probability the server rejects a draft with device mass x_d and server mass y_d."""
    if not x_d > 0.0:
        raise ValueError("draft token must have positive device-side probability")
    if y_d < 0.0:
        raise ValueError("server-side probability must be non-negative")
    return max(0.0, 1.0 - y_d / x_d)


def rejection_probs(x: ProbVec, y: ProbVec) -> np.ndarray:
    """Vector of per-token rejection probabilities; tokens with x_v = 0 get 0."""
    xs = x.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(xs > 0.0, 1.0 - y.probs / np.where(xs > 0.0, xs, 1.0), 0.0)
    return np.maximum(beta, 0.0)


def verify_draft(
    d: TokenId,
    x_d: float,
    y_d: float,
    resample_from: ProbVec,
    rng: np.random.Generator,
) -> Verdict:
    """Scalar-level acceptance test; lets the caller supply the wire-observed x_d."""
    beta = rejection_prob(x_d, y_d)
    accept_prob = 1.0 - beta
    if beta == 0.0:
        return Verdict(accepted=True, token=d, accept_prob=1.0)
    if rng.random() < accept_prob:
        return Verdict(accepted=True, token=d, accept_prob=accept_prob)
    return Verdict(
        accepted=False,
        token=sample(resample_from, rng),
        accept_prob=accept_prob,
    )


def verify(
    d: TokenId,
    x: ProbVec,
    y: ProbVec,
    resample_from: ProbVec,
    rng: np.random.Generator,
) -> Verdict:
    """Accept the draft, or reject and resample from the supplied distribution.

    Deterministic acceptance when y_d >= x_d; otherwise accept with probability
    y_d/x_d. The caller chooses ``resample_from``: the exact resampling
    distribution gives an unbiased output law, a distorted one does not.
    """
    return verify_draft(d, float(x.probs[d]), float(y.probs[d]), resample_from, rng)


def resample_dist(x: ProbVec, y: ProbVec) -> ProbVec:
    """Replacement distribution on rejection: positive part of y - x, normalized."""
    num = np.maximum(y.probs - x.probs, 0.0)
    denom = num.sum()
    if denom <= 0.0:
        raise ValueError(
            "resampling distribution undefined: y never exceeds x, no rejection possible"
        )
    return ProbVec(num / denom)


def distorted_resample_dist(x_hat: ProbVec, y: ProbVec) -> tuple[ProbVec, bool]:
    """Resampling distribution against a reconstructed device distribution.

    Compression can zero the numerator even when a rejection occurred against
    the exact x; in that degenerate case fall back to y itself (flag set),
    which keeps the output a valid distribution with bounded bias.
    """
    num = np.maximum(y.probs - x_hat.probs, 0.0)
    denom = num.sum()
    if denom <= 0.0:
        return y, True
    return ProbVec(num / denom), False


def hybrid_output_dist(x: ProbVec, y: ProbVec, q: ProbVec) -> ProbVec:
    """Per-token law of the full accept/resample process with resampling dist q.

    Equals y exactly when q is the exact resampling distribution.
    """
    beta = rejection_probs(x, y)
    reject_mass = float((x.probs * beta).sum())
    return ProbVec(x.probs * (1.0 - beta) + reject_mass * q.probs)


def round_bias(x: ProbVec, y: ProbVec, q: ProbVec) -> float:
    """l1 deviation of the hybrid output law from y under resampling dist q."""
    beta = rejection_probs(x, y)
    reject_mass = float((x.probs * beta).sum())
    out = x.probs * (1.0 - beta) + reject_mass * q.probs
    return float(np.abs(out - y.probs).sum())
