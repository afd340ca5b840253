"""Self-check suites: the library's analytic claims run against brute force.

Each suite draws randomized instances, evaluates a claimed identity or bound
against an independent computation, and reports the failure count together
with the worst slack margin (negative means a violation). The ``bound_scale``
hook deliberately weakens the claimed bounds so callers can confirm the
suites detect violations; it exists for negative-control testing only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compression import (
    SoftplusConfig,
    compress,
    reconstruct,
    smoothed_tvd,
    utv_bound,
    utv_bound_online,
)
from .dist import ProbVec, sort_desc, tvd
from .specdec import distorted_resample_dist, hybrid_output_dist, resample_dist
from .uncertainty import (
    DiscretePmfEstimator,
    GaussianKdeEstimator,
    LinearRejectionModel,
    rejection_risk,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    n_cases: int
    failures: int
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: {self.n_cases} cases, "
            f"{self.failures} failures, worst margin {self.worst_margin:.3e}"
        )


def correlated_pair(rng: np.random.Generator, n: int, zipf_s: float = 1.2) -> tuple[ProbVec, ProbVec]:
    """Long-tailed device/server pair with positive divergence."""
    base = -zipf_s * np.log(np.arange(1, n + 1))
    rng.shuffle(base)
    za = base + rng.normal(0, 1.0, n)
    zb = base + rng.normal(0, 1.0, n)
    x = ProbVec(np.exp(za - za.max()) / np.exp(za - za.max()).sum())
    y = ProbVec(np.exp(zb - zb.max()) / np.exp(zb - zb.max()).sum())
    return x, y


def check_unbiasedness(
    n_cases: int, seed: int = 0, vocabs: tuple[int, ...] = (2, 8, 64), tol: float = 1e-10
) -> SuiteResult:
    """Hybrid output law equals the server law under exact resampling."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = math.inf
    total = 0
    for vocab in vocabs:
        for _ in range(n_cases):
            x = ProbVec(rng.dirichlet(np.ones(vocab)))
            y = ProbVec(rng.dirichlet(np.ones(vocab)))
            out = hybrid_output_dist(x, y, resample_dist(x, y))
            dev = float(np.max(np.abs(out.probs - y.probs)))
            margin = tol - dev
            worst = min(worst, margin)
            failures += margin < 0.0
            total += 1
    return SuiteResult("unbiasedness", total, failures, worst)


def check_tvd_bound_dominance(
    n_cases: int,
    seed: int = 0,
    vocabs: tuple[int, ...] = (8, 64, 1024),
    bound_scale: float = 1.0,
) -> SuiteResult:
    """Exact-denominator bound dominates the true resampling distortion."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = math.inf
    total = 0
    for vocab in vocabs:
        done = 0
        while done < n_cases:
            x, y = correlated_pair(rng, vocab)
            if tvd(x, y) <= 1e-12:
                continue
            k = int(rng.integers(1, vocab + 1))
            d = int(np.argmax(x.probs))
            x_hat = reconstruct(compress(sort_desc(x), k, d))
            q, fallback = distorted_resample_dist(x_hat, y)
            if fallback:
                continue
            bound = bound_scale * utv_bound(x, x_hat, y, k)
            margin = bound - tvd(resample_dist(x, y), q)
            worst = min(worst, margin)
            failures += margin < -1e-12
            done += 1
            total += 1
    return SuiteResult("tvd_bound_dominance", total, failures, worst)


def check_online_bound_dominance(
    n_cases: int,
    seed: int = 0,
    etas: tuple[float, ...] = (5.0, 10.0, 50.0),
    bound_scale: float = 1.0,
) -> SuiteResult:
    """Device-only bound strictly exceeds the smoothed-denominator ratio,
    and the softplus smoothing stays within ln2/eta of the true TVD."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = math.inf
    total = 0
    for eta in etas:
        cfg = SoftplusConfig(eta=eta)
        done = 0
        while done < n_cases:
            n = int(rng.integers(3, 128))
            x, y = correlated_pair(rng, n)
            s = sort_desc(x)
            d = int(np.argmax(x.probs))
            k = int(rng.integers(1, n))  # leaves at least one non-draft tail token
            x_hat = reconstruct(compress(s, k, d))
            tail = float(np.abs(s.probs[k:] - x_hat.probs[s.perm[k:]]).sum())
            if tail <= 0.0:
                continue
            smoothed = smoothed_tvd(x, y, cfg)
            beta_d = max(0.0, 1.0 - float(y.probs[d]) / float(x.probs[d]))
            online = bound_scale * utv_bound_online(
                s, x_hat, float(x.probs[d]), beta_d, k, cfg
            )
            margin = online - tail / smoothed
            err_margin = math.log(2.0) / eta - (smoothed - tvd(x, y))
            worst = min(worst, margin, err_margin)
            failures += (
                (margin <= 0.0)
                or (err_margin < -1e-12)
                or (smoothed < tvd(x, y) - 1e-12)
            )
            done += 1
            total += 1
    return SuiteResult("online_bound_dominance", total, failures, worst)


def check_risk_bound(
    seed: int = 0,
    grid_points: int = 20,
    n_samples: int = 8000,
    bound_scale: float = 1.0,
) -> SuiteResult:
    """Skip-risk bound holds along a threshold sweep for both estimators."""
    rng = np.random.default_rng(seed)
    model = LinearRejectionModel(a=0.815, b=-0.066, mse=0.0, r2=1.0)
    u = rng.uniform(0.0, 1.0, n_samples)
    lo = -model.b / model.a
    hi = (1.0 - model.b) / model.a
    failures = 0
    worst = math.inf
    total = 0
    for estimator in (GaussianKdeEstimator(), DiscretePmfEstimator(m=20)):
        for u_th in np.linspace(lo, hi, grid_points):
            rep = rejection_risk(model, u, float(u_th), estimator)
            margin = bound_scale * rep.bound - rep.empirical_r
            worst = min(worst, margin)
            failures += margin < -1e-12
            total += 1
    return SuiteResult("risk_bound", total, failures, worst)


def run_all_suites(
    n_cases: int, seed: int = 0, bound_scale: float = 1.0
) -> list[SuiteResult]:
    if n_cases < 1:
        raise ValueError("verification needs at least one case per suite")
    return [
        check_unbiasedness(n_cases, seed),
        check_tvd_bound_dominance(n_cases, seed + 1, bound_scale=bound_scale),
        check_online_bound_dominance(n_cases, seed + 2, bound_scale=bound_scale),
        check_risk_bound(seed + 3, bound_scale=bound_scale),
    ]
