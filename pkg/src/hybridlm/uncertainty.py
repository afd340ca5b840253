"""Temperature-perturbation uncertainty and the skip-threshold calculus.

A draft token's uncertainty is the fraction of temperature-perturbed
resamples that disagree with it. Empirically this is linearly related to the
server's rejection probability, so a fitted line (beta = a*u + b) converts an
uncertainty threshold into a rejection-risk guarantee: skipping every round
with u <= u_th incurs an expected extra rejection probability bounded by a
closed-form expression in the threshold and the density of u.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import gaussian_kde

from .dist import MIN_TEMPERATURE, TokenId, sample, softmax


@dataclass(frozen=True)
class UncertaintyConfig:
    """Perturbation count and the top of the temperature interval."""

    m: int = 20
    theta_max: float = 2.0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("perturbation count must be >= 1")
        if not self.theta_max > 0.0:
            raise ValueError("theta_max must be positive")


@dataclass(frozen=True)
class UncertaintySample:
    """Disagreement fraction u, quantized to multiples of 1/m."""

    u: float
    m: int


@dataclass(frozen=True)
class LinearRejectionModel:
    """Least-squares line mapping uncertainty to rejection probability."""

    a: float
    b: float
    mse: float
    r2: float


@dataclass(frozen=True)
class ThresholdPair:
    """Skip thresholds derived from the linear model.

    risk_averse (-b/a) skips only rounds the model predicts are never
    rejected; risk_prone ((delta - b)/a) is the largest threshold for which
    the predicted rejection probability stays within delta.
    """

    risk_averse: float
    risk_prone: float


@dataclass(frozen=True)
class RiskReport:
    """Empirical skip-induced rejection risk and its analytic upper bound."""

    empirical_r: float
    bound: float
    pdf_estimator: str


def estimate_u(
    logits: np.ndarray,
    d: TokenId,
    cfg: UncertaintyConfig,
    rng: np.random.Generator,
) -> UncertaintySample:
    """Mean disagreement of m temperature-perturbed redraws with the draft d.

    Temperatures are drawn uniformly from [0, theta_max]; an exact-zero draw
    is remapped to the smallest legal temperature, where the redraw collapses
    to the argmax.
    """
    disagree = 0
    for _ in range(cfg.m):
        theta = max(float(rng.uniform(0.0, cfg.theta_max)), MIN_TEMPERATURE)
        perturbed = softmax(logits, theta)
        if sample(perturbed, rng) != d:
            disagree += 1
    return UncertaintySample(u=disagree / cfg.m, m=cfg.m)


def fit_linear(pairs: list[tuple[float, float]]) -> LinearRejectionModel:
    """Ordinary least squares on (u, beta) pairs."""
    if len(pairs) < 2:
        raise ValueError("need at least two calibration pairs")
    u = np.array([p[0] for p in pairs], dtype=np.float64)
    beta = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.ptp(u) == 0.0:
        raise ValueError("degenerate fit: all uncertainty values identical")
    a, b = np.polyfit(u, beta, 1)
    resid = beta - (a * u + b)
    mse = float(np.mean(resid**2))
    ss_tot = float(np.sum((beta - beta.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0.0 else 1.0
    return LinearRejectionModel(a=float(a), b=float(b), mse=mse, r2=r2)


def predict_beta(model: LinearRejectionModel, u: float) -> float:
    """Predicted rejection probability, clamped to [0, 1]."""
    return float(np.clip(model.a * u + model.b, 0.0, 1.0))


def thresholds(model: LinearRejectionModel, delta: float) -> ThresholdPair:
    """Closed-form risk-averse and risk-prone skip thresholds."""
    if not model.a > 0.0:
        raise ValueError("threshold formulas require a positive slope")
    return ThresholdPair(
        risk_averse=-model.b / model.a,
        risk_prone=(delta - model.b) / model.a,
    )


def estimate_delta(calib: list[tuple[float, float]]) -> float:
    """Fraction of (x_d, y_d) pairs where the draft is not deterministically accepted."""
    if not calib:
        raise ValueError("empty calibration set")
    return float(np.mean([1.0 if y_d < x_d else 0.0 for x_d, y_d in calib]))


class GaussianKdeEstimator:
    """Gaussian kernel density estimate with Silverman bandwidth."""

    name = "gaussian_kde"

    def __init__(self, grid_points: int = 2048):
        self.grid_points = grid_points

    def density_l2_integral(self, samples: np.ndarray, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        if np.ptp(samples) == 0.0:
            raise ValueError("KDE undefined for zero-variance samples")
        kde = gaussian_kde(samples, bw_method="silverman")
        grid = np.linspace(lo, hi, self.grid_points)
        f = kde(grid)
        return float(np.trapezoid(f**2, grid))


class DiscretePmfEstimator:
    """Histogram density on the natural 1/m grid of uncertainty values.

    Each level j/m owns a cell of width 1/m centered on it; the squared
    density integrates as a Riemann sum over the cells' overlap with the
    integration interval.
    """

    name = "discrete_pmf"

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("resolution must be >= 1")
        self.m = m

    def density_l2_integral(self, samples: np.ndarray, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        levels = np.clip(np.round(samples * self.m).astype(int), 0, self.m)
        counts = np.bincount(levels, minlength=self.m + 1)
        pmf = counts / counts.sum()
        width = 1.0 / self.m
        total = 0.0
        for j in range(self.m + 1):
            if pmf[j] == 0.0:
                continue
            cell_lo = j * width - width / 2.0
            cell_hi = j * width + width / 2.0
            overlap = max(0.0, min(hi, cell_hi) - max(lo, cell_lo))
            density = pmf[j] / width
            total += density**2 * overlap
        return total


def rejection_risk(
    model: LinearRejectionModel,
    u_samples: list[UncertaintySample] | np.ndarray,
    u_th: float,
    estimator,
) -> RiskReport:
    """Empirical skip risk against the closed-form upper bound.

    The empirical risk averages the predicted rejection probability over
    samples inside the skip interval (-b/a, u_th]. The bound multiplies
    delta^(3/2)/sqrt(3a) by the L2 norm of the uncertainty density over the
    same interval, with delta = a*u_th + b.
    """
    u = np.array(
        [s.u if isinstance(s, UncertaintySample) else float(s) for s in u_samples]
    )
    if u.size == 0:
        raise ValueError("empty uncertainty sample set")
    lo = -model.b / model.a
    in_risk_zone = (u > lo) & (u <= u_th)
    betas = np.clip(model.a * u + model.b, 0.0, 1.0)
    empirical = float(np.mean(np.where(in_risk_zone, betas, 0.0)))
    delta = model.a * u_th + model.b
    if delta <= 0.0:
        bound = 0.0
    else:
        l2 = estimator.density_l2_integral(u, lo, u_th)
        bound = delta**1.5 / np.sqrt(3.0 * model.a) * np.sqrt(l2)
    return RiskReport(empirical_r=empirical, bound=float(bound), pdf_estimator=estimator.name)


def save_calibration_pairs(
    path: str | Path, rows: list[tuple[float, float, float, float]]
) -> None:
    """Write (u, beta, x_d, y_d) calibration rows for audit."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "beta", "x_d", "y_d"])
        for row in rows:
            writer.writerow([f"{v:.9g}" for v in row])


def load_calibration_pairs(path: str | Path) -> list[tuple[float, float, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["u", "beta", "x_d", "y_d"]:
            raise ValueError(f"unexpected calibration header: {header}")
        return [tuple(float(v) for v in row) for row in reader]
