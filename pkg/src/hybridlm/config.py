"""Run configuration: one JSON document covering every subsystem.

Field defaults follow the standard simulation constants: 10 MHz uplink,
8-bit probabilities, 512-round sequences, 20 perturbations over [0, 2],
25.6 ms / 104.6 ms compute latencies, a 32000-token vocabulary, skip
threshold 0.8, distortion tolerance 0.1, and softplus sharpness 10.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .channel import ChannelSpec, LatencySpec, PayloadSpec
from .oracle import OracleSpec
from .uncertainty import UncertaintyConfig

POLICY_VARIANTS = (
    "llm_only",
    "slm_only",
    "hlm",
    "rand_hlm",
    "u_hlm",
    "cu_hlm_offline",
    "cu_hlm_online",
)

UNCERTAINTY_VARIANTS = ("u_hlm", "cu_hlm_offline", "cu_hlm_online")


@dataclass(frozen=True)
class PolicySpec:
    variant: str = "cu_hlm_online"
    u_th: float = 0.8
    skip_prob: float = 0.5
    k_star: int | None = None
    theta: float = 0.1
    eta: float = 10.0

    def __post_init__(self) -> None:
        if self.variant not in POLICY_VARIANTS:
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if not 0.0 <= self.u_th <= 1.0:
            raise ValueError("u_th must be in [0, 1]")
        if not 0.0 <= self.skip_prob <= 1.0:
            raise ValueError("skip_prob must be in [0, 1]")
        if self.k_star is not None and self.k_star < 1:
            raise ValueError("k_star must be >= 1")

    @property
    def uses_uncertainty(self) -> bool:
        return self.variant in UNCERTAINTY_VARIANTS


@dataclass(frozen=True)
class CalibrationConfig:
    """On-the-fly calibration inputs for policies that need fitted statistics."""

    n_rounds: int = 2000
    seed: int | None = None  # defaults to run seed + 1
    delta_u_gate: float | None = None


@dataclass(frozen=True)
class RunConfig:
    oracle: OracleSpec = field(default_factory=OracleSpec)
    policy: PolicySpec = field(default_factory=PolicySpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    latency: LatencySpec = field(default_factory=LatencySpec)
    uncertainty: UncertaintyConfig = field(default_factory=UncertaintyConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    b_prob: int = 8
    r_max: int = 512
    n_sequences: int = 1
    seed: int = 0
    quantize_wire: bool = True
    outputs: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")
        if self.n_sequences < 1:
            raise ValueError("n_sequences must be >= 1")

    @property
    def payload(self) -> PayloadSpec:
        return PayloadSpec(vocab_size=self.oracle.vocab_size, b_prob=self.b_prob)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        parts = {}
        if "oracle" in d:
            parts["oracle"] = OracleSpec(**d.pop("oracle"))
        if "policy" in d:
            parts["policy"] = PolicySpec(**d.pop("policy"))
        if "channel" in d:
            parts["channel"] = ChannelSpec(**d.pop("channel"))
        if "latency" in d:
            parts["latency"] = LatencySpec(**d.pop("latency"))
        if "uncertainty" in d:
            parts["uncertainty"] = UncertaintyConfig(**d.pop("uncertainty"))
        if "calibration" in d:
            parts["calibration"] = CalibrationConfig(**d.pop("calibration"))
        return cls(**parts, **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as fh:
        return RunConfig.from_json(fh.read())
