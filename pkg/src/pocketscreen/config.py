"""Training configuration: one flat dataclass serialized as JSON.

Constraints owned by the individual modules (positive temperature,
non-negative loss weights, timestep range inside the schedule) are
re-validated here at load time so bad configs fail before training
starts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

__all__ = ["TrainConfig"]


@dataclass
class TrainConfig:
    # batch composition
    batch_size: int = 16
    k_hard: int = 0  # hard negatives per ligand; 0 = plain contrastive
    # loss weights and temperatures
    tau: float = 0.07
    lambda_diffusion: float = 1.0
    lambda_anchor: float = 0.1
    lambda_type: float = 1.0
    margin: float = 0.05
    # diffusion
    diffusion_T: int = 1000
    t_lo: int = 300
    t_hi: int = 700
    schedule_kind: str = "sigmoid"
    # optimizer
    base_lr: float = 1e-3
    warmup_ratio: float = 0.06
    epochs: int = 30
    grad_accum: int = 1
    clip_norm: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # encoder
    embed_dim: int = 64
    enc_heads: int = 4
    enc_blocks: int = 4
    n_rbf: int = 25
    rbf_max: float = 12.0
    rbf_width: float = 0.5
    # denoiser
    denoiser_dim: int = 64
    denoiser_blocks: int = 3
    denoiser_msg_dim: int = 32
    film_identity: bool = False  # freeze FiLM at identity (ablation)
    # run control
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (in-batch negatives)")
        if self.k_hard < 0:
            raise ValueError("k_hard must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        for name in ("lambda_diffusion", "lambda_anchor", "lambda_type", "margin"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not (1 <= self.t_lo <= self.t_hi <= self.diffusion_T):
            raise ValueError("need 1 <= t_lo <= t_hi <= diffusion_T")
        if not 0 < self.warmup_ratio < 1:
            raise ValueError("warmup_ratio must be in (0, 1)")
        if self.grad_accum < 1:
            raise ValueError("grad_accum must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.embed_dim % self.enc_heads:
            raise ValueError("embed_dim must be divisible by enc_heads")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_json(Path(path).read_text())
