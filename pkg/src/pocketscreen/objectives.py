"""Contrastive losses: symmetric InfoNCE, its hard-negative-augmented
variant, the ligand-ligand anchoring regularizer, and the combined
training objective.

All softmax denominators go through logsumexp; raw exponentiation of
logits is never used.  Masked hard-negative slots receive an additive
-1e30 penalty, which underflows to an exactly-zero contribution, so a
fully-masked batch reproduces the plain symmetric loss bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensorgrad as tg
from .tensorgrad import Tensor

__all__ = [
    "ContrastiveBatch",
    "LossWeights",
    "cosine_score",
    "cosine_matrix",
    "infonce_pocket",
    "infonce_ligand",
    "infonce_symmetric",
    "infonce_hardneg",
    "anchoring_loss",
    "unified_loss",
]

_MASKED = -1e30


@dataclass
class ContrastiveBatch:
    """One training batch of matched pocket/ligand embeddings.

    z_hardnegs holds k mined negatives per ligand, (B, k, d); hard_mask
    flags which slots are real (pairs may come up short after filtering).
    """

    z_pockets: Tensor  # (B, d)
    z_ligands: Tensor  # (B, d)
    z_hardnegs: Optional[Tensor] = None  # (B, k, d)
    hard_mask: Optional[np.ndarray] = None  # (B, k) bool
    tau: float = 0.07

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.z_pockets.shape != self.z_ligands.shape or self.z_pockets.ndim != 2:
            raise tg.ShapeError(
                f"pocket/ligand embedding shapes differ: {self.z_pockets.shape} vs {self.z_ligands.shape}")
        if self.z_hardnegs is not None:
            B, d = self.z_pockets.shape
            if self.z_hardnegs.ndim != 3 or self.z_hardnegs.shape[0] != B or self.z_hardnegs.shape[2] != d:
                raise tg.ShapeError(f"hard negatives must be (B, k, d), got {self.z_hardnegs.shape}")
            if self.hard_mask is None:
                self.hard_mask = np.ones(self.z_hardnegs.shape[:2], dtype=bool)

    @property
    def batch_size(self) -> int:
        return self.z_pockets.shape[0]

    @property
    def n_hard(self) -> int:
        return 0 if self.z_hardnegs is None else self.z_hardnegs.shape[1]


@dataclass
class LossWeights:
    """Weights of the combined objective plus the anchoring margin."""

    lambda_diffusion: float = 1.0
    lambda_anchor: float = 0.1
    lambda_type: float = 1.0
    margin: float = 0.05

    def __post_init__(self):
        for name in ("lambda_diffusion", "lambda_anchor", "lambda_type", "margin"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


def cosine_score(z_p: Tensor, z_m: Tensor) -> Tensor:
    """Inner product of the l2-normalized vectors; in [-1, 1]."""
    return tg.tsum(tg.normalize(z_p, axis=-1) * tg.normalize(z_m, axis=-1))


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """All-pairs cosine similarities: (n, d) x (m, d) -> (n, m)."""
    return tg.normalize(a, axis=-1) @ tg.transpose(tg.normalize(b, axis=-1))


def _hard_flat(batch: ContrastiveBatch):
    """Hard negatives as (B*k, d) plus their additive mask penalties."""
    B, k, d = batch.z_hardnegs.shape
    flat = tg.reshape(batch.z_hardnegs, (B * k, d))
    pen = np.where(batch.hard_mask.reshape(-1), 0.0, _MASKED)  # (B*k,)
    return flat, pen


def infonce_pocket(batch: ContrastiveBatch, include_hardnegs: bool = False) -> Tensor:
    """Pocket-side InfoNCE: each pocket classifies its own ligand against
    the batch ligands, and optionally against all B*k mined negatives."""
    B = batch.batch_size
    sims = cosine_matrix(batch.z_pockets, batch.z_ligands)  # (B, B)
    logits = sims * (1.0 / batch.tau)
    if include_hardnegs and batch.n_hard > 0:
        flat, pen = _hard_flat(batch)
        hn = cosine_matrix(batch.z_pockets, flat) * (1.0 / batch.tau) + Tensor(pen)
        logits = tg.concat([logits, hn], axis=1)
    diag = logits[(np.arange(B), np.arange(B))]
    return tg.tmean(tg.logsumexp(logits, axis=1) - diag)


def infonce_ligand(batch: ContrastiveBatch) -> Tensor:
    """Ligand-side InfoNCE over in-batch pockets (never sees hard negatives)."""
    B = batch.batch_size
    logits = cosine_matrix(batch.z_ligands, batch.z_pockets) * (1.0 / batch.tau)
    diag = logits[(np.arange(B), np.arange(B))]
    return tg.tmean(tg.logsumexp(logits, axis=1) - diag)


def infonce_symmetric(batch: ContrastiveBatch) -> Tensor:
    """Plain symmetric contrastive loss; hard negatives are ignored."""
    return (infonce_pocket(batch, include_hardnegs=False) + infonce_ligand(batch)) * 0.5


def infonce_hardneg(batch: ContrastiveBatch) -> Tensor:
    """Symmetric loss with the pocket-side denominator extended by every
    mined hard negative in the batch; the ligand side is unchanged."""
    return (infonce_pocket(batch, include_hardnegs=True) + infonce_ligand(batch)) * 0.5


def anchoring_loss(batch: ContrastiveBatch, margin: float = 0.05) -> Tensor:
    """Hinge keeping each ligand's best hard negative at least as close as
    a random in-batch ligand (minus the margin).

    The in-batch reference similarity is stop-gradiented: only the
    ligand-to-hard-negative path receives gradient.  Rows whose negatives
    are all masked out drop from the sum.
    """
    B = batch.batch_size
    if B < 2:
        raise ValueError("anchoring needs B >= 2 for the in-batch reference")
    if batch.n_hard < 1:
        raise ValueError("anchoring needs at least one hard negative per ligand")

    sims_mm = cosine_matrix(batch.z_ligands, batch.z_ligands)  # (B, B)
    diag = sims_mm[(np.arange(B), np.arange(B))]
    s_bar = (tg.tsum(sims_mm, axis=1) - diag) * (1.0 / (B - 1))
    s_bar = tg.stop_gradient(s_bar)

    zm = tg.normalize(batch.z_ligands, axis=-1)  # (B, d)
    zh = tg.normalize(batch.z_hardnegs, axis=-1)  # (B, k, d)
    per = tg.reshape(tg.reshape(zm, (B, 1, zm.shape[1])) @ tg.transpose(zh, (0, 2, 1)), (B, batch.n_hard))
    per = per + Tensor(np.where(batch.hard_mask, 0.0, _MASKED))
    s_hard = tg.tmax(per, axis=1)

    valid = Tensor(batch.hard_mask.any(axis=1).astype(np.float64))
    return tg.tsum(tg.relu(s_bar - s_hard + margin) * valid)


def unified_loss(contrastive: Tensor, diffusion, anchoring, weights: LossWeights) -> Tensor:
    """Combined objective: contrastive + weighted diffusion and anchoring
    terms.  Missing components enter as exact zeros."""
    total = contrastive
    if diffusion is not None:
        total = total + tg.as_tensor(diffusion) * weights.lambda_diffusion
    if anchoring is not None:
        total = total + tg.as_tensor(anchoring) * weights.lambda_anchor
    return total
