"""Adam with global-norm gradient clipping, and the polynomial LR schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .tensor import NumericError, Tensor

__all__ = ["AdamState", "adam_step", "global_grad_norm", "poly_lr"]


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like the parameter dict."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: Dict[str, Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
            step=0,
        )


def global_grad_norm(params: Dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def adam_step(
    params: Dict[str, Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    clip_norm: float = 1.0,
) -> float:
    """One bias-corrected Adam update in place; returns the pre-clip grad norm.

    The global gradient norm is clipped to clip_norm before the moment
    updates.  Missing grads count as zero.  Any non-finite gradient aborts
    the step with a diagnostic naming the offending parameter.
    """
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient for parameter '{name}'; step aborted")
        if state.m.get(name) is None or state.m[name].shape != p.data.shape:
            raise ValueError(f"optimizer state shape mismatch for '{name}'")

    norm = global_grad_norm(params)
    scale = 1.0 if (clip_norm is None or norm <= clip_norm) else clip_norm / norm

    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = p.grad * scale if p.grad is not None else np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return norm


def poly_lr(step: int, total_steps: int, base_lr: float = 1e-3, warmup_ratio: float = 0.06) -> float:
    """Linear warmup to base_lr, then linear (power-1 polynomial) decay to 0.

    Defined on 0 <= step <= total_steps; lr(0) = 0, lr(warmup end) = base_lr,
    lr(total_steps) = 0.
    """
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = warmup_ratio * total_steps
    if warmup > 0 and step <= warmup:
        return base_lr * step / warmup
    return base_lr * (total_steps - step) / (total_steps - warmup)
