"""Pocket-conditioned binding-pose diffusion used as a training-time
auxiliary task.

The forward process corrupts ligand coordinates with Gaussian noise under
a fixed variance schedule; the closed-form marginal gives x_t directly
from x_0.  The denoiser is a stack of E(3)-equivariant blocks over the
joint pocket+ligand cloud: scalar features see only squared distances,
atom types, and the timestep, and coordinates change only through
weighted sums of difference vectors (ligand rows only, pocket fixed).
Per-atom FiLM modulation derived from the encoders' atom-level
embeddings conditions every block, which is how the encoders receive
gradient from this loss.

Nothing here is imported by the screening path; generation-style reverse
steps exist only as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from . import tensorgrad as tg
from .encoder import AtomCloud, N_ATOM_TYPES
from .tensorgrad import Tensor

__all__ = [
    "NoiseSchedule",
    "build_schedule",
    "PoseSample",
    "forward_sample",
    "sample_timestep",
    "DenoiserConfig",
    "init_denoiser_params",
    "zero_film_heads",
    "denoise",
    "diffusion_loss",
    "reverse_step",
    "time_embedding",
]

SCHEDULE_KINDS = ("sigmoid", "linear")
T_SAMPLE_LO = 300
T_SAMPLE_HI = 700


@dataclass
class NoiseSchedule:
    """Precomputed {beta_t, alpha_t, alpha_bar_t} for t = 1..T (0-indexed
    arrays; alpha_bar_0 is defined as 1 and not stored)."""

    T: int
    kind: str
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def abar(self, t: int) -> float:
        """alpha_bar_t with the t = 0 convention alpha_bar_0 = 1."""
        if t == 0:
            return 1.0
        return float(self.alpha_bar[t - 1])

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "kind": self.kind,
            "beta": self.beta.tolist(),
            "alpha_bar": self.alpha_bar.tolist(),
        }


def build_schedule(T: int, kind: str = "sigmoid", beta_start: float = 1e-7,
                   beta_end: float = 2e-2, abar_target: float = 1e-4) -> NoiseSchedule:
    """Variance schedule with endpoints (beta_start, ~beta_end); beta_end is
    scaled up as needed so that alpha_bar_T < abar_target."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind '{kind}'; choose from {SCHEDULE_KINDS}")

    def shape01(n):
        if kind == "sigmoid":
            x = np.linspace(-6.0, 6.0, n)
            w = 1.0 / (1.0 + np.exp(-x))
            return (w - w[0]) / (w[-1] - w[0])
        return np.linspace(0.0, 1.0, n)

    w = shape01(T) if T > 1 else np.array([1.0])
    end = beta_end
    for _ in range(200):
        beta = beta_start + (end - beta_start) * w
        alpha_bar = np.cumprod(1.0 - beta)
        if alpha_bar[-1] < abar_target or end >= 0.999:
            break
        end = min(end * 1.25, 0.999)
    if np.any(beta <= 0.0) or np.any(beta >= 1.0):
        raise ValueError("schedule produced beta outside (0, 1)")
    return NoiseSchedule(T=T, kind=kind, beta=beta, alpha=1.0 - beta, alpha_bar=alpha_bar)


@dataclass
class PoseSample:
    """A noised pose together with everything needed to audit it."""

    x0: np.ndarray
    xt: np.ndarray
    t: int
    eps: np.ndarray


def forward_sample(x0: np.ndarray, t: int, schedule: NoiseSchedule,
                   rng: np.random.Generator) -> PoseSample:
    """Draw x_t ~ q(x_t | x_0) via the closed-form marginal."""
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t={t} outside [1, {schedule.T}]")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = rng.standard_normal(x0.shape)
    ab = schedule.abar(t)
    xt = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    return PoseSample(x0=x0, xt=xt, t=t, eps=eps)


def sample_timestep(rng: np.random.Generator, schedule: NoiseSchedule,
                    lo: int = T_SAMPLE_LO, hi: int = T_SAMPLE_HI) -> int:
    """Uniform integer timestep on [lo, hi] inclusive (mid-range noise)."""
    if schedule.T < hi:
        raise ValueError(f"schedule T={schedule.T} shorter than sampling range end {hi}")
    return int(rng.integers(lo, hi + 1))


def reverse_step(xt: np.ndarray, x_hat0: np.ndarray, t: int, schedule: NoiseSchedule,
                 rng: np.random.Generator) -> np.ndarray:
    """Diagnostic DDPM posterior-mean step using the predicted clean pose.

    Not on the screening path; kept to sanity check the generative chain.
    """
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t={t} outside [1, {schedule.T}]")
    ab_t = schedule.abar(t)
    ab_prev = schedule.abar(t - 1)
    beta_t = float(schedule.beta[t - 1])
    alpha_t = 1.0 - beta_t
    mean = (np.sqrt(ab_prev) * beta_t / (1.0 - ab_t)) * x_hat0 \
        + (np.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)) * xt
    if t == 1:
        return mean
    var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t
    return mean + np.sqrt(var) * rng.standard_normal(xt.shape)


# ---------------------------------------------------------------------------
# denoiser
# ---------------------------------------------------------------------------

@dataclass
class DenoiserConfig:
    d_h: int = 64
    blocks: int = 3
    msg_dim: int = 32  # width of the O(N^2) edge messages
    cond_dim: int = 64  # width of the conditioning atom embeddings
    n_types: int = N_ATOM_TYPES
    t_max: int = 1000  # frequency scale of the time embedding


def time_embedding(t: int, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = float(t) * freqs
    emb = np.concatenate([np.sin(ang), np.cos(ang)])
    if dim % 2:
        emb = np.concatenate([emb, [0.0]])
    return emb


def init_denoiser_params(rng: np.random.Generator, cfg: DenoiserConfig) -> Dict[str, Tensor]:
    dh, dm = cfg.d_h, cfg.msg_dim

    def w(*shape, s=None):
        s = s if s is not None else 1.0 / np.sqrt(shape[0])
        return Tensor(rng.normal(0.0, s, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    params: Dict[str, Tensor] = {
        "in.type": w(cfg.n_types, dh, s=0.3),
        "in.ligand": w(dh, s=0.3),
        "in.time": w(dh, dh),
    }

    def edge_coord(prefix: str):
        params[prefix + "edge.w1"] = w(2 * dh + 1, dm)
        params[prefix + "edge.b1"] = zeros(dm)
        params[prefix + "edge.w2"] = w(dm, dm)
        params[prefix + "edge.b2"] = zeros(dm)
        params[prefix + "coord.w"] = w(dm, 1, s=0.1 / np.sqrt(dm))
        params[prefix + "coord.b"] = zeros(1)

    for b in range(cfg.blocks):
        p = f"block{b}."
        edge_coord(p)
        params[p + "node.w1"] = w(dh + dm, dh)
        params[p + "node.b1"] = zeros(dh)
        params[p + "node.w2"] = w(dh, dh, s=0.5 / np.sqrt(dh))
        params[p + "node.b2"] = zeros(dh)
        # FiLM head; near-identity init keeps conditioning gradients live
        # from the first step (zeroing these weights forces gamma=1, beta=0)
        params[p + "film.w1"] = w(cfg.cond_dim, dh)
        params[p + "film.b1"] = zeros(dh)
        params[p + "film.w2"] = w(dh, 2 * dh, s=0.05 / np.sqrt(dh))
        params[p + "film.b2"] = zeros(2 * dh)
    edge_coord("out.")
    params["type.w"] = w(dh, cfg.n_types)
    params["type.b"] = zeros(cfg.n_types)
    return params


def zero_film_heads(params: Dict[str, Tensor]):
    """Force every FiLM head to the identity (gamma=1, beta=0): the
    no-conditioning ablation.  Combine with freezing for a fair baseline."""
    for name, p in params.items():
        if ".film.w2" in name or ".film.b2" in name:
            p.data[...] = 0.0


def _coord_update(h: Tensor, X: Tensor, lig_rows: Tensor, not_self: Tensor,
                  params: Dict[str, Tensor], prefix: str, n: int):
    """One equivariant message round: returns (messages, updated coords)."""
    dh = h.shape[-1]
    diff = tg.reshape(X, (n, 1, 3)) - tg.reshape(X, (1, n, 3))
    d2 = tg.tsum(diff * diff, axis=-1, keepdims=True)
    hi = tg.broadcast_to(tg.reshape(h, (n, 1, dh)), (n, n, dh))
    hj = tg.broadcast_to(tg.reshape(h, (1, n, dh)), (n, n, dh))
    e_in = tg.concat([hi, hj, d2], axis=-1)
    msg = tg.silu(tg.silu(e_in @ params[prefix + "edge.w1"] + params[prefix + "edge.b1"])
                  @ params[prefix + "edge.w2"] + params[prefix + "edge.b2"])
    msg = msg * not_self
    gate = tg.tanh(msg @ params[prefix + "coord.w"] + params[prefix + "coord.b"]) * not_self
    upd = tg.tsum(diff * gate, axis=1) * (1.0 / max(n - 1, 1))
    return msg, X + upd * lig_rows


def denoise(params: Dict[str, Tensor], xt: np.ndarray, pocket: AtomCloud, t: int,
            H_p: Tensor, H_m: Tensor, cfg: DenoiserConfig | None = None) -> Tuple[Tensor, Tensor]:
    """Predict (clean ligand pose, ligand atom-type logits) from a noised
    pose, the pocket, the timestep, and the encoders' atom embeddings."""
    cfg = cfg or DenoiserConfig()
    xt = np.asarray(xt, dtype=np.float64)
    n_p, n_m = len(pocket), xt.shape[0]
    if xt.shape != (n_m, 3):
        raise tg.ShapeError(f"xt must be (N_m, 3), got {xt.shape}")
    if H_p.shape[0] != n_p or H_m.shape[0] != n_m:
        raise tg.ShapeError(
            f"conditioning rows ({H_p.shape[0]}, {H_m.shape[0]}) do not match "
            f"cloud sizes ({n_p}, {n_m})")
    n = n_p + n_m
    dh = cfg.d_h

    X = tg.concat([Tensor(pocket.coords), tg.as_tensor(xt)], axis=0)
    h_pocket = tg.take_rows(params["in.type"], pocket.types)
    h_ligand = tg.broadcast_to(tg.reshape(params["in.ligand"], (1, dh)), (n_m, dh))
    h = tg.concat([h_pocket, h_ligand], axis=0)
    temb = Tensor(time_embedding(t, dh)) @ params["in.time"]
    h = h + tg.reshape(temb, (1, dh))

    H_cond = tg.concat([H_p, H_m], axis=0)
    lig_rows = Tensor(np.concatenate([np.zeros((n_p, 1)), np.ones((n_m, 1))]))
    not_self = Tensor((1.0 - np.eye(n))[:, :, None])

    for b in range(cfg.blocks):
        p = f"block{b}."
        msg, X = _coord_update(h, X, lig_rows, not_self, params, p, n)
        agg = tg.tsum(msg, axis=1) * (1.0 / max(n - 1, 1))
        h = h + tg.silu(tg.concat([h, agg], axis=-1) @ params[p + "node.w1"]
                        + params[p + "node.b1"]) @ params[p + "node.w2"] + params[p + "node.b2"]
        film = tg.silu(H_cond @ params[p + "film.w1"] + params[p + "film.b1"]) \
            @ params[p + "film.w2"] + params[p + "film.b2"]
        gamma = film[:, :dh] + 1.0
        beta = film[:, dh:]
        h = gamma * h + beta

    _, X = _coord_update(h, X, lig_rows, not_self, params, "out.", n)
    x_hat0 = X[n_p:, :]
    v_logits = h[n_p:, :] @ params["type.w"] + params["type.b"]
    return x_hat0, v_logits


def diffusion_loss(x0: np.ndarray, x_hat0: Tensor, v_true: np.ndarray, v_logits: Tensor,
                   lambda_type: float = 1.0) -> Tensor:
    """Summed squared coordinate error plus weighted mean atom-type
    cross-entropy."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x_hat0.shape != x0.shape:
        raise tg.ShapeError(f"pose shapes differ: {x_hat0.shape} vs {x0.shape}")
    err = x_hat0 - Tensor(x0)
    loss = tg.tsum(err * err)
    if lambda_type != 0.0:
        loss = loss + tg.cross_entropy(v_logits, v_true) * lambda_type
    return loss
