"""Pocket and ligand atom-cloud encoders.

A small set-attention network maps an atom cloud (types + 3D coordinates)
to a global embedding ``z`` and per-atom embeddings ``H``.  A virtual
global token is prepended at the center of geometry; after the attention
blocks its row becomes ``z`` and the remaining rows ``H``.  Coordinates
enter only through a Gaussian radial-basis expansion of pairwise
distances added as an attention bias, so the output is invariant to rigid
motions by construction.

Pocket and ligand encoders share this architecture but never weights:
each side gets its own parameter dict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from . import tensorgrad as tg
from .tensorgrad import Tensor

__all__ = [
    "ATOM_TYPES",
    "AtomCloud",
    "EmbeddingPair",
    "EncoderConfig",
    "atom_type_id",
    "featurize_pairs",
    "init_encoder_params",
    "encode",
    "encode_batch",
    "embed_clouds",
    "BatchEncoding",
]

# fixed 16-entry atom-type vocabulary; metals share one bucket
ATOM_TYPES = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "H", "B", "Se",
              "METAL", "CLS", "PAD", "UNK")
_TYPE_INDEX = {t: i for i, t in enumerate(ATOM_TYPES)}
_METALS = {"Na", "Mg", "K", "Ca", "Zn", "Fe", "Mn", "Cu", "Co", "Ni", "Li"}

CLS_ID = _TYPE_INDEX["CLS"]
PAD_ID = _TYPE_INDEX["PAD"]
UNK_ID = _TYPE_INDEX["UNK"]
N_ATOM_TYPES = len(ATOM_TYPES)

_MASK_PENALTY = -1e9


def atom_type_id(element: str) -> int:
    if element in _TYPE_INDEX:
        return _TYPE_INDEX[element]
    if element in _METALS:
        return _TYPE_INDEX["METAL"]
    return UNK_ID


@dataclass
class AtomCloud:
    """Atom-type ids plus 3D coordinates in Angstrom."""

    types: np.ndarray  # (N,) int
    coords: np.ndarray  # (N, 3) float

    def __post_init__(self):
        self.types = np.asarray(self.types, dtype=np.intp)
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.types.ndim != 1 or self.coords.shape != (len(self.types), 3):
            raise ValueError(f"malformed cloud: types {self.types.shape}, coords {self.coords.shape}")
        if len(self.types) < 1:
            raise ValueError("empty atom cloud")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("non-finite coordinates")
        if np.any(self.types < 0) or np.any(self.types >= N_ATOM_TYPES):
            raise ValueError("atom type id out of range")

    def __len__(self):
        return len(self.types)


@dataclass
class EmbeddingPair:
    """Global embedding z plus the N x d atom-level embedding matrix H."""

    z: Tensor
    H: Tensor


@dataclass
class EncoderConfig:
    d: int = 64
    heads: int = 4
    blocks: int = 4
    n_rbf: int = 25
    rbf_max: float = 12.0
    rbf_width: float = 0.5
    n_types: int = N_ATOM_TYPES

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError("d must be divisible by heads")


def rbf_centers(cfg: EncoderConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.rbf_max, cfg.n_rbf)


def featurize_pairs(cloud: AtomCloud, cfg: EncoderConfig | None = None) -> np.ndarray:
    """Gaussian RBF expansion of all pairwise distances, (N, N, n_rbf)."""
    cfg = cfg or EncoderConfig()
    return _rbf_of_coords(cloud.coords[None], cfg)[0]


def _rbf_of_coords(coords: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    centers = rbf_centers(cfg)
    return np.exp(-((dist[..., None] - centers) ** 2) / (2.0 * cfg.rbf_width**2))


def init_encoder_params(rng: np.random.Generator, cfg: EncoderConfig) -> Dict[str, Tensor]:
    d = cfg.d
    scale = 1.0 / np.sqrt(d)

    def w(*shape, s=scale):
        return Tensor(rng.normal(0.0, s, size=shape), requires_grad=True)

    params: Dict[str, Tensor] = {"embed.type": w(cfg.n_types, d, s=0.3)}
    for b in range(cfg.blocks):
        p = f"block{b}."
        params[p + "attn.wq"] = w(d, d)
        params[p + "attn.wk"] = w(d, d)
        params[p + "attn.wv"] = w(d, d)
        params[p + "attn.wo"] = w(d, d)
        params[p + "attn.rbf"] = w(cfg.n_rbf, cfg.heads, s=0.3)
        params[p + "ln1.g"] = Tensor(np.ones(d), requires_grad=True)
        params[p + "ln1.b"] = Tensor(np.zeros(d), requires_grad=True)
        params[p + "ln2.g"] = Tensor(np.ones(d), requires_grad=True)
        params[p + "ln2.b"] = Tensor(np.zeros(d), requires_grad=True)
        params[p + "ffn.w1"] = w(d, 2 * d)
        params[p + "ffn.b1"] = Tensor(np.zeros(2 * d), requires_grad=True)
        params[p + "ffn.w2"] = w(2 * d, d, s=scale / np.sqrt(2))
        params[p + "ffn.b2"] = Tensor(np.zeros(d), requires_grad=True)
    params["ln_out.g"] = Tensor(np.ones(d), requires_grad=True)
    params["ln_out.b"] = Tensor(np.zeros(d), requires_grad=True)
    return params


def layer_norm(h: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = tg.tmean(h, axis=-1, keepdims=True)
    xc = h - mu
    var = tg.tmean(xc * xc, axis=-1, keepdims=True)
    return xc / tg.sqrt(var + eps) * gain + bias


@dataclass
class BatchEncoding:
    """Padded batch output; row i of H is valid up to n_atoms[i]."""

    z: Tensor  # (B, d)
    H: Tensor  # (B, N_max, d)
    n_atoms: List[int] = field(default_factory=list)

    def pair(self, i: int) -> EmbeddingPair:
        return EmbeddingPair(z=self.z[i], H=self.H[i, : self.n_atoms[i]])


def encode_batch(params: Dict[str, Tensor], clouds: Sequence[AtomCloud],
                 cfg: EncoderConfig | None = None) -> BatchEncoding:
    """Encode a batch of clouds with padding; identical per-cloud results to
    encode() because padded keys receive an additive -1e9 attention penalty,
    which underflows to an exactly-zero softmax weight."""
    cfg = cfg or EncoderConfig()
    if not clouds:
        raise ValueError("empty batch")
    B = len(clouds)
    n_max = max(len(c) for c in clouds)
    n1 = n_max + 1  # +1 for the global token

    types = np.full((B, n1), PAD_ID, dtype=np.intp)
    coords = np.zeros((B, n1, 3))
    mask = np.zeros((B, n1))
    for i, c in enumerate(clouds):
        n = len(c)
        types[i, 0] = CLS_ID
        types[i, 1 : n + 1] = c.types
        coords[i, 0] = c.coords.mean(axis=0)  # center of geometry
        coords[i, 1 : n + 1] = c.coords
        mask[i, : n + 1] = 1.0

    rbf = _rbf_of_coords(coords, cfg)  # (B, n1, n1, R), constant
    rbf_t = Tensor(rbf)
    pen = Tensor(((1.0 - mask) * _MASK_PENALTY)[:, None, None, :])  # (B,1,1,n1)

    d, H_, dh = cfg.d, cfg.heads, cfg.d // cfg.heads
    h = tg.reshape(tg.take_rows(params["embed.type"], types.reshape(-1)), (B, n1, d))

    for b in range(cfg.blocks):
        p = f"block{b}."
        xn = layer_norm(h, params[p + "ln1.g"], params[p + "ln1.b"])

        def heads_of(x):
            return tg.transpose(tg.reshape(x, (B, n1, H_, dh)), (0, 2, 1, 3))

        q = heads_of(xn @ params[p + "attn.wq"])
        k = heads_of(xn @ params[p + "attn.wk"])
        v = heads_of(xn @ params[p + "attn.wv"])
        bias = tg.transpose(rbf_t @ params[p + "attn.rbf"], (0, 3, 1, 2))
        scores = q @ tg.transpose(k, (0, 1, 3, 2)) * (1.0 / np.sqrt(dh)) + bias + pen
        attn = tg.softmax(scores, axis=-1)
        ctx = tg.reshape(tg.transpose(attn @ v, (0, 2, 1, 3)), (B, n1, d))
        h = h + ctx @ params[p + "attn.wo"]

        xn2 = layer_norm(h, params[p + "ln2.g"], params[p + "ln2.b"])
        inner = tg.silu(xn2 @ params[p + "ffn.w1"] + params[p + "ffn.b1"])
        h = h + inner @ params[p + "ffn.w2"] + params[p + "ffn.b2"]

    h = layer_norm(h, params["ln_out.g"], params["ln_out.b"])
    return BatchEncoding(z=h[:, 0, :], H=h[:, 1:, :], n_atoms=[len(c) for c in clouds])


def encode(params: Dict[str, Tensor], cloud: AtomCloud,
           cfg: EncoderConfig | None = None) -> EmbeddingPair:
    """Encode one cloud; see encode_batch for the mechanics."""
    enc = encode_batch(params, [cloud], cfg)
    return enc.pair(0)


def embed_clouds(params: Dict[str, Tensor], clouds: Sequence[AtomCloud],
                 cfg: EncoderConfig | None = None, batch_size: int = 64) -> np.ndarray:
    """Global embeddings for many clouds, gradient-free, as (N, d) numpy."""
    rows = []
    with tg.no_grad():
        for lo in range(0, len(clouds), batch_size):
            enc = encode_batch(params, clouds[lo : lo + batch_size], cfg)
            rows.append(enc.z.data)
    return np.concatenate(rows, axis=0)
