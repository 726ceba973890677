"""End-to-end training harness.

Per step: batch-encode pockets (crystal geometry) and ligands (unbound
conformers), encode the mined hard negatives, assemble the contrastive
batch, run the pocket-conditioned denoiser on each complex's bound pose
at a mid-range timestep, combine the losses, and take one clipped Adam
step under the polynomial schedule.  Checkpoints are selected by
validation BEDROC.  Everything is driven by a single seeded generator,
so a fixed seed reproduces the training log byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tensorgrad as tg
from .config import TrainConfig
from .dataio import ComplexRecord, LibraryMolecule
from .diffusion import (
    DenoiserConfig,
    build_schedule,
    denoise,
    diffusion_loss,
    forward_sample,
    init_denoiser_params,
    sample_timestep,
    zero_film_heads,
)
from .encoder import AtomCloud, EncoderConfig, encode_batch, embed_clouds, init_encoder_params
from .evalkit import LabeledRanking, bedroc
from .objectives import (
    ContrastiveBatch,
    LossWeights,
    anchoring_loss,
    infonce_hardneg,
    infonce_symmetric,
    unified_loss,
)
from .tensorgrad import AdamState, Tensor, adam_step, poly_lr, save_checkpoint

__all__ = ["TrainResult", "init_params", "split_params", "train", "encoder_config",
           "denoiser_config", "model_from_checkpoint"]


def encoder_config(cfg: TrainConfig) -> EncoderConfig:
    return EncoderConfig(d=cfg.embed_dim, heads=cfg.enc_heads, blocks=cfg.enc_blocks,
                         n_rbf=cfg.n_rbf, rbf_max=cfg.rbf_max, rbf_width=cfg.rbf_width)


def denoiser_config(cfg: TrainConfig) -> DenoiserConfig:
    return DenoiserConfig(d_h=cfg.denoiser_dim, blocks=cfg.denoiser_blocks,
                          msg_dim=cfg.denoiser_msg_dim,
                          cond_dim=cfg.embed_dim, t_max=cfg.diffusion_T)


def init_params(cfg: TrainConfig, rng: np.random.Generator) -> Dict[str, Tensor]:
    """Flat parameter dict with pocket./ligand./denoiser. prefixes; the two
    encoders share architecture but never weights."""
    enc_cfg = encoder_config(cfg)
    params: Dict[str, Tensor] = {}
    for name, p in init_encoder_params(rng, enc_cfg).items():
        params[f"pocket.{name}"] = p
    for name, p in init_encoder_params(rng, enc_cfg).items():
        params[f"ligand.{name}"] = p
    if cfg.lambda_diffusion > 0:
        for name, p in init_denoiser_params(rng, denoiser_config(cfg)).items():
            params[f"denoiser.{name}"] = p
        if cfg.film_identity:
            zero_film_heads({k.split(".", 1)[1]: v for k, v in params.items()
                             if k.startswith("denoiser.")})
    return params


def split_params(params: Dict[str, Tensor]) -> Tuple[Dict[str, Tensor], ...]:
    def sub(prefix):
        return {k.split(".", 1)[1]: v for k, v in params.items() if k.startswith(prefix)}
    return sub("pocket."), sub("ligand."), sub("denoiser.")


def model_from_checkpoint(path, requires_grad: bool = False):
    """(params, TrainConfig, meta) from a saved checkpoint."""
    tensors, meta = tg.load_checkpoint(path, requires_grad=requires_grad)
    cfg = TrainConfig.from_json(json.dumps(meta["config"]))
    return tensors, cfg, meta


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    best_val_bedroc: float
    best_epoch: int
    final_loss: float
    steps: int


def _mean_val_bedroc(pocket_z: np.ndarray, pocket_ids: List[str],
                     lib_matrix: np.ndarray, lib_ids: List[str],
                     labels: Dict[Tuple[str, str], int]) -> float:
    lib_n = lib_matrix / np.linalg.norm(lib_matrix, axis=1, keepdims=True)
    vals = []
    for zi, pid in zip(pocket_z, pocket_ids):
        z = zi / np.linalg.norm(zi)
        scores = lib_n @ z
        lab = np.array([labels.get((pid, m), 0) for m in lib_ids])
        if 0 < lab.sum() < len(lab):
            vals.append(bedroc(LabeledRanking(scores=scores, labels=lab, ids=lib_ids)))
    return float(np.mean(vals)) if vals else 0.0


def train(cfg: TrainConfig,
          complexes: Sequence[ComplexRecord],
          library: Sequence[LibraryMolecule],
          labels: Dict[Tuple[str, str], int],
          out_dir,
          hardnegs: Optional[Dict[Tuple[str, str], List[str]]] = None,
          quiet: bool = True) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl"
    ckpt_path = out / "checkpoint.bin"

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, rng)
    pocket_params, ligand_params, denoiser_params = split_params(params)
    enc_cfg = encoder_config(cfg)
    den_cfg = denoiser_config(cfg)
    use_diffusion = cfg.lambda_diffusion > 0
    use_hard = cfg.k_hard > 0
    schedule = build_schedule(cfg.diffusion_T, cfg.schedule_kind) if use_diffusion else None
    weights = LossWeights(lambda_diffusion=cfg.lambda_diffusion,
                          lambda_anchor=cfg.lambda_anchor,
                          lambda_type=cfg.lambda_type, margin=cfg.margin)

    trainable = {k: v for k, v in params.items()
                 if not (cfg.film_identity and ".film." in k)}
    # the fresh denoiser's gradient norm dwarfs the encoders'; one shared
    # clip budget would freeze encoder learning, so each group clips alone
    groups = [
        {k: v for k, v in trainable.items() if not k.startswith("denoiser.")},
        {k: v for k, v in trainable.items() if k.startswith("denoiser.")},
    ]
    groups = [g for g in groups if g]
    opt_states = [AdamState.for_params(g) for g in groups]

    # data wiring
    lib_by_id = {m.id: m for m in library}
    lib_clouds = {m.id: m.cloud() for m in library}
    pocket_clouds = {c.id: c.pocket_cloud() for c in complexes}
    ligand_clouds = {c.id: c.ligand_cloud(bound=False) for c in complexes}
    if use_hard:
        if hardnegs is None:
            raise ValueError("k_hard > 0 requires a hard-negative set")
        for c in complexes:
            if (c.pocket_id, c.ligand_id) not in hardnegs:
                raise ValueError(
                    f"no hard negatives for pair ({c.pocket_id}, {c.ligand_id}); "
                    "mine them first or set k_hard=0")

    perm = rng.permutation(len(complexes))
    n_val = int(round(cfg.val_fraction * len(complexes)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train_set = [complexes[i] for i in train_idx]
    val_set = [complexes[i] for i in val_idx]
    if len(train_set) < cfg.batch_size:
        raise ValueError("training split smaller than one batch")

    n_batches = max(1, len(train_set) // cfg.batch_size)
    total_steps = cfg.epochs * ((n_batches + cfg.grad_accum - 1) // cfg.grad_accum)
    lib_ids = [m.id for m in library]
    lib_cloud_list = [lib_clouds[i] for i in lib_ids]
    val_pocket_clouds = [pocket_clouds[c.id] for c in val_set]
    val_pocket_ids = [c.pocket_id for c in val_set]

    best = (-1.0, -1)  # (val bedroc, epoch)
    step = 0
    micro = 0
    final_loss = float("nan")
    log_fh = open(log_path, "w")

    def save_best(epoch, score):
        meta = {
            "config": json.loads(cfg.to_json()),
            "epoch": epoch,
            "val_bedroc": score,
            "format_version": 1,
        }
        save_checkpoint(ckpt_path, params, meta=meta)

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_set))
        for b in range(n_batches):
            batch = [train_set[i] for i in order[b * cfg.batch_size : (b + 1) * cfg.batch_size]]
            if len(batch) < 2:
                continue
            tg.active_tape().clear()

            penc = encode_batch(pocket_params, [pocket_clouds[c.id] for c in batch], enc_cfg)
            lenc = encode_batch(ligand_params, [ligand_clouds[c.id] for c in batch], enc_cfg)

            z_hard = None
            hard_mask = None
            if use_hard:
                hn_ids: List[List[str]] = []
                for c in batch:
                    ids = hardnegs[(c.pocket_id, c.ligand_id)][: cfg.k_hard]
                    hn_ids.append(ids)
                flat_ids = [i for ids in hn_ids for i in ids]
                hard_mask = np.zeros((len(batch), cfg.k_hard), dtype=bool)
                if flat_ids:
                    henc = encode_batch(ligand_params, [lib_clouds[i] for i in flat_ids], enc_cfg)
                    # scatter into (B, k, d); masked slots point at a dummy row
                    dummy = Tensor(np.ones((1, cfg.embed_dim)))
                    z_ext = tg.concat([henc.z, dummy], axis=0)
                    gather = np.full((len(batch), cfg.k_hard), len(flat_ids), dtype=np.intp)
                    pos = 0
                    for i, ids in enumerate(hn_ids):
                        for j in range(len(ids)):
                            gather[i, j] = pos
                            hard_mask[i, j] = True
                            pos += 1
                    z_hard = tg.reshape(tg.take_rows(z_ext, gather.reshape(-1)),
                                        (len(batch), cfg.k_hard, cfg.embed_dim))

            cbatch = ContrastiveBatch(z_pockets=penc.z, z_ligands=lenc.z,
                                      z_hardnegs=z_hard, hard_mask=hard_mask, tau=cfg.tau)
            l_c = infonce_hardneg(cbatch) if use_hard else infonce_symmetric(cbatch)
            l_a = None
            if use_hard and cfg.lambda_anchor > 0 and hard_mask.any():
                l_a = anchoring_loss(cbatch, cfg.margin)

            l_d = None
            if use_diffusion:
                terms = []
                for i, c in enumerate(batch):
                    t = sample_timestep(rng, schedule, cfg.t_lo, cfg.t_hi)
                    ps = forward_sample(c.bound_pose, t, schedule, rng)
                    h_p = penc.H[i, : penc.n_atoms[i]]
                    h_m = lenc.H[i, : lenc.n_atoms[i]]
                    x_hat, v_logits = denoise(denoiser_params, ps.xt, pocket_clouds[c.id],
                                              t, h_p, h_m, den_cfg)
                    terms.append(diffusion_loss(c.bound_pose, x_hat,
                                                ligand_clouds[c.id].types, v_logits,
                                                cfg.lambda_type))
                l_d = tg.concat([tg.reshape(t_, (1,)) for t_ in terms], axis=0).mean()

            total = unified_loss(l_c, l_d, l_a, weights)
            tg.backward(total * (1.0 / cfg.grad_accum))
            micro += 1

            if micro % cfg.grad_accum == 0 or b == n_batches - 1:
                lr = poly_lr(min(step, total_steps), total_steps, cfg.base_lr, cfg.warmup_ratio)
                grad_norm = adam_step(trainable, opt_state, lr,
                                      beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
                                      eps=cfg.adam_eps, clip_norm=cfg.clip_norm)
                tg.zero_grads(trainable.values())
                step += 1
                final_loss = total.item()
                rec = {
                    "kind": "step",
                    "step": step,
                    "epoch": epoch,
                    "lr": lr,
                    "grad_norm": grad_norm,
                    "loss_total": final_loss,
                    "loss_contrastive": l_c.item(),
                    "loss_diffusion": l_d.item() if l_d is not None else 0.0,
                    "loss_anchor": l_a.item() if l_a is not None else 0.0,
                }
                log_fh.write(json.dumps(rec, sort_keys=True) + "\n")

        # validation + checkpoint selection by BEDROC
        if val_set:
            zp = embed_clouds(pocket_params, val_pocket_clouds, enc_cfg)
            zlib = embed_clouds(ligand_params, lib_cloud_list, enc_cfg)
            score = _mean_val_bedroc(zp, val_pocket_ids, zlib, lib_ids, labels)
        else:
            score = 0.0
        log_fh.write(json.dumps({"kind": "val", "epoch": epoch, "val_bedroc": score},
                                sort_keys=True) + "\n")
        if not quiet:
            print(f"epoch {epoch}: loss {final_loss:.4f} val_bedroc {score:.4f}")
        if score > best[0]:
            best = (score, epoch)
            save_best(epoch, score)

    if best[1] < 0:  # no validation split: save the final state
        save_best(cfg.epochs - 1, 0.0)
    log_fh.close()
    return TrainResult(checkpoint_path=str(ckpt_path), log_path=str(log_path),
                       best_val_bedroc=best[0], best_epoch=best[1],
                       final_loss=final_loss, steps=step)
