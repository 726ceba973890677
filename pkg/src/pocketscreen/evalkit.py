"""Screening and ranking metrics plus the two linear probes.

Rankings are always materialized through the deterministic tie-break
rule (descending score, ascending id) before any counting, so every
metric depends on scores only through the induced order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

__all__ = [
    "LabeledRanking",
    "auroc",
    "bedroc",
    "enrichment_factor",
    "hits_at_k",
    "FEPEdgeSet",
    "fep_pairwise_accuracy",
    "fep_reference_strengths",
    "kendall_tau",
    "ProbeDataset",
    "ProbeResult",
    "fit_linear_probe",
    "run_probe",
    "build_distance_probe_set",
    "ComplexProbeInput",
]


@dataclass
class LabeledRanking:
    """Aligned prediction scores (higher = predicted more active) and
    binary activity labels; optional ids feed the tie-break rule."""

    scores: np.ndarray
    labels: np.ndarray
    ids: Optional[List[str]] = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.intp)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise ValueError("scores and labels must be aligned 1-D arrays")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be binary")
        if self.ids is not None and len(self.ids) != len(self.scores):
            raise ValueError("ids must align with scores")

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def n_actives(self) -> int:
        return int(self.labels.sum())

    def order(self) -> np.ndarray:
        """Positions sorted by descending score, ties by ascending id."""
        ids = self.ids if self.ids is not None else [f"{i:09d}" for i in range(self.n)]
        return np.array(sorted(range(self.n), key=lambda i: (-self.scores[i], ids[i])),
                        dtype=np.intp)

    def _require_both_classes(self, what: str):
        if self.n_actives == 0 or self.n_actives == self.n:
            raise ValueError(f"{what} needs at least one active and one inactive")


def auroc(r: LabeledRanking) -> float:
    """Rank-based (Mann-Whitney) AUROC; ties contribute 1/2."""
    r._require_both_classes("AUROC")
    ranks = stats.rankdata(r.scores)  # average ranks on ties
    n_act = r.n_actives
    n_inact = r.n - n_act
    u = ranks[r.labels == 1].sum() - n_act * (n_act + 1) / 2.0
    return float(u / (n_act * n_inact))


def bedroc(r: LabeledRanking, alpha: float = 85.0) -> float:
    """Truchon-Bayly BEDROC: min-max normalized exponentially weighted
    active ranks.  alpha=85 concentrates ~80% of the score in the top 2%."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    r._require_both_classes("BEDROC")
    n, n_act = r.n, r.n_actives
    order = r.order()
    active_ranks = np.flatnonzero(r.labels[order] == 1) + 1  # 1-based
    ra = n_act / n
    sum_exp = np.sum(np.exp(-alpha * active_ranks / n))
    random_sum = ra * (1.0 - math.exp(-alpha)) / (math.expm1(alpha / n))
    rie = sum_exp / random_sum
    factor = ra * math.sinh(alpha / 2.0) / (math.cosh(alpha / 2.0) - math.cosh(alpha / 2.0 - alpha * ra))
    constant = 1.0 / (1.0 - math.exp(alpha * (1.0 - ra)))
    return float(rie * factor + constant)


def enrichment_factor(r: LabeledRanking, x_percent: float) -> float:
    """Active fraction in the top ceil(x% N) over the library-wide fraction."""
    if not 0 < x_percent <= 100:
        raise ValueError("x_percent must be in (0, 100]")
    if r.n_actives == 0:
        raise ValueError("enrichment factor undefined with zero actives")
    n_top = math.ceil(x_percent / 100.0 * r.n)
    order = r.order()
    hits_top = int(r.labels[order[:n_top]].sum())
    return (hits_top / n_top) / (r.n_actives / r.n)


def hits_at_k(r: LabeledRanking, k: int) -> int:
    """Actives among the first K after tie-break (K past the end is fine)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    order = r.order()
    return int(r.labels[order[:k]].sum())


# ---------------------------------------------------------------------------
# congeneric-series ranking
# ---------------------------------------------------------------------------

@dataclass
class FEPEdgeSet:
    """Relative binding free-energy edges over a congeneric series.

    Edge (a, b, ddg) stores ddg = dG(a) - dG(b) in kcal/mol: negative ddg
    means a binds more tightly, so a well-ordered model scores a above b.
    """

    edges: List[Tuple[str, str, float]]
    scores: Dict[str, float]

    def __post_init__(self):
        if not self.edges:
            raise ValueError("empty edge set")
        for a, b, ddg in self.edges:
            if a not in self.scores or b not in self.scores:
                raise ValueError(f"edge ({a}, {b}) references a ligand without a score")
            if not np.isfinite(ddg):
                raise ValueError(f"non-finite ddG on edge ({a}, {b})")


def fep_pairwise_accuracy(e: FEPEdgeSet) -> float:
    """Fraction of edges whose score ordering matches the ddG-implied
    ordering; zero score difference (or zero ddG) credits 1/2."""
    credit = 0.0
    for a, b, ddg in e.edges:
        diff = e.scores[a] - e.scores[b]
        if diff == 0.0 or ddg == 0.0:
            credit += 0.5
        elif (diff > 0) == (ddg < 0):
            credit += 1.0
    return credit / len(e.edges)


def fep_reference_strengths(edges: Sequence[Tuple[str, str, float]]) -> Dict[str, float]:
    """Per-ligand binding strengths (-dG up to a constant) from ddG edges,
    solved by least squares per connected component."""
    ligands = sorted({x for a, b, _ in edges for x in (a, b)})
    idx = {l: i for i, l in enumerate(ligands)}
    n = len(ligands)
    rows = []
    rhs = []
    for a, b, ddg in edges:
        row = np.zeros(n)
        row[idx[a]], row[idx[b]] = 1.0, -1.0
        rows.append(row)
        rhs.append(ddg)
    # anchor the gauge freedom (one free constant per component)
    comps = _components(ligands, edges)
    for comp in comps:
        row = np.zeros(n)
        row[idx[comp[0]]] = 1.0
        rows.append(row)
        rhs.append(0.0)
    dg, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return {l: float(-dg[idx[l]]) for l in ligands}  # strength = -dG


def _components(ligands, edges):
    adj = {l: set() for l in ligands}
    for a, b, _ in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, comps = set(), []
    for l in ligands:
        if l in seen:
            continue
        comp, stack = [], [l]
        seen.add(l)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def kendall_tau(scores: Sequence[float], reference: Sequence[float]) -> float:
    """Tie-corrected (tau-b) rank correlation between two score vectors."""
    if len(scores) != len(reference) or len(scores) < 2:
        raise ValueError("need two aligned sequences of length >= 2")
    tau, _ = stats.kendalltau(scores, reference)
    return float(tau)


# ---------------------------------------------------------------------------
# linear probes
# ---------------------------------------------------------------------------

@dataclass
class ProbeDataset:
    """Frozen-embedding features, scalar regression targets, and disjoint
    8/1/1 split indices."""

    features: np.ndarray
    targets: np.ndarray
    splits: Dict[str, np.ndarray]

    @classmethod
    def build(cls, features: np.ndarray, targets: np.ndarray, seed: int) -> "ProbeDataset":
        features = np.asarray(features, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        n = len(targets)
        if features.shape[0] != n or n < 3:
            raise ValueError("need >= 3 aligned samples")
        perm = np.random.default_rng(seed).permutation(n)
        n_train = max(1, int(round(0.8 * n)))
        n_val = max(1, int(round(0.1 * n)))
        n_train = min(n_train, n - n_val - 1)
        splits = {
            "train": np.sort(perm[:n_train]),
            "val": np.sort(perm[n_train : n_train + n_val]),
            "test": np.sort(perm[n_train + n_val :]),
        }
        return cls(features=features, targets=targets, splits=splits)


@dataclass
class ProbeResult:
    weights: np.ndarray
    bias: float
    ridge_lambda: float
    val_rmse: float
    test_rmse: float
    test_mae: float


def _ridge_fit(x: np.ndarray, y: np.ndarray, lam: float):
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    yc = y - y_mean
    gram = xc.T @ xc + lam * np.eye(x.shape[1])
    try:
        w = np.linalg.solve(gram, xc.T @ yc)
    except np.linalg.LinAlgError:
        raise ValueError("singular normal equations; use a positive ridge penalty") from None
    bias = y_mean - x_mean @ w
    return w, float(bias)


def _rmse(pred, y):
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def fit_linear_probe(ds: ProbeDataset, ridge_lambda: Optional[float] = None,
                     lambda_grid: Sequence[float] = (0.0, 1e-4, 1e-2, 1.0, 10.0)) -> ProbeResult:
    """Closed-form ridge regression on the train split; the penalty is
    selected by validation RMSE (or pinned when ridge_lambda is given)."""
    grid = [ridge_lambda] if ridge_lambda is not None else list(lambda_grid)
    xt, yt = ds.features[ds.splits["train"]], ds.targets[ds.splits["train"]]
    xv, yv = ds.features[ds.splits["val"]], ds.targets[ds.splits["val"]]
    if xt.shape[0] < xt.shape[1] and all(l == 0.0 for l in grid):
        raise ValueError("underdetermined system: need ridge penalty or more samples")
    best = None
    for lam in grid:
        try:
            w, b = _ridge_fit(xt, yt, lam)
        except ValueError:
            if len(grid) == 1:
                raise
            continue
        val_rmse = _rmse(xv @ w + b, yv)
        if best is None or val_rmse < best[0]:
            best = (val_rmse, lam, w, b)
    if best is None:
        raise ValueError("no ridge penalty in the grid produced a solvable system")
    val_rmse, lam, w, b = best
    xte, yte = ds.features[ds.splits["test"]], ds.targets[ds.splits["test"]]
    pred = xte @ w + b
    return ProbeResult(weights=w, bias=b, ridge_lambda=lam, val_rmse=val_rmse,
                       test_rmse=_rmse(pred, yte), test_mae=float(np.mean(np.abs(pred - yte))))


def run_probe(features: np.ndarray, targets: np.ndarray, seeds: Sequence[int] = range(5),
              ridge_lambda: Optional[float] = None) -> Dict[str, float]:
    """Average probe test metrics over several random splits."""
    rmses, maes = [], []
    for seed in seeds:
        res = fit_linear_probe(ProbeDataset.build(features, targets, seed), ridge_lambda)
        rmses.append(res.test_rmse)
        maes.append(res.test_mae)
    return {
        "rmse_mean": float(np.mean(rmses)),
        "rmse_std": float(np.std(rmses)),
        "mae_mean": float(np.mean(maes)),
        "mae_std": float(np.std(maes)),
        "n_seeds": len(rmses),
    }


# ---------------------------------------------------------------------------
# probe-set construction
# ---------------------------------------------------------------------------

@dataclass
class ComplexProbeInput:
    """Per-complex arrays needed to build the atom-pair distance probe."""

    h_ligand: np.ndarray  # (N_m, d) atom embeddings
    h_pocket: np.ndarray  # (N_p, d)
    ligand_coords: np.ndarray  # (N_m, 3) bound pose
    pocket_coords: np.ndarray  # (N_p, 3)
    ligand_is_h: np.ndarray = field(default=None)
    pocket_is_h: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ligand_is_h is None:
            self.ligand_is_h = np.zeros(len(self.ligand_coords), dtype=bool)
        if self.pocket_is_h is None:
            self.pocket_is_h = np.zeros(len(self.pocket_coords), dtype=bool)


def build_distance_probe_set(complexes: Sequence[ComplexProbeInput], cutoff: float = 6.0,
                             pairs_per_complex: int = 10,
                             rng: np.random.Generator | None = None):
    """Sample ligand-pocket atom pairs within the cutoff; features are the
    concatenated atom embeddings, targets the Euclidean distances.

    Hydrogens are removed from both sides first.  Returns (features,
    targets, n_skipped) where n_skipped counts complexes with no pair
    under the cutoff.
    """
    rng = rng or np.random.default_rng(0)
    feats, targs = [], []
    n_skipped = 0
    for c in complexes:
        lig_keep = ~np.asarray(c.ligand_is_h, dtype=bool)
        poc_keep = ~np.asarray(c.pocket_is_h, dtype=bool)
        lc, pc = c.ligand_coords[lig_keep], c.pocket_coords[poc_keep]
        hl, hp = c.h_ligand[lig_keep], c.h_pocket[poc_keep]
        dist = np.linalg.norm(lc[:, None, :] - pc[None, :, :], axis=-1)
        cand = np.argwhere((dist > 0.0) & (dist <= cutoff))
        if len(cand) == 0:
            n_skipped += 1
            continue
        take = min(pairs_per_complex, len(cand))
        chosen = cand[rng.choice(len(cand), size=take, replace=False)]
        for i, j in chosen:
            feats.append(np.concatenate([hl[i], hp[j]]))
            targs.append(dist[i, j])
    if not feats:
        raise ValueError("no eligible atom pairs under the cutoff")
    return np.stack(feats), np.array(targs), n_skipped
