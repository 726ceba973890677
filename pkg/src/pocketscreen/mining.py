"""Hard-negative mining: embed a ligand library, retrieve nearest
neighbors per positive ligand, drop candidates the docking oracle rates
better than the positive, and keep the k nearest survivors.

The docking tool itself stays behind the DockOracle interface: scores
can come from a user-supplied TSV of real docking runs, or from the
built-in soft-sphere stand-in.  Scores are cached per (pocket, molecule,
oracle) in an append-only TSV; one writer at a time, readers are safe.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from . import tensorgrad as tg
from .encoder import AtomCloud, EncoderConfig, encode_batch
from .retrieval import LibraryIndex

__all__ = [
    "DockOracle",
    "TsvOracle",
    "StubDockOracle",
    "ConstantOracle",
    "OracleCache",
    "HardNegativeSet",
    "stub_dock_score",
    "build_library_index",
    "mine",
]


class DockOracle(Protocol):
    """Deterministic docking-score source; lower score = better binding."""

    oracle_id: str

    def score(self, pocket_id: str, molecule_id: str) -> float: ...


class TsvOracle:
    """Scores read from a TSV of (pocket_id, molecule_id, score) rows, so
    real docking output plugs in without the tool being a dependency."""

    def __init__(self, path, oracle_id: str = ""):
        self.oracle_id = oracle_id or f"tsv:{Path(path).name}"
        self._scores: Dict[Tuple[str, str], float] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                self._scores[(parts[0], parts[1])] = float(parts[2])

    def score(self, pocket_id: str, molecule_id: str) -> float:
        try:
            return self._scores[(pocket_id, molecule_id)]
        except KeyError:
            raise KeyError(f"no score for ({pocket_id}, {molecule_id}) in {self.oracle_id}") from None


class ConstantOracle:
    """Fixed score for every pair; +inf makes the docking filter inert."""

    def __init__(self, value: float = float("inf")):
        self.oracle_id = f"const:{value}"
        self.value = value

    def score(self, pocket_id: str, molecule_id: str) -> float:
        return self.value


def stub_dock_score(pocket_coords: np.ndarray, ligand_coords: np.ndarray,
                    sigma: float = 3.0, epsilon: float = 0.2, cap: float = 5.0) -> float:
    """Soft-sphere complementarity: summed clipped Lennard-Jones-like terms
    over all pocket-ligand atom pairs.  Lower = better; distant ligands
    score ~0, overlapping atoms score large positive."""
    p = np.asarray(pocket_coords, dtype=np.float64)
    l = np.asarray(ligand_coords, dtype=np.float64)
    if p.size == 0 or l.size == 0:
        raise ValueError("empty structure")
    d = np.linalg.norm(p[:, None, :] - l[None, :, :], axis=-1)
    d = np.maximum(d, 1e-6)
    sr6 = (sigma / d) ** 6
    e = 4.0 * epsilon * (sr6 * sr6 - sr6)
    return float(np.sum(np.minimum(e, cap)))


class StubDockOracle:
    """Vina stand-in: places each candidate conformer (centroid) at the
    pocket's anchor point, then scores soft-sphere complementarity."""

    def __init__(self, pockets: Dict[str, AtomCloud], conformers: Dict[str, np.ndarray],
                 anchors: Dict[str, np.ndarray]):
        self.oracle_id = "stub:v1"
        self.pockets = pockets
        self.conformers = conformers
        self.anchors = anchors

    def score(self, pocket_id: str, molecule_id: str) -> float:
        pocket = self.pockets[pocket_id]
        conf = np.asarray(self.conformers[molecule_id], dtype=np.float64)
        placed = conf - conf.mean(axis=0) + self.anchors[pocket_id]
        return stub_dock_score(pocket.coords, placed)


class OracleCache:
    """Append-only TSV cache keyed (pocket, molecule, oracle).  Safe for
    concurrent readers; writes must come from a single process."""

    def __init__(self, path, oracle: DockOracle):
        self.path = Path(path)
        self.oracle = oracle
        self.oracle_id = oracle.oracle_id
        self._mem: Dict[Tuple[str, str, str], float] = {}
        if self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    parts = line.rstrip("\n").split("\t")
                    if len(parts) == 4:
                        self._mem[(parts[0], parts[1], parts[2])] = float(parts[3])

    def score(self, pocket_id: str, molecule_id: str) -> float:
        key = (pocket_id, molecule_id, self.oracle_id)
        if key not in self._mem:
            value = self.oracle.score(pocket_id, molecule_id)
            self._mem[key] = value
            with open(self.path, "a") as fh:
                fh.write(f"{pocket_id}\t{molecule_id}\t{self.oracle_id}\t{value!r}\n")
        return self._mem[key]


@dataclass
class HardNegativeSet:
    """Mined negatives for one positive pair, nearest first."""

    pocket_id: str
    ligand_id: str
    negatives: List[Tuple[str, float, float]]  # (molecule_id, similarity, oracle score)
    flagged: bool = False  # fewer than k survivors; never padded silently

    def ids(self) -> List[str]:
        return [n[0] for n in self.negatives]

    def to_dict(self) -> dict:
        return {
            "pocket_id": self.pocket_id,
            "ligand_id": self.ligand_id,
            "negatives": [
                {"id": i, "similarity": s, "dock_score": d} for i, s, d in self.negatives
            ],
            "flagged": self.flagged,
        }


def build_library_index(params, clouds: Sequence[AtomCloud], ids: Sequence[str],
                        cfg: EncoderConfig | None = None, provenance: str = "",
                        batch_size: int = 64) -> LibraryIndex:
    """Batch-encode a molecule library with the ligand encoder and stack the
    normalized global embeddings.  Molecules that fail to encode are skipped
    with a warning and recorded on the returned index."""
    if len(clouds) != len(ids):
        raise ValueError("clouds and ids must align")
    rows: List[np.ndarray] = []
    kept: List[str] = []
    skipped: List[str] = []
    cfg = cfg or EncoderConfig()
    with tg.no_grad():
        for lo in range(0, len(clouds), batch_size):
            chunk = list(zip(ids[lo : lo + batch_size], clouds[lo : lo + batch_size]))
            try:
                enc = encode_batch(params, [c for _, c in chunk], cfg)
                rows.extend(enc.z.data)
                kept.extend(i for i, _ in chunk)
            except Exception:
                # fall back to per-molecule encoding to isolate the bad one
                for mol_id, cloud in chunk:
                    try:
                        enc = encode_batch(params, [cloud], cfg)
                        rows.append(enc.z.data[0])
                        kept.append(mol_id)
                    except Exception as e:
                        print(f"warning: skipping '{mol_id}': {e}", file=sys.stderr)
                        skipped.append(mol_id)
    if not rows:
        return LibraryIndex(matrix=np.zeros((0, cfg.d)), ids=[], provenance=provenance,
                            skipped=skipped)
    return LibraryIndex.from_embeddings(np.stack(rows), kept, provenance=provenance,
                                        skipped=skipped)


def mine(pocket_id: str, ligand_id: str, z_query: np.ndarray, index: LibraryIndex,
         oracle: DockOracle, k: int, pool_size: int = 100) -> HardNegativeSet:
    """Mine up to k hard negatives for one positive pair.

    Retrieves the pool_size nearest library neighbors of the positive
    ligand embedding, drops the positive itself, drops candidates whose
    docking score is strictly better (lower) than the positive's, and
    returns the k nearest survivors in descending similarity.  Short
    result sets are flagged, never padded.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if pool_size < k:
        raise ValueError("pool_size must be >= k")
    if len(index) == 0:
        raise ValueError("empty library index")
    q = np.asarray(z_query, dtype=np.float64).reshape(-1)
    q = q / np.linalg.norm(q)
    sims = index.matrix @ q
    order = sorted(range(len(index)), key=lambda i: (-sims[i], index.ids[i]))
    pool = [i for i in order if index.ids[i] != ligand_id][:pool_size]

    reference = oracle.score(pocket_id, ligand_id)
    survivors = []
    for i in pool:
        s = oracle.score(pocket_id, index.ids[i])
        if s < reference:  # strictly better binder: likely false negative
            continue
        survivors.append((index.ids[i], float(sims[i]), float(s)))
        if len(survivors) == k:
            break
    return HardNegativeSet(
        pocket_id=pocket_id,
        ligand_id=ligand_id,
        negatives=survivors,
        flagged=len(survivors) < k,
    )
