"""On-disk formats: JSON-lines records (complexes, libraries, hard
negatives, rankings, logs) and TSV tables (labels, oracle scores, FEP
edges).  Every JSON-lines record carries format_version."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .chem import parse_smiles
from .encoder import AtomCloud, atom_type_id

FORMAT_VERSION = 1

__all__ = [
    "FORMAT_VERSION",
    "DataError",
    "ComplexRecord",
    "LibraryMolecule",
    "read_jsonl",
    "write_jsonl",
    "load_complexes",
    "load_library",
    "load_labels",
    "load_edges",
    "load_hardnegs",
    "save_hardnegs",
    "cloud_from_lists",
]


class DataError(Exception):
    """Malformed or inconsistent input data."""


def write_jsonl(path, records: Iterable[dict]):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> List[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: bad JSON: {e}") from None
    return out


def cloud_from_lists(types: List[str], coords: List[List[float]]) -> AtomCloud:
    return AtomCloud(
        types=np.array([atom_type_id(t) for t in types], dtype=np.intp),
        coords=np.array(coords, dtype=np.float64),
    )


@dataclass
class ComplexRecord:
    """One resolved pocket-ligand complex plus the ligand's unbound
    conformer; coordinate rows align with the parsed heavy-atom order of
    the stored SMILES."""

    id: str
    pocket_id: str
    pocket_types: List[str]
    pocket_coords: np.ndarray
    ligand_id: str
    ligand_smiles: str
    bound_pose: np.ndarray
    unbound_conformer: np.ndarray
    affinity: Optional[float] = None
    tag: str = ""

    def pocket_cloud(self) -> AtomCloud:
        return cloud_from_lists(self.pocket_types, self.pocket_coords)

    def ligand_cloud(self, bound: bool = False) -> AtomCloud:
        g = parse_smiles(self.ligand_smiles)
        types = np.array([atom_type_id(a.element) for a in g.atoms], dtype=np.intp)
        coords = self.bound_pose if bound else self.unbound_conformer
        return AtomCloud(types=types, coords=coords)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "id": self.id,
            "pocket_id": self.pocket_id,
            "pocket": {"types": self.pocket_types,
                       "coords": np.asarray(self.pocket_coords).tolist()},
            "ligand_id": self.ligand_id,
            "ligand_smiles": self.ligand_smiles,
            "bound_pose": np.asarray(self.bound_pose).tolist(),
            "unbound_conformer": np.asarray(self.unbound_conformer).tolist(),
            "affinity": self.affinity,
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, d: dict, source: str = "") -> "ComplexRecord":
        try:
            rec = cls(
                id=d["id"],
                pocket_id=d.get("pocket_id", d["id"]),
                pocket_types=d["pocket"]["types"],
                pocket_coords=np.array(d["pocket"]["coords"], dtype=np.float64),
                ligand_id=d["ligand_id"],
                ligand_smiles=d["ligand_smiles"],
                bound_pose=np.array(d["bound_pose"], dtype=np.float64),
                unbound_conformer=np.array(d["unbound_conformer"], dtype=np.float64),
                affinity=d.get("affinity"),
                tag=d.get("tag", ""),
            )
        except KeyError as e:
            raise DataError(f"{source}: complex record missing field {e}") from None
        n_heavy = len(parse_smiles(rec.ligand_smiles).atoms)
        for name, arr in (("bound_pose", rec.bound_pose),
                          ("unbound_conformer", rec.unbound_conformer)):
            if arr.shape != (n_heavy, 3):
                raise DataError(
                    f"{source}: record '{rec.id}': {name} has shape {arr.shape}, "
                    f"expected ({n_heavy}, 3) from the parsed SMILES")
        if len(rec.pocket_types) != len(rec.pocket_coords):
            raise DataError(f"{source}: record '{rec.id}': pocket types/coords misaligned")
        return rec


@dataclass
class LibraryMolecule:
    id: str
    smiles: str
    conformer: np.ndarray

    def cloud(self) -> AtomCloud:
        g = parse_smiles(self.smiles)
        types = np.array([atom_type_id(a.element) for a in g.atoms], dtype=np.intp)
        return AtomCloud(types=types, coords=self.conformer)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "id": self.id,
            "smiles": self.smiles,
            "conformer": np.asarray(self.conformer).tolist(),
        }


def load_complexes(path) -> List[ComplexRecord]:
    records = [ComplexRecord.from_dict(d, source=str(path)) for d in read_jsonl(path)]
    seen = set()
    for r in records:
        if r.id in seen:
            raise DataError(f"{path}: duplicate complex id '{r.id}'")
        seen.add(r.id)
    return records


def load_library(path) -> List[LibraryMolecule]:
    out = []
    seen = set()
    for d in read_jsonl(path):
        try:
            mol = LibraryMolecule(id=d["id"], smiles=d["smiles"],
                                  conformer=np.array(d["conformer"], dtype=np.float64))
        except KeyError as e:
            raise DataError(f"{path}: library record missing field {e}") from None
        if mol.id in seen:
            raise DataError(f"{path}: duplicate molecule id '{mol.id}'")
        seen.add(mol.id)
        n_heavy = len(parse_smiles(mol.smiles).atoms)
        if mol.conformer.shape != (n_heavy, 3):
            raise DataError(f"{path}: molecule '{mol.id}': conformer shape mismatch")
        out.append(mol)
    return out


def load_labels(path) -> Dict[Tuple[str, str], int]:
    """TSV of (pocket_id, molecule_id, 0/1)."""
    labels: Dict[Tuple[str, str], int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: expected 'pocket\\tmolecule\\t0|1'")
            labels[(parts[0], parts[1])] = int(parts[2])
    return labels


def load_edges(path) -> List[Tuple[str, str, str, float]]:
    """TSV of (pocket_id, ligand_a, ligand_b, ddG)."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields")
            out.append((parts[0], parts[1], parts[2], float(parts[3])))
    return out


def save_hardnegs(path, sets: Iterable) -> None:
    write_jsonl(path, ({**hn.to_dict(), "format_version": FORMAT_VERSION} for hn in sets))


def load_hardnegs(path) -> Dict[Tuple[str, str], List[str]]:
    """Map (pocket_id, ligand_id) -> ordered hard-negative molecule ids."""
    out: Dict[Tuple[str, str], List[str]] = {}
    for d in read_jsonl(path):
        key = (d["pocket_id"], d["ligand_id"])
        out[key] = [n["id"] for n in d["negatives"]]
    return out
