"""Synthetic desk-scale screening corpus.

Each pocket is a random atom shell with a planted "key": a two-atom
polar motif at the pocket mouth whose atom types encode one of three
pharmacophore classes (acid / amine / alcohol binders).  Actives are
generated molecules carrying the complementary functional group; their
bound pose places the group opposite the key atoms.  Decoys are the
same scaffolds with the wrong group, a masked group (amide, methyl
ether), or no group at all, so coarse composition alone cannot separate
actives from decoys, while the functional group and its geometry can.

A planted affinity (pK-like scalar) grows with geometric fit and exact
group match; FEP-style edges connect analogue series that differ by one
perturbable group.  Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .chem import MolecularGraph, canonical, parse_smiles
from .chem.perturb import _acid_sites, _eligible_amines, _hydroxyl_sites
from .dataio import ComplexRecord, LibraryMolecule, write_jsonl
from .encoder import atom_type_id

__all__ = [
    "CLASSES",
    "CorpusParams",
    "gen_synthetic_corpus",
    "ligand_class",
    "layout_coords",
]

CLASSES = ("acid", "amine", "alcohol")
GROUP_SMILES = {"acid": "C(=O)O", "amine": "N", "alcohol": "O"}
MASKED_GROUP_SMILES = {"acid": "C(N)=O", "amine": "NC(C)=O", "alcohol": "OC"}
KEY_TYPES = {"acid": ("N", "N"), "amine": ("O", "O"), "alcohol": ("N", "O")}

PK_PER_KCAL = 1.364  # RT ln 10 at 298 K, kcal/mol per log unit


@dataclass
class CorpusParams:
    n_complexes: int = 120
    n_plain_decoys: int = 50
    n_masked_decoys: int = 50
    n_fep_series: int = 6
    fep_series_len: int = 4
    fit_lo: float = 0.55
    fit_hi: float = 1.0
    active_fraction_note: str = "actives per target = ligands of the matching class"


def ligand_class(g: MolecularGraph) -> Optional[str]:
    """Functional class of a molecule by its single planted group."""
    if _acid_sites(g):
        return "acid"
    if _eligible_amines(g):
        return "amine"
    if _hydroxyl_sites(g):
        return "alcohol"
    return None


def _gen_scaffold(rng: np.random.Generator) -> str:
    """Hydrocarbon scaffold with >= 7 heavy atoms, attachment at the end."""
    n_chain = int(rng.integers(3, 9))
    tokens = ["C"] * n_chain
    for _ in range(int(rng.integers(0, 3))):
        if n_chain >= 3:
            p = int(rng.integers(1, n_chain - 1))
            tokens[p] = "C(" + "C" * int(rng.integers(1, 3)) + ")"
    s = "".join(tokens)
    ring_roll = rng.random()
    ring = "c1ccccc1" if rng.random() < 0.6 else "C1CCCCC1"
    if ring_roll < 0.35:
        s = s + ring  # group will attach to the ring
    elif ring_roll < 0.6:
        s = ring + s
    n_heavy = sum(1 for ch in s if ch in "Cc")
    if n_heavy < 7:
        s = "C" * (7 - n_heavy) + s
    return s


def _graph_positions(smiles: str) -> MolecularGraph:
    return parse_smiles(smiles)


def layout_coords(g: MolecularGraph, rng: np.random.Generator) -> np.ndarray:
    """Deterministic pseudo-3D embedding: BFS placement at bond length
    1.5 A followed by spring/repulsion relaxation.  Not real chemistry,
    but consistent, collision-free geometry for the toy task."""
    n = g.n_atoms()
    coords = np.zeros((n, 3))
    placed = np.zeros(n, dtype=bool)
    order: List[int] = []
    seen = {0}
    queue = [0]
    while queue:
        i = queue.pop(0)
        order.append(i)
        for j in sorted(g.neighbors(i)):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    placed[order[0]] = True
    for i in order[1:]:
        parents = [j for j in g.neighbors(i) if placed[j]]
        base = coords[parents[0]]
        pos = base
        for _ in range(24):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            pos = base + 1.5 * d
            dists = np.linalg.norm(coords[placed] - pos, axis=1)
            if dists.min() >= 1.1:
                break
        coords[i] = pos
        placed[i] = True

    bond_pairs = np.array([(b.a, b.b) for b in g.bonds]) if g.bonds else np.zeros((0, 2), int)
    for _ in range(40):
        force = np.zeros_like(coords)
        if len(bond_pairs):
            d = coords[bond_pairs[:, 0]] - coords[bond_pairs[:, 1]]
            dist = np.linalg.norm(d, axis=1, keepdims=True)
            pull = 0.3 * (dist - 1.5) * d / np.maximum(dist, 1e-9)
            np.add.at(force, bond_pairs[:, 0], -pull)
            np.add.at(force, bond_pairs[:, 1], pull)
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        close = dist < 1.3
        if close.any():
            push = np.where(close[..., None], 0.15 * diff / np.maximum(dist[..., None], 1e-9), 0.0)
            force += push.sum(axis=1)
        coords += force
    return coords - coords.mean(axis=0)


def _group_atoms(g: MolecularGraph, cls: str) -> List[int]:
    if cls == "acid":
        c, o_h = _acid_sites(g)[0]
        o_double = next(b.other(c) for b in g.bonds_of(c)
                        if b.order == 2 and g.atoms[b.other(c)].element == "O")
        return [c, o_h, o_double]
    if cls == "amine":
        return [_eligible_amines(g)[0]]
    return [_hydroxyl_sites(g)[0]]


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation matrix taking unit vector a to unit vector b."""
    v = np.cross(a, b)
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        axis = np.eye(3)[np.argmin(np.abs(a))]
        axis = axis - (axis @ a) * a
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + k + k @ k / (1.0 + c)


def _unit(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-6:
            return v / n


def _gen_pocket(rng: np.random.Generator, cls: str, fit: float):
    """Pocket shell plus class key at the mouth; returns (types, coords,
    mouth direction, anchor point for the ligand group)."""
    u = _unit(rng)
    v = _unit(rng)
    v = v - (v @ u) * u
    v /= np.linalg.norm(v)
    noise = (1.0 - fit) * 1.2
    key_coords = [
        4.0 * u + 1.1 * v + noise * rng.normal(size=3) * 0.5,
        4.0 * u - 1.1 * v + noise * rng.normal(size=3) * 0.5,
    ]
    types = list(KEY_TYPES[cls])
    coords = key_coords
    n_shell = int(rng.integers(16, 23))
    while len(coords) < n_shell + 2:
        d = _unit(rng)
        if d @ u > 0.55:
            continue  # keep the mouth open
        r = rng.uniform(5.5, 7.5)
        coords.append(r * d)
        types.append(rng.choice(["C", "C", "C", "C", "C", "C", "C", "N", "O", "S"]))
    anchor = 6.2 * u + noise * rng.normal(size=3) * 0.4
    return types, np.array(coords), u, anchor


def _pose_ligand(conf: np.ndarray, group: List[int], anchor: np.ndarray,
                 u: np.ndarray) -> np.ndarray:
    """Rigidly place the conformer: group centroid on the anchor, scaffold
    body pointing outward along the mouth direction."""
    gc = conf[group].mean(axis=0)
    body = conf.mean(axis=0) - gc
    nb = np.linalg.norm(body)
    direction = body / nb if nb > 1e-6 else np.array([1.0, 0.0, 0.0])
    rot = _rotation_between(direction, u)
    return (conf - gc) @ rot.T + anchor


class _MolRegistry:
    """Dedupe molecules on canonical SMILES, assigning stable ids."""

    def __init__(self):
        self.by_smiles: Dict[str, str] = {}
        self.molecules: List[LibraryMolecule] = []
        self.classes: Dict[str, Optional[str]] = {}

    def add(self, smiles: str, rng: np.random.Generator) -> str:
        smiles = canonical(smiles)
        if smiles in self.by_smiles:
            return self.by_smiles[smiles]
        mol_id = f"mol{len(self.molecules):05d}"
        g = parse_smiles(smiles)
        conf = layout_coords(g, rng)
        self.by_smiles[smiles] = mol_id
        self.molecules.append(LibraryMolecule(id=mol_id, smiles=smiles, conformer=conf))
        self.classes[mol_id] = ligand_class(g)
        return mol_id


def gen_synthetic_corpus(seed: int, out_dir, params: CorpusParams | None = None) -> dict:
    """Generate complexes.jsonl, library.jsonl, labels.tsv, edges.tsv and
    corpus_meta.json under out_dir; returns the summary dict."""
    p = params or CorpusParams()
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    registry = _MolRegistry()
    complexes: List[ComplexRecord] = []
    affinities: Dict[Tuple[str, str], float] = {}

    for i in range(p.n_complexes):
        cls = CLASSES[i % len(CLASSES)]
        fit = float(rng.uniform(p.fit_lo, p.fit_hi))
        smiles = _gen_scaffold(rng) + GROUP_SMILES[cls]
        mol_id = registry.add(smiles, rng)
        mol = registry.molecules[int(mol_id[3:])]
        g = parse_smiles(mol.smiles)
        group = _group_atoms(g, cls)

        types, pocket_coords, u, anchor = _gen_pocket(rng, cls, fit)
        bound = _pose_ligand(mol.conformer, group, anchor, u)
        pk = 3.0 + 5.0 * fit + float(rng.normal(0.0, 0.1))
        cpx_id = f"cpx{i:05d}"
        pocket_id = f"pkt{i:05d}"
        complexes.append(ComplexRecord(
            id=cpx_id, pocket_id=pocket_id,
            pocket_types=[str(t) for t in types], pocket_coords=pocket_coords,
            ligand_id=mol_id, ligand_smiles=mol.smiles,
            bound_pose=bound, unbound_conformer=mol.conformer,
            affinity=pk, tag=cls,
        ))
        affinities[(pocket_id, mol_id)] = pk

    # masked-group decoys: actives with their group neutralized
    for _ in range(p.n_masked_decoys):
        cls = CLASSES[int(rng.integers(len(CLASSES)))]
        registry.add(_gen_scaffold(rng) + MASKED_GROUP_SMILES[cls], rng)
    # plain scaffold decoys
    for _ in range(p.n_plain_decoys):
        registry.add(_gen_scaffold(rng) + "C", rng)

    # analogue series with ddG edges, attached to existing targets
    edges: List[Tuple[str, str, str, float]] = []
    series_pockets = [complexes[j] for j in
                      np.linspace(0, len(complexes) - 1, p.n_fep_series).astype(int)]
    for cpx in series_pockets:
        cls = cpx.tag
        scaffold = _gen_scaffold(rng)
        variants = [GROUP_SMILES[cls], MASKED_GROUP_SMILES[cls], "C",
                    GROUP_SMILES[CLASSES[(CLASSES.index(cls) + 1) % 3]]]
        match = [1.0, 0.35, 0.1, 0.15]
        members: List[Tuple[str, float]] = []
        for var, m in zip(variants[: p.fep_series_len], match[: p.fep_series_len]):
            mol_id = registry.add(scaffold + var, rng)
            pk = 3.0 + 5.0 * m * float(rng.uniform(0.8, 1.0))
            members.append((mol_id, pk))
            affinities[(cpx.pocket_id, mol_id)] = pk
        for (a, pk_a), (b, pk_b) in zip(members, members[1:]):
            edges.append((cpx.pocket_id, a, b, PK_PER_KCAL * (pk_b - pk_a)))
        if len(members) > 2:
            a, pk_a = members[0]
            b, pk_b = members[2]
            edges.append((cpx.pocket_id, a, b, PK_PER_KCAL * (pk_b - pk_a)))

    # labels: a molecule is active for a target iff its class matches
    label_lines = []
    for cpx in complexes:
        for mol in registry.molecules:
            label = int(registry.classes[mol.id] == cpx.tag)
            label_lines.append(f"{cpx.pocket_id}\t{mol.id}\t{label}")

    write_jsonl(out / "complexes.jsonl", (c.to_dict() for c in complexes))
    write_jsonl(out / "library.jsonl", (m.to_dict() for m in registry.molecules))
    (out / "labels.tsv").write_text("\n".join(label_lines) + "\n")
    (out / "edges.tsv").write_text(
        "\n".join(f"{p_}\t{a}\t{b}\t{d!r}" for p_, a, b, d in edges) + "\n")

    summary = {
        "seed": seed,
        "n_complexes": len(complexes),
        "n_molecules": len(registry.molecules),
        "n_edges": len(edges),
        "classes": {c: sum(1 for m in registry.molecules if registry.classes[m.id] == c)
                    for c in CLASSES},
        "n_unclassified": sum(1 for m in registry.molecules if registry.classes[m.id] is None),
        "affinity_pairs": len(affinities),
    }
    (out / "corpus_meta.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary
