"""Interaction-disrupting molecular edits.

Four local operations, tried in fixed priority from stronger to milder
disruption: acid-to-amide, amine acetylation, amine methylation,
hydroxyl methylation.  Each edit targets a single site (lowest canonical
atom rank when several qualify); the first operation whose product passes
the physicochemical similarity filter wins, and at most one variant is
emitted per molecule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .graph import Atom, ChemError, MolecularGraph
from .parser import parse_smiles
from .properties import _has_carbonyl_neighbor, crippen_logp, ertl_tpsa, mol_weight
from .writer import canonical_ranks, write_smiles

__all__ = [
    "OPERATIONS",
    "PropertyThresholds",
    "PerturbResult",
    "filter_pair",
    "perturb",
]

OPERATIONS = (
    "acid_to_amide",
    "amine_acetylation",
    "amine_methylation",
    "hydroxyl_methylation",
)


@dataclass
class PropertyThresholds:
    """Strict upper bounds on property drift between original and variant."""

    tau_mw: float = 0.15  # relative molecular-weight change
    tau_logp: float = 1.5  # absolute logP change
    tau_tpsa: float = 25.0  # absolute tPSA change, square Angstrom

    def __post_init__(self):
        if min(self.tau_mw, self.tau_logp, self.tau_tpsa) <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class PerturbResult:
    original: str
    disrupted: str
    operation: str
    delta_mw: float
    delta_logp: float
    delta_tpsa: float

    def to_dict(self) -> dict:
        return {
            "original": self.original,
            "disrupted": self.disrupted,
            "operation": self.operation,
            "delta_mw": self.delta_mw,
            "delta_logp": self.delta_logp,
            "delta_tpsa": self.delta_tpsa,
        }


def filter_pair(g: MolecularGraph, g2: MolecularGraph,
                thresholds: PropertyThresholds | None = None) -> bool:
    """True iff the variant stays inside all three strict property bounds."""
    thr = thresholds or PropertyThresholds()
    mw = mol_weight(g)
    if abs(mol_weight(g2) - mw) / mw >= thr.tau_mw:
        return False
    if abs(crippen_logp(g2) - crippen_logp(g)) >= thr.tau_logp:
        return False
    if abs(ertl_tpsa(g2) - ertl_tpsa(g)) >= thr.tau_tpsa:
        return False
    return True


def _acid_sites(g: MolecularGraph) -> List[tuple]:
    """Carboxylic acids as (carbon, hydroxyl-O) pairs."""
    sites = []
    for i, a in enumerate(g.atoms):
        if a.element != "C" or a.aromatic:
            continue
        o_double = o_h = None
        for b in g.bonds_of(i):
            j = b.other(i)
            nb = g.atoms[j]
            if nb.element != "O" or nb.aromatic:
                continue
            if b.order == 2:
                o_double = j
            elif b.order == 1 and g.total_hcount(j) >= 1 and g.degree(j) == 1:
                o_h = j
        if o_double is not None and o_h is not None:
            sites.append((i, o_h))
    return sites


def _eligible_amines(g: MolecularGraph) -> List[int]:
    """Nitrogens that are non-aromatic, carry at least one H, are uncharged,
    and are not amide-like (bonded to a carbon double-bonded to O)."""
    return [
        i
        for i, a in enumerate(g.atoms)
        if a.element == "N"
        and not a.aromatic
        and a.charge == 0
        and g.total_hcount(i) >= 1
        and not _has_carbonyl_neighbor(g, i)
    ]


def _hydroxyl_sites(g: MolecularGraph) -> List[int]:
    """O-H oxygens excluding carboxylic acids (and bare water)."""
    sites = []
    for i, a in enumerate(g.atoms):
        if a.element != "O" or a.aromatic or a.charge != 0:
            continue
        if g.total_hcount(i) != 1 or g.degree(i) != 1:
            continue
        if _has_carbonyl_neighbor(g, i):
            continue  # carboxylic acid OH belongs to the acid operation
        sites.append(i)
    return sites


def _apply_acid_to_amide(g: MolecularGraph, site: tuple) -> MolecularGraph:
    g2 = g.copy()
    _, o_h = site
    atom = g2.atoms[o_h]
    atom.element = "N"
    atom.hcount = 2
    atom.aromatic = False
    atom.bracket = False
    return g2


def _graft_methyl(g2: MolecularGraph, i: int):
    c = g2.add_atom(Atom(element="C", hcount=3))
    g2.add_bond(i, c, 1)


def _apply_amine_acetylation(g: MolecularGraph, n_idx: int) -> MolecularGraph:
    g2 = g.copy()
    g2.atoms[n_idx].hcount -= 1
    c1 = g2.add_atom(Atom(element="C", hcount=0))
    o = g2.add_atom(Atom(element="O", hcount=0))
    g2.add_bond(n_idx, c1, 1)
    g2.add_bond(c1, o, 2)
    _graft_methyl(g2, c1)
    return g2


def _apply_amine_methylation(g: MolecularGraph, n_idx: int) -> MolecularGraph:
    g2 = g.copy()
    g2.atoms[n_idx].hcount -= 1
    _graft_methyl(g2, n_idx)
    return g2


def _apply_hydroxyl_methylation(g: MolecularGraph, o_idx: int) -> MolecularGraph:
    g2 = g.copy()
    g2.atoms[o_idx].hcount = 0
    _graft_methyl(g2, o_idx)
    return g2


def perturb(g: MolecularGraph,
            thresholds: PropertyThresholds | None = None) -> Optional[PerturbResult]:
    """Produce at most one disrupted variant of the molecule, or None when
    no operation applies within the property filter."""
    thr = thresholds or PropertyThresholds()
    original = write_smiles(g)
    ranks = canonical_ranks(g)

    candidates = (
        ("acid_to_amide", [(s, s[1]) for s in _acid_sites(g)], _apply_acid_to_amide),
        ("amine_acetylation", [(i, i) for i in _eligible_amines(g)], _apply_amine_acetylation),
        ("amine_methylation", [(i, i) for i in _eligible_amines(g)], _apply_amine_methylation),
        ("hydroxyl_methylation", [(i, i) for i in _hydroxyl_sites(g)], _apply_hydroxyl_methylation),
    )

    for op_name, sites, apply_fn in candidates:
        if not sites:
            continue
        # one site per operation: the lowest-canonical-rank edited atom
        site, _ = min(sites, key=lambda s: (ranks[s[1]], s[1]))
        g2 = apply_fn(g, site)
        try:
            g2.validate_valence()
            disrupted = write_smiles(g2)
            reparsed = parse_smiles(disrupted)
        except ChemError:
            continue
        if disrupted == original:
            continue
        if not filter_pair(g, reparsed, thr):
            continue
        return PerturbResult(
            original=original,
            disrupted=disrupted,
            operation=op_name,
            delta_mw=mol_weight(reparsed) - mol_weight(g),
            delta_logp=crippen_logp(reparsed) - crippen_logp(g),
            delta_tpsa=ertl_tpsa(reparsed) - ertl_tpsa(g),
        )
    return None
