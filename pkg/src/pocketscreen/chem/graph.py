"""Molecular graph: atoms, bonds, implicit-hydrogen inference, valence
checks.  Aromatic bonds are kept symbolically (order sentinel 4, counted
as 1.5 toward valence); aromaticity flags are taken from the input
notation rather than re-perceived."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

__all__ = [
    "AROMATIC_ORDER",
    "Atom",
    "Bond",
    "MolecularGraph",
    "ChemError",
    "ValenceError",
    "UnsupportedElementError",
    "inferred_hcount",
]

AROMATIC_ORDER = 4  # sentinel; counts as 1.5 toward valence

# smallest-first candidate valences for implicit-H inference
DEFAULT_VALENCES: Dict[str, Tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "Se": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "H": (1,),
}

ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_ELEMENTS = {"B", "C", "N", "O", "P", "S", "Se"}
# two-valent aromatic heteroatoms donate a lone pair and never carry H
AROMATIC_NO_H = {"O", "S", "Se"}

KNOWN_ELEMENTS = set(DEFAULT_VALENCES) | {
    "Na", "Mg", "K", "Ca", "Zn", "Fe", "Mn", "Cu", "Co", "Ni", "Li", "Si", "As",
}


class ChemError(Exception):
    """Base class for molecule handling failures."""


class ValenceError(ChemError):
    pass


class UnsupportedElementError(ChemError):
    pass


@dataclass
class Atom:
    element: str
    charge: int = 0
    aromatic: bool = False
    hcount: Optional[int] = None  # None until inferred
    bracket: bool = False  # came from (or must be written with) [...]
    pos: int = -1  # source offset for error messages


@dataclass
class Bond:
    a: int
    b: int
    order: int  # 1, 2, 3, or AROMATIC_ORDER

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a

    @property
    def valence_weight(self) -> float:
        return 1.5 if self.order == AROMATIC_ORDER else float(self.order)


def _order_sum(bonds: List[Bond]) -> float:
    return sum(b.valence_weight for b in bonds)


def inferred_hcount(element: str, aromatic: bool, order_sum: float) -> int:
    """Implicit hydrogens a bare (organic-subset) atom would receive given
    its bond-order sum; the shared rule between parser and writer."""
    if aromatic and element in AROMATIC_NO_H:
        return 0
    valences = DEFAULT_VALENCES.get(element)
    if valences is None:
        return 0
    need = math.ceil(order_sum - 1e-9)
    for v in valences:
        if v >= need:
            return v - need
    return 0


@dataclass
class MolecularGraph:
    atoms: List[Atom] = field(default_factory=list)
    bonds: List[Bond] = field(default_factory=list)

    def __post_init__(self):
        self._adj: Dict[int, List[Bond]] = {i: [] for i in range(len(self.atoms))}
        for b in self.bonds:
            self._adj[b.a].append(b)
            self._adj[b.b].append(b)

    # --- construction -----------------------------------------------------
    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        idx = len(self.atoms) - 1
        self._adj[idx] = []
        return idx

    def add_bond(self, a: int, b: int, order: int) -> Bond:
        if a == b:
            raise ChemError(f"self-bond on atom {a}")
        if self.bond_between(a, b) is not None:
            raise ChemError(f"duplicate bond between atoms {a} and {b}")
        bond = Bond(a, b, order)
        self.bonds.append(bond)
        self._adj[a].append(bond)
        self._adj[b].append(bond)
        return bond

    # --- queries ------------------------------------------------------------
    def n_atoms(self) -> int:
        return len(self.atoms)

    def bonds_of(self, i: int) -> List[Bond]:
        return self._adj[i]

    def neighbors(self, i: int) -> List[int]:
        return [b.other(i) for b in self._adj[i]]

    def bond_between(self, a: int, b: int) -> Optional[Bond]:
        for bond in self._adj[a]:
            if bond.other(a) == b:
                return bond
        return None

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def order_sum(self, i: int) -> float:
        return _order_sum(self._adj[i])

    def total_hcount(self, i: int) -> int:
        h = self.atoms[i].hcount
        return 0 if h is None else h

    def copy(self) -> "MolecularGraph":
        return MolecularGraph(
            atoms=[replace(a) for a in self.atoms],
            bonds=[Bond(b.a, b.b, b.order) for b in self.bonds],
        )

    def connected_components(self) -> List[List[int]]:
        seen: set = set()
        comps = []
        for start in range(self.n_atoms()):
            if start in seen:
                continue
            comp = [start]
            seen.add(start)
            queue = [start]
            while queue:
                i = queue.pop()
                for j in self.neighbors(i):
                    if j not in seen:
                        seen.add(j)
                        comp.append(j)
                        queue.append(j)
            comps.append(sorted(comp))
        return comps

    # --- hydrogen inference and valence -------------------------------------
    def infer_hydrogens(self):
        """Fill hcount on atoms that still have None (bare organic-subset
        atoms); bracket atoms keep their explicit count (0 when absent)."""
        for i, atom in enumerate(self.atoms):
            if atom.hcount is None:
                atom.hcount = inferred_hcount(atom.element, atom.aromatic, self.order_sum(i))

    def validate_valence(self):
        """Raise ValenceError when a supported-element atom exceeds every
        allowed valence.  Charged and metal atoms are checked leniently."""
        for i, atom in enumerate(self.atoms):
            valences = DEFAULT_VALENCES.get(atom.element)
            if valences is None:
                continue  # metals and exotic elements: trust the input
            total = self.order_sum(i) + self.total_hcount(i)
            limit = max(valences) + abs(atom.charge)
            if atom.aromatic:
                limit += 0.5  # aromatic bookkeeping uses half orders
            if total > limit + 1e-9:
                where = f" (input offset {atom.pos})" if atom.pos >= 0 else ""
                raise ValenceError(
                    f"atom {i} ({atom.element}){where} has valence {total}, "
                    f"allowed at most {limit}")
