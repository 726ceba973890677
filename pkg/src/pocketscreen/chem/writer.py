"""Canonical SMILES output.

Atoms are ranked by iterative neighborhood refinement seeded with
(element, charge, aromatic, hcount, degree, bond-order sum).  Remaining
ties are resolved by branching on the tied class and keeping the
lexicographically smallest emitted string, under a branch budget that
comfortably covers desk-scale molecules.  The writer and parser share
the implicit-hydrogen rule, so round trips preserve hydrogen counts.
"""

from __future__ import annotations

from collections import Counter
from typing import Dict, List, Set

from .graph import (
    AROMATIC_ORDER,
    MolecularGraph,
    ORGANIC_SUBSET,
    inferred_hcount,
)

__all__ = ["canonical_ranks", "write_smiles"]


def _dense_ranks(keys: list) -> List[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _initial_ranks(g: MolecularGraph) -> List[int]:
    keys = []
    for i, a in enumerate(g.atoms):
        keys.append((a.element, a.charge, a.aromatic, g.total_hcount(i),
                     g.degree(i), g.order_sum(i)))
    return _dense_ranks(keys)


def _refine(g: MolecularGraph, ranks: List[int]) -> List[int]:
    while True:
        keys = []
        for i in range(g.n_atoms()):
            nb = tuple(sorted((b.order, ranks[b.other(i)]) for b in g.bonds_of(i)))
            keys.append((ranks[i], nb))
        new = _dense_ranks(keys)
        if new == ranks:
            return ranks
        ranks = new


def canonical_ranks(g: MolecularGraph) -> List[int]:
    """Order-independent atom ranks; tied ranks mean the refinement could
    not distinguish the atoms (usually true symmetry)."""
    return _refine(g, _initial_ranks(g))


def _atom_str(g: MolecularGraph, i: int) -> str:
    a = g.atoms[i]
    sym = a.element.lower() if a.aromatic else a.element
    h = g.total_hcount(i)
    default_h = inferred_hcount(a.element, a.aromatic, g.order_sum(i))
    plain_ok = (a.charge == 0 and a.element in ORGANIC_SUBSET and h == default_h)
    if plain_ok:
        return sym
    hs = "" if h == 0 else ("H" if h == 1 else f"H{h}")
    if a.charge == 0:
        cs = ""
    elif a.charge in (1, -1):
        cs = "+" if a.charge == 1 else "-"
    else:
        cs = f"{a.charge:+d}"
    return f"[{sym}{hs}{cs}]"


def _bond_str(g: MolecularGraph, i: int, j: int, order: int) -> str:
    if order == AROMATIC_ORDER:
        return ""  # implicit between aromatic atoms
    if order == 1:
        # explicit single between two aromatic atoms, else it reads aromatic
        if g.atoms[i].aromatic and g.atoms[j].aromatic:
            return "-"
        return ""
    return {2: "=", 3: "#"}[order]


def _write_component(g: MolecularGraph, ranks: List[int], root: int) -> str:
    key = lambda i: (ranks[i], i)
    visited: Set[int] = set()
    ring_digit: Dict[frozenset, int] = {}
    open_digits: Set[int] = set()

    # first pass: find tree edges via DFS in rank order, the rest close rings
    tree: Dict[int, List[int]] = {}
    ring_partners: Dict[int, List[int]] = {}

    def explore(i: int):
        visited.add(i)
        tree[i] = []
        for j in sorted(g.neighbors(i), key=key):
            if j not in visited:
                tree[i].append(j)
                explore(j)
            elif j not in tree or i not in tree[j]:
                pair = frozenset((i, j))
                if pair not in ring_digit:
                    ring_digit[pair] = -1  # digit assigned at emission
                    ring_partners.setdefault(i, []).append(j)
                    ring_partners.setdefault(j, []).append(i)

    explore(root)

    def alloc_digit() -> int:
        d = 1
        while d in open_digits:
            d += 1
        open_digits.add(d)
        return d

    def emit(i: int, parent: int) -> str:
        out = [_atom_str(g, i)]
        for j in sorted(ring_partners.get(i, []), key=key):
            pair = frozenset((i, j))
            d = ring_digit[pair]
            if d == -1:
                d = alloc_digit()
                ring_digit[pair] = d
                out.append(_bond_str(g, i, j, g.bond_between(i, j).order))
            else:
                open_digits.discard(d)
            out.append(str(d) if d < 10 else f"%{d:02d}")
        children = tree[i]
        for idx, j in enumerate(children):
            bond = _bond_str(g, i, j, g.bond_between(i, j).order)
            frag = bond + emit(j, i)
            if idx < len(children) - 1:
                out.append(f"({frag})")
            else:
                out.append(frag)
        return "".join(out)

    return emit(root, -1)


def _write_with_ranks(g: MolecularGraph, ranks: List[int]) -> str:
    frags = []
    for comp in g.connected_components():
        # start at a terminal atom when possible (conventional-looking output);
        # (degree, rank) is invariant, so the choice stays order-independent
        root = min(comp, key=lambda i: (g.degree(i), ranks[i], i))
        frags.append(_write_component(g, ranks, root))
    return ".".join(sorted(frags))


def write_smiles(g: MolecularGraph, branch_budget: int = 64) -> str:
    """Deterministic canonical SMILES for the molecule."""
    if g.n_atoms() == 0:
        raise ValueError("empty molecular graph")
    best: List[str] = []
    budget = [branch_budget]

    def search(ranks: List[int]):
        counts = Counter(ranks)
        tied = sorted(r for r, c in counts.items() if c > 1)
        if not tied or budget[0] <= 0:
            s = _write_with_ranks(g, ranks)
            if not best or s < best[0]:
                best[:] = [s]
            return
        tied_rank = tied[0]
        members = [i for i, r in enumerate(ranks) if r == tied_rank]
        for a in members:
            if budget[0] <= 0:
                break
            budget[0] -= 1
            nr = []
            for i, r in enumerate(ranks):
                if r < tied_rank:
                    nr.append(r)
                elif r > tied_rank:
                    nr.append(r + 1)
                else:
                    nr.append(tied_rank if i == a else tied_rank + 1)
            search(_refine(g, nr))

    search(canonical_ranks(g))
    return best[0]
