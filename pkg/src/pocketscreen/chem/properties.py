"""Molecular weight, logP, and topological polar surface area.

Contribution tables live in versioned JSON data files next to this
module so a fuller table can replace the reduced one without code
changes.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

from .graph import AROMATIC_ORDER, MolecularGraph, UnsupportedElementError

__all__ = ["mol_weight", "crippen_logp", "ertl_tpsa"]

_DATA_DIR = Path(__file__).parent / "data"


@lru_cache(maxsize=None)
def _load(name: str) -> dict:
    with open(_DATA_DIR / name) as fh:
        return json.load(fh)


def mol_weight(g: MolecularGraph) -> float:
    """Molecular weight in Daltons including implicit hydrogens."""
    masses = _load("atomic_masses.json")["masses"]
    total = 0.0
    for i, a in enumerate(g.atoms):
        if a.element not in masses:
            raise UnsupportedElementError(f"no atomic mass for element '{a.element}'")
        total += masses[a.element] + masses["H"] * g.total_hcount(i)
    return total


def _bond_profile(g: MolecularGraph, i: int):
    single = double = triple = aromatic = 0
    for b in g.bonds_of(i):
        if b.order == 1:
            single += 1
        elif b.order == 2:
            double += 1
        elif b.order == 3:
            triple += 1
        elif b.order == AROMATIC_ORDER:
            aromatic += 1
    return single, double, triple, aromatic


def _has_carbonyl_neighbor(g: MolecularGraph, i: int) -> bool:
    """True when atom i is bonded to a carbon that bears a double bond to O."""
    for j in g.neighbors(i):
        nb = g.atoms[j]
        if nb.element != "C":
            continue
        for b in g.bonds_of(j):
            k = b.other(j)
            if k != i and b.order == 2 and g.atoms[k].element == "O":
                return True
    return False


def _crippen_class(g: MolecularGraph, i: int) -> str:
    a = g.atoms[i]
    el = a.element
    if el == "C":
        if a.aromatic:
            return "C.ar"
        _, double, triple, _ = _bond_profile(g, i)
        if double or triple:
            hetero_double = any(
                b.order >= 2 and g.atoms[b.other(i)].element in ("O", "N", "S")
                for b in g.bonds_of(i))
            return "C.carbonyl" if hetero_double else "C.sp2"
        if any(g.atoms[j].element not in ("C", "H") for j in g.neighbors(i)):
            return "C.het"
        return "C.aliph"
    if el == "N":
        if a.aromatic:
            return "N.ar"
        if _has_carbonyl_neighbor(g, i):
            return "N.amide"
        h = g.total_hcount(i)
        return {2: "N.prim", 1: "N.sec"}.get(h, "N.tert")
    if el == "O":
        if a.aromatic:
            return "O.ar"
        _, double, _, _ = _bond_profile(g, i)
        if double:
            return "O.carbonyl"
        if g.total_hcount(i) >= 1:
            return "O.hydroxyl"
        return "O.ether"
    if el == "S":
        return "S.ar" if a.aromatic else "S"
    return el


def crippen_logp(g: MolecularGraph) -> float:
    """Octanol-water partition estimate from reduced atomic contributions."""
    table = _load("crippen_logp.json")
    heavy, hydro = table["heavy"], table["hydrogen"]
    total = 0.0
    for i, a in enumerate(g.atoms):
        cls = _crippen_class(g, i)
        if cls not in heavy:
            raise UnsupportedElementError(f"no logP contribution for element '{a.element}'")
        total += heavy[cls]
        h = g.total_hcount(i)
        if h:
            hcls = {"C": "H.C", "N": "H.N", "O": "H.O"}.get(a.element, "H.other")
            total += hydro[hcls] * h
    return total


def _tpsa_class(g: MolecularGraph, i: int) -> str | None:
    a = g.atoms[i]
    el = a.element
    if el not in ("N", "O"):
        return None
    h = g.total_hcount(i)
    single, double, triple, aromatic = _bond_profile(g, i)
    conn = single + double + triple + aromatic
    if el == "N":
        if a.aromatic:
            if h >= 1:
                return "n.ar.H"
            return "n.ar.3conn" if conn >= 3 else "n.ar.2conn"
        if a.charge == 1:
            return "N.plus.H3" if h >= 3 else "N.plus.4conn"
        if triple:
            return "N.triple"
        if double:
            return "N.1conn.double.H" if h >= 1 else "N.2conn.double"
        if h >= 2:
            return "N.1conn.H2"
        if h == 1:
            return "N.2conn.H"
        return "N.3conn"
    # oxygen
    if a.aromatic:
        return "o.ar"
    if a.charge == -1:
        return "O.minus"
    if double:
        return "O.double"
    if h >= 1:
        return "O.1conn.H"
    return "O.2conn"


def ertl_tpsa(g: MolecularGraph) -> float:
    """Topological polar surface area in square Angstrom (N/O contributions)."""
    table = _load("ertl_tpsa.json")
    classes, fallback = table["classes"], table["fallback"]
    total = 0.0
    for i, a in enumerate(g.atoms):
        cls = _tpsa_class(g, i)
        if cls is None:
            continue
        if cls in classes:
            total += classes[cls]
        else:
            fb = fallback[a.element]
            single, double, triple, aromatic = _bond_profile(g, i)
            conn = single + double + triple + aromatic + g.total_hcount(i)
            total += max(0.0, fb["base"] + fb["per_conn"] * conn + fb["per_h"] * g.total_hcount(i))
    return total
