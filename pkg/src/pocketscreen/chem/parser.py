"""SMILES reader.

Supported: the organic subset and bracket atoms (charge, explicit H,
isotope and stereo markers parsed leniently and dropped), bonds - = # :,
branches, ring closures including %nn, aromatic lowercase, and '.'
separated fragments.  Implicit hydrogens are filled from standard
valences.  Every syntax error carries the offending string offset.
"""

from __future__ import annotations

import re

from .graph import (
    AROMATIC_ELEMENTS,
    AROMATIC_ORDER,
    ChemError,
    KNOWN_ELEMENTS,
    MolecularGraph,
    ORGANIC_SUBSET,
    Atom,
)

__all__ = ["SmilesError", "parse_smiles"]


class SmilesError(ChemError):
    """Syntax or semantics error in a SMILES string, with position."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} (offset {pos})")
        self.pos = pos


_BOND_ORDERS = {"-": 1, "=": 2, "#": 3, ":": AROMATIC_ORDER}

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<element>\*|[A-Z][a-z]?|[a-z]{1,2})"
    r"(?P<stereo>@{1,2}(?:TH[12]|AL[12]|SP[1-3])?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\+|--|[+-]\d*)?"
    r"(?::(?P<map>\d+))?$"
)


def _parse_bracket(body: str, pos: int) -> Atom:
    m = _BRACKET_RE.match(body)
    if m is None:
        raise SmilesError(f"malformed bracket atom [{body}]", pos)
    raw = m.group("element")
    aromatic = raw[0].islower() and raw != "*"
    element = raw.capitalize() if aromatic else raw
    if element == "*":
        raise SmilesError("wildcard atoms are not supported", pos)
    if element not in KNOWN_ELEMENTS:
        raise SmilesError(f"unknown element '{element}'", pos)
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise SmilesError(f"element '{element}' cannot be aromatic", pos)
    hstr = m.group("hcount")
    hcount = 0 if hstr is None else (1 if hstr == "H" else int(hstr[1:]))
    cstr = m.group("charge")
    if cstr is None:
        charge = 0
    elif cstr in ("++", "--"):
        charge = 2 if cstr == "++" else -2
    elif len(cstr) == 1:
        charge = 1 if cstr == "+" else -1
    else:
        charge = int(cstr[1:]) * (1 if cstr[0] == "+" else -1)
    return Atom(element=element, charge=charge, aromatic=aromatic,
                hcount=hcount, bracket=True, pos=pos)


def parse_smiles(text: str) -> MolecularGraph:
    """Parse one SMILES string into a molecular graph with inferred H."""
    if not text or not text.strip():
        raise SmilesError("empty SMILES", 0)
    text = text.strip()
    g = MolecularGraph()
    anchor: int | None = None
    pending_bond: int | None = None
    pending_bond_pos = -1
    branch_stack: list[tuple[int, int]] = []  # (anchor, '(' offset)
    rings: dict[int, tuple[int, int | None, int]] = {}  # num -> (atom, order, offset)
    fragment_break = False
    prev_was_open = False

    def default_order(i: int, j: int) -> int:
        if g.atoms[i].aromatic and g.atoms[j].aromatic:
            return AROMATIC_ORDER
        return 1

    def attach(idx: int, pos: int):
        nonlocal anchor, pending_bond, fragment_break
        if anchor is not None and not fragment_break:
            order = pending_bond if pending_bond is not None else default_order(anchor, idx)
            try:
                g.add_bond(anchor, idx, order)
            except ChemError as e:
                raise SmilesError(str(e), pos) from None
        elif pending_bond is not None:
            raise SmilesError("bond symbol with nothing to bond", pending_bond_pos)
        anchor = idx
        pending_bond = None
        fragment_break = False

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise SmilesError("unclosed bracket atom", i)
            atom = _parse_bracket(text[i + 1 : end], i)
            attach(g.add_atom(atom), i)
            prev_was_open = False
            i = end + 1
            continue
        if ch.isalpha() or ch == "*":
            if ch == "*":
                raise SmilesError("wildcard atoms are not supported", i)
            two = text[i : i + 2]
            if two in ("Cl", "Br"):
                sym, width = two, 2
            else:
                sym, width = ch, 1
            aromatic = sym.islower()
            element = sym.capitalize() if aromatic else sym
            if element not in ORGANIC_SUBSET:
                raise SmilesError(
                    f"element '{element}' must be written as a bracket atom", i)
            if aromatic and element not in AROMATIC_ELEMENTS:
                raise SmilesError(f"element '{element}' cannot be aromatic", i)
            atom = Atom(element=element, aromatic=aromatic, hcount=None,
                        bracket=False, pos=i)
            attach(g.add_atom(atom), i)
            prev_was_open = False
            i += width
            continue
        if ch in _BOND_ORDERS:
            if pending_bond is not None:
                raise SmilesError("two bond symbols in a row", i)
            pending_bond = _BOND_ORDERS[ch]
            pending_bond_pos = i
            i += 1
            continue
        if ch == "(":
            if anchor is None or prev_was_open:
                raise SmilesError("branch start without an anchor atom", i)
            branch_stack.append((anchor, i))
            prev_was_open = True
            i += 1
            continue
        if ch == ")":
            if not branch_stack:
                raise SmilesError("unmatched ')'", i)
            if prev_was_open:
                raise SmilesError("empty branch", i)
            anchor, _ = branch_stack.pop()
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            if ch == "%":
                if i + 2 >= n or not text[i + 1 : i + 3].isdigit():
                    raise SmilesError("'%' ring closure needs two digits", i)
                num, width = int(text[i + 1 : i + 3]), 3
            else:
                num, width = int(ch), 1
            if anchor is None:
                raise SmilesError("ring closure before any atom", i)
            if num in rings:
                other, order_a, _ = rings.pop(num)
                order_b = pending_bond
                if order_a is not None and order_b is not None and order_a != order_b:
                    raise SmilesError(f"conflicting orders for ring bond {num}", i)
                order = order_a if order_a is not None else order_b
                if order is None:
                    order = default_order(other, anchor)
                if other == anchor:
                    raise SmilesError(f"ring bond {num} closes on the same atom", i)
                try:
                    g.add_bond(other, anchor, order)
                except ChemError as e:
                    raise SmilesError(str(e), i) from None
                pending_bond = None
            else:
                rings[num] = (anchor, pending_bond, i)
                pending_bond = None
            i += width
            continue
        if ch == ".":
            if pending_bond is not None:
                raise SmilesError("bond symbol before fragment separator", pending_bond_pos)
            fragment_break = True
            i += 1
            continue
        if ch in "/\\":
            i += 1  # stereo bond markers dropped
            continue
        raise SmilesError(f"unexpected character '{ch}'", i)

    if branch_stack:
        raise SmilesError("unclosed '('", branch_stack[-1][1])
    if rings:
        num, (_, _, pos) = next(iter(rings.items()))
        raise SmilesError(f"unmatched ring bond {num}", pos)
    if pending_bond is not None:
        raise SmilesError("dangling bond symbol", pending_bond_pos)
    if g.n_atoms() == 0:
        raise SmilesError("no atoms", 0)

    g.infer_hydrogens()
    g.validate_valence()
    return g
