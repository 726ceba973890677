from .graph import (
    AROMATIC_ORDER,
    Atom,
    Bond,
    ChemError,
    MolecularGraph,
    UnsupportedElementError,
    ValenceError,
)
from .parser import SmilesError, parse_smiles
from .writer import canonical_ranks, write_smiles
from .properties import crippen_logp, ertl_tpsa, mol_weight
from .perturb import (
    OPERATIONS,
    PerturbResult,
    PropertyThresholds,
    filter_pair,
    perturb,
)


def canonical(smiles: str) -> str:
    """Parse then re-emit: the canonical form of any valid SMILES."""
    return write_smiles(parse_smiles(smiles))
