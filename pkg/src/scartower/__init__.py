"""Hard-core boson algebra and numerical checks for equally spaced scar towers."""
from .errors import ScarTowerError
from .fock_states import SparseState, apply, dicke_state, eigen_check, reduced_entropy, schmidt_coeff, tower_state
from .graph_geom import SiteGraph, chain, disjoint_layers, pack_spheres, square_grid
from .op_algebra import Monomial, Operator, commutator, multiply, nilpotency_depth
from .parent_decomp import DecompositionCertificate, classify_terms, decompose, sample_parent, witness_state
from .spectral_verify import SpacingReport, tower_energies
from .tower_forge import GateCircuit, TowerSpec, apply_circuit, build_mapping_circuit, check_classes

__all__ = [
    "ScarTowerError",
    "SparseState", "apply", "dicke_state", "eigen_check", "reduced_entropy", "schmidt_coeff", "tower_state",
    "SiteGraph", "chain", "disjoint_layers", "pack_spheres", "square_grid",
    "Monomial", "Operator", "commutator", "multiply", "nilpotency_depth",
    "DecompositionCertificate", "classify_terms", "decompose", "sample_parent", "witness_state",
    "SpacingReport", "tower_energies",
    "GateCircuit", "TowerSpec", "apply_circuit", "build_mapping_circuit", "check_classes",
]

__version__ = "0.1.0"
