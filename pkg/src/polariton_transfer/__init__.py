"""Heralded dual-rail transfer of a polaritonic qubit through coupled-cavity arrays."""
from .core import (
    CouplingGraph,
    Continuous,
    DualRailState,
    GreedyOptimized,
    JCHParams,
    PolaritonQubit,
    Regular,
    SingleExcitationState,
    SnapshotList,
    TransferRecord,
    bare_to_polariton,
    build_chain,
    build_graph,
    encode_polariton_qubit,
    polariton_energy,
)
from .kernels import BACKEND

__version__ = "0.1.0"
