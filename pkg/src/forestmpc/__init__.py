"""forestmpc: deterministic simulated-MPC algorithms on forests.

Connected components, forest rooting, and a generic solver for
node-edge-checkable locally checkable labelings, all instrumented with
round counts and local/global memory ledgers.
"""

from .forest import Forest, generate, oracle_components, diameter
from .maxid import maxid_solver, PhaseFailure, NotATree
from .substrate import MachineConfig, MpcSim, MemoryExceeded

__all__ = [
    "Forest", "generate", "oracle_components", "diameter",
    "maxid_solver", "PhaseFailure", "NotATree",
    "MachineConfig", "MpcSim", "MemoryExceeded",
]
