"""Loopy belief propagation on binary pairwise models and its fixed points."""

from .model import (
    Graph,
    InvalidArgument,
    IsingModel,
    PatchLayout,
    build_complete,
    build_grid,
    build_random,
    make_ising,
    make_patch_model,
)
from .bp import BPConfig, init_messages, pseudomarginals, run_bp
from .fixedpoints import enumerate_fixed_points, newton_refine
from .stability import attach_stability, classify_stability, eigenvalues
from .sbp import SBPConfig, run_sbp

__version__ = "0.1.0"
