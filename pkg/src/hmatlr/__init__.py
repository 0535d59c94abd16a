"""Hierarchical matrix arithmetic with LR factorization, triangular
inversion and an exact work-count model."""
from .blocktree import Admissibility, BlockTree, build_block_tree, sparsity_constant
from .cluster import ClusterTree, build_cluster_tree
from .dense import FlopCounter
from .errors import (DimensionMismatch, HMatrixError, InvalidArgument, PivotBreakdown,
                     SingularDiagonal, StructureViolation, UnknownCluster)
from .harness import ProblemSpec, generate, run_bench, run_verify
from .hmatrix import HMatrix, addeval, addevaltrans, addmul, merge, update
from .triangular import (TriangularHMatrix, invert_inplace, linvert, llsolve, lr_factors,
                         lrdecomp, lrinvert, lrsolve, pipeline_inverse, rinvert, rlsolve,
                         rrsolve, solve_matrix)
from .workmodel import WorkConstants, WorkModel, verify_all

__version__ = "0.1.0"
