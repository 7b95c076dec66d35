from .ipm import (DEFAULT_MAX_ITER, DEFAULT_TOL, INFEASIBLE, MAX_ITER, OPTIMAL, STALLED,
                  UNBOUNDED, ConicSolution, solve)
from .lifting import (lift_complex, lift_matrix, lift_vector, real_part_functional,
                      unlift_hermitian, unlift_vector)
from .program import ConicProgram, StandardForm, Var, parse_dump

__all__ = [
    "ConicProgram", "ConicSolution", "StandardForm", "Var", "solve", "parse_dump",
    "lift_complex", "lift_matrix", "lift_vector", "unlift_hermitian", "unlift_vector",
    "real_part_functional", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITER", "STALLED",
    "DEFAULT_TOL", "DEFAULT_MAX_ITER",
]
