from .assembly import Discretization, assemble, residual, salt_mass
from .solver import FieldSnapshot, RealizationFailure, SolverControls, newton_solve, time_march

__all__ = ["Discretization", "assemble", "residual", "salt_mass", "FieldSnapshot",
           "RealizationFailure", "SolverControls", "newton_solve", "time_march"]
