"""Level set optimisation of periodic elastic microstructures with a
Hilbertian projection method for equality constraints."""
from .driver import PRESETS, RunConfig, RunResult, hs_reference, run
from .functionals import FunctionalSpec, evaluate_design
from .grid import PeriodicGrid, isotropic_tensor
from .levelset import LevelSetState, advect, initial_structure, reinitialise

__all__ = ["PRESETS", "RunConfig", "RunResult", "hs_reference", "run", "FunctionalSpec", "evaluate_design",
           "PeriodicGrid", "isotropic_tensor", "LevelSetState", "advect", "initial_structure", "reinitialise"]
__version__ = "0.1.0"
