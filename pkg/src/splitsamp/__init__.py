"""Split sampling with shifted interval schemes.

Privacy-preserving discretization of sensitive variables, reconstruction of
a synthetic variable on the refined working grid, and OLS estimation when
the regressor, the outcome, or both were discretized.
"""
from .kernels import BACKEND
from .scheme import (
    PlanError,
    ShiftingPlan,
    SplitDesign,
    SupportBox,
    WorkingGrid,
    build_shifting_plan,
    covered_working_cells,
    equal_width_design,
    split_boundaries,
    working_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PlanError",
    "ShiftingPlan",
    "SplitDesign",
    "SupportBox",
    "WorkingGrid",
    "build_shifting_plan",
    "covered_working_cells",
    "equal_width_design",
    "split_boundaries",
    "working_grid",
]
