from .mvr import (
    AllocationSolution,
    DegenerateInstanceError,
    MultiplierSet,
    ProblemInstance,
    RelaxedPrimal,
    SolverConfig,
    dual_step,
    normalize_allocation,
    primal_update,
    recover_assignment,
    relaxed_objective,
    solve,
)
