"""foldlab: a computational laboratory for folded horseshoes.

Builds graph-indexed hyperbolic systems with quadratic folds, selects
parameters realizing cascades of heteroclinic tangencies, verifies the
associated renormalization chains, and measures emergence/historic statistics
of the resulting dynamics.
"""

from .numerics import (
    FLOAT_BACKEND,
    RATIONAL_BACKEND,
    LogReal,
    as_fraction,
    rational_sqrt,
)
from .symbolic import Arrow, TransitionGraph, Word, concat
from .hyperbolic import AffineRep, BoxRegion, PlaneMap, distortion, star_product
from .model import (
    CantorApprox,
    HenonParams,
    ModelParams,
    SystemAC,
    build_model,
    cantor_approx,
    gap_check,
    henon_iterate,
    henon_map,
    henon_scan,
    stable_gap_size,
    stable_thickness_exact,
    thickness_scan,
)
from .tangency import critical_tangency, psi_solve, v_value
from .selection import (
    Certificate,
    RunResult,
    ScheduleParams,
    SelectionState,
    run_selection,
)
from .renorm import (
    Chain,
    ChainReport,
    CloudReport,
    RenormalizedMap,
    iterate_cloud,
    renormalized_map,
    verify_chain,
)
from .stats import (
    CoveringReport,
    EmpiricalMeasure,
    HistoricVerdict,
    covering_number,
    emergence_order,
    empirical_measure,
    historic_detector,
    wasserstein1,
)

__version__ = "0.1.0"

__all__ = [
    "AffineRep", "Arrow", "BoxRegion", "CantorApprox", "Certificate",
    "Chain", "ChainReport", "CloudReport", "CoveringReport",
    "EmpiricalMeasure", "FLOAT_BACKEND", "HenonParams", "HistoricVerdict",
    "LogReal", "ModelParams", "PlaneMap", "RATIONAL_BACKEND",
    "RenormalizedMap", "RunResult", "ScheduleParams", "SelectionState",
    "SystemAC", "TransitionGraph", "Word", "as_fraction", "build_model",
    "cantor_approx", "concat", "covering_number", "critical_tangency",
    "distortion", "emergence_order", "empirical_measure", "gap_check",
    "henon_iterate", "henon_map", "henon_scan", "historic_detector",
    "iterate_cloud", "psi_solve", "rational_sqrt", "renormalized_map",
    "run_selection", "stable_gap_size", "stable_thickness_exact",
    "star_product", "thickness_scan", "v_value", "verify_chain",
    "wasserstein1",
]
