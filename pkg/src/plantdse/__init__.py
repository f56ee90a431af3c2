"""Design space exploration for flow-production plants.

The package enumerates plant designs from a design space matrix, simulates
each design across production scenarios with a discrete-event simulator and
a priority-greedy production controller, and ranks the designs by ROI and
Pareto criteria. A poultry-fillet case study ships as bundled example data.
"""

__version__ = "0.1.0"

from .dsm import (
    Design,
    DesignSpaceMatrix,
    DsmError,
    PortBounds,
    PortRef,
    count_designs,
    enumerate_designs,
    freeze_except,
    load_dsm,
    parse_dsm,
    sample_designs,
)
from .plant import (
    Lane,
    ModuleKind,
    PlantError,
    PlantTopology,
    RoutingTable,
    build_topology,
    derive_routings,
    load_catalog,
)
from .scenario import (
    FlockModel,
    Recipe,
    Scenario,
    load_scenarios,
    quintile_bounds,
    sample_fillet_weight,
    scenario_catalog,
)
from .controller import (
    Allocation,
    Assignment,
    ControllerParams,
    LaneHistogram,
    ProductionStrategy,
    assign,
    compute_strategy,
    record_weight,
    strategy_refresh_due,
)
from .sim import (
    PerformanceRecord,
    RunAudit,
    SimParams,
    duration_sweep,
    replicate,
    run_simulation,
)
from .evaluate import (
    DesignScore,
    RoiParams,
    pareto_flags,
    pareto_front,
    partition_compare,
    rank_by_objective,
    roi_percent,
    score_design,
)
from .explorer import ExplorationConfig, ResultStore, explore, resume
