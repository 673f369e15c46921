"""Weekly dial-a-ride planning with time-consistent pickups.

Half-day routing with reconfigurable vehicles is solved by large
neighbourhood search; a set-partitioning master over the collected routes
then trades cost against the number of distinct pickup-time classes each
passenger sees during the week.
"""
from .consistency import ConsistencyReport, count_classes, plan_consistency, time_classes
from .errors import (
    Infeasible,
    MasterInfeasible,
    MissingService,
    ParseError,
    SizeLimit,
    TcdarpError,
    UncoveredRequest,
    ValidationError,
    VerificationError,
)
from .generator import GeneratorParams, generate_instance
from .lns import HalfDaySolution, LnsParams, initial_solution, solve_halfday, solve_halfday_constrained
from .master import HardCap, MasterProblem, MasterSolution, WeightedPenalty, build_master, solve_master
from .model import (
    PERIODS,
    Configuration,
    Instance,
    Location,
    PassengerType,
    Period,
    TravelMatrix,
    User,
    VehicleType,
    expand_requests,
    load_instance,
    save_instance,
    validate_instance,
)
from .plan_io import load_plan, save_plan
from .pool import PoolRoute, RoutePool
from .routing import (
    Route,
    assign_configurations,
    build_route,
    compute_schedule,
    evaluate_insertion,
    route_cost,
    verify_route,
)
from .weekly import WeeklyParams, WeeklyPlan, evaluate_plan, solve_week

__version__ = "0.1.0"
