"""Day-ahead microgrid scheduling with feeder ramping limits and islanding scenarios."""

from .builder import assemble
from .core import (AdjustableLoad, DispatchableUnit, FixedSeries, FlexibilitySpec, InstanceValidationError,
                   MarketPrice, MicrogridInstance, PiecewiseLinearCost, StorageUnit, TimeGrid, check_instance,
                   make_time_grid, validate_instance)
from .envelope import FlexibilityEnvelope, build_envelope
from .model import MilpModel, VariableIndex, VarKey
from .scenarios import ScenarioSet, generate_scenarios
from .schedule import Schedule, extract_schedule
from .solver import SolveOptions, SolveResult, solve_lp, solve_milp

__version__ = "0.1.0"
