"""Sequential two-outcome measurements: exact engines, samplers, protocols and bound checks."""

from .measurements import BlendedMeasurement, MeasurementEnsemble, TwoOutcomeMeasurement, make_blended
from .protocols import OrInstance, plant_case_one, plant_case_two, run_or_blended, run_or_random
from .qla import ContractError, DensityMatrix, PsdOperator
from .sequential import EngineConfig, blended_exact, random_exact

__version__ = "0.1.0"

__all__ = [
    "BlendedMeasurement",
    "ContractError",
    "DensityMatrix",
    "EngineConfig",
    "MeasurementEnsemble",
    "OrInstance",
    "PsdOperator",
    "TwoOutcomeMeasurement",
    "blended_exact",
    "make_blended",
    "plant_case_one",
    "plant_case_two",
    "random_exact",
    "run_or_blended",
    "run_or_random",
]
