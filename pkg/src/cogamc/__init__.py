"""Rate and power adaptation for an interfering cognitive radio with AMC."""

from .amc import AmcMode, AmcTable, default_table
from .baselines import InterweaveResult, interweave
from .fading import GainModel, PathLossGeometry
from .optimizer import PolicyAssignment, ProblemSpec, constant_power_optimize, exhaustive_optimize, greedy_optimize
from .regions import RegionGrid, build_grid
from .simulate import SimConfig, SimReport, simulate_scheme, summarize

REFERENCE_NOISE = 1e-4


def reference_model(noise_power: float = REFERENCE_NOISE) -> GainModel:
    """Mean gains of the reference scenario: unit direct links, 0.03 cross links."""
    return GainModel(mean_s11=1.0, mean_s22=1.0, mean_s12=0.03, mean_s21=0.03, noise_power=noise_power)
