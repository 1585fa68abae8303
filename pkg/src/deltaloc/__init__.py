"""Differentially private location release under temporal correlations."""

from .framework import DeltaLocationSet, delta_location_set, release_step, run_trajectory, surrogate
from .grid import GridConfig, cell_center, cell_distance, coord_to_cell
from .mechanism import LM, PIM, ReleaseContext, lm_release, pim_release

__version__ = "0.1.0"
