"""Radial feeder models: linearized sensitivities, exact AC sweep and CSV I/O."""

from opf_distill.grid.feeder_io import load_feeder_csv, save_feeder_csv
from opf_distill.grid.matrices import build_grid_matrices, linear_voltage, quadratic_losses
from opf_distill.grid.power_flow import ac_power_flow
from opf_distill.grid.synthetic import synthetic_feeder
from opf_distill.grid.topology import FeederTree, feeder_tree

__all__ = [
    "FeederTree",
    "ac_power_flow",
    "build_grid_matrices",
    "feeder_tree",
    "linear_voltage",
    "load_feeder_csv",
    "quadratic_losses",
    "save_feeder_csv",
    "synthetic_feeder",
]
