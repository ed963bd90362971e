"""Experiment orchestration, statistics and the command line interface."""

from .config import ExperimentConfig, lattice_size
from .runners import (compare_distributions, deterministic_lp_norm, lp_scaling_check,
                      ode_comparison_check, run_experiment, wick_norm_check)
from .testfunctions import compare_spin_pairing, pair_with_test_function
