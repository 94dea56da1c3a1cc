"""Configuration settings for the markov-bounds toolkit.

This module contains all default constants used throughout the toolkit:
solver settings, polynomial canonicalisation, simulation parameters, bundled
data paths, report columns and logging format. Problem-spec files and CLI
flags override the solver and simulation defaults.
"""

from pathlib import Path
from typing import List, Optional

# Version
VERSION = "0.3.0"

# Solver Settings
DEFAULT_BACKEND = "clarabel"
DEFAULT_TOLERANCE = 1e-8
DEFAULT_TIME_LIMIT: Optional[float] = None  # seconds, None means unlimited
SCS_MAX_ITERS = 200000
ACCEPTED_STATUSES = ("optimal", "near_optimal")

# Polynomial Settings
COEFFICIENT_DROP_TOLERANCE = 1e-14  # relative to the largest coefficient
TIE_TOLERANCE = 1e-12  # relative tolerance for argmin ties in the policy

# Simulation Settings
DEFAULT_DT = 1e-3
DEFAULT_PATHS = 10000
DEFAULT_SEED = 0
CONTROL_GRID_STEP = 0.05
DEFAULT_MAX_HOLD = 0.01  # longest time a jump-process control is held
DIVERGENCE_WARN_FRACTION = 0.01
NOISE_BUFFER_STEPS = 256  # per-path random draws generated per refill
DISCOUNT_TRUNCATION = 1e-4  # discount weight at which discounted runs stop
MEAN_PATH_POINTS = 201

# Model Admissibility Sampling
ADMISSIBILITY_SAMPLES = 2000
ADMISSIBILITY_SEED = 20240
LATTICE_SAMPLE_EXTENT = 50  # sampled range along unbounded lattice axes
ADMISSIBILITY_TOLERANCE = 1e-9

# Data Settings
DATA_DIR = Path(__file__).resolve().parent.parent / "data"
LOTKA_VOLTERRA_SPEC = DATA_DIR / "lotka_volterra.spec"
BIOCIRCUIT_SPEC = DATA_DIR / "biocircuit.spec"
SCALAR_DISCOUNTED_SPEC = DATA_DIR / "scalar_discounted.spec"
SPEC_SCHEMA_VERSION = 1
POLICY_SCHEMA_VERSION = 1

# Report Columns
SWEEP_GRID_KEYS: List[str] = ["n1", "n2", "nT", "d", "repetition"]
SWEEP_LATTICE_KEYS: List[str] = ["nX", "nT", "d", "repetition"]
SWEEP_RESULT_COLUMNS: List[str] = [
    "LB",
    "solve_time",
    "assembly_time",
    "num_blocks",
    "max_block_dim",
    "status",
    "message",
]
ENSEMBLE_COLUMNS: List[str] = ["path", "cost", "diverged", "events"]
SUMMARY_COLUMNS: List[str] = [
    "paths",
    "used",
    "diverged",
    "mean",
    "stderr",
    "seed",
    "dt",
]

# Logging
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_DATE_FORMAT = "%H:%M:%S"
