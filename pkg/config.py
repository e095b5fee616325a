# -*- coding: utf-8 -*-
"""
Configuration module - loads process settings from .env file
Covers:
- numerical tolerances shared by the cell solver, fibers and rate harness
- worker pool size and output location for the CLI
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# ========================================
# Load .env
# ========================================
load_dotenv()

APP_NAME = "bloch-homog"
APP_VERSION = "1.0"


def _env_bool(name, default):
    v = os.getenv(name)
    if v is None or v.strip() == "":
        return default
    return v.strip().lower() in ("1", "true", "yes", "y", "on")


# ========================================
# LOGGING / OUTPUT
# ========================================
LOG_LEVEL = os.getenv("HOMOG_LOG_LEVEL", "INFO").upper()
OUTPUT_DIR = Path(os.getenv("HOMOG_OUTPUT_DIR", "results"))
THREADS = int(os.getenv("HOMOG_THREADS", 1))
# wall_ms is written as 0 unless enabled, so reruns are byte-identical
RECORD_WALL_TIME = _env_bool("HOMOG_RECORD_WALL_TIME", False)

# ========================================
# TOLERANCES
# ========================================
CELL_TOL = float(os.getenv("HOMOG_CELL_TOL", 1e-9))
HERMITIAN_TOL = float(os.getenv("HOMOG_HERMITIAN_TOL", 1e-12))
BRACKET_TOL = float(os.getenv("HOMOG_BRACKET_TOL", 1e-9))
EXACT_FLOOR = float(os.getenv("HOMOG_EXACT_FLOOR", 1e-9))
DUHAMEL_TOL = float(os.getenv("HOMOG_DUHAMEL_TOL", 0.01))

# ========================================
# THRESHOLD WINDOW / RATE HARNESS
# ========================================
# the C(d, p) factor in C0; unknown in closed form, 1 by default
WINDOW_FACTOR = float(os.getenv("HOMOG_WINDOW_FACTOR", 1.0))
GAP_SLACK = float(os.getenv("HOMOG_GAP_SLACK", 0.10))
REFINE_PER_OCTAVE = int(os.getenv("HOMOG_REFINE_PER_OCTAVE", 8))
REUSS_RESOLUTION = int(os.getenv("HOMOG_REUSS_RESOLUTION", 64))

# ========================================
# PATHS
# ========================================
BASE_DIR = Path(__file__).resolve().parent
CONFIGS_DIR = BASE_DIR / "configs"


# ========================================
# VALIDATION
# ========================================
def validate_config() -> list[str]:
    """Validate process-level settings"""
    errors: list[str] = []

    if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"HOMOG_LOG_LEVEL invalid: {LOG_LEVEL}")
    if THREADS < 1:
        errors.append(f"HOMOG_THREADS must be >= 1, got {THREADS}")

    tolerances = [
        ("HOMOG_CELL_TOL", CELL_TOL),
        ("HOMOG_HERMITIAN_TOL", HERMITIAN_TOL),
        ("HOMOG_BRACKET_TOL", BRACKET_TOL),
        ("HOMOG_EXACT_FLOOR", EXACT_FLOOR),
        ("HOMOG_DUHAMEL_TOL", DUHAMEL_TOL),
    ]
    for name, value in tolerances:
        if not (0.0 < value < 1.0):
            errors.append(f"{name} must lie in (0, 1), got {value}")

    if WINDOW_FACTOR <= 0:
        errors.append(f"HOMOG_WINDOW_FACTOR must be positive, got {WINDOW_FACTOR}")
    if not (0.0 <= GAP_SLACK < 1.0):
        errors.append(f"HOMOG_GAP_SLACK must lie in [0, 1), got {GAP_SLACK}")
    if REFINE_PER_OCTAVE < 1:
        errors.append(f"HOMOG_REFINE_PER_OCTAVE must be >= 1, got {REFINE_PER_OCTAVE}")
    if REUSS_RESOLUTION < 64:
        errors.append(f"HOMOG_REUSS_RESOLUTION must be >= 64, got {REUSS_RESOLUTION}")

    return errors
