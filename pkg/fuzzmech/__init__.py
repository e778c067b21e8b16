# Fuzzy-manifold hydrodynamics package
# Using numpy/scipy numerics and LangGraph scenario orchestration

"""
fuzzmech
Simulates nonrelativistic particle dynamics on fuzzy manifolds in both the
observational {w, v} representation and the dynamical eta representation,
and certifies their equivalence numerically.
"""

import os
import logging

from dotenv import load_dotenv

load_dotenv()

THREADS = 1


def configure_runtime():
    """Read FUZZMECH_THREADS and FUZZMECH_LOG_LEVEL from the environment."""
    global THREADS
    try:
        THREADS = max(1, int(os.getenv("FUZZMECH_THREADS", "1")))
    except ValueError:
        print(f"Warning: ignoring invalid FUZZMECH_THREADS={os.getenv('FUZZMECH_THREADS')!r}")
        THREADS = 1

    level_name = os.getenv("FUZZMECH_LOG_LEVEL", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        print(f"Warning: unknown FUZZMECH_LOG_LEVEL={level_name!r}, using WARNING")
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return THREADS


def worker_count() -> int:
    return THREADS


# Run configuration when the package is imported
configure_runtime()
