"""
Utility modules for prevmap.
"""

from .helpers import default_workers, keyed_rng, parse_float_list
from .logger import get_logger, setup_logger

__all__ = [
    "default_workers",
    "get_logger",
    "keyed_rng",
    "parse_float_list",
    "setup_logger",
]
