"""
Command-line interface for prevmap.
"""

from .app import app, run

__all__ = ["app", "run"]
