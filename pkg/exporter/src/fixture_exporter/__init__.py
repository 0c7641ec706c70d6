"""Fixture exporter: trains tiny reference models and writes them, their
datasets, and reference outputs in the pruning engine's portable formats."""

__version__ = "0.1.0"

from .export import FIXTURES, FixtureSpec, export_dataset, export_model, regenerate
