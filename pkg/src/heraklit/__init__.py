"""Composable high-level Petri net modules.

Layers, bottom up: many-sorted algebras (:mod:`heraklit.algebra`), net
schemas and the token game (:mod:`heraklit.petri`), interface composition
(:mod:`heraklit.composition`), concurrent runs (:mod:`heraklit.runs`),
invariant exploration (:mod:`heraklit.invariants`), run statistics
(:mod:`heraklit.mining`) and the textual model language (:mod:`heraklit.dsl`).
"""

from importlib import resources

from heraklit.errors import (
    CompositionError,
    DSLError,
    EvaluationError,
    FiringError,
    HeraklitError,
    ModelError,
    RunError,
    SortError,
)

__version__ = "0.1.0"


def model_path(name: str = "service_system.hkl"):
    """Path of a bundled model or scenario file."""
    return resources.files("heraklit") / "models" / name


__all__ = [
    "CompositionError",
    "DSLError",
    "EvaluationError",
    "FiringError",
    "HeraklitError",
    "ModelError",
    "RunError",
    "SortError",
    "model_path",
]
