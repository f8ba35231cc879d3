"""Simulation and ergodicity analysis of constrained multivariate Hawkes processes."""

__version__ = "0.1.0"

from .core import (
    ChainState,
    Event,
    EventLog,
    counting_functional,
    initial_state,
    intensity_at,
    reduce_constraints,
    simulate,
    step,
)
from .exceptions import (
    InsufficientData,
    NotSubcritical,
    SpecParseError,
    SpecValidationError,
    StatePositivityViolation,
)
from .model import ModelSpec, load_spec, lob_preset, mid_price_weights, save_spec, validate

__all__ = [
    "ChainState",
    "Event",
    "EventLog",
    "InsufficientData",
    "ModelSpec",
    "NotSubcritical",
    "SpecParseError",
    "SpecValidationError",
    "StatePositivityViolation",
    "counting_functional",
    "initial_state",
    "intensity_at",
    "load_spec",
    "lob_preset",
    "mid_price_weights",
    "reduce_constraints",
    "save_spec",
    "simulate",
    "step",
    "validate",
]
