"""Verification workbench for distributed termination detection."""
from .abstract import AbstractSpec, AbstractState
from .kernel import Bounds, ConfigurationError, Fairness, Label, LeadsTo, Spec, Trace, make_spec
from .safra import Color, SafraSpec, SafraState, Token

__version__ = "0.1.0"

__all__ = [
    "AbstractSpec", "AbstractState", "Bounds", "Color", "ConfigurationError", "Fairness",
    "Label", "LeadsTo", "SafraSpec", "SafraState", "Spec", "Token", "Trace", "make_spec",
]
