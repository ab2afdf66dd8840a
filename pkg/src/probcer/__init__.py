"""Streaming probabilistic complex event recognition."""

from __future__ import annotations

from .errors import ProbCERError
from .events import CEInstance, ProbEvent, history_prob, history_space_size, make_event, validate_event
from .lang.validate import parse_rules
from .plan import compile as compile_rules
from .prob.models import CPT, ProbModelConfig
from .runtime import Engine, EngineConfig, recognize

__version__ = "0.1.0"

__all__ = [
    "ProbCERError", "CEInstance", "ProbEvent", "history_prob", "history_space_size", "make_event",
    "validate_event", "parse_rules", "compile_rules", "CPT", "ProbModelConfig", "Engine", "EngineConfig",
    "recognize",
]
