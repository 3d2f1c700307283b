"""Structured parameter-dependent H-infinity static output feedback design."""

import json

from ._core import (
    NumericalError,
    ParseError,
    System,
    ValidationError,
    builtin_names,
    closed_loop,
    design_json,
    eval_strategy,
    hinf_norm,
    load_system,
    norm,
    parse_system,
    ratio,
    selftest,
    sweep,
    validate,
    worst_case,
)

__all__ = [
    "NumericalError",
    "ParseError",
    "System",
    "ValidationError",
    "builtin_names",
    "closed_loop",
    "design",
    "eval_strategy",
    "hinf_norm",
    "load_system",
    "norm",
    "parse_system",
    "ratio",
    "selftest",
    "sweep",
    "validate",
    "worst_case",
]


def design(system, **options):
    """Saddle-point design. Returns a dict with gamma_star, alpha_star, J_star, trace and status.

    J values that are infinite come back as the string "inf".
    """
    return json.loads(design_json(system, **options))
