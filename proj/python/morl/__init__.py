"""Multi-objective policy-gradient toolkit.

Thin wrapper re-exporting the compiled extension: gradient combiners
(orthogonal projection with adaptive clamp, conditional projection,
scalarization), GAE, the desk-scale control environments, the tabular
value-iteration oracle, and config-driven training.
"""

from ._morl import (  # noqa: F401
    Env,
    chain3_value_iteration,
    gae,
    make_env,
    pcgrad_plus_combine,
    pegrad_combine,
    project_orthogonal,
    scalarized_combine,
    train,
)

__all__ = [
    "Env",
    "chain3_value_iteration",
    "gae",
    "make_env",
    "pcgrad_plus_combine",
    "pegrad_combine",
    "project_orthogonal",
    "scalarized_combine",
    "train",
]
