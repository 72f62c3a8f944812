"""Input validation helpers shared across the public API."""

from __future__ import annotations

import numpy as np

from .geometry import MetricGrid

__all__ = ["check_density_values", "check_level", "check_positive", "check_labels"]


def check_density_values(grid: MetricGrid, values) -> np.ndarray:
    """Coerce ``values`` to a per-node nonnegative float array.

    Accepts a scalar (broadcast to a constant field), any array-like of
    length ``grid.num_nodes``, or an object exposing ``.values``.
    """
    if hasattr(values, "values") and not isinstance(values, np.ndarray):
        values = values.values
    if np.isscalar(values):
        arr = np.full(grid.num_nodes, float(values))
    else:
        arr = np.asarray(values, dtype=float).ravel()
        if arr.shape != (grid.num_nodes,):
            raise ValueError(
                f"density needs {grid.num_nodes} node values, got shape {arr.shape}"
            )
        arr = arr.copy()
    if not np.isfinite(arr).all():
        raise ValueError("density values must be finite")
    if (arr < 0).any():
        raise ValueError("density values must be nonnegative")
    return arr


def check_level(t: float) -> float:
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError(f"level t must lie in (0, 1), got {t}")
    return t


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_labels(grid: MetricGrid, *labels: str) -> None:
    """Ensure labels exist, are nonempty and pairwise disjoint."""
    seen = {}
    for label in labels:
        nodes = grid.label_nodes(label)
        if len(nodes) == 0:
            raise ValueError(f"side {label!r} has no active nodes")
        seen[label] = set(int(v) for v in nodes)
    names = list(seen)
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            if seen[names[a]] & seen[names[b]]:
                raise ValueError(f"sides {names[a]!r} and {names[b]!r} overlap")
