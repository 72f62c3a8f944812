"""Curve families as constraint oracles.

A family does one job: given a density, find its cheapest member.  For a
connecting family that member is a grid path between two marked sides; for a
separating family it is a dual path between the complementary sides, read as
the trace of a separating boundary and weighted by per-node length shares.
The solver treats both uniformly as generators of linear constraints
``sum(w * rho) >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _search
from .geometry import MetricGrid
from .validation import check_density_values, check_labels

__all__ = [
    "DiscreteCurve",
    "MeasureConstraint",
    "OracleCut",
    "ConnectingFamily",
    "SeparatingFamily",
    "shortest_admissible_curve",
    "most_violated_cut",
    "loop_erase",
    "curve_constraint",
]

# complementary side pair used for dual paths: a boundary separating A from C
# must contain a simple curve joining B to D, and cyclically
_DUAL_SIDES = {
    frozenset(("A", "C")): ("B", "D"),
    frozenset(("B", "D")): ("A", "C"),
}


@dataclass(frozen=True)
class DiscreteCurve:
    """Grid path with per-step lengths.

    Steps join 8-adjacent nodes; ``simple`` records whether any node
    repeats.  ``total_length`` is the curve's H^1 measure when simple.
    """

    nodes: np.ndarray
    lengths: np.ndarray
    total_length: float
    simple: bool

    @classmethod
    def from_nodes(cls, grid: MetricGrid, nodes) -> "DiscreteCurve":
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            raise ValueError("a curve needs at least one node")
        for a, b in zip(nodes[:-1], nodes[1:]):
            if not grid.is_adjacent(int(a), int(b)):
                raise ValueError(f"nodes {a} and {b} are not grid-adjacent")
        lengths = np.array(
            [grid.distance(int(a), int(b)) for a, b in zip(nodes[:-1], nodes[1:])]
        )
        return cls(
            nodes=nodes,
            lengths=lengths,
            total_length=float(lengths.sum()),
            simple=len(set(nodes.tolist())) == nodes.size,
        )

    def __len__(self) -> int:
        return int(self.nodes.size)


@dataclass(frozen=True)
class MeasureConstraint:
    """Admissibility constraint sum(weights * rho[support]) >= 1.

    For a constraint built from a simple curve the weights are the curve's
    per-node length shares, so ``total`` is the curve's H^1 measure.
    """

    support: np.ndarray
    weights: np.ndarray
    total: float

    def __post_init__(self):
        if (self.weights < 0).any():
            raise ValueError("constraint weights must be nonnegative")
        if not self.total > 0:
            raise ValueError("constraint total mass must be positive")

    def mass(self, rho: np.ndarray) -> float:
        """Integral of rho against this measure."""
        return float(self.weights @ rho[self.support])

    def key(self) -> bytes:
        return self.support.tobytes() + np.round(self.weights, 12).tobytes()


class OracleCut(NamedTuple):
    """Most-violated constraint report from a family oracle."""

    value: float
    constraint: MeasureConstraint | None
    curve: DiscreteCurve | None


def curve_constraint(
    grid: MetricGrid, curve: DiscreteCurve, rule: str = "trapezoid"
) -> MeasureConstraint:
    """Node-share constraint whose mass against rho is the curve line integral.

    Trapezoid: each node receives half of each incident step length, so the
    node weights are H^1 length shares.  Left endpoint: each step's length
    is assigned to its source node (the chain-potential convention).
    """
    nodes = curve.nodes
    shares = np.zeros(nodes.size)
    if rule == "trapezoid":
        shares[:-1] += 0.5 * curve.lengths
        shares[1:] += 0.5 * curve.lengths
    elif rule == "left_endpoint":
        shares[:-1] += curve.lengths
    else:
        raise ValueError(f"unknown integration rule {rule!r}")
    # merge repeated visits so the support is a plain node set
    support, inverse = np.unique(nodes, return_inverse=True)
    weights = np.zeros(support.size)
    np.add.at(weights, inverse, shares)
    return MeasureConstraint(support=support, weights=weights, total=float(shares.sum()))


def loop_erase(grid: MetricGrid, curve: DiscreteCurve) -> DiscreteCurve:
    """Simple curve with the same endpoints, nodes a subset of the input's.

    Standard loop erasure: on a repeated node, the enclosed excursion is
    dropped.  Never longer than the input.
    """
    if curve.simple:
        return curve
    stack: list[int] = []
    seen: dict[int, int] = {}
    for node in curve.nodes.tolist():
        if node in seen:
            while stack[-1] != node:
                seen.pop(stack.pop())
        else:
            seen[node] = len(stack)
            stack.append(node)
    return DiscreteCurve.from_nodes(grid, stack)


def _edge_costs(grid: MetricGrid, rho: np.ndarray, rule: str) -> list[float]:
    if rule == "trapezoid":
        c = grid._edge_len * 0.5 * (rho[grid._edge_src] + rho[grid._edge_dst])
    elif rule == "left_endpoint":
        c = grid._edge_len * rho[grid._edge_src]
    else:
        raise ValueError(f"unknown integration rule {rule!r}")
    return c.tolist()


def _min_rho_path(
    grid: MetricGrid, rho: np.ndarray, sources, sinks, rule: str
) -> tuple[float, DiscreteCurve | None]:
    if len(sources) == 0 or len(sinks) == 0:
        raise ValueError("source and sink node sets must be nonempty")
    cost = _edge_costs(grid, rho, rule)
    _, _, parent, hit = _search.dijkstra(
        grid.num_nodes,
        grid._ptr_list,
        grid._dst_list,
        cost,
        sources,
        targets=sinks,
        stop_at_target=True,
    )
    if hit < 0:
        return _search.INF, None
    curve = DiscreteCurve.from_nodes(grid, _search.extract_path(parent, hit))
    value = _line_integral(rho, curve, rule)
    return value, curve


def _line_integral(rho: np.ndarray, curve: DiscreteCurve, rule: str) -> float:
    r = rho[curve.nodes]
    if rule == "trapezoid":
        return float((0.5 * (r[:-1] + r[1:]) * curve.lengths).sum())
    return float((r[:-1] * curve.lengths).sum())


@dataclass(frozen=True)
class ConnectingFamily:
    """Curves joining two marked sides of the grid."""

    grid: MetricGrid
    source_label: str = "A"
    sink_label: str = "C"
    integration_rule: str = "trapezoid"

    def __post_init__(self):
        check_labels(self.grid, self.source_label, self.sink_label)
        if self.integration_rule not in ("trapezoid", "left_endpoint"):
            raise ValueError(f"unknown integration rule {self.integration_rule!r}")

    @property
    def sources(self) -> np.ndarray:
        return self.grid.label_nodes(self.source_label)

    @property
    def sinks(self) -> np.ndarray:
        return self.grid.label_nodes(self.sink_label)

    def geodesic_distance(self) -> float:
        """Length of the shortest member (the unit-density oracle value)."""
        value, _ = _min_rho_path(
            self.grid, np.ones(self.grid.num_nodes), self.sources, self.sinks,
            self.integration_rule,
        )
        return value

    def most_violated(self, rho) -> OracleCut:
        value, curve = shortest_admissible_curve(self, rho)
        if curve is None:
            return OracleCut(value, None, None)
        return OracleCut(value, curve_constraint(self.grid, curve, self.integration_rule), curve)

    def degenerate_status(self) -> str:
        g = self.grid
        if not _search.reachable(g.num_nodes, g._ptr_list, g._dst_list, self.sources, self.sinks):
            return "no_curves"
        return "ok"


@dataclass(frozen=True)
class SeparatingFamily:
    """Boundaries separating two sides, represented by dual paths.

    Every separating boundary of finite length dominates a simple curve
    joining the two complementary sides, so admissibility is enforced on
    those dual paths directly.  Assumes each component of the grid keeps
    its dual sides mutually reachable, which holds for the supported
    weight presets.
    """

    grid: MetricGrid
    separated_labels: tuple[str, str] = ("A", "C")
    dual_source: str = field(init=False)
    dual_sink: str = field(init=False)

    def __post_init__(self):
        pair = frozenset(self.separated_labels)
        if pair not in _DUAL_SIDES:
            raise ValueError(
                f"separated sides must be an opposite pair, got {self.separated_labels}"
            )
        src, snk = _DUAL_SIDES[pair]
        object.__setattr__(self, "dual_source", src)
        object.__setattr__(self, "dual_sink", snk)
        check_labels(self.grid, src, snk, *self.separated_labels)

    @property
    def sources(self) -> np.ndarray:
        return self.grid.label_nodes(self.dual_source)

    @property
    def sinks(self) -> np.ndarray:
        return self.grid.label_nodes(self.dual_sink)

    def most_violated(self, rho) -> OracleCut:
        value, constraint = most_violated_cut(self, rho)
        return OracleCut(value, constraint, None)

    def degenerate_status(self) -> str:
        g = self.grid
        e_nodes = g.label_nodes(self.separated_labels[0])
        f_nodes = g.label_nodes(self.separated_labels[1])
        if not _search.reachable(g.num_nodes, g._ptr_list, g._dst_list, e_nodes, f_nodes):
            # no positive-length curve joins the separated pair, so the
            # empty boundary separates and no density is admissible
            return "infinite"
        if not _search.reachable(g.num_nodes, g._ptr_list, g._dst_list, self.sources, self.sinks):
            return "no_curves"
        return "ok"


def shortest_admissible_curve(
    family: ConnectingFamily, rho
) -> tuple[float, DiscreteCurve | None]:
    """Cheapest family member under rho with one attaining path.

    Returns the minimum over grid paths of the discrete line integral under
    the family's integration rule.  If no path joins the sides the value is
    inf with no curve.  An all-zero rho returns 0 with a hop-minimal path.
    """
    rho = check_density_values(family.grid, rho)
    return _min_rho_path(
        family.grid, rho, family.sources, family.sinks, family.integration_rule
    )


def most_violated_cut(
    family: SeparatingFamily, rho
) -> tuple[float, MeasureConstraint | None]:
    """Dual path minimizing the rho mass of its H^1 length shares."""
    rho = check_density_values(family.grid, rho)
    value, curve = _min_rho_path(family.grid, rho, family.sources, family.sinks, "trapezoid")
    if curve is None:
        return value, None
    return value, curve_constraint(family.grid, curve, "trapezoid")
