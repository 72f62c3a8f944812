"""Weighted grid discretization of planar quadrilaterals.

A quadrilateral ``[0, width] x [0, height]`` is cut into ``n x n`` rectangular
cells with one node per cell center.  Lengths are measured in a chosen norm
(``l1``, ``l2`` or ``linf``), optionally rescaled by a conformal weight, and
areas carry the normalization constant that makes the 2-dimensional Hausdorff
measure of the chosen norm agree with the covering definition (for example a
unit square has measure pi/4 under the sup norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "NormTag",
    "Displacement",
    "HausdorffConstants",
    "MetricGrid",
    "ball_volume",
    "hausdorff_density_2d",
    "norm_length",
    "step_length",
    "cell_measure",
    "WEIGHT_PRESETS",
]


class NormTag(Enum):
    """Norm used for step lengths and Hausdorff normalization."""

    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def coerce(cls, value: "NormTag | str") -> "NormTag":
        if isinstance(value, NormTag):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown norm {value!r}; expected one of "
                f"{[t.value for t in cls]}"
            ) from None


@dataclass(frozen=True)
class Displacement:
    """Coordinate difference between two points."""

    dx: float
    dy: float


def ball_volume(k: float) -> float:
    """Volume of the k-dimensional Euclidean unit ball, pi^(k/2)/Gamma(k/2+1).

    Defined for real k >= 1.  ``ball_volume(1) == 2`` and
    ``ball_volume(2) == pi`` exactly (up to float rounding).
    """
    if k < 1:
        raise ValueError(f"ball_volume requires k >= 1, got {k}")
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


# Density of the norm's Hausdorff 2-measure against Lebesgue area: the
# covering normalization v2/4 divided by the norm's isodiametric constant
# (largest area of a set of unit diameter: 1 for linf, pi/4 for l2, 1/2
# for l1).  The l1 value is pinned by an isodiametric search in the tests.
_DENSITY_2D = {
    NormTag.L2: 1.0,
    NormTag.LINF: math.pi / 4.0,
    NormTag.L1: math.pi / 2.0,
}


def hausdorff_density_2d(norm: NormTag | str) -> float:
    """Constant c with H^2 = c * (Lebesgue area) for the given norm."""
    return _DENSITY_2D[NormTag.coerce(norm)]


def norm_length(norm: NormTag, dx: float, dy: float) -> float:
    """Length of the displacement (dx, dy) in the given norm."""
    if norm is NormTag.L2:
        return math.hypot(dx, dy)
    if norm is NormTag.LINF:
        return max(abs(dx), abs(dy))
    return abs(dx) + abs(dy)


def step_length(
    norm: NormTag | str,
    d: Displacement | tuple[float, float],
    weight_at_source: float = 1.0,
) -> float:
    """Length of one discrete step, rescaled by the conformal weight.

    The weight is sampled at the step's source node and multiplies the
    norm length of the displacement.
    """
    if weight_at_source <= 0:
        raise ValueError(f"weight_at_source must be > 0, got {weight_at_source}")
    norm = NormTag.coerce(norm)
    if isinstance(d, Displacement):
        dx, dy = d.dx, d.dy
    else:
        dx, dy = d
    return weight_at_source * norm_length(norm, dx, dy)


@dataclass(frozen=True)
class HausdorffConstants:
    """Normalization constants tied to a norm choice.

    ``v1`` and ``v2`` are the 1- and 2-dimensional unit ball volumes,
    ``density2d`` converts Lebesgue area into the norm's Hausdorff
    2-measure, and ``coarea_const = 2*v1/v2 = 4/pi`` is the constant in
    the coarea and Eilenberg bounds for two-dimensional domains.
    """

    v1: float
    v2: float
    density2d: float
    coarea_const: float

    @classmethod
    def for_norm(cls, norm: NormTag | str) -> "HausdorffConstants":
        norm = NormTag.coerce(norm)
        v1 = ball_volume(1)
        v2 = ball_volume(2)
        return cls(
            v1=v1,
            v2=v2,
            density2d=hausdorff_density_2d(norm),
            coarea_const=2.0 * v1 / v2,
        )


def _slit_weight(x: np.ndarray, y: np.ndarray, width: float, height: float, n: int) -> np.ndarray:
    # Vertical barrier one cell wide at mid-width; weight 0 marks removed
    # nodes, which disconnects the left and right sides.
    w = np.ones_like(x)
    w[np.abs(x - width / 2.0) < 0.51 * width / n] = 0.0
    return w


def _bump_weight(x: np.ndarray, y: np.ndarray, width: float, height: float, n: int) -> np.ndarray:
    cx, cy = width / 2.0, height / 2.0
    r2 = ((x - cx) / width) ** 2 + ((y - cy) / height) ** 2
    return 1.0 + 0.75 * np.exp(-8.0 * r2)


WEIGHT_PRESETS = {
    "ones": lambda x, y, width, height, n: np.ones_like(x),
    "bump": _bump_weight,
    "slit": _slit_weight,
}

# 8-neighborhood (king moves); 4-connectivity cannot realize sup-norm
# geodesics, which the sharp product case needs.
_OFFSETS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


class MetricGrid:
    """Cell-centered n x n grid over ``[0, width] x [0, height]``.

    Nodes are indexed ``j * n + i`` for column ``i`` and row ``j``.  Side
    labels A (left), B (bottom), C (right), D (top) run in cyclic order and
    hold the outermost node columns/rows with the four corner nodes left
    unlabeled: assigning a corner to one side would either break the
    pairwise disjointness of the sides or the exact diagonal symmetry
    between the (A,C) and (B,D) families.  Side labels therefore need
    ``n >= 3``; smaller grids are valid but carry no labels.

    A conformal ``weight`` multiplies step lengths and enters squared in
    cell measures.  Nodes with weight 0 (from presets such as ``"slit"``)
    are inactive: removed from the node set, the adjacency and all
    measures.  Instances are immutable after construction and safe for
    concurrent reads.
    """

    def __init__(
        self,
        n: int,
        width: float = 1.0,
        height: float = 1.0,
        norm: NormTag | str = NormTag.L2,
        weight=None,
    ):
        if n < 2:
            raise ValueError(f"grid needs n >= 2 cells per side, got {n}")
        if width <= 0 or height <= 0:
            raise ValueError("width and height must be positive")
        self.n = int(n)
        self.width = float(width)
        self.height = float(height)
        self.norm = NormTag.coerce(norm)
        self.constants = HausdorffConstants.for_norm(self.norm)

        ii, jj = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="xy")
        self._i = ii.ravel()
        self._j = jj.ravel()
        self.x = (self._i + 0.5) * self.hx
        self.y = (self._j + 0.5) * self.hy

        self.weight = self._resolve_weight(weight)
        self.active = np.isfinite(self.weight) & (self.weight > 0.0)
        if not self.active.any():
            raise ValueError("weight removes every node from the grid")
        if ((self.weight < 0) | ~np.isfinite(self.weight)).any():
            raise ValueError("weights must be finite and >= 0 (0 marks removed nodes)")

        self.side_labels = self._build_side_labels()
        self._build_adjacency()

        for arr in (self._i, self._j, self.x, self.y, self.weight, self.active):
            arr.setflags(write=False)

    # -- construction helpers -------------------------------------------

    def _resolve_weight(self, weight) -> np.ndarray:
        n2 = self.n * self.n
        if weight is None:
            return np.ones(n2)
        if isinstance(weight, str):
            key = weight.strip().lower()
            if key in WEIGHT_PRESETS:
                return np.asarray(
                    WEIGHT_PRESETS[key](self.x, self.y, self.width, self.height, self.n),
                    dtype=float,
                )
            try:
                return np.full(n2, float(key))
            except ValueError:
                raise ValueError(
                    f"unknown weight preset {weight!r}; expected a number or one of "
                    f"{sorted(WEIGHT_PRESETS)}"
                ) from None
        if np.isscalar(weight):
            value = float(weight)
            if value <= 0:
                raise ValueError("constant weight must be positive")
            return np.full(n2, value)
        if callable(weight):
            return np.asarray(weight(self.x, self.y), dtype=float)
        arr = np.asarray(weight, dtype=float).ravel()
        if arr.shape != (n2,):
            raise ValueError(f"weight array must have {n2} entries, got {arr.shape}")
        return arr.copy()

    def _build_side_labels(self) -> dict[str, np.ndarray]:
        if self.n < 3:
            return {}
        n = self.n
        inner = np.arange(1, n - 1)
        sides = {
            "A": self.node_index(np.zeros_like(inner), inner),
            "B": self.node_index(inner, np.zeros_like(inner)),
            "C": self.node_index(np.full_like(inner, n - 1), inner),
            "D": self.node_index(inner, np.full_like(inner, n - 1)),
        }
        out = {}
        for name, idx in sides.items():
            idx = idx[self.active[idx]]
            idx.setflags(write=False)
            out[name] = idx
        return out

    def _build_adjacency(self) -> None:
        n, n2 = self.n, self.n * self.n
        i, j = self._i, self._j
        srcs, dsts = [], []
        for di, dj in _OFFSETS:
            ok = (
                (i + di >= 0)
                & (i + di < n)
                & (j + dj >= 0)
                & (j + dj < n)
                & self.active
            )
            dst = (j[ok] + dj) * n + (i[ok] + di)
            keep = self.active[dst]
            srcs.append(np.nonzero(ok)[0][keep])
            dsts.append(dst[keep])
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        dx = self.x[dst] - self.x[src]
        dy = self.y[dst] - self.y[src]
        if self.norm is NormTag.L2:
            raw = np.hypot(dx, dy)
        elif self.norm is NormTag.LINF:
            raw = np.maximum(np.abs(dx), np.abs(dy))
        else:
            raw = np.abs(dx) + np.abs(dy)
        self._edge_src = src
        self._edge_dst = dst
        self._edge_len = self.weight[src] * raw
        self._nbr_ptr = np.zeros(n2 + 1, dtype=np.int64)
        np.add.at(self._nbr_ptr, src + 1, 1)
        np.cumsum(self._nbr_ptr, out=self._nbr_ptr)
        for arr in (self._edge_src, self._edge_dst, self._edge_len, self._nbr_ptr):
            arr.setflags(write=False)
        # plain-list mirrors for the heapq search inner loop
        self._ptr_list = self._nbr_ptr.tolist()
        self._dst_list = self._edge_dst.tolist()

    # -- basic geometry ---------------------------------------------------

    @property
    def hx(self) -> float:
        return self.width / self.n

    @property
    def hy(self) -> float:
        return self.height / self.n

    @property
    def spacing(self) -> float:
        """Largest single-coordinate node separation."""
        return max(self.hx, self.hy)

    @property
    def num_nodes(self) -> int:
        return self.n * self.n

    def node_index(self, i, j):
        return j * self.n + i

    def node_ij(self, idx: int) -> tuple[int, int]:
        return idx % self.n, idx // self.n

    def label_nodes(self, label: str) -> np.ndarray:
        try:
            return self.side_labels[label]
        except KeyError:
            known = sorted(self.side_labels)
            raise KeyError(f"unknown side label {label!r}; grid has {known}") from None

    def closed_side(self, label: str) -> np.ndarray:
        """Full outermost column/row for the side, corner nodes included.

        Side labels keep corners unassigned; level-set interfaces, whose
        endpoints may legitimately sit at corners, use this closure.
        """
        n = self.n
        full = np.arange(n)
        if label == "A":
            idx = self.node_index(np.zeros_like(full), full)
        elif label == "C":
            idx = self.node_index(np.full_like(full, n - 1), full)
        elif label == "B":
            idx = self.node_index(full, np.zeros_like(full))
        elif label == "D":
            idx = self.node_index(full, np.full_like(full, n - 1))
        else:
            raise KeyError(f"unknown side label {label!r}")
        return idx[self.active[idx]]

    def displacement(self, a: int, b: int) -> Displacement:
        return Displacement(self.x[b] - self.x[a], self.y[b] - self.y[a])

    def distance(self, a: int, b: int) -> float:
        """Weighted step length from node a to node b (weight at a)."""
        return step_length(self.norm, self.displacement(a, b), self.weight[a])

    def is_adjacent(self, a: int, b: int) -> bool:
        ia, ja = self.node_ij(a)
        ib, jb = self.node_ij(b)
        return (a != b) and abs(ia - ib) <= 1 and abs(ja - jb) <= 1

    # -- measures ----------------------------------------------------------

    def cell_measure(self, cell_index: int) -> float:
        """Hausdorff 2-measure of one cell; 0 for removed cells."""
        idx = int(cell_index)
        if not 0 <= idx < self.num_nodes:
            raise IndexError(f"cell index {cell_index} out of range [0, {self.num_nodes})")
        if not self.active[idx]:
            return 0.0
        return self.constants.density2d * self.weight[idx] ** 2 * self.hx * self.hy

    def cell_measures(self) -> np.ndarray:
        m = self.constants.density2d * self.weight**2 * self.hx * self.hy
        return np.where(self.active, m, 0.0)

    def total_measure(self) -> float:
        return float(self.cell_measures().sum())

    def __repr__(self) -> str:
        return (
            f"MetricGrid(n={self.n}, width={self.width}, height={self.height}, "
            f"norm={self.norm.value!r})"
        )


def cell_measure(grid: MetricGrid, cell_index: int) -> float:
    """Hausdorff 2-measure of the cell around node ``cell_index``."""
    return grid.cell_measure(cell_index)
