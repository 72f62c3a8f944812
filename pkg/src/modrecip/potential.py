"""Potentials built from upper gradients, and the coarea-type diagnostics.

``chain_potential`` integrates a positive gradient field from a source side
over all chains of bounded step radius (left-endpoint weights), which is the
construction whose local Lipschitz property and level-set coarea bound the
package verifies numerically.  ``capacity_potential`` is the plain
shortest-path potential with trapezoid weights.  Level sets are extracted
as dual paths through the interface between sublevel and superlevel nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _search
from .families import DiscreteCurve, curve_constraint
from .geometry import MetricGrid, NormTag, norm_length
from .validation import check_density_values, check_level

__all__ = [
    "ChainPotential",
    "LevelSetSlice",
    "CoareaReport",
    "EilenbergReport",
    "chain_potential",
    "capacity_potential",
    "level_set_boundary",
    "coarea_check",
    "eilenberg_check",
    "sink_infimum",
    "normalized",
]

_DUAL_OF_SOURCE = {"A": ("B", "D"), "C": ("B", "D"), "B": ("A", "C"), "D": ("A", "C")}


@dataclass(frozen=True)
class ChainPotential:
    """Chain-integrated gradient from a source side.

    ``distance`` is the infimum of ``sum(g(x_k) * d(x_k, x_{k+1}))`` over
    chains from the source whose steps stay within ``step_radius``;
    unreachable nodes keep the value inf.  ``potential`` clamps it at 1,
    so unreachable nodes sit at 1 and the source at 0.
    """

    grid: MetricGrid
    gradient: np.ndarray
    step_radius: float
    distance: np.ndarray
    potential: np.ndarray
    source_label: str
    sink_label: str | None = None


@dataclass(frozen=True)
class LevelSetSlice:
    """Interface between a sublevel and superlevel set, read as a dual path."""

    t: float
    boundary_nodes: np.ndarray
    h1_measure: float
    curve: DiscreteCurve | None
    empty: bool


@dataclass(frozen=True)
class CoareaReport:
    lhs: float
    rhs: float
    ratio: float
    num_levels: int
    empty_slices: int


@dataclass(frozen=True)
class EilenbergReport:
    lhs: float
    rhs: float
    ratio: float
    lip: float
    area: float


def _radius_adjacency(grid: MetricGrid, radius: float):
    """CSR adjacency of the geometric graph with steps up to ``radius``."""
    n = grid.n
    kx = int(radius / grid.hx + 1e-9)
    ky = int(radius / grid.hy + 1e-9)
    offsets = []
    for dj in range(-ky, ky + 1):
        for di in range(-kx, kx + 1):
            if di == 0 and dj == 0:
                continue
            if norm_length(grid.norm, di * grid.hx, dj * grid.hy) <= radius * (1 + 1e-12):
                offsets.append((di, dj))
    i, j, active = grid._i, grid._j, grid.active
    srcs, dsts = [], []
    for di, dj in offsets:
        ok = (i + di >= 0) & (i + di < n) & (j + dj >= 0) & (j + dj < n) & active
        dst = (j[ok] + dj) * n + (i[ok] + di)
        keep = active[dst]
        srcs.append(np.nonzero(ok)[0][keep])
        dsts.append(dst[keep])
    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    dx = grid.x[dst] - grid.x[src]
    dy = grid.y[dst] - grid.y[src]
    if grid.norm is NormTag.L2:
        raw = np.hypot(dx, dy)
    elif grid.norm is NormTag.LINF:
        raw = np.maximum(np.abs(dx), np.abs(dy))
    else:
        raw = np.abs(dx) + np.abs(dy)
    length = grid.weight[src] * raw
    ptr = np.zeros(grid.num_nodes + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    np.cumsum(ptr, out=ptr)
    return src, dst, length, ptr


def chain_potential(
    grid: MetricGrid,
    gradient,
    source_label: str = "A",
    step_radius: float | None = None,
    sink_label: str | None = None,
) -> ChainPotential:
    """Shortest chain integral of a strictly positive gradient field.

    Chain steps may join any two nodes within ``step_radius`` (default
    three grid spacings) and are weighted by the gradient at the step's
    start.  A radius below the grid spacing would disconnect the chain
    graph and is rejected.
    """
    g = check_density_values(grid, gradient)
    if not (g[grid.active] > 0).all():
        raise ValueError("chain potential needs a strictly positive gradient field")
    if step_radius is None:
        step_radius = 3.0 * grid.spacing
    if step_radius < grid.spacing:
        raise ValueError(
            f"step_radius {step_radius} below the grid spacing {grid.spacing} "
            "disconnects the chain graph"
        )
    sources = grid.label_nodes(source_label)
    if len(sources) == 0:
        raise ValueError(f"source side {source_label!r} is empty")
    src, dst, length, ptr = _radius_adjacency(grid, step_radius)
    cost = (g[src] * length).tolist()
    dist, _, _, _ = _search.dijkstra(
        grid.num_nodes, ptr.tolist(), dst.tolist(), cost, sources
    )
    distance = np.asarray(dist)
    potential = np.minimum(distance, 1.0)
    return ChainPotential(
        grid=grid,
        gradient=g,
        step_radius=float(step_radius),
        distance=distance,
        potential=potential,
        source_label=source_label,
        sink_label=sink_label,
    )


def capacity_potential(grid: MetricGrid, gradient, source_label: str = "A") -> np.ndarray:
    """Clamped shortest-path integral min(inf over paths of int g ds, 1).

    Uses the grid's 8-neighbor paths with trapezoid weights; admissible
    gradients drive the opposite side to 1.
    """
    g = check_density_values(grid, gradient)
    sources = grid.label_nodes(source_label)
    cost = (grid._edge_len * 0.5 * (g[grid._edge_src] + g[grid._edge_dst])).tolist()
    dist, _, _, _ = _search.dijkstra(
        grid.num_nodes, grid._ptr_list, grid._dst_list, cost, sources
    )
    return np.minimum(np.asarray(dist), 1.0)


def _induced_subgraph(grid: MetricGrid, node_mask: np.ndarray):
    """Length-weighted CSR over the nodes selected by ``node_mask``."""
    nodes = np.nonzero(node_mask)[0]
    local = -np.ones(grid.num_nodes, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    e = node_mask[grid._edge_src] & node_mask[grid._edge_dst]
    src = local[grid._edge_src[e]]
    dst = local[grid._edge_dst[e]]
    length = grid._edge_len[e]
    order = np.lexsort((dst, src))
    src, dst, length = src[order], dst[order], length[order]
    ptr = np.zeros(nodes.size + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    np.cumsum(ptr, out=ptr)
    return nodes, ptr, dst, length


def level_set_boundary(pot: ChainPotential, t: float) -> LevelSetSlice:
    """Interface of the sublevel set {potential < t}, assembled as a dual path.

    The boundary nodes are the superlevel nodes adjacent to the sublevel
    set, so no grid edge crosses the level without meeting them.  The H^1
    measure is the length of the shortest dual path running through the
    interface between the sides adjacent to the potential's source; when
    either side of the level set is empty, or no such path exists, the
    slice is flagged with measure zero.
    """
    t = check_level(t)
    grid = pot.grid
    u = pot.potential
    sub = grid.active & (u < t)
    sup = grid.active & ~(u < t)
    if not sub.any() or not sup.any():
        return LevelSetSlice(t, np.empty(0, dtype=np.int64), 0.0, None, True)
    iface = np.zeros(grid.num_nodes, dtype=bool)
    crossing = sup[grid._edge_src] & sub[grid._edge_dst]
    iface[grid._edge_src[crossing]] = True
    boundary = np.nonzero(iface)[0]

    dual_src_label, dual_snk_label = _DUAL_OF_SOURCE[pot.source_label]
    sources = [v for v in grid.closed_side(dual_src_label) if iface[v]]
    sinks = [v for v in grid.closed_side(dual_snk_label) if iface[v]]
    if not sources or not sinks:
        return LevelSetSlice(t, boundary, 0.0, None, True)
    nodes, ptr, dst, length = _induced_subgraph(grid, iface)
    local = {int(v): k for k, v in enumerate(nodes)}
    _, _, parent, hit = _search.dijkstra(
        nodes.size,
        ptr.tolist(),
        dst.tolist(),
        length.tolist(),
        [local[int(v)] for v in sources],
        targets=[local[int(v)] for v in sinks],
        stop_at_target=True,
    )
    if hit < 0:
        return LevelSetSlice(t, boundary, 0.0, None, True)
    path = nodes[_search.extract_path(parent, hit)]
    curve = DiscreteCurve.from_nodes(grid, path)
    return LevelSetSlice(t, boundary, curve.total_length, curve, False)


def coarea_check(pot: ChainPotential, rho, num_levels: int = 64) -> CoareaReport:
    """Level-set mass integral against its gradient upper bound.

    ``lhs`` integrates the rho mass of the level-set dual paths over
    midpoint levels in (0, 1); ``rhs`` is ``(4/pi) * sum(rho * g * measure)``.
    Flagged-empty slices contribute zero mass.
    """
    if num_levels < 16:
        raise ValueError(f"num_levels must be at least 16, got {num_levels}")
    grid = pot.grid
    rho = check_density_values(grid, rho)
    lhs = 0.0
    empty = 0
    for k in range(num_levels):
        t = (k + 0.5) / num_levels
        piece = level_set_boundary(pot, t)
        if piece.empty:
            empty += 1
            continue
        lhs += curve_constraint(grid, piece.curve, "trapezoid").mass(rho) / num_levels
    rhs = grid.constants.coarea_const * float(
        (rho * pot.gradient * grid.cell_measures()).sum()
    )
    ratio = lhs / rhs if rhs > 0 else 0.0
    return CoareaReport(lhs=lhs, rhs=rhs, ratio=ratio, num_levels=num_levels, empty_slices=empty)


def _interp(p0, p1, v0, v1, t):
    s = (t - v0) / (v1 - v0)
    return (p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1]))


def _cell_segments(corners, values, t):
    """Marching-squares segments of the level {u = t} inside one lattice cell.

    ``corners``/``values`` run counterclockwise from the bottom-left.  The
    saddle configurations are resolved by the cell-center average.
    """
    inside = [v >= t for v in values]
    code = inside[0] | inside[1] << 1 | inside[2] << 2 | inside[3] << 3
    if code in (0, 15):
        return []
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
        if inside[a] != inside[b]:
            edges.append(_interp(corners[a], corners[b], values[a], values[b], t))
    if len(edges) == 2:
        return [(edges[0], edges[1])]
    # saddle: two opposite corners above; pair crossings by the center value
    center_in = sum(values) / 4.0 >= t
    bottom, right, top, left = edges
    if (code == 5) == center_in:
        return [(bottom, right), (top, left)]
    return [(bottom, left), (right, top)]


def eilenberg_check(grid: MetricGrid, values, mask=None, num_bins: int = 64) -> EilenbergReport:
    """Level-measure integral of a sampled function against its Lipschitz bound.

    ``lhs`` bins the value range and sums marching-squares level-line
    lengths (in the grid's norm, conformally weighted) over lattice cells
    whose four corners lie in the mask.  ``rhs`` is ``(4/pi) * LIP * area``
    with LIP the largest adjacent difference quotient inside the mask.
    A function constant on the mask reports lhs = 0 and ratio 0.
    """
    u = np.asarray(values, dtype=float).ravel()
    if u.shape != (grid.num_nodes,):
        raise ValueError(f"need {grid.num_nodes} node values, got shape {u.shape}")
    if not np.isfinite(u).all():
        raise ValueError("function values must be finite")
    if mask is None:
        mask = grid.active.copy()
    else:
        mask = np.asarray(mask)
        if mask.dtype != bool:
            full = np.zeros(grid.num_nodes, dtype=bool)
            full[np.asarray(mask, dtype=np.int64)] = True
            mask = full
        mask = mask & grid.active

    area = float(grid.cell_measures()[mask].sum())
    pair = mask[grid._edge_src] & mask[grid._edge_dst]
    if pair.any():
        quot = np.abs(u[grid._edge_dst[pair]] - u[grid._edge_src[pair]]) / grid._edge_len[pair]
        lip = float(quot.max())
    else:
        lip = 0.0
    rhs = grid.constants.coarea_const * lip * area

    umin = float(u[mask].min()) if mask.any() else 0.0
    umax = float(u[mask].max()) if mask.any() else 0.0
    if umax <= umin:
        return EilenbergReport(lhs=0.0, rhs=rhs, ratio=0.0, lip=lip, area=area)

    n = grid.n
    u2 = u.reshape(n, n)
    m2 = mask.reshape(n, n)
    w2 = grid.weight.reshape(n, n)
    cell_ok = m2[:-1, :-1] & m2[:-1, 1:] & m2[1:, 1:] & m2[1:, :-1]
    vals = np.stack([u2[:-1, :-1], u2[:-1, 1:], u2[1:, 1:], u2[1:, :-1]])
    wmean = (w2[:-1, :-1] + w2[:-1, 1:] + w2[1:, 1:] + w2[1:, :-1]) / 4.0
    vmin, vmax = vals.min(axis=0), vals.max(axis=0)
    hx, hy = grid.hx, grid.hy
    x0 = grid.x.reshape(n, n)[0]
    y0 = grid.y.reshape(n, n)[:, 0]

    lhs = 0.0
    dt = (umax - umin) / num_bins
    for k in range(num_bins):
        t = umin + (k + 0.5) * dt
        jj, ii = np.nonzero(cell_ok & (vmin < t) & (vmax >= t))
        total = 0.0
        for j, i in zip(jj.tolist(), ii.tolist()):
            cx, cy = x0[i], y0[j]
            corners = ((cx, cy), (cx + hx, cy), (cx + hx, cy + hy), (cx, cy + hy))
            cvals = (vals[0, j, i], vals[1, j, i], vals[2, j, i], vals[3, j, i])
            for (ax, ay), (bx, by) in _cell_segments(corners, cvals, t):
                total += norm_length(grid.norm, bx - ax, by - ay) * wmean[j, i]
        lhs += total * dt
    ratio = lhs / rhs if rhs > 0 else 0.0
    return EilenbergReport(lhs=lhs, rhs=rhs, ratio=ratio, lip=lip, area=area)


def sink_infimum(pot: ChainPotential, sink_label: str | None = None) -> float:
    """Smallest potential value on the sink side."""
    label = sink_label or pot.sink_label
    if label is None:
        raise ValueError("potential carries no sink label")
    nodes = pot.grid.label_nodes(label)
    return float(pot.potential[nodes].min())


def normalized(pot: ChainPotential, sink_label: str | None = None) -> ChainPotential:
    """Rescale so the sink side reaches potential 1.

    Divides the chain distances and the gradient by the sink infimum,
    which turns a merely positive gradient into an admissible-scale one.
    """
    a = sink_infimum(pot, sink_label)
    if not a > 0:
        raise ValueError("sink infimum is zero; nothing to normalize")
    distance = pot.distance / a
    return ChainPotential(
        grid=pot.grid,
        gradient=pot.gradient / a,
        step_radius=pot.step_radius,
        distance=distance,
        potential=np.minimum(distance, 1.0),
        source_label=pot.source_label,
        sink_label=sink_label or pot.sink_label,
    )
