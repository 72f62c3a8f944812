"""Shortest-path primitives shared by the constraint oracles and potentials.

Distances are compared lexicographically as (cost, hop count), and the heap
breaks remaining ties by node index, so searches are deterministic and an
all-zero cost field yields hop-minimal paths.
"""

from __future__ import annotations

import heapq
from collections import deque

INF = float("inf")


def dijkstra(
    num_nodes: int,
    ptr,
    dst,
    cost,
    sources,
    targets=None,
    stop_at_target: bool = False,
):
    """Multi-source Dijkstra over a CSR edge list.

    ``ptr``/``dst`` are CSR adjacency arrays (plain lists are fastest),
    ``cost`` a per-edge nonnegative cost list aligned with ``dst``.
    Returns ``(dist, hops, parent, hit)`` where ``hit`` is the first target
    settled (the target minimizing (cost, hops, index)) or -1.  With
    ``stop_at_target`` the search halts there, leaving farther entries inf.
    """
    dist = [INF] * num_nodes
    hops = [0] * num_nodes
    parent = [-1] * num_nodes
    done = bytearray(num_nodes)
    target_set = set(int(t) for t in targets) if targets is not None else None

    heap = [(0.0, 0, int(s)) for s in sorted(set(int(s) for s in sources))]
    heapq.heapify(heap)
    for _, _, s in heap:
        dist[s] = 0.0
    hit = -1
    push = heapq.heappush
    pop = heapq.heappop
    while heap:
        d, h, u = pop(heap)
        if done[u]:
            continue
        done[u] = 1
        dist[u] = d
        hops[u] = h
        if target_set is not None and u in target_set and hit < 0:
            hit = u
            if stop_at_target:
                break
        for e in range(ptr[u], ptr[u + 1]):
            v = dst[e]
            if done[v]:
                continue
            nd = d + cost[e]
            nh = h + 1
            if nd < dist[v] or (nd == dist[v] and nh < hops[v]):
                dist[v] = nd
                hops[v] = nh
                parent[v] = u
                push(heap, (nd, nh, v))
    return dist, hops, parent, hit


def extract_path(parent, node: int) -> list[int]:
    """Walk parent pointers back to the tree root; returns source-first order."""
    path = [int(node)]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def reachable(num_nodes: int, ptr, dst, sources, targets) -> bool:
    """True when some target can be reached from the source set."""
    target_set = set(int(t) for t in targets)
    if not target_set:
        return False
    seen = bytearray(num_nodes)
    queue = deque()
    for s in sources:
        s = int(s)
        if not seen[s]:
            seen[s] = 1
            queue.append(s)
    while queue:
        u = queue.popleft()
        if u in target_set:
            return True
        for e in range(ptr[u], ptr[u + 1]):
            v = dst[e]
            if not seen[v]:
                seen[v] = 1
                queue.append(v)
    return False
