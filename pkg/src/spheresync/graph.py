"""Switching directed graphs.

Edge convention, used everywhere in this package: ``(i, j)`` is an edge iff
``j`` is a neighbor of ``i``, i.e. agent ``i`` measures agent ``j`` and moves
toward it. "``i`` is connected to ``j``" means a directed path ``i -> ... -> j``
along such edges. A root of a quasi-strongly connected graph is a node every
other node is connected to.
"""

from __future__ import annotations

import bisect
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DirectedGraph:
    node_count: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge {(i, j)} out of range for n={self.node_count}")
        object.__setattr__(self, "edges", edges)

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix ``A`` with ``A[i, j]`` iff ``j`` is a neighbor of ``i``."""
        A = np.zeros((self.node_count, self.node_count), dtype=bool)
        for i, j in self.edges:
            A[i, j] = True
        return A

    def union(self, other: "DirectedGraph") -> "DirectedGraph":
        if other.node_count != self.node_count:
            raise ValueError("node counts differ")
        return DirectedGraph(self.node_count, self.edges | other.edges)

    @classmethod
    def complete(cls, n: int) -> "DirectedGraph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))

    @classmethod
    def cycle(cls, n: int) -> "DirectedGraph":
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)) if n > 1 else frozenset())


def _reachable(succ: list[list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in succ[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def _successors(g: DirectedGraph, reverse: bool = False) -> list[list[int]]:
    succ: list[list[int]] = [[] for _ in range(g.node_count)]
    for i, j in sorted(g.edges):
        if reverse:
            succ[j].append(i)
        else:
            succ[i].append(j)
    return succ


def is_strongly_connected(g: DirectedGraph) -> bool:
    n = g.node_count
    if n <= 1:
        return True
    return (
        len(_reachable(_successors(g), 0)) == n
        and len(_reachable(_successors(g, reverse=True), 0)) == n
    )


def is_quasi_strongly_connected(g: DirectedGraph):
    """Return a root (every node has a path to it), or ``None``."""
    n = g.node_count
    if n == 0:
        return None
    pred = _successors(g, reverse=True)
    for r in range(n):
        if len(_reachable(pred, r)) == n:
            return r
    return None


def _connected(g: DirectedGraph, mode: str) -> bool:
    if mode == "strong":
        return is_strongly_connected(g)
    if mode == "quasi_strong":
        return is_quasi_strongly_connected(g) is not None
    raise ValueError(f"unknown connectivity mode {mode!r}")


@dataclass(frozen=True)
class GraphSchedule:
    """Piecewise-constant, right-continuous graph signal.

    Segment ``k`` is active on ``[t_k, t_{k+1})``; the last segment extends to
    infinity. ``dwell_bound`` must be strictly smaller than every gap between
    consecutive switches. ``window`` is the length ``T`` of the uniform
    connectivity windows. ``horizon`` optionally bounds the times of interest.
    """

    node_count: int
    segments: tuple
    dwell_bound: float
    window: float
    horizon: float | None = None

    def __post_init__(self):
        segs = tuple((float(t), g) for t, g in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        for _, g in segs:
            if g.node_count != self.node_count:
                raise ValueError("segment graph has wrong node count")
        for (t0, _), (t1, _) in zip(segs, segs[1:]):
            if not t1 > t0:
                raise ValueError("segment start times must be strictly increasing")
            if not t1 - t0 > self.dwell_bound:
                raise ValueError(
                    f"switch gap {t1 - t0:.6g} at t={t1:.6g} violates dwell bound {self.dwell_bound}"
                )
        if self.dwell_bound <= 0 or self.window <= 0:
            raise ValueError("dwell_bound and window must be positive")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", [t for t, _ in segs])

    @property
    def start(self) -> float:
        return self.segments[0][0]

    def switch_times(self, t0: float = -math.inf, t1: float = math.inf) -> list[float]:
        """Switch instants strictly inside ``(t0, t1)``."""
        return [t for t in self._starts[1:] if t0 < t < t1]

    def segment_index(self, t: float) -> int:
        if t < self.start:
            raise ValueError(f"t={t} precedes the schedule start {self.start}")
        return bisect.bisect_right(self._starts, t) - 1

    def graph_at(self, t: float) -> DirectedGraph:
        return self.segments[self.segment_index(t)][1]

    def to_dict(self) -> dict:
        out = {
            "n": self.node_count,
            "tau_D": self.dwell_bound,
            "T": self.window,
            "segments": [
                {"t": t, "edges": [list(e) for e in sorted(g.edges)]} for t, g in self.segments
            ],
        }
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GraphSchedule":
        n = int(data["n"])
        segments = [
            (float(s["t"]), DirectedGraph(n, frozenset(tuple(e) for e in s["edges"])))
            for s in data["segments"]
        ]
        return cls(
            node_count=n,
            segments=tuple(segments),
            dwell_bound=float(data["tau_D"]),
            window=float(data["T"]),
            horizon=None if data.get("horizon") is None else float(data["horizon"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "GraphSchedule":
        return cls.from_dict(json.loads(text))

    @classmethod
    def static(cls, graph: DirectedGraph, window: float = 1.0, dwell_bound: float = 1.0,
               start: float = 0.0, horizon=None) -> "GraphSchedule":
        return cls(graph.node_count, ((start, graph),), dwell_bound, window, horizon)


def graph_at(schedule: GraphSchedule, t: float) -> DirectedGraph:
    return schedule.graph_at(t)


def union_graph(schedule: GraphSchedule, t1: float, t2: float) -> DirectedGraph:
    """Union of all graphs active somewhere in the half-open interval ``[t1, t2)``."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    starts = schedule._starts
    lo = schedule.segment_index(max(t1, schedule.start))
    edges: set = set()
    for k in range(lo, len(starts)):
        if starts[k] >= t2:
            break
        edges |= schedule.segments[k][1].edges
    return DirectedGraph(schedule.node_count, frozenset(edges))


@dataclass
class ConnectivityReport:
    connected: bool
    mode: str
    windows_checked: int
    first_failing_window: float | None = None

    def to_dict(self) -> dict:
        return {
            "connected": self.connected,
            "mode": self.mode,
            "windows_checked": self.windows_checked,
            "first_failing_window": self.first_failing_window,
        }


def is_uniformly_connected(schedule: GraphSchedule, mode: str = "quasi_strong",
                           horizon: float | None = None) -> ConnectivityReport:
    """Check that every window ``[t, t + T)`` has a (quasi-)strongly connected union.

    The union is piecewise constant in ``t`` with breakpoints at switch times
    ``s`` and at ``s - T``; every breakpoint and every midpoint between
    consecutive breakpoints is checked, plus a ``T/10`` grid. Anchors range
    over ``[start, horizon - T]``, or up to the last switch when no horizon is
    known (after it the union is the final graph).
    """
    T = schedule.window
    start = schedule.start
    horizon = horizon if horizon is not None else schedule.horizon
    if horizon is not None:
        last = max(start, horizon - T)
    else:
        last = schedule._starts[-1]
    bps = {start, last}
    for s in schedule._starts:
        for b in (s, s - T):
            if start <= b <= last:
                bps.add(b)
    bps = sorted(bps)
    anchors = set(bps)
    anchors.update(0.5 * (a + b) for a, b in zip(bps, bps[1:]))
    step = T / 10.0
    k = 0
    while start + k * step <= last:
        anchors.add(start + k * step)
        k += 1
    anchors = sorted(anchors)
    for t in anchors:
        if not _connected(union_graph(schedule, t, t + T), mode):
            return ConnectivityReport(False, mode, len(anchors), t)
    return ConnectivityReport(True, mode, len(anchors), None)


def random_schedule(n: int, switch_period: float, horizon: float, mode: str = "quasi_strong",
                    seed=None, extra_edge_prob: float = 0.15) -> GraphSchedule:
    """Random switching schedule that is uniformly connected by construction.

    A fixed backbone is drawn once: a spanning in-tree toward node 0 for
    ``quasi_strong`` (so node 0 is the designated root), a directed Hamiltonian
    cycle for ``strong``. Its edges are split into two halves that alternate
    between consecutive segments; each segment also gets random extra edges.
    Any window of length ``T = 2 * switch_period`` contains both halves.
    """
    if mode not in ("strong", "quasi_strong"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if n == 1:
        backbone = []
    elif mode == "quasi_strong":
        order = [0] + [int(v) + 1 for v in rng.permutation(n - 1)]
        backbone = []
        for pos in range(1, n):
            parent = order[int(rng.integers(0, pos))]
            backbone.append((order[pos], parent))
    else:
        perm = [int(v) for v in rng.permutation(n)]
        backbone = [(perm[k], perm[(k + 1) % n]) for k in range(n)]
    halves = (backbone[0::2], backbone[1::2])

    segments = []
    k = 0
    while k * switch_period < horizon or k == 0:
        edges = set(halves[k % 2])
        for i in range(n):
            for j in range(n):
                if i != j and rng.uniform() < extra_edge_prob:
                    edges.add((i, j))
        segments.append((k * switch_period, DirectedGraph(n, frozenset(edges))))
        k += 1
    return GraphSchedule(
        node_count=n,
        segments=tuple(segments),
        dwell_bound=0.5 * switch_period,
        window=2.0 * switch_period,
        horizon=horizon,
    )
