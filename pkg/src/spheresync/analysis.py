"""Trajectory monitors for consensus, invariance and Lyapunov claims.

Monitors are post-processing over a :class:`~spheresync.integrator.Trajectory`
and return a :class:`MetricSeries` with a verdict. Monotonicity checks are
per sample step (tolerance ``MONO_TOL``), never cumulative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    distance_to_hull,
    equatorial_project,
    geodesic_angle,
    hull_membership,
    origin_in_convex_hull,
)

MONO_TOL = 1e-9
PASS, FAIL, NA = "pass", "fail", "not_applicable"


@dataclass
class MetricSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    verdict: str
    first_violation_time: float | None = None
    witness: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def report(self) -> dict:
        out = {"monitor": self.name, "verdict": self.verdict}
        if self.first_violation_time is not None:
            out["first_violation_time"] = self.first_violation_time
        if self.witness:
            out["witness"] = _jsonable(self.witness)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def verdicts_json(series) -> str:
    return json.dumps([s.report() for s in series], indent=2, sort_keys=True)


def _na(name, traj, reason):
    return MetricSeries(name, traj.times, np.full(len(traj.times), np.nan), NA,
                        witness={"reason": reason})


def _first_bad(times, ok):
    bad = np.flatnonzero(~ok)
    return None if bad.size == 0 else float(times[bad[0]])


def _nonincreasing(name, times, values, tol=MONO_TOL, witness=None):
    ok = np.ones(len(values), dtype=bool)
    ok[1:] = np.diff(values) <= tol
    t_bad = _first_bad(times, ok)
    w = dict(witness or {})
    if len(values) > 1:
        w["max_increase"] = float(np.max(np.diff(values)))
    return MetricSeries(name, times, values, PASS if t_bad is None else FAIL, t_bad, w)


def consensus_diameter(x) -> float:
    """Largest pairwise chordal distance ``max_ij |x_i - x_j|``."""
    x = np.asarray(x, dtype=float)
    D = x[None, :, :] - x[:, None, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", D, D))))


def diameter_series(traj) -> np.ndarray:
    return np.array([consensus_diameter(_points(traj, k)) for k in range(len(traj.times))])


def _points(traj, k):
    s = traj.states[k]
    return s[:, :, 0] if traj.kind == "rotations" else s


def monitor_consensus(traj, tol: float = 1e-6) -> MetricSeries:
    """Pass iff the terminal consensus diameter is below ``tol``."""
    vals = diameter_series(traj)
    ok = bool(vals[-1] < tol)
    return MetricSeries("consensus", traj.times, vals, PASS if ok else FAIL,
                        None if ok else float(traj.times[-1]),
                        {"terminal_diameter": float(vals[-1]), "tol": tol})


def monitor_hemisphere_invariance(traj, ball_center, ball_radius: float,
                                  tol: float = 1e-9) -> MetricSeries:
    """Every state stays within geodesic distance ``ball_radius`` of the center.

    Not applicable unless the initial states lie in the ball and the ball is
    inside an open hemisphere (radius < pi/2).
    """
    name = "hemisphere_invariance"
    c = np.asarray(ball_center, dtype=float)
    c = c / np.linalg.norm(c)
    ang = np.array([geodesic_angle(c[None, :], _points(traj, k)).max()
                    for k in range(len(traj.times))])
    if ball_radius >= np.pi / 2:
        return _na(name, traj, "ball is not inside an open hemisphere")
    if ang[0] > ball_radius + tol:
        return _na(name, traj, "initial states are not in the ball")
    ok = ang <= ball_radius + tol
    t_bad = _first_bad(traj.times, ok)
    return MetricSeries(name, traj.times, ang, PASS if t_bad is None else FAIL, t_bad,
                        {"max_angle": float(ang.max()), "radius": ball_radius})


def monitor_max_norm_lyapunov(traj, tol: float = MONO_TOL) -> MetricSeries:
    """``max_i |y_i|^2`` of the equatorial projections must not increase.

    Takes a sphere (or rotation) trajectory and projects it; not applicable
    unless every initial state is on the open northern hemisphere.
    """
    name = "max_norm_lyapunov"
    x0 = _points(traj, 0)
    if np.any(x0[:, 0] <= 0):
        return _na(name, traj, "initial states not all on the northern hemisphere")
    vals = np.array([
        max(float(np.dot(y, y)) for y in map(equatorial_project, _points(traj, k)))
        for k in range(len(traj.times))
    ])
    return _nonincreasing(name, traj.times, vals, tol)


def monitor_pairwise_lyapunov(traj, tol: float = MONO_TOL) -> MetricSeries:
    """``max_ij |z_i - z_j|^2`` must not increase; needs 0 outside the initial hull."""
    name = "pairwise_lyapunov"
    if origin_in_convex_hull(traj.states[0]):
        return _na(name, traj, "origin lies in the initial convex hull")
    vals = diameter_series(traj) ** 2
    return _nonincreasing(name, traj.times, vals, tol)


def ratio_statistic(z) -> float:
    r = np.linalg.norm(np.asarray(z, dtype=float), axis=1)
    return float(r.max() / r.min())


def monitor_ratio_bound(traj, alpha: float, rel_tol: float = 1e-6) -> MetricSeries:
    """``V(t) <= exp(3 alpha n t) V(0)`` with ``V = max_ij |z_i| / |z_j|``."""
    n = traj.states.shape[1]
    vals = np.array([ratio_statistic(z) for z in traj.states])
    elapsed = traj.times - traj.times[0]
    with np.errstate(over="ignore"):
        bound = np.exp(3.0 * alpha * n * elapsed) * vals[0] * (1.0 + rel_tol)
    ok = vals <= bound
    t_bad = _first_bad(traj.times, ok)
    min_norm = min(float(np.linalg.norm(z, axis=1).min()) for z in traj.states)
    return MetricSeries("ratio_bound", traj.times, vals, PASS if t_bad is None else FAIL, t_bad,
                        {"alpha": alpha, "max_ratio": float(vals.max()), "min_norm": min_norm})


def monitor_hull_invariance(traj, tol: float = 1e-7) -> MetricSeries:
    """Every ``z_i(t)`` stays within ``tol`` of the convex hull of the initial states."""
    hull = traj.states[0]
    vals = np.array([max(distance_to_hull(z, hull) for z in frame) for frame in traj.states])
    ok = vals <= tol
    t_bad = _first_bad(traj.times, ok)
    return MetricSeries("hull_invariance", traj.times, vals, PASS if t_bad is None else FAIL,
                        t_bad, {"max_distance": float(vals.max())})


def monitor_point_convergence(traj, tol: float = 1e-6, trailing: float = 0.1) -> MetricSeries:
    """Diameter and per-agent displacement over the trailing window are below ``tol``.

    The witness carries ``limit``: the mean terminal state, normalized for
    sphere trajectories.
    """
    pts = np.array([_points(traj, k) for k in range(len(traj.times))])
    t_end = traj.times[-1]
    t_start = t_end - trailing * (t_end - traj.times[0])
    mask = traj.times >= t_start
    tail = pts[mask]
    diam = np.array([consensus_diameter(x) for x in tail])
    disp = float(np.max(np.linalg.norm(tail - tail[-1], axis=2)))
    limit = pts[-1].mean(axis=0)
    if traj.kind != "lifted":
        limit = limit / np.linalg.norm(limit)
    vals = diameter_series(traj)
    ok = bool(diam.max() < tol and disp < tol)
    return MetricSeries("point_convergence", traj.times, vals, PASS if ok else FAIL,
                        None if ok else float(t_start),
                        {"limit": limit, "trailing_diameter": float(diam.max()),
                         "trailing_displacement": disp})


def monitor_origin_attraction(traj, weights, tol: float = 1e-5) -> MetricSeries:
    """Lifted diameter below ``tol`` at the horizon end, with 0 in the initial hull.

    Not applicable when the weights declare no positive lower bound, or when
    the origin is outside the initial hull.
    """
    name = "origin_attraction"
    if weights.lower_bound is None or weights.lower_bound <= 0:
        return _na(name, traj, "weight family declares no positive lower bound K_d")
    membership = hull_membership(traj.states[0])
    if membership == "outside":
        return _na(name, traj, "origin is outside the initial convex hull")
    vals = diameter_series(traj)
    ok = bool(vals[-1] < tol)
    return MetricSeries(name, traj.times, vals, PASS if ok else FAIL,
                        None if ok else float(traj.times[-1]),
                        {"terminal_diameter": float(vals[-1]), "hull": membership,
                         "limit_norm": float(np.linalg.norm(traj.states[-1].mean(axis=0)))})


def monitor_circle_closed_form(traj, weights, schedule, tol: float = 1e-8) -> MetricSeries:
    """Two agents on the circle, static complete graph, constant weights.

    The angle gap obeys ``phi' = -(a_01 + a_10) sin(phi)``, hence
    ``tan(phi/2) = tan(phi0/2) exp(-(a_01 + a_10) t)``.
    """
    name = "circle_closed_form"
    pts = np.array([_points(traj, k) for k in range(len(traj.times))])
    if pts.shape[1:] != (2, 2) or len(schedule.segments) != 1 or weights.lipschitz != 0.0:
        return _na(name, traj, "needs n=2, d=2, a static graph and constant weights")
    if schedule.segments[0][1].edges != frozenset({(0, 1), (1, 0)}):
        return _na(name, traj, "needs the complete graph")
    rate = float(weights(0, 1, 0.0) + weights(1, 0, 0.0))
    cross = pts[:, 0, 0] * pts[:, 1, 1] - pts[:, 0, 1] * pts[:, 1, 0]
    dot = np.einsum("tk,tk->t", pts[:, 0], pts[:, 1])
    phi = np.arctan2(cross, dot)
    elapsed = traj.times - traj.times[0]
    expected = 2.0 * np.arctan(np.tan(phi[0] / 2.0) * np.exp(-rate * elapsed))
    err = np.abs(phi - expected)
    ok = err <= tol
    t_bad = _first_bad(traj.times, ok)
    return MetricSeries(name, traj.times, err, PASS if t_bad is None else FAIL, t_bad,
                        {"max_error": float(err.max()), "terminal_gap": float(phi[-1])})


def certify_guas(make_initial, schedule, weights, config, epsilons, seeds=range(64),
                 deltas=(0.5, 0.2, 0.1, 0.05, 0.02, 0.01), integrate=None) -> dict:
    """Sampled evidence for uniform asymptotic stability of the consensus set.

    ``make_initial(seed)`` returns an initial ensemble inside the compact set
    of interest. Item 1: ``T(eps)`` is the latest time, over the batch, after
    which the diameter stays below ``eps``. Item 2: ``delta(eps)`` is the
    largest candidate ``delta`` such that every batch member, shrunk toward its
    mean direction until its diameter is ``delta``, keeps ``diameter <= eps``
    for all sampled times. Uniformity holds over the batch only.
    """
    from .integrator import integrate_sphere

    integrate = integrate or integrate_sphere
    seeds = list(seeds)
    runs = [integrate(make_initial(s), schedule, weights, config) for s in seeds]
    diams = [diameter_series(r) for r in runs]
    report = {
        "evidence": "sampling evidence over a seeded batch, not a proof",
        "batch_size": len(seeds),
        "items": [],
    }
    for eps in epsilons:
        hit = []
        for r, dv in zip(runs, diams):
            above = np.flatnonzero(dv > eps)
            if above.size == 0:
                hit.append(float(r.times[0]))
            elif above[-1] == len(dv) - 1:
                hit.append(None)
            else:
                hit.append(float(r.times[above[-1] + 1]))
        T_eps = None if any(h is None for h in hit) else max(hit)

        delta_eps = None
        for delta in sorted(deltas, reverse=True):
            good = True
            for s in seeds:
                x = _shrink_to_diameter(make_initial(s), delta)
                dv = diameter_series(integrate(x, schedule, weights, config))
                if dv.max() > eps:
                    good = False
                    break
            if good:
                delta_eps = delta
                break
        report["items"].append({"epsilon": eps, "T": T_eps, "delta": delta_eps,
                                "unconverged_runs": sum(h is None for h in hit)})
    return report


def _shrink_to_diameter(x, delta, iters=60):
    x = np.asarray(x, dtype=float)
    if consensus_diameter(x) <= delta:
        return x
    c = x.mean(axis=0)
    c = c / np.linalg.norm(c)

    def shrink(s):
        y = c + s * (x - c)
        return y / np.linalg.norm(y, axis=1)[:, None]

    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if consensus_diameter(shrink(mid)) <= delta:
            lo = mid
        else:
            hi = mid
    return shrink(lo)

