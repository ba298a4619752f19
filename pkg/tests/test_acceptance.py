"""Acceptance criteria AC1..AC10, one reported pass/fail line each."""

import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_unit
from spheresync import analysis as an
from spheresync.cli import execute
from spheresync.config import load_config
from spheresync.dynamics import WeightFamily, body_controls, sphere_rhs
from spheresync.geometry import (
    ZERO_GUARD,
    hull_membership,
    origin_in_convex_hull,
    rotation_from_point,
    sample_cap,
    sphere_project,
)
from spheresync.graph import (
    DirectedGraph,
    GraphSchedule,
    is_quasi_strongly_connected,
    is_strongly_connected,
    is_uniformly_connected,
    random_schedule,
)
from spheresync.integrator import (
    IntegrationConfig,
    integrate_lifted,
    integrate_rotations,
    integrate_sphere,
)

FAMILIES = [lambda: WeightFamily.constant(1.0), WeightFamily.identity, WeightFamily.rational]


@contextmanager
def criterion(tag, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"[FAIL] {tag} {title} {fmt(detail)}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"[PASS] {tag} {title} {fmt(detail)}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def fmt(detail):
    return " ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in detail.items())


# -- shared lifted runs ----------------------------------------------------------


@pytest.fixture(scope="module")
def lifted_equivalence_runs():
    """AC2 scenarios: (sphere traj, lifted traj, alpha)."""
    out = []
    for k in range(20):
        rng = np.random.default_rng(1000 + k)
        n, d = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        x0 = random_unit(rng, d, n)
        z0 = rng.uniform(0.2, 5.0, n)[:, None] * x0
        s = random_schedule(n, 0.5, 5.0, "quasi_strong", seed=k)
        w = FAMILIES[k % 3]()
        cfg = IntegrationConfig(dt=1e-3, tf=5.0, record_stride=10)
        out.append((s, integrate_sphere(x0, s, w, cfg), integrate_lifted(z0, s, w, cfg),
                    w.global_upper))
    return out


@pytest.fixture(scope="module")
def hull_outside_runs():
    """AC5 scenarios: origin outside the initial hull, uniformly QSC schedules."""
    out = []
    for k in range(10):
        rng = np.random.default_rng(100 + k)
        n, d = int(rng.integers(3, 7)), int(rng.integers(2, 5))
        x = sample_cap(random_unit(rng, d), rng.uniform(0.5, 1.4), n, seed=k)
        z0 = rng.uniform(0.3, 3.0, n)[:, None] * x
        s = random_schedule(n, 1.0, 40.0, "quasi_strong", seed=k)
        w = WeightFamily.edge_constants(rng.uniform(1.0, 2.0, (n, n)))
        cfg = IntegrationConfig(dt=0.01, tf=40.0, record_stride=10)
        out.append((z0, s, integrate_lifted(z0, s, w, cfg), w.global_upper))
    return out


@pytest.fixture(scope="module")
def hull_inside_runs():
    """AC6 scenarios: origin strictly inside the initial hull, uniformly strong schedules."""
    out = []
    seed = 0
    while len(out) < 10:
        rng = np.random.default_rng(500 + seed)
        d = 3
        n = int(rng.integers(4, 7))
        z0 = rng.uniform(0.5, 2.0, n)[:, None] * random_unit(rng, d, n)
        seed += 1
        if hull_membership(z0) != "inside":
            continue
        s = random_schedule(n, 1.0, 40.0, "strong", seed=seed)
        w = WeightFamily.constant(float(rng.uniform(0.5, 2.0)))
        cfg = IntegrationConfig(dt=0.01, tf=40.0, record_stride=10)
        out.append((z0, s, w, integrate_lifted(z0, s, w, cfg)))
    return out


# -- criteria ----------------------------------------------------------------------


def test_ac01_two_agent_circle():
    with criterion("AC1", "two-agent circle closed form") as info:
        phi0 = 1.0
        x0 = np.array([[1.0, 0.0], [math.cos(phi0), math.sin(phi0)]])
        s = GraphSchedule.static(DirectedGraph.complete(2))
        t = time.perf_counter()
        traj = integrate_sphere(x0, s, WeightFamily.constant(1.0),
                                IntegrationConfig(dt=1e-3, tf=1.0))
        elapsed = time.perf_counter() - t
        x = traj.states[-1]
        phi = math.atan2(x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0], x[0] @ x[1])
        err = abs(phi - 2 * math.atan(math.tan(phi0 / 2) * math.exp(-2.0)))
        info.update(error=err, runtime_s=elapsed)
        assert err <= 1e-8
        assert elapsed < 1.0


def test_ac02_lifted_projection_equivalence(lifted_equivalence_runs):
    with criterion("AC2", "lifted/sphere equivalence over 20 scenarios") as info:
        worst = 0.0
        for s, ts, tl, _ in lifted_equivalence_runs:
            assert tl.ok
            assert is_uniformly_connected(s, "quasi_strong").connected
            np.testing.assert_array_equal(ts.times, tl.times)
            assert ts.times[-1] == 5.0
            y = np.array([[sphere_project(z) for z in frame] for frame in tl.states])
            worst = max(worst, float(np.max(np.abs(y - ts.states))))
        info.update(scenarios=len(lifted_equivalence_runs), max_deviation=worst)
        assert worst < 1e-6


def test_ac03_fig4_hemisphere(tmp_path):
    with criterion("AC3", "five-agent hemisphere reproduction") as info:
        cfg = load_config("fig4_hemisphere.json")
        t = time.perf_counter()
        code, manifest = execute(cfg, tmp_path / "fig4")
        elapsed = time.perf_counter() - t
        info.update(exit=code, terminal_diameter=manifest["terminal_diameter"], runtime_s=elapsed)
        assert code == 0
        assert elapsed < 5.0
        assert manifest["terminal_diameter"] < 1e-6
        assert cfg.integration.tf == 30.0 and cfg.n == 5
        assert is_uniformly_connected(cfg.schedule, "quasi_strong").connected
        gains = np.asarray(cfg.weights.gains)
        assert set(gains[~np.eye(5, dtype=bool)].tolist()) <= {1.0, 2.0}
        center, radius = cfg.ball
        assert radius < math.pi / 2
        # ball membership on every integration step, not only recorded samples
        dense = integrate_sphere(cfg.initial, cfg.schedule, cfg.weights,
                                 IntegrationConfig(dt=cfg.integration.dt, tf=30.0))
        ball = an.monitor_hemisphere_invariance(dense, center, radius, tol=1e-9)
        info.update(max_angle=ball.witness.get("max_angle", float("nan")))
        assert ball.verdict == an.PASS


def test_ac04_ratio_bound_on_all_lifted_runs(lifted_equivalence_runs, hull_outside_runs,
                                             hull_inside_runs):
    with criterion("AC4", "ratio bound on every lifted run") as info:
        runs = [(tl, a) for _, _, tl, a in lifted_equivalence_runs]
        runs += [(tl, a) for _, _, tl, a in hull_outside_runs]
        runs += [(tl, w.global_upper) for _, _, w, tl in hull_inside_runs]
        min_norm = np.inf
        for traj, alpha in runs:
            assert traj.ok
            m = an.monitor_ratio_bound(traj, alpha)
            assert m.verdict == an.PASS, m.report()
            min_norm = min(min_norm, m.witness["min_norm"])
        info.update(runs=len(runs), min_norm=float(min_norm))
        assert min_norm > ZERO_GUARD


def test_ac05_hull_invariance_and_point_convergence(hull_outside_runs):
    with criterion("AC5", "hull invariance, pairwise Lyapunov, point convergence") as info:
        worst_hull = worst_disp = 0.0
        for z0, s, traj, _ in hull_outside_runs:
            assert not origin_in_convex_hull(z0)
            assert is_uniformly_connected(s, "quasi_strong").connected
            hull = an.monitor_hull_invariance(traj)
            pair = an.monitor_pairwise_lyapunov(traj)
            conv = an.monitor_point_convergence(traj)
            assert hull.verdict == pair.verdict == conv.verdict == an.PASS
            assert np.all(np.isfinite(conv.witness["limit"]))
            worst_hull = max(worst_hull, hull.witness["max_distance"])
            worst_disp = max(worst_disp, conv.witness["trailing_displacement"])
        info.update(runs=len(hull_outside_runs), max_hull_distance=worst_hull,
                    max_trailing_displacement=worst_disp)
        assert worst_disp < 1e-6


def test_ac06_origin_attractivity(hull_inside_runs):
    with criterion("AC6", "attractivity with origin inside the hull") as info:
        worst = 0.0
        for z0, s, w, traj in hull_inside_runs:
            assert w.lower_bound is not None and w.lower_bound > 0
            assert is_uniformly_connected(s, "strong").connected
            m = an.monitor_origin_attraction(traj, w)
            assert m.verdict == an.PASS, m.report()
            worst = max(worst, m.witness["terminal_diameter"])
        info.update(runs=len(hull_inside_runs), max_terminal_diameter=worst)
        assert worst < 1e-5


def test_ac07_max_norm_lyapunov():
    with criterion("AC7", "equatorial max-norm Lyapunov monotone") as info:
        worst = -np.inf
        for k in range(10):
            rng = np.random.default_rng(200 + k)
            n, d = int(rng.integers(3, 7)), int(rng.integers(2, 5))
            x0 = sample_cap(np.eye(d)[0], rng.uniform(0.3, 1.5), n, seed=k)
            s = random_schedule(n, 0.5, 10.0, "strong", seed=k)
            assert is_uniformly_connected(s, "strong").connected
            traj = integrate_sphere(x0, s, FAMILIES[k % 3](),
                                    IntegrationConfig(dt=0.01, tf=10.0, record_stride=1))
            m = an.monitor_max_norm_lyapunov(traj, tol=1e-9)
            assert m.verdict == an.PASS, m.report()
            worst = max(worst, m.witness["max_increase"])
        info.update(runs=10, largest_step_increase=float(worst))


def test_ac08_frame_equivalence():
    with criterion("AC8", "body-frame controller equals world-frame field") as info:
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(1000):
            n, d = int(rng.integers(2, 7)), int(rng.integers(2, 6))
            R = []
            for _ in range(n):
                Q, r = np.linalg.qr(rng.standard_normal((d, d)))
                Q = Q * np.sign(np.diag(r))
                if np.linalg.det(Q) < 0:
                    Q[:, [0, 1]] = Q[:, [1, 0]]
                R.append(Q)
            R = np.array(R)
            adj = rng.uniform(size=(n, n)) < 0.6
            np.fill_diagonal(adj, False)
            w = FAMILIES[int(rng.integers(3))]()
            v = body_controls(R, adj, w)
            u = sphere_rhs(R[:, :, 0], adj, w)
            lifted_v = np.einsum("iab,ib->ia", R[:, :, 1:], v)
            worst = max(worst, float(np.max(np.abs(lifted_v - u))))
        info.update(configurations=1000, max_mismatch=worst)
        assert worst <= 1e-12

        track = 0.0
        for k in range(3):
            n, d = 3 + k, 3 + k % 2
            x0 = sample_cap(np.eye(d)[0], 2.0, n, seed=k)
            R0 = np.array([rotation_from_point(x) for x in x0])
            s = random_schedule(n, 0.5, 5.0, "quasi_strong", seed=k)
            cfg = IntegrationConfig(dt=1e-3, tf=5.0, record_stride=10)
            w = FAMILIES[k]()
            tr = integrate_rotations(R0, s, w, cfg)
            ts = integrate_sphere(x0, s, w, cfg)
            track = max(track, float(np.max(np.abs(tr.states[:, :, :, 0] - ts.states))))
        info.update(rotation_tracking=track)
        assert track < 1e-6


def _closure(adj):
    C = adj | np.eye(len(adj), dtype=bool)
    for k in range(len(adj)):
        C = C | (C[:, [k]] & C[[k], :])
    return C


def _check_digraph(g):
    C = _closure(g.adjacency())
    strong = bool(C.all())
    has_root = bool(C.all(axis=0).any())
    root = is_quasi_strongly_connected(g)
    ok = is_strongly_connected(g) == strong and (root is not None) == has_root
    return ok and (root is None or bool(C[:, root].all()))


def test_ac09_connectivity_oracle():
    with criterion("AC9", "connectivity checkers vs brute-force reachability") as info:
        pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
        exhaustive = 0
        for mask in range(1 << len(pairs)):
            g = DirectedGraph(3, frozenset(p for b, p in enumerate(pairs) if mask >> b & 1))
            assert _check_digraph(g)
            exhaustive += 1
        rng = np.random.default_rng(9)
        sampled = 0
        for n in (4, 5):
            for _ in range(5000):
                p = rng.uniform(0.05, 0.7)
                g = DirectedGraph(n, frozenset((i, j) for i in range(n) for j in range(n)
                                               if i != j and rng.uniform() < p))
                assert _check_digraph(g)
                sampled += 1
        info.update(exhaustive_n3=exhaustive, sampled_n4_n5=sampled)
        assert exhaustive == 64 and sampled == 10000


def test_ac10_determinism(tmp_path):
    with criterion("AC10", "byte-identical reruns of the hemisphere scenario") as info:
        dirs = [tmp_path / "first", tmp_path / "second"]
        for d in dirs:
            code, _ = execute(load_config("fig4_hemisphere.json"), d)
            assert code == 0
        same = {f: (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes()
                for f in ("trajectory.csv", "metrics.csv")}
        info.update(**{Path(k).stem: v for k, v in same.items()})
        assert all(same.values())
