"""Fixed-step RK4 integration aligned to graph switch times.

Each constant-graph interval ``[a, b)`` is split into ``ceil((b - a) / dt)``
equal steps, so no step straddles a switch and the step starting at a switch
instant uses the new graph.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import WeightFamily, lifted_rhs, rotation_rhs, sphere_rhs
from .errors import IntegrationError, ZeroNormError
from .geometry import ZERO_GUARD, as_lifted_ensemble, as_sphere_ensemble, is_rotation
from .graph import GraphSchedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 1e-3
    t0: float = 0.0
    tf: float = 1.0
    renormalize: bool = True
    record_stride: int = 1

    def validate(self, schedule: GraphSchedule | None = None) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if schedule is not None:
            if len(schedule.segments) > 1 and self.dt > schedule.dwell_bound / 10 * (1 + 1e-12):
                raise ValueError(
                    f"dt={self.dt} exceeds tau_D/10={schedule.dwell_bound / 10}"
                )
            if self.t0 < schedule.start:
                raise ValueError("t0 precedes the schedule start")


@dataclass
class Trajectory:
    kind: str
    times: np.ndarray
    states: np.ndarray
    events: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    failure: dict | None = None
    step_bounds: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        flat = self.states.reshape(self.states.shape[0], self.states.shape[1], -1)
        w.writerow(["time", "agent"] + [f"coord_{k}" for k in range(flat.shape[2])])
        for t, frame in zip(self.times, flat):
            for i, row in enumerate(frame):
                w.writerow([repr(float(t)), i] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = sorted(self.diagnostics)
        w.writerow(["time"] + names)
        for k, t in enumerate(self.times):
            w.writerow([repr(float(t))] + [repr(float(self.diagnostics[n][k])) for n in names])
        return buf.getvalue()


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_grid(schedule: GraphSchedule, config: IntegrationConfig):
    """Yield ``(a, b, m)``: constant-graph interval and its number of steps."""
    cuts = [config.t0] + schedule.switch_times(config.t0, config.tf) + [config.tf]
    for a, b in zip(cuts, cuts[1:]):
        m = max(1, math.ceil((b - a) / config.dt - 1e-9))
        yield a, b, m


def _pair_ratio(z):
    r = np.linalg.norm(z, axis=1)
    return float(r.max() / r.min())


def _diameter(x):
    D = x[None, :, :] - x[:, None, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", D, D))))


def _run(kind, state0, rhs, schedule, config, retract, sample_diag):
    """Shared stepping loop.

    ``retract(state) -> (state, defect)`` restores manifold constraints and
    reports the pre-retraction defect; ``sample_diag(state) -> dict``.
    """
    config.validate(schedule)
    times = [config.t0]
    states = [state0.copy()]
    diag: dict[str, list] = {k: [v] for k, v in sample_diag(state0).items()}
    diag["defect"] = [0.0]
    events = []
    bounds = []
    failure = None
    state = state0.copy()
    step_count = 0
    defect_acc = 0.0
    t = config.t0
    for a, b, m in step_grid(schedule, config):
        if a > config.t0:
            events.append(a)
        adj = schedule.graph_at(a).adjacency()
        h = (b - a) / m
        f = lambda s: rhs(s, adj)  # noqa: E731
        for k in range(m):
            t_next = b if k == m - 1 else a + (k + 1) * h
            try:
                new = _rk4(f, state, t_next - t)
            except ZeroNormError as exc:
                exc.time = t
                failure = {"kind": "ZeroNorm", "time": t, "agent": exc.agent, "norm": exc.norm}
                log.warning("integration stopped: %s", exc)
                break
            if not np.all(np.isfinite(new)):
                raise IntegrationError(f"non-finite state at t={t_next:.6g} ({kind})")
            new, defect = retract(new)
            defect_acc = max(defect_acc, defect)
            bounds.append((t, t_next))
            state = new
            t = t_next
            step_count += 1
            last = k == m - 1 and b == config.tf
            if step_count % config.record_stride == 0 or last:
                times.append(t)
                states.append(state.copy())
                for key, v in sample_diag(state).items():
                    diag[key].append(v)
                diag["defect"].append(defect_acc)
                defect_acc = 0.0
        if failure is not None:
            break
    return Trajectory(
        kind=kind,
        times=np.array(times),
        states=np.array(states),
        events=events,
        diagnostics={k: np.array(v) for k, v in diag.items()},
        failure=failure,
        step_bounds=bounds,
    )


def integrate_sphere(x0, schedule: GraphSchedule, weights: WeightFamily,
                     config: IntegrationConfig) -> Trajectory:
    """Integrate the world-frame sphere protocol.

    Diagnostic ``defect`` is the largest ``| |x_i| - 1 |`` seen before
    renormalization since the previous sample.
    """
    x0 = as_sphere_ensemble(x0)

    def retract(x):
        r = np.linalg.norm(x, axis=1)
        defect = float(np.max(np.abs(r - 1.0)))
        if config.renormalize:
            x = x / r[:, None]
        return x, defect

    return _run("sphere", x0, lambda x, adj: sphere_rhs(x, adj, weights), schedule, config,
                retract, lambda x: {"diameter": _diameter(x)})


def integrate_lifted(z0, schedule: GraphSchedule, weights: WeightFamily,
                     config: IntegrationConfig, zero_guard: float = ZERO_GUARD) -> Trajectory:
    """Integrate the lifted protocol in R^d; no retraction.

    A ``ZeroNormError`` ends the run at the last valid sample and is recorded
    in ``Trajectory.failure``.
    """
    z0 = as_lifted_ensemble(z0, zero_guard)

    def sample(z):
        r = np.linalg.norm(z, axis=1)
        return {"min_norm": float(r.min()), "ratio": _pair_ratio(z), "diameter": _diameter(z)}

    return _run("lifted", z0, lambda z, adj: lifted_rhs(z, adj, weights, zero_guard), schedule,
                config, lambda z: (z, 0.0), sample)


def polar_retract(M: np.ndarray) -> np.ndarray:
    """Nearest rotation(s) in Frobenius norm, via SVD."""
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def integrate_rotations(R0, schedule: GraphSchedule, weights: WeightFamily,
                        config: IntegrationConfig) -> Trajectory:
    """Integrate the body-frame rotation flow with polar retraction after each step.

    Diagnostic ``defect`` is ``max_i |R_i^T R_i - I|_max`` before retraction.
    """
    R0 = np.asarray(R0, dtype=float)
    if R0.ndim != 3 or R0.shape[1] != R0.shape[2]:
        raise ValueError(f"rotations need shape (n, d, d), got {R0.shape}")
    for i, R in enumerate(R0):
        if not is_rotation(R):
            raise ValueError(f"R_{i} is not in SO(d)")
    eye = np.eye(R0.shape[1])

    def retract(R):
        defect = float(np.max(np.abs(np.einsum("nji,njk->nik", R, R) - eye)))
        return (polar_retract(R) if config.renormalize else R), defect

    return _run("rotations", R0, lambda R, adj: rotation_rhs(R, adj, weights), schedule,
                config, retract, lambda R: {"diameter": _diameter(R[:, :, 0])})
