"""Vector fields of the sphere protocol and its equivalent forms.

Every field exists in two flavours: a public one taking ``(state, t,
schedule, weights)``, and an ``*_rhs`` kernel taking a boolean adjacency
matrix directly, which the integrator uses inside a fixed graph segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ZeroNormError
from .geometry import ZERO_GUARD, north_pole


@dataclass
class WeightFamily:
    """Edge weights ``f_ij(s) = gain_ij * base(s)``, optionally overridden per edge.

    ``base`` must accept numpy arrays. Metadata: ``lipschitz`` constant on
    ``[0, 2]``, ``lower_bound`` (K_d, ``None`` when no positive lower bound is
    declared), ``upper_bound`` (K_u) and ``global_upper`` (alpha), both over
    ``[0, 2]``, which is where every argument lives.
    """

    base: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    gains: np.ndarray | float = 1.0
    lipschitz: float | None = None
    lower_bound: float | None = None
    upper_bound: float | None = None
    global_upper: float | None = None
    overrides: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.global_upper is None:
            self.global_upper = self.upper_bound

    def gain_matrix(self, n: int) -> np.ndarray:
        g = np.asarray(self.gains, dtype=float)
        if g.ndim == 0:
            return np.full((n, n), float(g))
        if g.shape != (n, n):
            raise ValueError(f"gain matrix has shape {g.shape}, expected {(n, n)}")
        return g

    def matrix(self, s: np.ndarray) -> np.ndarray:
        """Evaluate ``f_ij(s_ij)`` for an ``(n, n)`` array of arguments."""
        out = self.gain_matrix(s.shape[0]) * self.base(s)
        for (i, j), f in self.overrides.items():
            out[i, j] = f(s[i, j])
        return out

    def __call__(self, i: int, j: int, s):
        if (i, j) in self.overrides:
            return self.overrides[(i, j)](s)
        g = np.asarray(self.gains, dtype=float)
        gain = float(g) if g.ndim == 0 else float(g[i, j])
        return gain * self.base(np.asarray(s, dtype=float))

    def scaled(self, c: float) -> "WeightFamily":
        """Same family with every ``f_ij`` multiplied by ``c > 0``."""
        if c <= 0:
            raise ValueError("scale must be positive")

        def mul(f):
            return lambda s: c * f(s)

        return WeightFamily(
            base=self.base,
            name=self.name,
            gains=c * np.asarray(self.gains, dtype=float),
            lipschitz=None if self.lipschitz is None else c * self.lipschitz,
            lower_bound=None if self.lower_bound is None else c * self.lower_bound,
            upper_bound=None if self.upper_bound is None else c * self.upper_bound,
            global_upper=None if self.global_upper is None else c * self.global_upper,
            overrides={k: mul(f) for k, f in self.overrides.items()},
            params=dict(self.params, scale=c),
        )

    def check_positive(self, n: int, grid=None) -> bool:
        grid = np.linspace(1e-6, 2.0, 201) if grid is None else np.asarray(grid)
        for i in range(n):
            for j in range(n):
                if i != j and np.any(np.asarray(self(i, j, grid)) <= 0):
                    return False
        return True

    def check_lipschitz(self, n: int, points: int = 2001) -> bool:
        """Finite-difference spot check of the declared Lipschitz constant on [0, 2]."""
        if self.lipschitz is None:
            return False
        s = np.linspace(0.0, 2.0, points)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                vals = np.asarray(self(i, j, s), dtype=float) * np.ones_like(s)
                slopes = np.abs(np.diff(vals)) / np.diff(s)
                if np.max(slopes) > self.lipschitz * (1 + 1e-9) + 1e-12:
                    return False
        return True

    # -- library -------------------------------------------------------------

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFamily":
        if value <= 0:
            raise ValueError("constant weight must be positive")
        return cls(base=lambda s: np.ones_like(np.asarray(s, dtype=float)), name="constant",
                   gains=float(value), lipschitz=0.0, lower_bound=float(value),
                   upper_bound=float(value), params={"value": float(value)})

    @classmethod
    def edge_constants(cls, gains) -> "WeightFamily":
        """Per-edge positive constants; ``gains`` is an ``(n, n)`` matrix."""
        g = np.array(gains, dtype=float)
        off = g[~np.eye(g.shape[0], dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("edge constants must be positive")
        return cls(base=lambda s: np.ones_like(np.asarray(s, dtype=float)), name="edge_constants",
                   gains=g, lipschitz=0.0, lower_bound=float(off.min()) if off.size else None,
                   upper_bound=float(off.max()) if off.size else None,
                   params={"gains": g.tolist()})

    @classmethod
    def identity(cls) -> "WeightFamily":
        return cls(base=lambda s: np.asarray(s, dtype=float), name="identity",
                   lipschitz=1.0, lower_bound=None, upper_bound=2.0)

    @classmethod
    def rational(cls) -> "WeightFamily":
        """``f(s) = s / (1 + s)``."""
        return cls(base=lambda s: np.asarray(s, dtype=float) / (1.0 + np.asarray(s, dtype=float)),
                   name="rational", lipschitz=1.0, lower_bound=None, upper_bound=2.0 / 3.0)


_REGISTRY: dict[str, Callable[..., WeightFamily]] = {
    "constant": WeightFamily.constant,
    "edge_constants": WeightFamily.edge_constants,
    "identity": WeightFamily.identity,
    "rational": WeightFamily.rational,
}


def register_weight_family(name: str, factory: Callable[..., WeightFamily]) -> None:
    _REGISTRY[name] = factory


def make_weights(name: str, **params) -> WeightFamily:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown weight family {name!r}") from None
    return factory(**params)


def weight_families() -> list[str]:
    return sorted(_REGISTRY)


# -- kernels ------------------------------------------------------------------


def _pairwise(x: np.ndarray):
    D = x[None, :, :] - x[:, None, :]  # D[i, j] = x_j - x_i
    return D, np.linalg.norm(D, axis=2)


def sphere_rhs(x: np.ndarray, adj: np.ndarray, weights: WeightFamily) -> np.ndarray:
    D, s = _pairwise(x)
    W = np.where(adj, weights.matrix(s), 0.0)
    S = np.einsum("ij,ijk->ik", W, D)
    return S - x * np.einsum("ik,ik->i", x, S)[:, None]


def lifted_rhs(z: np.ndarray, adj: np.ndarray, weights: WeightFamily,
               zero_guard: float = ZERO_GUARD) -> np.ndarray:
    r = np.linalg.norm(z, axis=1)
    if np.any(r <= zero_guard):
        i = int(np.argmin(r))
        raise ZeroNormError(agent=i, norm=float(r[i]))
    y = z / r[:, None]
    _, s = _pairwise(y)
    W = np.where(adj, weights.matrix(s) * (r[:, None] / r[None, :]), 0.0)
    return W @ z - W.sum(axis=1)[:, None] * z


def body_controls(R: np.ndarray, adj: np.ndarray, weights: WeightFamily) -> np.ndarray:
    """Body-frame inputs ``v_i`` (shape ``(n, d-1)``) from relative rotations only."""
    d = R.shape[1]
    p = north_pole(d)
    X = np.einsum("iab,ja->ijb", R, R[:, :, 0])  # X[i, j] = R_i^T R_j p
    s = np.linalg.norm(X - p, axis=2)
    W = np.where(adj, weights.matrix(s), 0.0)
    return np.einsum("ij,ijk->ik", W, X)[:, 1:]


def skew_from_control(v: np.ndarray) -> np.ndarray:
    d = v.shape[-1] + 1
    Om = np.zeros(v.shape[:-1] + (d, d))
    Om[..., 1:, 0] = v
    Om[..., 0, 1:] = -v
    return Om


def rotation_rhs(R: np.ndarray, adj: np.ndarray, weights: WeightFamily) -> np.ndarray:
    Om = skew_from_control(body_controls(R, adj, weights))
    return R @ Om


def gnomonic_rhs(y: np.ndarray, adj: np.ndarray, weights: WeightFamily) -> np.ndarray:
    """Push-forward of the sphere field through the southern gnomonic chart."""
    w = np.hstack([-np.ones((y.shape[0], 1)), y])
    x = w / np.linalg.norm(w, axis=1)[:, None]
    xdot = sphere_rhs(x, adj, weights)
    a = -x[:, :1]  # |x_1| on the southern hemisphere
    return xdot[:, 1:] / a - x[:, 1:] * (-xdot[:, :1]) / a**2


# -- public fields ------------------------------------------------------------


def _adj(schedule, t):
    return schedule.graph_at(t).adjacency()


def sphere_field(x, t, schedule, weights) -> np.ndarray:
    return sphere_rhs(np.asarray(x, dtype=float), _adj(schedule, t), weights)


def lifted_field(z, t, schedule, weights, zero_guard: float = ZERO_GUARD) -> np.ndarray:
    return lifted_rhs(np.asarray(z, dtype=float), _adj(schedule, t), weights, zero_guard)


def body_controller(i: int, R, t, schedule, weights) -> np.ndarray:
    return body_controls(np.asarray(R, dtype=float), _adj(schedule, t), weights)[i]


def rotation_field(R, t, schedule, weights) -> np.ndarray:
    return rotation_rhs(np.asarray(R, dtype=float), _adj(schedule, t), weights)


def gnomonic_field(y, t, schedule, weights) -> np.ndarray:
    return gnomonic_rhs(np.asarray(y, dtype=float), _adj(schedule, t), weights)


def equatorial_lyapunov_rate(i: int, y, t, schedule, weights) -> float:
    """Time derivative of ``|y_i|^2`` for equatorial coordinates of northern states.

    With ``c_k = sqrt(1 - |y_k|^2)`` and ``g_ij = f_ij(|x_j - x_i|)``::

        d/dt |y_i|^2 = 2 * sum_j g_ij * (c_i^2 y_i.y_j - c_i c_j |y_i|^2)
    """
    y = np.asarray(y, dtype=float)
    c = np.sqrt(1.0 - np.einsum("ik,ik->i", y, y))
    yi, ci = y[i], c[i]
    total = 0.0
    for j in schedule.graph_at(t).neighbors(i):
        dist = np.sqrt((c[j] - ci) ** 2 + np.sum((y[j] - yi) ** 2))
        g = float(weights(i, j, dist))
        total += g * (ci * ci * np.dot(yi, y[j]) - ci * c[j] * np.dot(yi, yi))
    return 2.0 * total
