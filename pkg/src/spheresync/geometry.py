"""Linear algebra on the unit sphere.

Points on S^{d-1} are plain numpy arrays of shape ``(d,)``; ensembles of
``n`` agents are arrays of shape ``(n, d)``. The north pole is
``p = e_1 = (1, 0, ..., 0)``.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .errors import NotSouthernError, OutOfDiscError, ZeroNormError

UNIT_TOL = 1e-12
TRAJECTORY_UNIT_TOL = 1e-9
ORTHO_TOL = 1e-9
ZERO_GUARD = 1e-14
HEMISPHERE_TOL = 1e-10
HULL_TOL = 1e-10
HULL_BAND = 1e-8
MARGIN_ACCEPT = 1e-8


def north_pole(d: int) -> np.ndarray:
    p = np.zeros(d)
    p[0] = 1.0
    return p


def as_unit_vector(coords, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate and return ``coords`` as a unit vector of dimension >= 2."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError(f"unit vector needs shape (d,) with d >= 2, got {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise ValueError(f"not a unit vector: |x| = {np.linalg.norm(x)!r}")
    return x


def as_sphere_ensemble(states, tol: float = UNIT_TOL) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"ensemble needs shape (n, d) with d >= 2, got {x.shape}")
    err = np.abs(np.linalg.norm(x, axis=1) - 1.0)
    if np.any(err > tol):
        i = int(np.argmax(err))
        raise ValueError(f"agent {i} is off the sphere by {err[i]:.3e}")
    return x


def as_lifted_ensemble(states, zero_guard: float = ZERO_GUARD) -> np.ndarray:
    z = np.asarray(states, dtype=float)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError(f"ensemble needs shape (n, d) with d >= 2, got {z.shape}")
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms <= zero_guard):
        i = int(np.argmin(norms))
        raise ZeroNormError(agent=i, norm=float(norms[i]))
    return z


def tangent_project(x, v) -> np.ndarray:
    """Return ``(I - x x^T) v``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {v.shape}")
    return v - x * np.dot(x, v)


def sphere_project(z, zero_guard: float = ZERO_GUARD) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z)
    if r < zero_guard:
        raise ZeroNormError(norm=float(r))
    return z / r


def equatorial_project(x) -> np.ndarray:
    return np.array(np.asarray(x, dtype=float)[1:])


def equatorial_lift(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    r2 = float(np.dot(y, y))
    if r2 >= 1.0:
        raise OutOfDiscError(f"|y| = {np.sqrt(r2):.6g} is not < 1")
    return np.concatenate(([np.sqrt(1.0 - r2)], y))


def gnomonic_project(x, hemisphere_tol: float = HEMISPHERE_TOL) -> np.ndarray:
    """Central projection of the open southern hemisphere onto the plane x_1 = -1."""
    x = np.asarray(x, dtype=float)
    if x[0] >= -hemisphere_tol:
        raise NotSouthernError(f"first coordinate {x[0]:.3e} is not negative")
    return x[1:] / abs(x[0])


def gnomonic_lift(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    w = np.concatenate(([-1.0], y))
    return w / np.linalg.norm(w)


def rotation_from_point(x) -> np.ndarray:
    """Some rotation in SO(d) whose first column is ``x``.

    Built from the Householder reflection taking e_1 to ``x``, with the last
    column negated to restore det = +1.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    w = north_pole(d) - x
    ww = np.dot(w, w)
    if ww < 1e-30:
        return np.eye(d)
    R = np.eye(d) - 2.0 * np.outer(w, w) / ww
    R[:, -1] *= -1.0
    return R


def is_rotation(R, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    d = R.shape[0]
    return (
        np.max(np.abs(R.T @ R - np.eye(d))) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


# -- convex hull geometry -----------------------------------------------------


def min_norm_point(points, tol: float = HULL_TOL, max_iter: int = 1000):
    """Minimum-norm point of the convex hull of ``points`` (Wolfe's algorithm).

    Returns ``(x, weights)`` where ``weights`` are convex coefficients over the
    rows of ``points`` with ``x = weights @ points``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m = P.shape[0]
    if m == 0:
        raise ValueError("need at least one point")
    scale = max(float(np.max(np.einsum("ij,ij->i", P, P))), 1e-300)

    k0 = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    active = [k0]
    lam = np.array([1.0])
    x = P[k0].copy()

    for _ in range(max_iter):
        if np.dot(x, x) <= (1e-16) ** 2 * scale:
            break
        dots = P @ x
        j = int(np.argmin(dots))
        if np.dot(x, x) - dots[j] <= tol * scale or j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)

        # minor cycles: move toward the affine minimizer until it is interior
        for _ in range(max_iter):
            Q = P[active]
            k = len(active)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = Q @ Q.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            alpha = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(alpha > 1e-14):
                lam = alpha
                x = alpha @ Q
                break
            neg = alpha <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = lam[neg] / (lam[neg] - alpha[neg])
            theta = float(np.min(ratios[np.isfinite(ratios)], initial=1.0))
            theta = min(max(theta, 0.0), 1.0)
            lam = (1.0 - theta) * lam + theta * alpha
            keep = lam > 1e-14
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            active = [a for a, kp in zip(active, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ P[active]

    weights = np.zeros(m)
    weights[active] = lam
    return x, weights


def distance_to_hull(q, points) -> float:
    """Euclidean distance from ``q`` to the convex hull of ``points``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x, _ = min_norm_point(P - np.asarray(q, dtype=float))
    return float(np.linalg.norm(x))


def max_margin_direction(points):
    """Solve max m s.t. v^T x_i >= m, |v|_inf <= 1. Returns ``(v, m)``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = P.shape
    # variables (v_1..v_d, m); minimize -m
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-P, np.ones((n, 1))])
    b_ub = np.zeros(n)
    bounds = [(-1.0, 1.0)] * d + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"margin LP failed: {res.message}")
    return res.x[:d], float(res.x[-1])


def origin_in_convex_hull(points) -> bool:
    """True if 0 lies in the convex hull of ``points``.

    Distances below ``HULL_BAND`` count as inside (boundary band).
    """
    x, _ = min_norm_point(points)
    return bool(np.linalg.norm(x) < HULL_BAND)


def hull_membership(points) -> str:
    """Classify the origin against the hull: ``inside``, ``boundary`` or ``outside``.

    ``inside`` means 0 is an interior point of a full-dimensional hull, i.e.
    ``0 = sum_i w_i p_i`` with every ``w_i > HULL_BAND``; everything else within
    the declared band is ``boundary``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x, _ = min_norm_point(P)
    if np.linalg.norm(x) >= HULL_BAND:
        return "outside"
    n, d = P.shape
    if np.linalg.matrix_rank(P) < d:
        return "boundary"
    # maximize s subject to P^T w = 0, sum w = 1, w_i >= s
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((d + 1, n + 1))
    A_eq[:d, :n] = P.T
    A_eq[d, :n] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0.0, None)] * n + [(None, None)], method="highs")
    if res.status == 0 and res.x[-1] > HULL_BAND:
        return "inside"
    return "boundary"


def find_common_hemisphere(points):
    """An axis ``v`` (unit) with ``v^T x_i > 0`` for all ``i``, or ``None``.

    Points on a common closed hemisphere boundary (margin 0) give ``None``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("need at least one point")
    v, margin = max_margin_direction(P)
    if margin <= MARGIN_ACCEPT:
        return None
    return v / np.linalg.norm(v)


def sample_cap(axis, angular_radius: float, count: int, seed=None) -> np.ndarray:
    """``count`` points uniform on the closed geodesic cap around ``axis``."""
    axis = as_unit_vector(axis, tol=1e-9)
    d = axis.shape[0]
    if not 0.0 <= angular_radius <= np.pi:
        raise ValueError("angular_radius must lie in [0, pi]")
    rng = np.random.default_rng(seed)
    out = np.empty((count, d))
    # polar-angle density is proportional to sin^(d-2)
    smax = np.sin(min(angular_radius, np.pi / 2))
    for k in range(count):
        if d == 2:
            theta = rng.uniform(-angular_radius, angular_radius)
            u = np.array([-axis[1], axis[0]])
        else:
            while True:
                theta = rng.uniform(0.0, angular_radius)
                if smax == 0.0 or rng.uniform() * smax ** (d - 2) <= np.sin(theta) ** (d - 2):
                    break
            g = rng.standard_normal(d)
            g -= axis * np.dot(axis, g)
            u = g / np.linalg.norm(g)
        x = np.cos(theta) * axis + np.sin(theta) * u
        out[k] = x / np.linalg.norm(x)
    return out


def geodesic_angle(a, b) -> np.ndarray:
    """Angle between unit vectors, stable near 0 and pi. Broadcasts over rows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.sum(a * b, axis=-1)
    s = np.linalg.norm(b - a * c[..., None], axis=-1)
    return np.arctan2(s, c)
