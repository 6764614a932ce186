"""3-component vector algebra, axis-angle rotation and formation radius.

Vectors are plain ``(x, y, z)`` float tuples. Everything here is pure and
allocation-light because the simulation loop calls it for every member on
every tick.
"""

from __future__ import annotations

import math
from typing import Iterable, Tuple

Vec3 = Tuple[float, float, float]

ZERO: Vec3 = (0.0, 0.0, 0.0)
WORLD_UP: Vec3 = (0.0, 0.0, 1.0)
WORLD_X: Vec3 = (1.0, 0.0, 0.0)

UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Raised when a geometric precondition is violated."""


def vec3(x: float, y: float, z: float) -> Vec3:
    v = (float(x), float(y), float(z))
    if not all(math.isfinite(c) for c in v):
        raise GeometryError(f"non-finite vector {v}")
    return v


def add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def norm(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def distance(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def normalize(v: Vec3) -> Vec3:
    """Unit vector along *v*; zero-length input is a contract violation."""
    n = norm(v)
    if n <= 0.0:
        raise GeometryError("cannot normalize a zero vector")
    return (v[0] / n, v[1] / n, v[2] / n)


def clamp_norm(v: Vec3, limit: float) -> Vec3:
    n = norm(v)
    if n <= limit or n == 0.0:
        return v
    return scale(v, limit / n)


def mean(points: Iterable[Vec3]) -> Vec3:
    sx = sy = sz = 0.0
    count = 0
    for p in points:
        sx += p[0]
        sy += p[1]
        sz += p[2]
        count += 1
    if count == 0:
        raise GeometryError("mean of an empty point set")
    return (sx / count, sy / count, sz / count)


def is_close(a: Vec3, b: Vec3, abs_tol: float = 1e-9, rel_tol: float = 1e-6) -> bool:
    return all(math.isclose(x, y, rel_tol=rel_tol, abs_tol=abs_tol) for x, y in zip(a, b))


def rotate_rodrigues(v: Vec3, k: Vec3, theta: float) -> Vec3:
    """Rotate *v* by *theta* radians about the unit axis *k* (right-handed)."""
    if abs(norm(k) - 1.0) > UNIT_TOL:
        raise GeometryError(f"rotation axis must be unit length, got |k|={norm(k)!r}")
    c = math.cos(theta)
    s = math.sin(theta)
    kxv = cross(k, v)
    kv = dot(k, v) * (1.0 - c)
    return (
        v[0] * c + kxv[0] * s + k[0] * kv,
        v[1] * c + kxv[1] * s + k[1] * kv,
        v[2] * c + kxv[2] * s + k[2] * kv,
    )


def formation_radius(eps_d: float, max_branch_len: int) -> float:
    """Radius of the circle circumscribing a regular ``4*max_branch_len``-gon
    whose side equals the dUAV spacing *eps_d*."""
    if eps_d <= 0:
        raise GeometryError("eps_d must be positive")
    if max_branch_len < 1:
        raise GeometryError("formation radius undefined for a cluster without branches")
    return eps_d / (2.0 * math.sin(math.pi / (4 * max_branch_len)))


def project_onto_plane(v: Vec3, n: Vec3) -> Vec3:
    """Component of *v* lying in the plane with normal *n*."""
    nn = dot(n, n)
    if nn <= 0.0:
        raise GeometryError("plane normal must be nonzero")
    f = dot(v, n) / nn
    return (v[0] - n[0] * f, v[1] - n[1] * f, v[2] - n[2] * f)


def branch_rotation_angle(branch_index: int, n_branches: int) -> float:
    """Angle of 1-based branch *branch_index* when *n_branches* share the circle."""
    if n_branches < 1 or not 1 <= branch_index <= n_branches:
        raise GeometryError(f"branch index {branch_index} outside 1..{n_branches}")
    return (2.0 * math.pi / n_branches) * (branch_index - 1)
