"""Simplified UAV kinematics.

Each tick a body sums its weighted steering forces, clamps the result to its
top speed and then adds a wobble displacement drawn from smooth gradient
noise.  Wobble models wind and is deliberately left out of the clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import geometry as g
from .geometry import Vec3

PAIR_RULES = ("self", "max")


@dataclass(frozen=True)
class Force:
    dir: Vec3
    weight: float = 1.0

    def __post_init__(self):
        # a NaN or inf component poisons the sum
        if self.weight < 0 or not math.isfinite(self.dir[0] + self.dir[1] + self.dir[2]):
            raise ValueError(f"invalid force {self!r}")


@dataclass
class KinematicBody:
    pos: Vec3
    max_speed: float = 0.8
    body_radius: float = 10.0
    collision_threshold: float = 40.0

    def __post_init__(self):
        if self.max_speed <= 0:
            raise ValueError("max_speed must be positive")
        if self.collision_threshold < 2 * self.body_radius:
            raise ValueError("collision threshold smaller than body diameter")


# -- gradient noise ---------------------------------------------------------

def _fade(t: float) -> float:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


class Perlin1D:
    """Classic 1-D gradient noise over a seeded 256-entry permutation.

    Gradients are +/-1 at integer lattice points, so raw noise lies in
    ``[-0.5, 0.5]``; :meth:`__call__` rescales it to ``[0, 1]``.
    """

    def __init__(self, seed: int = 0, rng: Optional[np.random.Generator] = None):
        rng = np.random.default_rng(seed) if rng is None else rng
        perm = rng.permutation(256).tolist()
        self.perm = perm + perm

    def raw(self, x: float) -> float:
        xf_floor = math.floor(x)
        xi = int(xf_floor) & 255
        xf = x - xf_floor
        g0 = xf if self.perm[xi] & 1 == 0 else -xf
        g1 = (xf - 1.0) if self.perm[xi + 1] & 1 == 0 else (1.0 - xf)
        return g0 + _fade(xf) * (g1 - g0)

    def __call__(self, x: float) -> float:
        return self.raw(x) + 0.5


@dataclass
class WobbleState:
    radius: float
    offsets: Tuple[float, float, float]
    noise: Perlin1D
    step: float = 0.01

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("wobble radius must be non-negative")

    @classmethod
    def seeded(cls, radius: float, rng: np.random.Generator, step: float = 0.01) -> "WobbleState":
        offsets = tuple(float(o) for o in rng.uniform(0.0, 256.0, size=3))
        return cls(radius=radius, offsets=offsets, noise=Perlin1D(rng=rng), step=step)


def wobble_offset(state: WobbleState, tick: int) -> Vec3:
    """Offset from the anchor point at *tick*, each component in ``[-r, r]``."""
    r = state.radius
    if r == 0:
        return g.ZERO
    t = tick * state.step
    n = state.noise
    o = state.offsets
    return (
        r * (2.0 * n(o[0] + t) - 1.0),
        r * (2.0 * n(o[1] + t) - 1.0),
        r * (2.0 * n(o[2] + t) - 1.0),
    )


class WobbleField:
    """Wobble offsets of many bodies evaluated together.

    Produces exactly what :func:`wobble_offset` gives for each state, using
    one vectorised noise evaluation per tick.
    """

    def __init__(self, states: Sequence[WobbleState]):
        self.states = list(states)
        self.radius = np.array([s.radius for s in self.states], dtype=float)
        self.offsets = np.array([s.offsets for s in self.states], dtype=float)
        self.step = np.array([s.step for s in self.states], dtype=float)
        self.perm = np.array([s.noise.perm for s in self.states], dtype=np.int64)
        self._rows = np.arange(len(self.states))[:, None]
        self._last_tick: Optional[int] = None
        self._last: Optional[np.ndarray] = None

    def offsets_at(self, tick: int) -> np.ndarray:
        x = self.offsets + (tick * self.step)[:, None]
        fl = np.floor(x)
        xf = x - fl
        xi = fl.astype(np.int64) & 255
        h0 = self.perm[self._rows, xi] & 1
        h1 = self.perm[self._rows, xi + 1] & 1
        g0 = np.where(h0 == 0, xf, -xf)
        g1 = np.where(h1 == 0, xf - 1.0, 1.0 - xf)
        u = xf * xf * xf * (xf * (xf * 6.0 - 15.0) + 10.0)
        raw = g0 + u * (g1 - g0)
        return self.radius[:, None] * (2.0 * (raw + 0.5) - 1.0)

    def deltas(self, tick: int) -> np.ndarray:
        """Per-body displacement between ``tick-1`` and ``tick``."""
        prev = self._last if self._last_tick == tick - 1 else self.offsets_at(tick - 1)
        cur = self.offsets_at(tick)
        self._last_tick, self._last = tick, cur
        return cur - prev


def wobble_delta(state: WobbleState, tick: int) -> Vec3:
    """Displacement contributed by wobbling between ``tick-1`` and ``tick``."""
    if state.radius == 0:
        return g.ZERO
    return g.sub(wobble_offset(state, tick), wobble_offset(state, tick - 1))


# -- separation -------------------------------------------------------------

def pair_threshold(own: float, other: float, rule: str = "self") -> float:
    if rule == "self":
        return own
    if rule == "max":
        return max(own, other)
    raise ValueError(f"unknown pair rule {rule!r}")


def _escape_direction(rng: Optional[np.random.Generator]) -> Vec3:
    rng = np.random.default_rng(0) if rng is None else rng
    while True:
        v = rng.normal(size=3)
        n = float(np.linalg.norm(v))
        if n > 1e-12:
            return (float(v[0] / n), float(v[1] / n), float(v[2] / n))


def separation_force(pos: Vec3, threshold: float, neighbors: Sequence[Tuple[Vec3, float]],
                     c: float = 0.0, rule: str = "self",
                     rng: Optional[np.random.Generator] = None) -> Vec3:
    """Sum of pushes ``unit(pos - other) * (eps - d + c)`` over neighbors closer
    than the pair threshold ``eps``.

    With ``rule="self"`` a body reacts to intrusions into its own bubble;
    ``rule="max"`` uses the larger of the two thresholds for the pair.
    """
    fx = fy = fz = 0.0
    for other, other_threshold in neighbors:
        eps = pair_threshold(threshold, other_threshold, rule)
        dx, dy, dz = pos[0] - other[0], pos[1] - other[1], pos[2] - other[2]
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d >= eps:
            continue
        if d == 0.0:
            ux, uy, uz = _escape_direction(rng)
        else:
            ux, uy, uz = dx / d, dy / d, dz / d
        mag = eps - d + c
        fx += ux * mag
        fy += uy * mag
        fz += uz * mag
    return (fx, fy, fz)


def separation_all(positions: np.ndarray, thresholds: np.ndarray, c: float = 0.0,
                   rule: str = "self", rng: Optional[np.random.Generator] = None,
                   dist: Optional[np.ndarray] = None) -> np.ndarray:
    """Vectorised :func:`separation_force` for every body against every other.

    *dist* may pass a precomputed pairwise distance matrix.
    """
    diff = positions[:, None, :] - positions[None, :, :]
    if dist is None:
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if rule == "self":
        eps = np.broadcast_to(thresholds[:, None], dist.shape)
    elif rule == "max":
        eps = np.maximum(thresholds[:, None], thresholds[None, :])
    else:
        raise ValueError(f"unknown pair rule {rule!r}")
    active = dist < eps
    np.fill_diagonal(active, False)
    if not active.any():
        return np.zeros_like(positions)
    coincident = active & (dist == 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mag = np.where(active, (eps - dist + c) / np.where(dist > 0, dist, 1.0), 0.0)
    forces = np.einsum("ij,ijk->ik", mag, diff)
    if coincident.any():
        for i, j in zip(*np.nonzero(coincident)):
            u = _escape_direction(rng)
            forces[i] += np.asarray(u) * (eps[i, j] + c)
    return forces


# -- integration ------------------------------------------------------------

def cumulative_force(forces: Sequence[Force]) -> Vec3:
    sx = sy = sz = 0.0
    for f in forces:
        w = f.weight
        sx += f.dir[0] * w
        sy += f.dir[1] * w
        sz += f.dir[2] * w
    return (sx, sy, sz)


def integrate(pos: Vec3, forces: Sequence[Force], wobble: Vec3, max_speed: float) -> Vec3:
    """New position after one tick: clamped force sum plus unclamped wobble."""
    v = g.clamp_norm(cumulative_force(forces), max_speed)
    return (pos[0] + v[0] + wobble[0], pos[1] + v[1] + wobble[1], pos[2] + v[2] + wobble[2])


def steer_toward(pos: Vec3, target: Vec3, weight: float = 1.0) -> Force:
    """Arrival steering: unit direction far away, proportional inside one unit."""
    d = g.sub(target, pos)
    n = g.norm(d)
    if n == 0.0:
        return Force(g.ZERO, weight)
    if n > 1.0:
        d = g.scale(d, 1.0 / n)
    return Force(d, weight)


# -- intruder behaviour -----------------------------------------------------

@dataclass
class MuavPolicy:
    """Knobs of the intruder's escape behaviour."""
    sensing_range: float = 100.0
    escape_weight: float = 1.0
    zone_margin: float = 150.0
    zone_weight: float = 2.0
    pair_rule: str = "self"
    separation_c: float = 0.0


def zone_keeping_force(pos: Vec3, zone: Sequence[float], margin: float, weight: float) -> Optional[Force]:
    if margin <= 0 or weight <= 0:
        return None
    v = [0.0, 0.0, 0.0]
    for i in range(3):
        lo = pos[i]
        hi = zone[i] - pos[i]
        if lo < margin:
            v[i] += min(1.0, (margin - lo) / margin)
        if hi < margin:
            v[i] -= min(1.0, (margin - hi) / margin)
    if v == [0.0, 0.0, 0.0]:
        return None
    return Force((v[0], v[1], v[2]), weight)


def muav_policy(muav: KinematicBody, visible_duavs: Sequence[Vec3], zone: Sequence[float],
                policy: Optional[MuavPolicy] = None, duav_threshold: float = 40.0,
                rng: Optional[np.random.Generator] = None) -> List[Force]:
    """Forces steering the intruder: collision avoidance, flight away from the
    centroid of nearby dUAVs, and a soft pull back from the zone border."""
    policy = policy or MuavPolicy()
    forces: List[Force] = []
    if visible_duavs:
        sep = separation_force(muav.pos, muav.collision_threshold,
                               [(p, duav_threshold) for p in visible_duavs],
                               c=policy.separation_c, rule=policy.pair_rule, rng=rng)
        if sep != g.ZERO:
            forces.append(Force(sep, 1.0))
        near = [p for p in visible_duavs if g.distance(p, muav.pos) < policy.sensing_range]
        if near:
            away = g.sub(muav.pos, g.mean(near))
            if g.norm(away) > 0:
                forces.append(Force(g.normalize(away), policy.escape_weight))
    keep = zone_keeping_force(muav.pos, zone, policy.zone_margin, policy.zone_weight)
    if keep is not None:
        forces.append(keep)
    return forces
