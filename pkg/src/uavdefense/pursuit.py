"""Cluster-head mission logic: intruder prediction, chase forces, phase switching
and escort heading."""

from __future__ import annotations

import enum
from dataclasses import dataclass
import math
from typing import List, Optional, Sequence, Tuple

from . import geometry as g
from .geometry import Vec3
from .formation import perpendicular_reference


class PursuitPhase(enum.Enum):
    CHASE = "CHASE"
    ESCORT = "ESCORT"


@dataclass
class MuavTrack:
    prev_pos: Vec3
    curr_pos: Vec3
    factor: float = 2.0

    def update(self, pos: Vec3) -> None:
        self.prev_pos = self.curr_pos
        self.curr_pos = pos


def predict_muav(track: MuavTrack) -> Vec3:
    """Linear extrapolation of the last observed displacement."""
    c, p = track.curr_pos, track.prev_pos
    f = track.factor
    return (c[0] + f * (c[0] - p[0]), c[1] + f * (c[1] - p[1]), c[2] + f * (c[2] - p[2]))


def chase_forces(ch_pos: Vec3, muav_pos: Vec3, predicted: Vec3, w0: float = 0.5,
                 w1: float = 1.0, previous_heading: Vec3 = g.ZERO) -> List[Tuple[Vec3, float]]:
    """Lateral anticipation force and direct pursuit force.

    The lateral term is the part of the CH->prediction vector orthogonal to
    the CH->intruder line.  When CH and intruder coincide there is no line to
    project on, so the lateral term is zero and the CH keeps its previous
    heading.
    """
    n = g.sub(muav_pos, ch_pos)
    nn = g.dot(n, n)
    if nn == 0.0:
        return [(g.ZERO, w0), (previous_heading, w1)]
    v = g.sub(predicted, ch_pos)
    # |v|cos(angle(n, v)) along n-hat, i.e. n scaled by (n.v)/|n|^2
    f = g.dot(n, v) / nn
    v_p = (v[0] - n[0] * f, v[1] - n[1] * f, v[2] - n[2] * f)
    return [(v_p, w0), (n, w1)]


def phase_step(phase: PursuitPhase, dist_ch_muav: float, r_F: float) -> PursuitPhase:
    if r_F <= 0:
        raise ValueError("formation radius must be positive")
    if phase is PursuitPhase.CHASE and dist_ch_muav < r_F:
        return PursuitPhase.ESCORT
    if phase is PursuitPhase.ESCORT and dist_ch_muav > 2.0 * r_F:
        return PursuitPhase.CHASE
    return phase


def escort_heading(ch_pos: Vec3, zone: Sequence[float]) -> Vec3:
    """Unit vector toward the nearest face of the box ``[0, zone[i]]``.

    Faces are scanned x, y, z with the lower face first, so ties go to the
    earliest face in that order.  A position outside the box gets the zero
    vector.
    """
    if any(not 0.0 <= c <= zone[i] for i, c in enumerate(ch_pos)):
        return g.ZERO
    best = None
    heading = g.ZERO
    for axis in range(3):
        for sign, gap in ((-1.0, ch_pos[axis]), (1.0, zone[axis] - ch_pos[axis])):
            if best is None or gap < best:
                best = gap
                h = [0.0, 0.0, 0.0]
                h[axis] = sign
                heading = (h[0], h[1], h[2])
    return heading


def face_gap(pos: Vec3, heading: Vec3, zone: Sequence[float]) -> float:
    """Distance from *pos* to the box face that the axis-aligned *heading* points at."""
    for axis in range(3):
        if heading[axis] > 0:
            return zone[axis] - pos[axis]
        if heading[axis] < 0:
            return pos[axis]
    raise ValueError("heading is not axis aligned")


FACES: Tuple[Vec3, ...] = ((-1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, -1.0, 0.0),
                           (0.0, 1.0, 0.0), (0.0, 0.0, -1.0), (0.0, 0.0, 1.0))


def heading_cost(heading: Vec3, muav_pos: Vec3, zone: Sequence[float],
                 ch_pos: Optional[Vec3] = None, orbit_radius: float = 0.0) -> float:
    """Rough path length for escorting along *heading*: the intruder's gap to
    that face plus the arc the CH has to fly round to get behind it."""
    cost = face_gap(muav_pos, heading, zone)
    if ch_pos is not None and orbit_radius > 0:
        rel = g.sub(ch_pos, muav_pos)
        r = g.norm(rel)
        if r > 0:
            c = max(-1.0, min(1.0, -g.dot(rel, heading) / r))
            cost += orbit_radius * math.acos(c)
    return cost


def retarget_heading(current: Vec3, pos: Vec3, zone: Sequence[float],
                     hysteresis: float = 0.0, ch_pos: Optional[Vec3] = None,
                     orbit_radius: float = 0.0) -> Vec3:
    """Keep *current* unless another face is cheaper by more than *hysteresis*.

    Without *ch_pos* the cost of a face is the gap from *pos* to it, so the
    best course is :func:`escort_heading`.  With it, the arc the CH must
    orbit to get behind the intruder is added (see :func:`heading_cost`).
    The zero vector as *current* means no course yet.  Outside the box the
    current course is kept.
    """
    if escort_heading(pos, zone) == g.ZERO:
        return current
    costs = [heading_cost(f, pos, zone, ch_pos, orbit_radius) for f in FACES]
    best = FACES[min(range(len(FACES)), key=costs.__getitem__)]
    if current == g.ZERO or best == current:
        return best
    if min(costs) < heading_cost(current, pos, zone, ch_pos, orbit_radius) - hysteresis:
        return best
    return current


def herding_target(ch_pos: Vec3, muav_pos: Vec3, heading: Vec3, drive_gap: float,
                   orbit_radius: float, drive_cone: float = math.pi / 4,
                   orbit_step: float = math.pi / 6, drive_pull: float = 1.0) -> Vec3:
    """Point the CH steers to while escorting the intruder along *heading*.

    From within *drive_cone* of the rear the CH closes in to *drive_gap* and
    pushes; its bearing is turned toward the rear by the fraction
    *drive_pull* of the current offset (1 puts it straight behind).  Anywhere else it
    circles at *orbit_radius*, turning its bearing toward the rear by at most
    *orbit_step* per call, so that it never shoves the intruder backwards.
    """
    rear = g.scale(heading, -1.0)
    rel = g.sub(ch_pos, muav_pos)
    r = g.norm(rel)
    if r == 0.0:
        return g.add(muav_pos, g.scale(rear, orbit_radius))
    u = g.scale(rel, 1.0 / r)
    c = max(-1.0, min(1.0, g.dot(u, rear)))
    ang = math.acos(c)
    axis = g.cross(u, rear)
    if g.norm(axis) < 1e-9:
        if ang <= drive_cone:
            return g.add(muav_pos, g.scale(rear, drive_gap))
        # straight ahead of the intruder: go round on any side
        axis = perpendicular_reference(rear)
    axis = g.normalize(axis)
    if ang <= drive_cone:
        bearing = g.rotate_rodrigues(u, axis, drive_pull * ang)
        return g.add(muav_pos, g.scale(bearing, drive_gap))
    bearing = g.rotate_rodrigues(u, axis, min(orbit_step, ang))
    return g.add(muav_pos, g.scale(bearing, orbit_radius))
