"""Hemispherical capture formation: frames, branch directions, member slots.

A cluster head (CH) lays its branches out as meridian arcs of a sphere of
radius ``r_F``.  Branch ``i`` runs in the half-plane spanned by the
CH->intruder axis ``d_hat`` and a direction obtained by rotating a reference
vector perpendicular to that axis; the member at depth ``w_B`` sits at arc
angle ``alpha0 + theta_frac * w_B``.

Two placements are supported:

``"centred"``
    The sphere is centred on the CH and angles start at its transverse ring
    (``alpha0 = 0``), so the deepest member of a hemisphere sits on the pole
    facing the intruder.
``"vertex"``
    The CH is the back pole of a sphere centred ``r_F`` ahead of it
    (``alpha0 = -pi/2``).  The CH and its branch members are then consecutive
    vertices of the inscribed ``4*max``-gon, so every parent-child link,
    CH->root included, spans one polygon side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import geometry as g
from .geometry import Vec3

HEMISPHERE = math.pi / 2
PLACEMENTS = ("centred", "vertex")


@dataclass(frozen=True)
class FormationFrame:
    origin: Vec3
    d_hat: Vec3
    v_hat: Vec3
    r_F: float
    theta_frac: float
    beta: float
    alpha0: float = 0.0


def perpendicular_reference(d_hat: Vec3) -> Vec3:
    c = g.cross(d_hat, g.WORLD_UP)
    if g.norm(c) < 1e-9:
        return g.WORLD_X
    return g.normalize(c)


def cluster_radius(eps_d: float, max_len: int) -> float:
    """Formation radius, with ``eps_d`` standing in for a CH without branches."""
    if max_len < 1:
        return eps_d
    return g.formation_radius(eps_d, max_len)


def build_frame(ch_pos: Vec3, muav_pos: Vec3, eps_d: float, max_len: int,
                beta: float = HEMISPHERE, placement: str = "centred") -> FormationFrame:
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}")
    if not (HEMISPHERE - 1e-12 <= beta <= math.pi + 1e-12):
        raise g.GeometryError(f"enclosing angle {beta} outside [pi/2, pi]")
    axis = g.sub(muav_pos, ch_pos)
    if g.norm(axis) == 0.0:
        raise g.GeometryError("CH and mUAV positions coincide")
    d_hat = g.normalize(axis)
    steps = max(max_len, 1)
    r_F = cluster_radius(eps_d, max_len)
    if placement == "vertex":
        origin, alpha0 = g.add(ch_pos, g.scale(d_hat, r_F)), -HEMISPHERE
    else:
        origin, alpha0 = ch_pos, 0.0
    return FormationFrame(
        origin=origin,
        d_hat=d_hat,
        v_hat=perpendicular_reference(d_hat),
        r_F=r_F,
        theta_frac=beta / steps,
        beta=beta,
        alpha0=alpha0,
    )


def branch_root_direction(frame: FormationFrame, branch_index: int, n_branches: int,
                          theta_override: Optional[float] = None) -> Vec3:
    """Direction of branch *branch_index* (1-based) in the plane normal to ``d_hat``.

    ``theta_override`` replaces the even ``2*pi/n_branches`` spacing with a
    fixed angular step between consecutive branches.
    """
    if theta_override is None:
        angle = g.branch_rotation_angle(branch_index, n_branches)
    else:
        if not 1 <= branch_index <= n_branches:
            raise g.GeometryError(f"branch index {branch_index} outside 1..{n_branches}")
        angle = theta_override * (branch_index - 1)
    return g.rotate_rodrigues(frame.v_hat, frame.d_hat, angle)


def member_slot(frame: FormationFrame, branch_dir: Vec3, w_B: int,
                anchor: Optional[Vec3] = None) -> Vec3:
    """Absolute position of the branch member at depth *w_B*.

    The slot is ``anchor + r_F*(cos(a)*branch_dir + sin(a)*d_hat)`` with
    ``a = alpha0 + theta_frac * w_B``; *anchor* defaults to the sphere
    centre held in the frame.
    """
    if w_B < 1:
        raise g.GeometryError("member depth must be >= 1")
    alpha = frame.alpha0 + frame.theta_frac * w_B
    x = frame.r_F * math.cos(alpha)
    z = frame.r_F * math.sin(alpha)
    o = frame.origin if anchor is None else anchor
    b = branch_dir
    d = frame.d_hat
    return (o[0] + b[0] * x + d[0] * z, o[1] + b[1] * x + d[1] * z, o[2] + b[2] * x + d[2] * z)


def chord_length(frame: FormationFrame) -> float:
    """Distance between consecutive slots on one branch."""
    return 2.0 * frame.r_F * math.sin(frame.theta_frac / 2.0)


def enclosure_angle(ticks_in_escort: int, beta_max: float = math.pi,
                    enclosure_ticks: int = 60) -> float:
    """Enclosing angle after *ticks_in_escort* ticks of escort, opening linearly
    from a hemisphere to *beta_max*."""
    if ticks_in_escort <= 0:
        return HEMISPHERE
    if enclosure_ticks <= 0 or ticks_in_escort >= enclosure_ticks:
        return beta_max
    return HEMISPHERE + (beta_max - HEMISPHERE) * ticks_in_escort / enclosure_ticks
