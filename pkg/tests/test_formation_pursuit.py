import math

import pytest
from hypothesis import given, strategies as st

from uavdefense import formation as fm
from uavdefense import geometry as g
from uavdefense import pursuit as pu

ZONE = (500.0, 500.0, 500.0)
inside = st.tuples(st.floats(1, 499), st.floats(1, 499), st.floats(1, 499))


# -- formation ----------------------------------------------------------------

def test_centred_frame_puts_deepest_member_on_the_axis():
    frame = fm.build_frame((0.0, 0.0, 0.0), (100.0, 0.0, 0.0), 40.0, 2)
    bdir = fm.branch_root_direction(frame, 1, 3)
    deepest = fm.member_slot(frame, bdir, 2)
    assert g.is_close(deepest, (frame.r_F, 0.0, 0.0), abs_tol=1e-9)
    first = fm.member_slot(frame, bdir, 1)
    assert math.isclose(g.norm(first), frame.r_F)


def test_vertex_frame_origin_ahead_of_ch():
    frame = fm.build_frame((0.0, 0.0, 0.0), (0.0, 100.0, 0.0), 40.0, 3, placement="vertex")
    assert g.is_close(frame.origin, (0.0, frame.r_F, 0.0))
    assert frame.alpha0 == -math.pi / 2


def test_branch_directions_are_perpendicular_and_spread():
    frame = fm.build_frame((0.0, 0.0, 0.0), (3.0, 4.0, 5.0), 40.0, 2)
    dirs = [fm.branch_root_direction(frame, i, 4) for i in range(1, 5)]
    for d in dirs:
        assert abs(g.dot(d, frame.d_hat)) < 1e-12
        assert math.isclose(g.norm(d), 1.0)
    assert math.isclose(g.dot(dirs[0], dirs[2]), -1.0)
    over = fm.branch_root_direction(frame, 2, 4, theta_override=math.pi / 2)
    assert g.is_close(over, dirs[1], abs_tol=1e-12)


def test_frame_rejects_bad_input():
    with pytest.raises(g.GeometryError):
        fm.build_frame((1.0, 1.0, 1.0), (1.0, 1.0, 1.0), 40.0, 2)
    with pytest.raises(g.GeometryError):
        fm.build_frame((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 40.0, 2, beta=0.1)
    with pytest.raises(ValueError):
        fm.build_frame((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 40.0, 2, placement="edge")


def test_vertical_axis_uses_world_x():
    assert fm.perpendicular_reference((0.0, 0.0, 1.0)) == g.WORLD_X


def test_enclosure_angle_opens_linearly():
    assert fm.enclosure_angle(0) == math.pi / 2
    assert math.isclose(fm.enclosure_angle(30, math.pi, 60), 3 * math.pi / 4)
    assert fm.enclosure_angle(600, math.pi, 60) == math.pi


def test_cluster_radius_without_branches():
    assert fm.cluster_radius(40.0, 0) == 40.0


# -- pursuit ------------------------------------------------------------------

def test_prediction_extrapolates():
    t = pu.MuavTrack(prev_pos=(0.0, 0.0, 0.0), curr_pos=(1.0, 2.0, 0.0))
    assert pu.predict_muav(t) == (3.0, 6.0, 0.0)
    t.update((2.0, 2.0, 0.0))
    assert t.prev_pos == (1.0, 2.0, 0.0)


@given(inside, inside, inside)
def test_lateral_force_is_orthogonal(ch, muav, pred):
    if g.distance(ch, muav) < 1e-3:
        return
    (v_p, _), (n, _) = pu.chase_forces(ch, muav, pred)
    assert abs(g.dot(v_p, n)) <= 1e-6 * max(1.0, g.norm(v_p) * g.norm(n))


def test_chase_when_coincident_keeps_heading():
    fs = pu.chase_forces((1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (5.0, 5.0, 5.0),
                         previous_heading=(0.0, 1.0, 0.0))
    assert fs == [(g.ZERO, 0.5), ((0.0, 1.0, 0.0), 1.0)]


def test_phase_hysteresis():
    C, E = pu.PursuitPhase.CHASE, pu.PursuitPhase.ESCORT
    assert pu.phase_step(C, 49.0, 50.0) is E
    assert pu.phase_step(C, 50.0, 50.0) is C
    assert pu.phase_step(E, 100.0, 50.0) is E
    assert pu.phase_step(E, 100.1, 50.0) is C
    with pytest.raises(ValueError):
        pu.phase_step(C, 1.0, 0.0)


def test_escort_heading_nearest_face_and_ties():
    assert pu.escort_heading((490.0, 250.0, 250.0), ZONE) == (1.0, 0.0, 0.0)
    assert pu.escort_heading((250.0, 250.0, 5.0), ZONE) == (0.0, 0.0, -1.0)
    assert pu.escort_heading((250.0, 250.0, 250.0), ZONE) == (-1.0, 0.0, 0.0)
    assert pu.escort_heading((600.0, 250.0, 250.0), ZONE) == g.ZERO


@given(inside)
def test_retarget_without_orbit_agrees_with_nearest_face(pos):
    assert pu.retarget_heading(g.ZERO, pos, ZONE) == pu.escort_heading(pos, ZONE)


def test_retarget_hysteresis():
    cur = (0.0, 1.0, 0.0)
    pos = (480.0, 300.0, 250.0)
    # +x is 180 closer than +y; a 25 margin is not enough to stay
    assert pu.retarget_heading(cur, pos, ZONE, 25.0) == (1.0, 0.0, 0.0)
    assert pu.retarget_heading(cur, pos, ZONE, 500.0) == cur
    assert pu.retarget_heading(cur, (700.0, 0.0, 0.0), ZONE, 0.0) == cur


def test_heading_cost_counts_the_orbit():
    muav = (250.0, 250.0, 250.0)
    behind = (200.0, 250.0, 250.0)
    ahead = (300.0, 250.0, 250.0)
    h = (1.0, 0.0, 0.0)
    assert pu.heading_cost(h, muav, ZONE) == 250.0
    assert pu.heading_cost(h, muav, ZONE, behind, 80.0) == 250.0
    assert math.isclose(pu.heading_cost(h, muav, ZONE, ahead, 80.0), 250.0 + 80.0 * math.pi)


def test_herding_target_drive_and_orbit():
    muav = (250.0, 250.0, 250.0)
    h = (1.0, 0.0, 0.0)
    # slightly off the rear axis: straight behind at the drive gap
    t = pu.herding_target((200.0, 260.0, 250.0), muav, h, 40.0, 80.0)
    assert g.is_close(t, (210.0, 250.0, 250.0), abs_tol=1e-9)
    # in front: one orbit step round, at the orbit radius
    t = pu.herding_target((300.0, 250.0, 250.0), muav, h, 40.0, 80.0)
    assert math.isclose(g.distance(t, muav), 80.0)
    rel = g.normalize(g.sub(t, muav))
    assert math.isclose(math.acos(g.dot(rel, h)), math.pi / 6, rel_tol=1e-9)
    assert g.is_close(pu.herding_target(muav, muav, h, 40.0, 80.0), (170.0, 250.0, 250.0))


@given(inside, inside)
def test_herding_target_distance(ch, muav):
    if g.distance(ch, muav) < 1e-6:
        return
    t = pu.herding_target(ch, muav, (0.0, 0.0, 1.0), 40.0, 80.0)
    assert math.isclose(g.distance(t, muav), 40.0) or math.isclose(g.distance(t, muav), 80.0)
