"""Deterministic synchronous simulation of the defense swarm.

One :class:`World` owns every body and the cluster protocol.  A tick runs a
fixed sequence: sense neighborhoods, deliver messages and advance the
protocol, let each cluster head decide its pursuit phase and broadcast the
formation frame, steer members toward their slots, integrate physics, and
check whether the intruder has left the flight zone.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, IO, List, Optional, Set, Tuple

import numpy as np

from . import formation as fm
from . import geometry as g
from . import physics as ph
from . import pursuit as pu
from .geometry import Vec3
from .protocol import ClusterProtocol, Message, MsgKind, NodeState, Role, actual_branch_lengths
from .pursuit import PursuitPhase


# fraction of the radio range beyond which a member steers back to its parent
LINK_SLACK = 0.75


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    zone_x: float = 500.0
    zone_y: float = 500.0
    zone_z: float = 500.0
    n_duavs: int = 20
    comm_range: float = 100.0
    duav_wobble: float = 50.0
    muav_wobble: float = 150.0
    eps_d: float = 40.0
    eps_m: float = 60.0
    n_branches: int = 3
    theta_override: Optional[float] = None
    speed: float = 0.8
    body_radius: float = 10.0
    max_k: int = 3
    prediction_factor: float = 2.0
    beta_max: float = math.pi
    enclosure_ticks: int = 60
    speed_ratio: float = 0.9
    max_ticks: int = 20000
    seed: int = 0
    # engine knobs with decided defaults
    chase_w0: float = 0.5
    chase_w1: float = 1.0
    separation_c: float = 0.0
    pair_rule: str = "self"
    formation_placement: str = "vertex"
    duav_wobble_step: float = 0.001
    muav_wobble_step: float = 0.0002
    muav_escape_weight: float = 1.0
    muav_zone_margin: float = 250.0
    muav_zone_weight: float = 3.0
    escort_drive_cone: float = math.pi / 4
    heading_hysteresis: float = 25.0
    escort_lead_cap: float = 30.0

    def __post_init__(self):
        self.validate()

    @property
    def zone(self) -> Tuple[float, float, float]:
        return (self.zone_x, self.zone_y, self.zone_z)

    def validate(self) -> None:
        for name in ("zone_x", "zone_y", "zone_z", "comm_range", "eps_d", "eps_m",
                     "speed", "body_radius", "speed_ratio"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("duav_wobble", "muav_wobble", "prediction_factor", "separation_c",
                     "muav_zone_margin", "muav_zone_weight", "muav_escape_weight",
                     "chase_w0", "chase_w1", "duav_wobble_step", "muav_wobble_step",
                     "escort_drive_cone", "heading_hysteresis", "escort_lead_cap"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if min(self.eps_d, self.eps_m) < 2 * self.body_radius:
            raise ConfigError("collision thresholds must be at least one body diameter")
        if self.n_duavs < 1 or self.n_branches < 1 or self.max_k < 1:
            raise ConfigError("n_duavs, n_branches and max_k must be >= 1")
        if self.max_ticks < 0 or self.enclosure_ticks < 0:
            raise ConfigError("tick counts must be non-negative")
        if not math.pi / 2 <= self.beta_max <= math.pi:
            raise ConfigError("beta_max must lie in [pi/2, pi] radians")
        if self.formation_placement not in fm.PLACEMENTS:
            raise ConfigError(f"formation_placement must be one of {fm.PLACEMENTS}")
        if self.pair_rule not in ph.PAIR_RULES:
            raise ConfigError(f"pair_rule must be one of {ph.PAIR_RULES}")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def scalars(self) -> Dict[str, object]:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def parse_value(name: str, text: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _FIELD_TYPES[name]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "Optional[float]":
            return None if text.lower() in ("", "none") else float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def parse_config(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, val)
    return (base or ScenarioConfig()).replace(**values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for k, v in cfg.scalars().items():
        lines.append(f"{k} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"


class Outcome(enum.Enum):
    ESCORTED = "ESCORTED"
    TIMEOUT = "TIMEOUT"


@dataclass
class RunRecord:
    seed: int
    outcome: Outcome
    escort_ticks: int
    clusterless_final: int
    config: ScenarioConfig = field(repr=False)

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.ESCORTED


TRACE_HEADER = "tick,id,role,w_K,w_B,parent,child,x,y,z,phase"


@dataclass
class ChState:
    phase_ticks: int = 0
    heading: Vec3 = g.ZERO
    frame: Optional[fm.FormationFrame] = None


class World:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.tick_count = 0
        ss = np.random.SeedSequence(cfg.seed)
        spawn_ss, wobble_ss, misc_ss = ss.spawn(3)
        self.rng = np.random.default_rng(misc_ss)
        spawn_rng = np.random.default_rng(spawn_ss)
        wobble_rng = np.random.default_rng(wobble_ss)

        n = cfg.n_duavs
        zx, zy, zz = cfg.zone
        pts = np.column_stack([
            spawn_rng.uniform(0.0, 0.1 * zx, n),
            spawn_rng.uniform(0.0, zy, n),
            spawn_rng.uniform(0.0, zz, n),
        ])
        self.positions = np.vstack([pts, [[zx / 2, zy / 2, zz / 2]]]).astype(float)
        self.muav_index = n

        nodes = {i: NodeState(id=i, n_B=cfg.n_branches, pos=tuple(pts[i].tolist()))
                 for i in range(n)}
        self.protocol = ClusterProtocol(nodes, max_k=cfg.max_k)
        self.wobbles = [ph.WobbleState.seeded(cfg.duav_wobble, wobble_rng, cfg.duav_wobble_step)
                        for _ in range(n)]
        self.wobbles.append(ph.WobbleState.seeded(cfg.muav_wobble, wobble_rng, cfg.muav_wobble_step))
        self.wobble_field = ph.WobbleField(self.wobbles)
        self.thresholds = np.full(n + 1, cfg.eps_d)
        self.thresholds[n] = cfg.eps_m
        self.muav_speed = cfg.speed * cfg.speed_ratio
        self.muav_policy = ph.MuavPolicy(
            sensing_range=cfg.comm_range, escape_weight=cfg.muav_escape_weight,
            zone_margin=cfg.muav_zone_margin, zone_weight=cfg.muav_zone_weight,
            pair_rule=cfg.pair_rule, separation_c=cfg.separation_c)
        m = self.muav_pos
        self.track = pu.MuavTrack(prev_pos=m, curr_pos=m, factor=cfg.prediction_factor)
        self.ch_state: Dict[int, ChState] = {}
        self.last_report = None
        self.balance_violations = 0
        self.quiescent_ticks = 0

    # -- accessors ---------------------------------------------------------

    @property
    def nodes(self) -> Dict[int, NodeState]:
        return self.protocol.nodes

    @property
    def muav_pos(self) -> Vec3:
        p = self.positions[self.muav_index]
        return (float(p[0]), float(p[1]), float(p[2]))

    def set_muav_pos(self, pos: Vec3) -> None:
        self.positions[self.muav_index] = pos
        self.track = pu.MuavTrack(prev_pos=tuple(pos), curr_pos=tuple(pos),
                                  factor=self.cfg.prediction_factor)

    def muav_outside(self) -> bool:
        p = self.positions[self.muav_index]
        zone = self.cfg.zone
        return any(p[i] < 0.0 or p[i] > zone[i] for i in range(3))

    def distance_matrix(self) -> np.ndarray:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", d, d))

    def neighbor_sets(self, dist: Optional[np.ndarray] = None) -> Dict[int, Set[int]]:
        """dUAV adjacency under the strict circular range; the intruder is excluded."""
        n = self.cfg.n_duavs
        dist = self.distance_matrix() if dist is None else dist
        adj = dist[:n, :n] < self.cfg.comm_range
        np.fill_diagonal(adj, False)
        out: Dict[int, Set[int]] = {i: set() for i in range(n)}
        rows, cols = np.nonzero(adj)
        for i, j in zip(rows.tolist(), cols.tolist()):
            out[i].add(j)
        return out

    def neighbors(self, node_id: int) -> Set[int]:
        return self.neighbor_sets()[node_id]

    def clusterless(self) -> int:
        return sum(1 for n in self.nodes.values() if n.role is Role.FREE_UAV)

    def cluster_head_of(self) -> Dict[int, int]:
        owner = {}
        for n in self.nodes.values():
            if n.role is Role.CLUSTER_HEAD:
                owner[n.id] = n.id
                for root in n.branches:
                    cur = root
                    while cur is not None and cur in self.nodes and cur not in owner:
                        if self.nodes[cur].role is not Role.D_UAV:
                            break
                        owner[cur] = n.id
                        cur = self.nodes[cur].child
        return owner

    # -- tick --------------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        nodes = self.nodes
        n = cfg.n_duavs
        self.tick_count += 1
        t = self.tick_count

        dist = self.distance_matrix()
        nbrs = self.neighbor_sets(dist)
        for i in range(n):
            p = self.positions[i]
            nodes[i].pos = (float(p[0]), float(p[1]), float(p[2]))

        report = self.protocol.step(nbrs)
        self.last_report = report
        if report.quiescent:
            self.quiescent_ticks += 1
            for ch in nodes.values():
                if ch.role is Role.CLUSTER_HEAD:
                    lengths = actual_branch_lengths(nodes, ch)
                    if lengths and max(lengths) - min(lengths) > 1:
                        self.balance_violations += 1

        muav = self.muav_pos
        self.track.update(muav)
        predicted = pu.predict_muav(self.track)

        # summed, unclamped steering of every dUAV
        steer = np.zeros((n, 3))
        escorting: Set[int] = set()
        for cid in list(self.ch_state):
            if nodes[cid].role is not Role.CLUSTER_HEAD:
                del self.ch_state[cid]
        for i in range(n):
            node = nodes[i]
            if node.role is Role.CLUSTER_HEAD:
                steer[i] = ph.cumulative_force(self._cluster_head_turn(node, muav, predicted))
                if node.phase is PursuitPhase.ESCORT:
                    escorting.add(i)
        for i in range(n):
            node = nodes[i]
            if node.role is Role.D_UAV:
                steer[i] = self._member_steer(node)
            elif node.role is Role.FREE_UAV:
                target = self.protocol.flock_targets.get(i)
                if target is not None:
                    steer[i] = _arrive(node.pos, target)

        sep = ph.separation_all(self.positions, self.thresholds, c=cfg.separation_c,
                                rule=cfg.pair_rule, rng=self.rng, dist=dist)
        wob = self.wobble_field.deltas(t)
        # same arithmetic as physics.integrate, applied to all dUAVs at once
        v = steer + sep[:n]
        speed = np.sqrt(np.einsum("ij,ij->i", v, v))
        over = speed > cfg.speed
        if over.any():
            v[over] *= (cfg.speed / speed[over])[:, None]
        new_pos = self.positions.copy()
        moved = self.positions[:n] + v + wob[:n]
        zone = np.array(cfg.zone)
        clamped = np.clip(moved, 0.0, zone)
        if escorting:
            owner = self.cluster_head_of()
            for i, c in owner.items():
                if c in escorting:
                    clamped[i] = moved[i]
        new_pos[:n] = clamped
        wob = wob.tolist()

        visible = [nodes[i].pos for i in range(n) if dist[self.muav_index, i] < cfg.comm_range]
        body = ph.KinematicBody(pos=muav, max_speed=self.muav_speed,
                                body_radius=cfg.body_radius, collision_threshold=cfg.eps_m)
        mforces = ph.muav_policy(body, visible, cfg.zone, self.muav_policy, duav_threshold=cfg.eps_d,
                                 rng=self.rng)
        new_pos[self.muav_index] = ph.integrate(
            muav, mforces, wob[self.muav_index], self.muav_speed)
        self.positions = new_pos

    def _cluster_head_turn(self, ch: NodeState, muav: Vec3, predicted: Vec3) -> List[ph.Force]:
        cfg = self.cfg
        st = self.ch_state.setdefault(ch.id, ChState())
        max_len = max(ch.branches.values()) if ch.branches else 0
        r_F = fm.cluster_radius(cfg.eps_d, max_len)
        d = g.distance(ch.pos, muav)
        new_phase = pu.phase_step(ch.phase, d, r_F)
        if new_phase is not ch.phase:
            ch.phase = new_phase
            st.phase_ticks = 0
        else:
            st.phase_ticks += 1

        beta = math.pi / 2
        if ch.phase is PursuitPhase.ESCORT:
            beta = fm.enclosure_angle(st.phase_ticks, cfg.beta_max, cfg.enclosure_ticks)
        if ch.phase is PursuitPhase.ESCORT:
            current = g.ZERO if st.phase_ticks == 0 else st.heading
            st.heading = pu.retarget_heading(current, muav, cfg.zone, cfg.heading_hysteresis,
                                             ch.pos, cfg.eps_m + cfg.eps_d / 2.0)
        if d > 0.0:
            st.frame = fm.build_frame(ch.pos, muav, cfg.eps_d, max_len, beta,
                                      cfg.formation_placement)
        frame = st.frame

        if frame is not None:
            n_b = cfg.n_branches
            msgs = []
            for idx, root in enumerate(ch.branches, start=1):
                if idx > n_b:
                    break
                bdir = fm.branch_root_direction(frame, idx, n_b, cfg.theta_override)
                msgs.append(Message(MsgKind.ROT, ch.id, root, (frame, bdir)))
            self.protocol.send(msgs)

        if ch.phase is PursuitPhase.ESCORT:
            # intercept course: lead the intruder by the time needed to reach it
            lead = min(d / cfg.speed, cfg.escort_lead_cap)
            vel = g.sub(self.track.curr_pos, self.track.prev_pos)
            aim = g.add(muav, g.scale(vel, lead))
            target = pu.herding_target(ch.pos, aim, st.heading, cfg.eps_d,
                                       cfg.eps_m + cfg.eps_d / 2.0,
                                       drive_cone=cfg.escort_drive_cone)
            return [ph.steer_toward(ch.pos, target, cfg.chase_w1)]

        (v_p, w0), (n_vec, w1) = pu.chase_forces(ch.pos, muav, predicted, cfg.chase_w0,
                                                 cfg.chase_w1, st.heading)
        span = g.norm(n_vec)
        if span == 0.0:
            return [ph.Force(st.heading, w1)]
        st.heading = g.scale(n_vec, 1.0 / span)
        return [ph.Force(g.scale(v_p, 1.0 / span), w0), ph.Force(st.heading, w1)]

    def _member_steer(self, node: NodeState) -> Vec3:
        parent = self.nodes.get(node.parent)
        if parent is not None and g.distance(node.pos, parent.pos) > LINK_SLACK * self.cfg.comm_range:
            # keep the tree connected before chasing the slot
            return _arrive(node.pos, parent.pos)
        if node.frame is not None:
            frame, bdir = node.frame
            return _arrive(node.pos, fm.member_slot(frame, bdir, node.w_B))
        if parent is None:
            return g.ZERO
        return _arrive(node.pos, parent.pos)

    # -- output ------------------------------------------------------------

    def trace_rows(self) -> List[str]:
        t = self.tick_count
        rows = []
        for i in sorted(self.nodes):
            nd = self.nodes[i]
            x, y, z = (repr(float(c)) for c in self.positions[i])
            phase = nd.phase.value if nd.role is Role.CLUSTER_HEAD else ""
            rows.append(f"{t},{i},{nd.role.value},{nd.w_K},{nd.w_B},"
                        f"{'' if nd.parent is None else nd.parent},"
                        f"{'' if nd.child is None else nd.child},{x},{y},{z},{phase}")
        x, y, z = (repr(float(c)) for c in self.positions[self.muav_index])
        rows.append(f"{t},{self.muav_index},{Role.MALICIOUS.value},0,0,,,{x},{y},{z},")
        return rows


def _arrive(pos: Vec3, target: Vec3) -> Vec3:
    """Unit-weight arrival steering as a bare vector (see physics.steer_toward)."""
    dx, dy, dz = target[0] - pos[0], target[1] - pos[1], target[2] - pos[2]
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    if d > 1.0:
        return (dx / d, dy / d, dz / d)
    return (dx, dy, dz)


def spawn(cfg: ScenarioConfig) -> World:
    return World(cfg)


def tick(world: World) -> World:
    world.step()
    return world


def run(cfg: ScenarioConfig, trace: Optional[IO[str]] = None,
        world: Optional[World] = None) -> RunRecord:
    """Run one mission until the intruder leaves the zone or ``max_ticks`` pass."""
    world = World(cfg) if world is None else world
    if trace is not None:
        trace.write(TRACE_HEADER + "\n")
        for row in world.trace_rows():
            trace.write(row + "\n")
    while True:
        if world.muav_outside():
            outcome = Outcome.ESCORTED
            break
        if world.tick_count >= cfg.max_ticks:
            outcome = Outcome.TIMEOUT
            break
        world.step()
        if trace is not None:
            for row in world.trace_rows():
                trace.write(row + "\n")
    return RunRecord(seed=cfg.seed, outcome=outcome, escort_ticks=world.tick_count,
                     clusterless_final=world.clusterless(), config=cfg)
