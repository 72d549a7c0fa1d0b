"""Seeded synthetic matches with scripted possessions.

The generator simulates one continuous match at 25 Hz. Possessions alternate
between the teams; each one is scripted as a chain of carries and passes
towards a scenario-specific end zone and closes with a goal, a missed shot
or a lost pass. Off-ball players track formation slots shifted with the
ball plus a slowly drifting personal offset. The ground truth (carriers,
outcomes, frame spans) is returned alongside the raw tracking and events.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import (
    BALL_ID,
    EventRecord,
    MatchMeta,
    TrackingData,
    _atomic_write_text,
    event_to_dict,
    write_tracking_csv,
)
from .pitch import AWAY, HOME

SCENARIOS = ("random_walk", "counterattack", "buildup")
FRAME_RATE = 25.0
DT = 1.0 / FRAME_RATE

# formation slots for a team attacking +x (own goal at -52.5)
FORMATION_SLOTS = {
    "4-4-2": [(-48, 0), (-32, -22), (-34, -8), (-34, 8), (-32, 22),
              (-12, -22), (-14, -7), (-14, 7), (-12, 22), (4, -7), (4, 7)],
    "4-3-3": [(-48, 0), (-32, -22), (-34, -8), (-34, 8), (-32, 22),
              (-15, -12), (-17, 0), (-15, 12), (2, -20), (5, 0), (2, 20)],
}
TEAM_FORMATION = {HOME: "4-4-2", AWAY: "4-3-3"}
DEFAULT_GOAL_PROB = {"random_walk": 0.2, "counterattack": 0.4, "buildup": 0.1}


@dataclass
class SynthDataset:
    tracking: TrackingData
    events: list[EventRecord]
    meta: MatchMeta
    truth: list[dict]
    scenario: str
    seed: int


def _ids(team: str) -> list[int]:
    return list(range(1, 12)) if team == HOME else list(range(12, 23))


class _Match:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.pos = np.zeros((23, 2))  # index 0 is the ball, 1..22 players
        self.vel = np.zeros((23, 2))
        self.drift = rng.normal(0.0, 3.0, size=(23, 2))
        for team in (HOME, AWAY):
            d = 1 if team == HOME else -1
            for k, oid in enumerate(_ids(team)):
                sx, sy = FORMATION_SLOTS[TEAM_FORMATION[team]][k]
                self.pos[oid] = (d * sx, sy)
        self.rows: list[tuple[int, float, np.ndarray]] = []
        self.frame = 0

    def team_slots(self, team: str, attacking: str, ball_norm: np.ndarray, d: int) -> np.ndarray:
        """Raw-coordinate targets of a team's players for the current ball position."""
        slots = np.array(FORMATION_SLOTS[TEAM_FORMATION[team]], dtype=float)
        if team == attacking:
            shift = np.array([0.7 * ball_norm[0] + 8.0, 0.25 * ball_norm[1]])
            norm = slots + shift
            norm[0] = slots[0] + (0.3 * ball_norm[0], 0.0)
        else:
            # defenders mirror their slots into the attacked half, compressed towards goal
            norm = np.column_stack([-slots[:, 0], -slots[:, 1]])
            norm[:, 0] = 0.55 * norm[:, 0] + 0.45 * max(ball_norm[0], -20.0) + 12.0
            norm[:, 1] = 0.8 * norm[:, 1] + 0.3 * ball_norm[1]
            norm[0] = (51.0, 0.3 * ball_norm[1])
        norm[:, 0] = np.clip(norm[:, 0], -51.5, 51.5)
        norm[:, 1] = np.clip(norm[:, 1], -33.0, 33.0)
        return np.column_stack([d * norm[:, 0], norm[:, 1]])

    def step(self, attacking: str, d: int, carrier: int | None, ball_target: np.ndarray,
             overrides: dict[int, np.ndarray]) -> None:
        """Advance one frame; the ball moves to ``ball_target`` exactly."""
        rng = self.rng
        self.drift += rng.normal(0.0, 0.25, size=self.drift.shape) - 0.02 * self.drift
        new_ball = np.asarray(ball_target, float)
        self.vel[0] = (new_ball - self.pos[0]) / DT
        self.pos[0] = new_ball
        ball_norm = np.array([d * new_ball[0], new_ball[1]])
        for team in (HOME, AWAY):
            targets = self.team_slots(team, attacking, ball_norm, d)
            for k, oid in enumerate(_ids(team)):
                if oid == carrier:
                    heading = self.vel[0] / (np.linalg.norm(self.vel[0]) + 1e-9)
                    target = new_ball - 0.6 * heading
                    self.vel[oid] = (target - self.pos[oid]) / DT
                    self.pos[oid] = target
                    continue
                target = overrides.get(oid, targets[k] + (0 if k == 0 else self.drift[oid]))
                desired = (target - self.pos[oid]) * 1.2
                speed = np.linalg.norm(desired)
                vmax = 7.0 if oid in overrides else 6.0
                if speed > vmax:
                    desired *= vmax / speed
                self.vel[oid] = 0.85 * self.vel[oid] + 0.15 * desired
                self.pos[oid] = self.pos[oid] + self.vel[oid] * DT
                self.pos[oid] = np.clip(self.pos[oid], (-52.0, -33.5), (52.0, 33.5))
        self.rows.append((self.frame, self.frame / FRAME_RATE, self.pos.copy()))
        self.frame += 1


def _norm(p: np.ndarray, d: int) -> np.ndarray:
    return np.array([d * p[0], p[1]])


def _raw(p: np.ndarray, d: int) -> np.ndarray:
    return np.array([d * p[0], p[1]])


def synth_generate(seed: int, n_sequences: int, scenario: str = "random_walk",
                   goal_prob: dict[str, float] | None = None) -> SynthDataset:
    """Deterministic synthetic match with ``n_sequences`` scripted possessions.

    ``goal_prob`` maps team to the probability that one of its possessions
    ends in a goal; it defaults to a scenario-specific rate for both teams.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    rng = np.random.default_rng(seed)
    if goal_prob is None:
        p = DEFAULT_GOAL_PROB[scenario]
        goal_prob = {HOME: p, AWAY: p}
    m = _Match(rng)
    m.pos[0] = (0.0, 0.0)
    events: list[EventRecord] = []
    truth: list[dict] = []
    team = HOME
    carrier = 11  # kickoff by the home centre-forward
    m.pos[carrier] = (-0.6, 0.0)
    start_action = "pass"

    for seq in range(n_sequences):
        d = 1 if team == HOME else -1
        possession_id = seq + 1
        start_frame = m.frame
        carriers = [carrier]
        ball = _norm(m.pos[0], d)
        scores = rng.random() < goal_prob[team]
        if scenario == "counterattack":
            end = np.array([rng.uniform(28.0, 38.0), rng.uniform(-9.0, 9.0)])
            n_passes = int(rng.integers(1, 4))
        elif scenario == "buildup":
            end = np.array([rng.uniform(-15.0, 10.0), rng.uniform(-25.0, 25.0)])
            n_passes = int(rng.integers(2, 5))
        else:
            end = np.array([rng.uniform(-25.0, 40.0), rng.uniform(-28.0, 28.0)])
            n_passes = int(rng.integers(1, 4))
        if scores:
            end = np.array([rng.uniform(25.0, 36.0), rng.uniform(-8.0, 8.0)])
        ending = "goal" if scores else str(rng.choice(["shot", "lost"]) if end[0] > 20 else "lost")

        def emit(action: str, player: int) -> None:
            events.append(EventRecord(
                timestamp=m.frame / FRAME_RATE, action_type=action, player_id=player,
                team=team, position=(float(m.pos[0][0]), float(m.pos[0][1])),
                possession_id=possession_id))

        emit(start_action, carrier)
        for phase in range(n_passes + 1):
            frac = (phase + 1) / (n_passes + 1)
            waypoint = ball + (end - ball) * frac + rng.normal(0.0, 4.0, 2) * (phase < n_passes)
            waypoint = np.clip(waypoint, (-50.0, -32.0), (50.0, 32.0))
            carry_len = int(rng.integers(5, 11))
            speed = rng.uniform(3.0, 6.0)
            if phase > 0 and rng.random() < 0.3:
                emit("dribble", carrier)
            for _ in range(carry_len):
                cur = _norm(m.pos[0], d)
                gap = waypoint - cur
                dist = np.linalg.norm(gap)
                stepv = gap / dist * min(speed * DT, dist) if dist > 1e-9 else np.zeros(2)
                m.step(team, d, carrier, _raw(cur + stepv, d), {})
            if phase == n_passes:
                break
            mates = [oid for oid in _ids(team)[1:] if oid != carrier]
            nxt = ball + (end - ball) * min(1.0, (phase + 2) / (n_passes + 1))
            receiver = min(mates, key=lambda o: np.linalg.norm(_norm(m.pos[o], d) - nxt))
            origin = _norm(m.pos[0], d)
            dest = _norm(m.pos[receiver], d) + 0.5 * (nxt - _norm(m.pos[receiver], d))
            dest = np.clip(dest, (-50.0, -32.0), (50.0, 32.0))
            flight = max(4, int(np.ceil(np.linalg.norm(dest - origin) / 22.0 * FRAME_RATE)))
            kind = "through_pass" if dest[0] - origin[0] > 15 else (
                "cross" if abs(dest[1]) < 10 and abs(origin[1]) > 20 and origin[0] > 25 else "pass")
            emit(kind, carrier)
            for k in range(1, flight + 1):
                ball_k = origin + (dest - origin) * k / flight
                m.step(team, d, None, _raw(ball_k, d), {receiver: _raw(dest, d)})
            carrier = receiver
            carriers.append(carrier)
            m.pos[carrier] = m.pos[0] - np.array([0.6 * d, 0.0])

        # closing action
        origin = _norm(m.pos[0], d)
        length = m.frame - start_frame
        if ending in ("goal", "shot"):
            emit("goal" if ending == "goal" else "shot", carrier)
            aim = np.array([52.4, rng.uniform(-3.0, 3.0) if ending == "goal" else rng.choice([-1, 1]) * rng.uniform(5.0, 9.0)])
        else:
            emit("pass", carrier)
            aim = origin + np.array([rng.uniform(8.0, 18.0), rng.uniform(-10.0, 10.0)])
            aim = np.clip(aim, (-50.0, -32.0), (50.0, 32.0))
        flight = max(6, int(np.ceil(np.linalg.norm(aim - origin) / 25.0 * FRAME_RATE)))
        flight = max(flight, 30 - length)
        opp = AWAY if team == HOME else HOME
        interceptor = None
        if ending == "lost":
            interceptor = min(_ids(opp)[1:], key=lambda o: np.linalg.norm(_norm(m.pos[o], d) - aim))
        for k in range(1, flight + 1):
            ball_k = origin + (aim - origin) * k / flight
            over = {interceptor: _raw(aim, d)} if interceptor else {}
            m.step(team, d, None, _raw(ball_k, d), over)
        truth.append({
            "possession_id": possession_id,
            "team": team,
            "start_frame": start_frame,
            "n_frames": m.frame - start_frame,
            "outcome": "goal" if ending == "goal" else "other",
            "carriers": carriers,
            "final_ball_norm": [float(v) for v in _norm(m.pos[0], d)],
        })

        # hand over possession
        team = opp
        if ending == "goal":
            m.pos[0] = (0.0, 0.0)
            carrier = _ids(team)[-1]
            m.pos[carrier] = (0.6 if team == AWAY else -0.6, 0.0)
            start_action = "pass"
        elif ending == "shot":
            carrier = _ids(team)[0]  # goalkeeper collects
            m.pos[0] = (m.pos[0][0] - np.sign(m.pos[0][0]) * 1.5, float(np.clip(m.pos[0][1], -3, 3)))
            m.pos[carrier] = m.pos[0] - np.array([0.5 * np.sign(m.pos[0][0]), 0.0])
            start_action = "ball_recovery"
        else:
            carrier = interceptor
            m.pos[carrier] = m.pos[0].copy()
            start_action = "interception"

    tracking = _to_tracking(m.rows)
    meta = MatchMeta(
        players={oid: {"height": float(np.round(rng.uniform(168.0, 196.0), 1)),
                       "is_goalkeeper": oid in (1, 12)} for oid in range(1, 23)},
        formations=dict(TEAM_FORMATION),
        home_attack_direction=[(0, 1)],
    )
    return SynthDataset(tracking, events, meta, truth, scenario, seed)


def _to_tracking(rows: list[tuple[int, float, np.ndarray]]) -> TrackingData:
    frames = np.array([r[0] for r in rows], dtype=np.int64)
    ts = np.array([r[1] for r in rows], dtype=float)
    stack = np.stack([r[2] for r in rows])  # (T, 23, 2)
    objects = {BALL_ID: {"team": "ball", "jersey": 0, "xy": stack[:, 0].copy()}}
    for team in (HOME, AWAY):
        for k, oid in enumerate(_ids(team)):
            objects[oid] = {"team": team, "jersey": k + 1, "xy": stack[:, oid].copy()}
    return TrackingData(frames, ts, objects)


def write_synth(out_dir: str | Path, ds: SynthDataset) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "tracking": out / "tracking.csv",
        "events": out / "events.json",
        "meta": out / "meta.json",
        "truth": out / "truth.json",
    }
    write_tracking_csv(paths["tracking"], ds.tracking)
    _atomic_write_text(paths["events"], [json.dumps([event_to_dict(e) for e in ds.events], indent=1)])
    _atomic_write_text(paths["meta"], [json.dumps(ds.meta.to_dict(), indent=1, sort_keys=True)])
    _atomic_write_text(paths["truth"], [json.dumps(
        {"seed": ds.seed, "scenario": ds.scenario, "sequences": ds.truth}, indent=1)])
    return paths
