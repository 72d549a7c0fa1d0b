"""Event/tracking ingestion: synchronization, possession segmentation, action
labels and the State-Action-Reward (SAR) sample stream.

Input schemas
-------------
Tracking CSV, one row per object per frame (ball is object 0)::

    frame,timestamp_s,object_id,team,jersey,x_m,y_m

Events JSON: an array of objects with ``timestamp``, ``action_type``,
``player_id``, ``team``, ``position`` ([x, y]) and ``possession_id``.

An optional match metadata JSON carries per-player ``height`` and
``is_goalkeeper`` flags, team formations and the attack direction of the
home team (``home_attack_direction``: 1 for +x, -1 for -x, or a list of
``[from_frame, direction]`` pairs for period changes).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import actions as act
from .config import Config, IngestConfig, PitchConfig
from .edms import (
    INTER,
    INTRA,
    EdmsState,
    ImportanceSurface,
    PassScaling,
    assemble_state,
    edms_layout,
    pvs_layout,
    pvs_vector,
)
from .pitch import (
    AWAY,
    HOME,
    TEAMS,
    BallState,
    FrameSnapshot,
    PlayerState,
    compute_kinematics,
    normalize_attack_direction,
)
from .reward import GOAL, CONCEDED_NEXT, OTHER, EpvGrid, assign_rewards

log = logging.getLogger(__name__)

LAYOUT_VERSION = 1
TRACKING_COLUMNS = ("frame", "timestamp_s", "object_id", "team", "jersey", "x_m", "y_m")
BALL_ID = 0
STATE_KINDS = ("edms", "pvs")


@dataclass(frozen=True)
class EventRecord:
    timestamp: float
    action_type: str
    player_id: int
    team: str
    position: tuple[float, float]
    possession_id: int

    @property
    def is_goal(self) -> bool:
        return self.action_type.strip().lower() == "goal"


@dataclass
class MatchMeta:
    players: dict[int, dict] = field(default_factory=dict)
    formations: dict[str, str] = field(default_factory=dict)
    home_attack_direction: list[tuple[int, int]] = field(default_factory=lambda: [(0, 1)])

    def height(self, object_id: int) -> float:
        return float(self.players.get(object_id, {}).get("height", 180.0))

    def is_goalkeeper(self, object_id: int, jersey: int) -> bool:
        info = self.players.get(object_id, {})
        if "is_goalkeeper" in info:
            return bool(info["is_goalkeeper"])
        return jersey == 1

    def home_direction(self, frame: int) -> int:
        direction = self.home_attack_direction[0][1]
        for start, d in self.home_attack_direction:
            if frame >= start:
                direction = d
        return direction

    def to_dict(self) -> dict:
        return {
            "players": {str(k): v for k, v in self.players.items()},
            "formations": self.formations,
            "home_attack_direction": [list(x) for x in self.home_attack_direction],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatchMeta":
        direction = data.get("home_attack_direction", 1)
        if isinstance(direction, int):
            direction = [(0, direction)]
        else:
            direction = [(int(a), int(b)) for a, b in direction]
        for _, d in direction:
            if d not in (1, -1):
                raise ValueError("home_attack_direction entries must be 1 or -1")
        return cls(
            players={int(k): dict(v) for k, v in data.get("players", {}).items()},
            formations=dict(data.get("formations", {})),
            home_attack_direction=direction,
        )


@dataclass
class TrackingData:
    frames: np.ndarray  # (T,) frame numbers
    timestamps: np.ndarray  # (T,)
    objects: dict[int, dict]  # id -> {team, jersey, xy: (T, 2) with NaN gaps}


@dataclass
class AlignedStream:
    frames: list[FrameSnapshot]
    possession_ids: list[int | None]
    attached: dict[int, list[EventRecord]]
    dropped: int = 0


@dataclass
class PossessionSequence:
    possession_id: int
    team: str
    frames: list[FrameSnapshot]  # normalized: team attacks +x
    events: list[tuple[int, EventRecord]]  # (step, event)
    outcome: str | None
    shot_steps: list[int]
    inter_from: int | None = None

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class Trajectory:
    episode: int
    team: str
    player_id: int
    frames: np.ndarray
    states: np.ndarray  # (T, D)
    actions: np.ndarray  # (T,) int
    rewards: np.ndarray  # (T,)
    masks: np.ndarray  # (T, 16) bool

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class SarDataset:
    header: dict
    trajectories: list[Trajectory]

    @property
    def state_kind(self) -> str:
        return self.header["state_kind"]

    @property
    def state_dim(self) -> int:
        return int(self.header["state_dim"])

    def __len__(self) -> int:
        return len(self.trajectories)


# ---------------------------------------------------------------- reading


def read_tracking_csv(path: str | Path) -> TrackingData:
    rows_by_frame: dict[int, float] = {}
    objects: dict[int, dict] = {}
    samples: list[tuple[int, int, float, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACKING_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: tracking CSV is missing columns {sorted(missing)}")
        for row in reader:
            frame = int(row["frame"])
            rows_by_frame.setdefault(frame, float(row["timestamp_s"]))
            oid = int(row["object_id"])
            team = row["team"].strip().lower()
            if oid != BALL_ID and team not in TEAMS:
                raise ValueError(f"{path}: object {oid} has unknown team {team!r}")
            objects.setdefault(oid, {"team": team, "jersey": int(row["jersey"])})
            x = float(row["x_m"]) if row["x_m"] != "" else np.nan
            y = float(row["y_m"]) if row["y_m"] != "" else np.nan
            samples.append((frame, oid, x, y))
    frames = np.array(sorted(rows_by_frame), dtype=np.int64)
    index = {int(f): i for i, f in enumerate(frames)}
    for info in objects.values():
        info["xy"] = np.full((len(frames), 2), np.nan)
    for frame, oid, x, y in samples:
        objects[oid]["xy"][index[frame]] = (x, y)
    timestamps = np.array([rows_by_frame[int(f)] for f in frames], dtype=float)
    return TrackingData(frames, timestamps, objects)


def write_tracking_csv(path: str | Path, tracking: TrackingData) -> None:
    def rows():
        for i, frame in enumerate(tracking.frames):
            for oid in sorted(tracking.objects):
                info = tracking.objects[oid]
                x, y = info["xy"][i]
                if np.isnan(x) or np.isnan(y):
                    continue
                yield (int(frame), repr(float(tracking.timestamps[i])), oid, info["team"],
                       info["jersey"], repr(float(x)), repr(float(y)))

    _atomic_write_rows(path, TRACKING_COLUMNS, rows())


def read_events_json(path: str | Path) -> list[EventRecord]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: events JSON must be an array")
    return [event_from_dict(d) for d in data]


def event_from_dict(d: dict) -> EventRecord:
    try:
        return EventRecord(
            timestamp=float(d["timestamp"]),
            action_type=str(d["action_type"]),
            player_id=int(d["player_id"]),
            team=str(d["team"]).lower(),
            position=(float(d["position"][0]), float(d["position"][1])),
            possession_id=int(d["possession_id"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed event record {d!r}") from exc


def event_to_dict(e: EventRecord) -> dict:
    return {
        "timestamp": e.timestamp,
        "action_type": e.action_type,
        "player_id": e.player_id,
        "team": e.team,
        "position": list(e.position),
        "possession_id": e.possession_id,
    }


def read_meta_json(path: str | Path | None) -> MatchMeta:
    if path is None:
        return MatchMeta()
    with open(path, encoding="utf-8") as fh:
        return MatchMeta.from_dict(json.load(fh))


def build_frames(tracking: TrackingData, meta: MatchMeta, pitch: PitchConfig,
                 cfg: IngestConfig | None = None) -> list[FrameSnapshot]:
    """Frames in raw provider coordinates with kinematics; possession unset."""
    cfg = cfg or IngestConfig()
    if BALL_ID not in tracking.objects:
        raise ValueError("tracking data has no ball (object 0)")
    kin = {}
    for oid, info in tracking.objects.items():
        kin[oid] = compute_kinematics(info["xy"], pitch.frame_rate, tracking.timestamps,
                                      max_gap=cfg.max_gap_frames,
                                      smoothing_window=cfg.smoothing_window)
    player_ids = sorted(oid for oid in tracking.objects if oid != BALL_ID)
    if len(player_ids) != 22:
        raise ValueError(f"expected 22 tracked players, found {len(player_ids)}")
    frames = []
    for i, frame_no in enumerate(tracking.frames):
        players = []
        for oid in player_ids:
            info, k = tracking.objects[oid], kin[oid]
            players.append(PlayerState(
                player_id=oid,
                team=info["team"],
                jersey=info["jersey"],
                position=(float(k.position[i, 0]), float(k.position[i, 1])),
                velocity=(float(k.velocity[i, 0]), float(k.velocity[i, 1])),
                acceleration=(float(k.acceleration[i, 0]), float(k.acceleration[i, 1])),
                height=meta.height(oid),
                visible=bool(k.visible[i]),
                is_goalkeeper=meta.is_goalkeeper(oid, info["jersey"]),
            ))
        b = kin[BALL_ID]
        frames.append(FrameSnapshot(
            frame_index=int(frame_no),
            timestamp=float(tracking.timestamps[i]),
            players=tuple(players),
            ball=BallState((float(b.position[i, 0]), float(b.position[i, 1])),
                           (float(b.velocity[i, 0]), float(b.velocity[i, 1]))),
            possession_team=None,
            formations=dict(meta.formations),
        ))
    return frames


# ---------------------------------------------------------------- operations


def sync_events_tracking(events: Sequence[EventRecord], frames: Sequence[FrameSnapshot],
                         meta: MatchMeta | None = None, tolerance: float = 1.0) -> AlignedStream:
    """Attach each event to its nearest frame and propagate possession state.

    Ties go to the earlier frame; events farther than ``tolerance`` seconds
    from every frame are dropped and counted.
    """
    meta = meta or MatchMeta()
    frames = list(frames)
    ts = np.array([f.timestamp for f in frames], dtype=float)
    attached: dict[int, list[EventRecord]] = {}
    dropped = 0
    for e in sorted(events, key=lambda e: e.timestamp):
        if len(ts) == 0:
            dropped += 1
            continue
        j = int(np.searchsorted(ts, e.timestamp))
        candidates = [c for c in (j - 1, j) if 0 <= c < len(ts)]
        best = min(candidates, key=lambda c: (abs(ts[c] - e.timestamp), c))
        if abs(ts[best] - e.timestamp) > tolerance:
            dropped += 1
            continue
        attached.setdefault(best, []).append(e)
    if dropped:
        log.warning("dropped %d events farther than %.2f s from any frame", dropped, tolerance)

    out_frames, possession_ids = [], []
    pid, team, carrier = None, None, None
    for i, f in enumerate(frames):
        for e in attached.get(i, ()):
            pid, team, carrier = e.possession_id, e.team, e.player_id
        if team is None:
            out_frames.append(f)
        else:
            home_dir = meta.home_direction(f.frame_index)
            direction = home_dir if team == HOME else -home_dir
            out_frames.append(replace(f, possession_team=team, on_ball_player=carrier,
                                      attack_direction=direction))
        possession_ids.append(pid)
    return AlignedStream(out_frames, possession_ids, attached, dropped)


def segment_sequences(stream: AlignedStream, cfg: IngestConfig | None = None) -> list[PossessionSequence]:
    """Split the stream into contiguous possessions of 30-600 frames."""
    cfg = cfg or IngestConfig()
    segments: list[tuple[int, int, int]] = []  # (possession_id, start, stop)
    start = None
    for i, pid in enumerate(stream.possession_ids + [None]):
        prev = stream.possession_ids[i - 1] if i > 0 else None
        if start is not None and pid != prev:
            segments.append((prev, start, i))
            start = None
        if pid is not None and start is None:
            start = i

    raw = []
    for pid, a, b in segments:
        frames = stream.frames[a:b]
        team = frames[0].possession_team
        events = [(i - a, e) for i in range(a, b) for e in stream.attached.get(i, ())]
        outcome = GOAL if any(e.is_goal for _, e in events) else OTHER
        raw.append([pid, team, frames, events, outcome])
    for k in range(len(raw) - 1):
        if raw[k][4] == OTHER and raw[k + 1][1] != raw[k][1] and raw[k + 1][4] == GOAL:
            raw[k][4] = CONCEDED_NEXT

    sequences = []
    for pid, team, frames, events, outcome in raw:
        if len(frames) < cfg.min_frames:
            continue
        frames = frames[:cfg.max_frames]
        events = [(s, e) for s, e in events if s < len(frames)]
        shot_steps = sorted({s for s, e in events if _safe_class(e) == "shot"})
        frames = [normalize_attack_direction(f) for f in frames]
        inter_from = None
        team_events = [(s, e) for s, e in events if e.team == team]
        if team_events and _safe_class(team_events[-1][1]) in act.RELEASING_ACTIONS:
            last = max(s for s, _ in events)
            if last + 1 < len(frames):
                inter_from = last + 1
                frames = frames[:inter_from] + [replace(f, on_ball_player=None)
                                                for f in frames[inter_from:]]
        sequences.append(PossessionSequence(pid, team, frames, events, outcome, shot_steps, inter_from))
    return sequences


def _safe_class(e: EventRecord) -> str | None:
    try:
        return act.map_provider_action(e.action_type)
    except ValueError:
        return None


def attacking_carrier(frame: FrameSnapshot) -> int | None:
    pid = frame.on_ball_player
    if pid is None:
        return None
    return pid if frame.player(pid).team == frame.possession_team else None


def attackers_of(sequence: PossessionSequence) -> list[int]:
    return [p.player_id for p in sorted(sequence.frames[0].team_players(sequence.team),
                                        key=lambda p: p.jersey)]


def label_actions(sequence: PossessionSequence, cfg: IngestConfig | None = None,
                  frame_rate: float = 25.0) -> tuple[list[int], np.ndarray]:
    """Per-step action index for each attacker (columns ordered by jersey)."""
    cfg = cfg or IngestConfig()
    for _, e in sequence.events:
        act.map_provider_action(e.action_type)  # raises with the offending string
    ids = attackers_of(sequence)
    T = len(sequence.frames)
    labels = np.full((T, len(ids)), act.STAY, dtype=np.int64)
    pos = np.array([[f.player(pid).position for pid in ids] for f in sequence.frames], dtype=float)
    ts = np.array([f.timestamp for f in sequence.frames], dtype=float)
    window = max(1, int(round(cfg.label_window * frame_rate)))
    event_class: dict[tuple[int, int], str] = {}
    for step, e in sequence.events:
        event_class[(step, e.player_id)] = act.map_provider_action(e.action_type)
    for t, frame in enumerate(sequence.frames):
        carrier = attacking_carrier(frame)
        if T == 1:
            a, b = 0, 0
        elif t == T - 1:
            a, b = t - 1, t
        else:
            a, b = t, min(t + window, T - 1)
        dt = ts[b] - ts[a] if b > a else 1.0
        vel = (pos[b] - pos[a]) / dt
        for j, pid in enumerate(ids):
            if pid == carrier:
                cls = event_class.get((t, pid), "idle_on_ball")
                labels[t, j] = act.ACTION_INDEX[cls]
            else:
                labels[t, j] = act.direction_class(vel[j, 0], vel[j, 1], cfg.v_stay)
    return ids, labels


def frame_states(sequence: PossessionSequence, config: Config,
                 scaling: PassScaling | None = None) -> list[EdmsState]:
    surface = ImportanceSurface.from_config(config.edms)
    states = []
    for t, frame in enumerate(sequence.frames):
        context = INTRA if attacking_carrier(frame) is not None else INTER
        transition = 1 if sequence.inter_from is not None and t >= sequence.inter_from else 0
        states.append(assemble_state(frame, context, surface, config.edms, config.pitch,
                                     transition=transition, scaling=scaling))
    return states


def build_sar(sequence: PossessionSequence, rewards: np.ndarray, state_kind: str, config: Config,
              states: list[EdmsState] | None = None) -> list[Trajectory]:
    """One trajectory per attacking player with the team's shared reward stream."""
    if state_kind not in STATE_KINDS:
        raise ValueError(f"state_kind must be one of {STATE_KINDS}, got {state_kind!r}")
    rewards = np.asarray(rewards, dtype=float)
    T = len(sequence.frames)
    if len(rewards) != T:
        raise ValueError(f"reward stream has {len(rewards)} steps, sequence has {T}")
    ids, labels = label_actions(sequence, config.ingest, config.pitch.frame_rate)
    if state_kind == "edms" and states is None:
        states = frame_states(sequence, config)
    frame_idx = np.array([f.frame_index for f in sequence.frames], dtype=np.int64)
    trajectories = []
    for j, pid in enumerate(ids):
        vecs, masks = [], []
        for t, frame in enumerate(sequence.frames):
            on_ball = attacking_carrier(frame) == pid
            masks.append(act.action_mask(on_ball))
            if state_kind == "edms":
                vecs.append(states[t].vector(pid))
            else:
                vecs.append(pvs_vector(frame, pid))
        masks = np.array(masks)
        if not masks[np.arange(T), labels[:, j]].all():
            raise AssertionError("labelled action invalid under its mask")
        trajectories.append(Trajectory(
            episode=sequence.possession_id,
            team=sequence.team,
            player_id=pid,
            frames=frame_idx.copy(),
            states=np.array(vecs, dtype=float),
            actions=labels[:, j].copy(),
            rewards=rewards.copy(),
            masks=masks,
        ))
    return trajectories


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PITCHRL_THREADS", "1")))
    except ValueError:
        return 1


def _states_job(args):
    sequence, config = args
    return frame_states(sequence, config)


def build_dataset(sequences: Sequence[PossessionSequence], config: Config, state_kind: str,
                  grid: EpvGrid, scaling: PassScaling | None = None) -> SarDataset:
    """Rewards, states and trajectories for a list of possessions.

    For EDMS the pass-score min-max constants are fitted over all off-ball
    rows of the dataset unless ``scaling`` is supplied (e.g. from a model).
    """
    if not sequences:
        raise ValueError("no possession sequences to build from")
    all_states: list[list[EdmsState] | None] = [None] * len(sequences)
    if state_kind == "edms":
        jobs = [(s, config) for s in sequences]
        workers = _threads()
        if workers > 1 and len(sequences) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                all_states = list(pool.map(_states_job, jobs))
        else:
            all_states = [_states_job(j) for j in jobs]
        if scaling is None:
            rows = np.concatenate([st.pass_inputs() for seq in all_states for st in seq])
            scaling = PassScaling.fit(rows)
        all_states = [[st.rescore(scaling, config.edms.pass_weights) for st in seq]
                      for seq in all_states]
    trajectories = []
    for k, seq in enumerate(sequences):
        nxt = sequences[k + 1] if k + 1 < len(sequences) else None
        rewards = assign_rewards(seq, grid, nxt)
        trajectories += build_sar(seq, rewards, state_kind, config, all_states[k])
    names = edms_layout(config.edms.formations) if state_kind == "edms" else pvs_layout()
    header = {
        "layout_version": LAYOUT_VERSION,
        "state_kind": state_kind,
        "scaling": scaling.to_dict() if scaling is not None else None,
        "frame_rate": config.pitch.frame_rate,
        "state_dim": len(names),
        "feature_names": names,
    }
    assert trajectories[0].states.shape[1] == len(names)
    return SarDataset(header, trajectories)


# ---------------------------------------------------------------- SAR files


def _atomic_write_text(path: str | Path, lines: Iterable[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            for line in lines:
                fh.write(line)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_rows(path, header, rows) -> None:
    def lines():
        yield ",".join(header) + "\n"
        for row in rows:
            yield ",".join(str(v) for v in row) + "\n"

    _atomic_write_text(path, lines())


def write_sar(path: str | Path, dataset: SarDataset) -> None:
    """Line-delimited JSON: a header record, then one record per sample."""

    def lines():
        yield json.dumps({"record": "header", **dataset.header}) + "\n"
        for tr in dataset.trajectories:
            for t in range(len(tr)):
                yield json.dumps({
                    "record": "sample",
                    "episode": int(tr.episode),
                    "team": tr.team,
                    "player_id": int(tr.player_id),
                    "t": t,
                    "frame": int(tr.frames[t]),
                    "state": [float(v) for v in tr.states[t]],
                    "action": int(tr.actions[t]),
                    "reward": float(tr.rewards[t]),
                    "mask": act.mask_to_str(tr.masks[t]),
                }) + "\n"

    _atomic_write_text(path, lines())


def read_sar(path: str | Path) -> SarDataset:
    header = None
    groups: dict[tuple[int, int], dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("record", None)
            if kind == "header":
                header = rec
                continue
            if kind != "sample" or header is None:
                raise ValueError(f"{path}:{lineno}: expected a header record before samples")
            key = (rec["episode"], rec["player_id"])
            g = groups.setdefault(key, {"team": rec["team"], "t": [], "frames": [], "states": [],
                                        "actions": [], "rewards": [], "masks": []})
            if rec["t"] != len(g["t"]):
                raise ValueError(f"{path}:{lineno}: samples of {key} out of order")
            g["t"].append(rec["t"])
            g["frames"].append(rec["frame"])
            g["states"].append(rec["state"])
            g["actions"].append(rec["action"])
            g["rewards"].append(rec["reward"])
            g["masks"].append(act.mask_from_str(rec["mask"]))
    if header is None:
        raise ValueError(f"{path}: no header record")
    trajectories = [
        Trajectory(
            episode=ep, team=g["team"], player_id=pid,
            frames=np.array(g["frames"], dtype=np.int64),
            states=np.array(g["states"], dtype=float).reshape(len(g["t"]), -1),
            actions=np.array(g["actions"], dtype=np.int64),
            rewards=np.array(g["rewards"], dtype=float),
            masks=np.array(g["masks"], dtype=bool),
        )
        for (ep, pid), g in groups.items()
    ]
    return SarDataset(header, trajectories)
