"""File-level glue shared by the CLI and the end-to-end tests."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Config
from .edms import PassScaling, edms_layout
from .ingest import (
    PossessionSequence,
    SarDataset,
    attackers_of,
    build_dataset,
    build_frames,
    frame_states,
    read_events_json,
    read_meta_json,
    read_tracking_csv,
    segment_sequences,
    sync_events_tracking,
)
from .reward import load_grid_for


def data_paths(data_dir: str | Path) -> tuple[Path, Path, Path | None]:
    """``tracking.csv``, ``events.json`` and the optional ``meta.json`` of a directory."""
    d = Path(data_dir)
    meta = d / "meta.json"
    return d / "tracking.csv", d / "events.json", meta if meta.exists() else None


def load_sequences(tracking_path: str | Path, events_path: str | Path,
                   meta_path: str | Path | None, config: Config) -> list[PossessionSequence]:
    tracking = read_tracking_csv(tracking_path)
    events = read_events_json(events_path)
    meta = read_meta_json(meta_path)
    frames = build_frames(tracking, meta, config.pitch, config.ingest)
    stream = sync_events_tracking(events, frames, meta, config.ingest.attach_tolerance)
    return segment_sequences(stream, config.ingest)


def dataset_from_files(tracking_path, events_path, meta_path, config: Config, state_kind: str,
                       scaling: PassScaling | None = None) -> SarDataset:
    sequences = load_sequences(tracking_path, events_path, meta_path, config)
    if not sequences:
        raise ValueError("no possession sequence survived segmentation")
    return build_dataset(sequences, config, state_kind, load_grid_for(config), scaling)


def find_frame(sequences: Sequence[PossessionSequence], frame_index: int):
    """The normalized frame with ``frame_index`` and the sequence holding it."""
    for seq in sequences:
        for frame in seq.frames:
            if frame.frame_index == frame_index:
                return seq, frame
    raise KeyError(f"frame {frame_index} is not part of any possession sequence")


def feature_table(sequences: Sequence[PossessionSequence], config: Config,
                  scaling: PassScaling | None, start: int | None = None,
                  end: int | None = None) -> tuple[list[str], list[list]]:
    """Per-player EDMS rows for frames in ``[start, end]``."""
    names = edms_layout(config.edms.formations)
    header = ["frame", "possession_id", "player_id", "context"] + names
    picked = []
    for seq in sequences:
        keep = [f for f in seq.frames
                if (start is None or f.frame_index >= start) and (end is None or f.frame_index <= end)]
        if keep:
            picked.append((seq, keep))
    all_states = []
    for seq, keep in picked:
        sub = PossessionSequence(seq.possession_id, seq.team, keep, [], seq.outcome, [], None)
        if seq.inter_from is not None:
            first = seq.frames.index(keep[0])
            sub.inter_from = max(0, seq.inter_from - first)
        all_states.append((seq, keep, frame_states(sub, config)))
    if scaling is None:
        rows = [st.pass_inputs() for _, _, states in all_states for st in states]
        scaling = PassScaling.fit(np.concatenate(rows)) if rows else None
    table = []
    for seq, keep, states in all_states:
        for frame, st in zip(keep, states):
            st = st.rescore(scaling, config.edms.pass_weights)
            for pid in attackers_of(seq):
                table.append([frame.frame_index, seq.possession_id, pid, st.context]
                             + [repr(float(v)) for v in st.vector(pid)])
    return header, table
