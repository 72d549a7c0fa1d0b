"""SVG field plots of directional Q-values and loss-curve figures.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved with
a fixed hash salt and no date metadata so identical inputs give identical
bytes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Arc, Circle, FancyArrow, Rectangle  # noqa: E402

import numpy as np  # noqa: E402

from .actions import MOVE_ACTIONS, OFF_BALL_ACTIONS  # noqa: E402
from .analysis import DirectionalQ  # noqa: E402
from .config import PitchConfig  # noqa: E402
from .edms import DIRECTIONS  # noqa: E402
from .pitch import HOME, FrameSnapshot  # noqa: E402

TEAM_COLORS = {HOME: "#d62728", "away": "#1f77b4"}


@dataclass(frozen=True)
class PlotOptions:
    mode: str = "bars"  # "bars" adds a Q panel; "overlay" draws arrows on the pitch
    top_k: int = 3
    arrow_length: float = 6.0
    title: str | None = None
    mask_value: float = -9999.0


def _svg_bytes(fig: Figure) -> str:
    FigureCanvasSVG(fig)
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "pitchrl", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def draw_pitch(ax, pitch: PitchConfig) -> None:
    L, W = pitch.half_length, pitch.half_width
    kw = dict(fill=False, lw=1.0, ec="#555555")
    ax.add_patch(Rectangle((-L, -W), pitch.length, pitch.width, **kw))
    ax.plot([0, 0], [-W, W], color="#555555", lw=1.0)
    ax.add_patch(Circle((0, 0), 9.15, **kw))
    for s in (-1, 1):
        ax.add_patch(Rectangle((s * L - (16.5 if s > 0 else 0), -20.16), 16.5, 40.32, **kw))
        ax.add_patch(Rectangle((s * L - (5.5 if s > 0 else 0), -9.16), 5.5, 18.32, **kw))
        ax.add_patch(Arc((s * (L - 11.0), 0), 18.3, 18.3, theta1=127 if s > 0 else -53,
                         theta2=233 if s > 0 else 53, lw=1.0, color="#555555"))
    ax.set_xlim(-L - 3, L + 3)
    ax.set_ylim(-W - 3, W + 3)
    ax.set_aspect("equal")
    ax.set_axis_off()


def _as_list(directional_q) -> list[DirectionalQ]:
    if directional_q is None:
        return []
    if isinstance(directional_q, DirectionalQ):
        return [directional_q]
    return list(directional_q)


def render_field_plot(frame: FrameSnapshot, directional_q: DirectionalQ | Sequence[DirectionalQ] | None,
                      options: PlotOptions | None = None, pitch: PitchConfig | None = None) -> str:
    """SVG text: the pitch with all players and the ball, plus the subjects' Q-values."""
    options = options or PlotOptions()
    pitch = pitch or PitchConfig()
    if options.mode not in ("bars", "overlay"):
        raise ValueError(f"unknown plot mode {options.mode!r}")
    frame.validate(pitch)
    subjects = _as_list(directional_q)
    for dq in subjects:
        if np.shape(dq.q) != (len(OFF_BALL_ACTIONS),):
            raise ValueError(f"player {dq.player_id}: expected {len(OFF_BALL_ACTIONS)} Q-values")
        frame.player(dq.player_id)
    panel = options.mode == "bars" and bool(subjects)

    fig = Figure(figsize=(11.0, 4.6) if panel else (7.5, 5.0))
    if panel:
        ax = fig.add_axes((0.02, 0.05, 0.60, 0.9))
        bx = fig.add_axes((0.70, 0.2, 0.28, 0.65))
    else:
        ax = fig.add_axes((0.02, 0.02, 0.96, 0.92))
    draw_pitch(ax, pitch)
    highlighted = {dq.player_id for dq in subjects}
    for p in frame.players:
        if not p.visible:
            continue
        x, y = p.position
        ax.add_patch(Circle((x, y), 1.1, fc=TEAM_COLORS[p.team], ec="black" if p.player_id in highlighted
                            else "white", lw=2.0 if p.player_id in highlighted else 0.5,
                            gid=f"player-{p.player_id}"))
        ax.text(x, y, str(p.jersey), fontsize=5, ha="center", va="center", color="white")
    bxy = frame.ball.position
    ax.add_patch(Circle(bxy, 0.7, fc="white", ec="black", lw=0.8, gid="ball"))
    if options.title:
        ax.set_title(options.title, fontsize=9)

    if options.mode == "overlay":
        for dq in subjects:
            _draw_arrows(ax, frame, dq, options)
    elif panel:
        _draw_bars(bx, subjects[0], options)
    return _svg_bytes(fig)


def _draw_arrows(ax, frame: FrameSnapshot, dq: DirectionalQ, options: PlotOptions) -> None:
    origin = np.asarray(frame.player(dq.player_id).position, dtype=float)
    moves = np.asarray(dq.q[: len(MOVE_ACTIONS)], dtype=float)
    ranked = [k for k in dq.top_k if moves[k] > options.mask_value][: options.top_k]
    for rank, k in enumerate(ranked):
        length = options.arrow_length * (1.0 - 0.25 * rank)
        dx, dy = DIRECTIONS[k] * length
        ax.add_patch(FancyArrow(origin[0], origin[1], dx, dy, width=0.5, head_width=1.6,
                                length_includes_head=True, color="#2ca02c", alpha=1.0 - 0.25 * rank,
                                gid=f"qarrow-{dq.player_id}-{MOVE_ACTIONS[k]}"))


def _draw_bars(ax, dq: DirectionalQ, options: PlotOptions) -> None:
    q = np.asarray(dq.q, dtype=float)
    shown = np.where(q > options.mask_value, q, np.nan)
    labels = [a.replace("move_", "") for a in OFF_BALL_ACTIONS]
    colors = ["#2ca02c" if i in dq.top_k else "#999999" for i in range(len(q))]
    ax.bar(range(len(q)), np.nan_to_num(shown), color=colors, gid=f"qbars-{dq.player_id}")
    ax.set_xticks(range(len(q)))
    ax.set_xticklabels(labels, fontsize=7, rotation=45)
    ax.set_ylabel("Q", fontsize=8)
    ax.set_title(f"player {dq.player_id}, frame {dq.frame_index}", fontsize=8)
    ax.tick_params(labelsize=7)


def render_loss_curve(log: Sequence[tuple], title: str | None = None) -> str:
    """SVG of action, TD and total loss against epoch."""
    if not log:
        raise ValueError("empty loss log")
    arr = np.asarray(log, dtype=float)
    fig = Figure(figsize=(6.0, 3.6))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    for col, name in ((1, "action_loss"), (2, "td_loss"), (3, "total_loss")):
        ax.plot(arr[:, 0], arr[:, col], marker="o", ms=2, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    return _svg_bytes(fig)


def write_svg(path: str | Path, svg: str) -> None:
    from .ingest import _atomic_write_text
    _atomic_write_text(path, [svg])
