"""Command-line entry point: ``pitchrl <subcommand> [flags]``.

Exit codes: 0 success, 1 I/O or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import TEAM_STATISTIC, extract_offball_q, team_aggregate, write_team_csv
from .config import ConfigError, load_config
from .edms import PassScaling
from .ingest import STATE_KINDS, _atomic_write_rows, read_sar, write_sar
from .pipeline import data_paths, dataset_from_files, feature_table, find_frame, load_sequences
from .plotting import PlotOptions, render_field_plot, render_loss_curve, write_svg
from .rlearn import Checkpoint, evaluate, load_checkpoint, save_checkpoint, train, write_loss_csv
from .synth import SCENARIOS, synth_generate, write_synth

log = logging.getLogger("pitchrl")

METRIC_COLUMNS = ("state_kind", "mask", "action_loss", "td_loss")


class UsageError(Exception):
    pass


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, required=True, help="output path")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="directory holding tracking.csv, events.json, meta.json")
    p.add_argument("--tracking", type=Path)
    p.add_argument("--events", type=Path)
    p.add_argument("--meta", type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pitchrl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic match")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=50, help="number of possessions")
    p.add_argument("--scenario", choices=SCENARIOS, default="random_walk")

    p = sub.add_parser("preprocess", help="tracking + events -> .sar.jsonl")
    _common(p)
    _data_args(p)
    p.add_argument("--state", choices=STATE_KINDS, default="edms")

    p = sub.add_parser("train", help="SAR file -> checkpoint + loss CSV")
    _common(p)
    p.add_argument("--sar", type=Path, required=True)
    p.add_argument("--state", choices=STATE_KINDS)
    p.add_argument("--mask", type=_on_off)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--loss-csv", type=Path, help="default: <out>.loss.csv")
    p.add_argument("--figure", type=Path, help="loss-curve SVG")

    p = sub.add_parser("eval", help="checkpoint + SAR file -> metrics CSV")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--sar", type=Path, required=True)
    p.add_argument("--mask", type=_on_off, help="default: as trained")
    p.add_argument("--team-csv", type=Path)
    p.add_argument("--figure", type=Path, help="loss curve of a training log, with --loss-csv")
    p.add_argument("--loss-csv", type=Path)

    p = sub.add_parser("viz", help="directional Q field plot of one frame")
    _common(p)
    _data_args(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--sar", type=Path, help="SAR file; rebuilt from the data when omitted")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--player", type=int, action="append", help="repeatable; default all off-ball attackers")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--mode", choices=("bars", "overlay"), default="overlay")

    p = sub.add_parser("features", help="EDMS CSV dump for a frame range")
    _common(p)
    _data_args(p)
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p.add_argument("--checkpoint", type=Path, help="reuse its pass-score scaling")
    return parser


def _resolve_data(args) -> tuple[Path, Path, Path | None]:
    if args.data is not None:
        tracking, events, meta = data_paths(args.data)
    else:
        tracking, events, meta = args.tracking, args.events, None
    tracking = args.tracking or tracking
    events = args.events or events
    meta = args.meta or meta
    if tracking is None or events is None:
        raise UsageError("give --data DIR or both --tracking and --events")
    return tracking, events, meta


def _config(args):
    cfg = load_config(args.config)
    t = cfg.train
    if getattr(args, "seed", None) is not None and args.command == "train":
        t = replace(t, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        t = replace(t, epochs=args.epochs)
    if getattr(args, "mask", None) is not None and args.command == "train":
        t = replace(t, mask=args.mask)
    t.validate("train")
    return replace(cfg, train=t)


def cmd_synth(args) -> None:
    if args.n < 1:
        raise UsageError("--n must be positive")
    write_synth(args.out, synth_generate(args.seed, args.n, args.scenario))


def cmd_preprocess(args) -> None:
    cfg = _config(args)
    dataset = dataset_from_files(*_resolve_data(args), cfg, args.state)
    write_sar(args.out, dataset)


def cmd_train(args) -> None:
    cfg = _config(args)
    dataset = read_sar(args.sar)
    if args.state is not None and args.state != dataset.state_kind:
        raise UsageError(f"--state {args.state} but {args.sar} holds {dataset.state_kind} states")
    result = train(dataset.trajectories, cfg.train)
    save_checkpoint(args.out, Checkpoint(result.net, dataset.state_kind, cfg.train.mask,
                                         dataset.header.get("scaling"), cfg.to_dict(),
                                         dataset.header.get("feature_names")))
    loss_csv = args.loss_csv or args.out.with_name(args.out.name + ".loss.csv")
    write_loss_csv(loss_csv, result.log)
    if args.figure is not None:
        write_svg(args.figure, render_loss_curve(result.log, f"{dataset.state_kind}, mask "
                                                 f"{'on' if cfg.train.mask else 'off'}"))


def cmd_eval(args) -> None:
    ckpt = load_checkpoint(args.checkpoint)
    dataset = read_sar(args.sar)
    if dataset.state_kind != ckpt.state_kind:
        raise ValueError(f"{args.sar} holds {dataset.state_kind} states, checkpoint expects {ckpt.state_kind}")
    cfg = load_config(args.config) if args.config else None
    tcfg = cfg.train if cfg else _train_config_of(ckpt)
    mask = ckpt.mask if args.mask is None else args.mask
    m = evaluate(ckpt.net, dataset.trajectories, tcfg, mask=mask)
    _atomic_write_rows(args.out, METRIC_COLUMNS,
                       [(ckpt.state_kind, "on" if mask else "off", repr(m.action_loss), repr(m.td_loss))])
    if args.team_csv is not None:
        write_team_csv(args.team_csv, team_aggregate(ckpt.net, dataset.trajectories))
        log.info("team Q statistic: %s", TEAM_STATISTIC)
    if args.figure is not None:
        if args.loss_csv is None:
            raise UsageError("--figure needs --loss-csv")
        from .rlearn import read_loss_csv
        write_svg(args.figure, render_loss_curve(read_loss_csv(args.loss_csv)))


def _train_config_of(ckpt: Checkpoint):
    from .config import config_from_dict
    return config_from_dict(ckpt.config or {}).train


def cmd_viz(args) -> None:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.state_kind != "edms" and args.sar is None:
        raise UsageError("viz on PVS checkpoints needs --sar")
    cfg = load_config(args.config) if args.config else _full_config_of(ckpt)
    sequences = load_sequences(*_resolve_data(args), cfg)
    seq, frame = find_frame(sequences, args.frame)
    if args.sar is not None:
        trajectories = read_sar(args.sar).trajectories
    else:
        from .ingest import build_dataset
        from .reward import load_grid_for
        scaling = PassScaling.from_dict(ckpt.scaling) if ckpt.scaling else None
        trajectories = build_dataset([seq], cfg, ckpt.state_kind, load_grid_for(cfg), scaling).trajectories
    players = args.player
    if not players:
        players = [t.player_id for t in trajectories
                   if t.episode == seq.possession_id and t.player_id != frame.on_ball_player]
    subjects = [extract_offball_q(ckpt.net, [t for t in trajectories if t.episode == seq.possession_id],
                                  args.frame, pid, args.top_k) for pid in players]
    svg = render_field_plot(frame, subjects, PlotOptions(mode=args.mode, top_k=args.top_k), cfg.pitch)
    write_svg(args.out, svg)


def _full_config_of(ckpt: Checkpoint):
    from .config import config_from_dict
    return config_from_dict(ckpt.config or {})


def cmd_features(args) -> None:
    cfg = _config(args)
    scaling = None
    if args.checkpoint is not None:
        ckpt = load_checkpoint(args.checkpoint)
        scaling = PassScaling.from_dict(ckpt.scaling) if ckpt.scaling else None
    sequences = load_sequences(*_resolve_data(args), cfg)
    header, rows = feature_table(sequences, cfg, scaling, args.start, args.end)
    if not rows:
        raise ValueError("no possession frames in the requested range")
    _atomic_write_rows(args.out, header, rows)


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "viz": cmd_viz,
    "features": cmd_features,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pitchrl {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, ConfigError, json.JSONDecodeError) as exc:
        where = f" ({exc.filename})" if isinstance(exc, OSError) and exc.filename else ""
        print(f"pitchrl {args.command}: error{where}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
