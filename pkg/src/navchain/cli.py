"""Command line front end: reproducible experiment runs with CSV reports.

Configuration is a flat key=value file merged with command line flags (flags
win). All outputs are plain text written deterministically, so identical
inputs and configuration produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from dataclasses import dataclass, fields
from io import StringIO
from typing import Optional, Sequence

from navchain.eval import prediction_eval, summarisation_eval, temporal_folds
from navchain.ingest import (
    FilterRules,
    LogFormat,
    PageTable,
    Session,
    filter_requests,
    parse_log,
    read_sessions_file,
    sessionize,
    write_sessions_file,
)
from navchain.model import BuildParams, ModelGraph, build_vlmc
from navchain.ngram import count_ngrams, render_sequence, write_ngram_csv
from navchain.trails import TrailQuery, extract_trails, top_m_trails


@dataclass
class RunConfig:
    input: str = ""
    input_kind: str = "sessions"
    delimiter: str = ","
    columns: str = "source,timestamp,url,status"
    gap_seconds: float = 1800.0
    max_session_len: int = 15
    exclude_suffixes: str = ""
    keep_suffixes: str = ""
    exclude_status_classes: str = ""
    target_order: int = 1
    gamma: str = "0"
    gamma_mode: str = "avg"
    num_visits: int = 30
    lam: str = "0.0001"
    mtl: int = 4
    length_mode: str = "strict"
    top_m: int = 250
    k_total: int = 5
    shuffle_folds: bool = False
    seed: int = 0
    out_dir: str = "."

    def to_text(self) -> str:
        lines = []
        for field in fields(self):
            value = getattr(self, field.name)
            if field.type == "bool" or isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{field.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {field.name: field for field in fields(cls)}
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"unparsable config line: {line!r}")
            name, _, raw = line.partition("=")
            name = name.strip()
            raw = raw.strip()
            if name not in known:
                raise ValueError(f"unknown config key: {name!r}")
            default = getattr(cls, name)
            if isinstance(default, bool):
                if raw not in ("true", "false"):
                    raise ValueError(f"config key {name!r} expects true or false")
                values[name] = raw == "true"
            elif isinstance(default, int):
                values[name] = int(raw)
            elif isinstance(default, float):
                values[name] = float(raw)
            else:
                values[name] = raw
        return cls(**values)

    # -- derived values ----------------------------------------------------

    def build_params(self, target_order: Optional[int] = None) -> BuildParams:
        return BuildParams(
            target_order=self.target_order if target_order is None else target_order,
            gamma=self.gamma,
            gamma_mode=self.gamma_mode,
            num_visits=self.num_visits,
        )

    def trail_query(self, length_mode: Optional[str] = None, mtl: Optional[int] = None) -> TrailQuery:
        return TrailQuery(
            lam=self.lam,
            mtl=self.mtl if mtl is None else mtl,
            length_mode=self.length_mode if length_mode is None else length_mode,
            m=self.top_m,
        )

    def log_format(self) -> LogFormat:
        delimiter: Optional[str]
        if self.delimiter == "tab":
            delimiter = "\t"
        elif self.delimiter in ("ws", "whitespace"):
            delimiter = None
        else:
            delimiter = self.delimiter
        columns = tuple(c.strip() for c in self.columns.split(","))
        return LogFormat(columns=columns, delimiter=delimiter)

    def filter_rules(self) -> FilterRules:
        def _split(text: str) -> frozenset[str]:
            return frozenset(part.strip() for part in text.split(",") if part.strip())

        classes = frozenset(int(c) for c in _split(self.exclude_status_classes))
        return FilterRules(
            exclude_suffixes=_split(self.exclude_suffixes),
            keep_suffixes=_split(self.keep_suffixes),
            exclude_status_classes=classes,
        )


def _load_sessions(config: RunConfig) -> tuple[list[Session], PageTable, int, int]:
    """Read the configured input; returns (sessions, pages, requests, skipped)."""
    if not config.input:
        raise ValueError("no input file configured")
    table = PageTable()
    if config.input_kind == "raw":
        with open(config.input, "r", encoding="utf-8") as handle:
            records, skipped = parse_log(handle, config.log_format())
        records = filter_requests(records, config.filter_rules())
        sessions = sessionize(
            records,
            table,
            gap_seconds=config.gap_seconds,
            max_session_len=config.max_session_len,
        )
        return sessions, table, len(records), skipped
    if config.input_kind == "sessions":
        with open(config.input, "r", encoding="utf-8") as handle:
            sessions = read_sessions_file(handle, table)
        requests = sum(len(s) for s in sessions)
        return sessions, table, requests, 0
    raise ValueError(f"unknown input kind {config.input_kind!r}")


def _out_path(config: RunConfig, name: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_sessionize(config: RunConfig) -> int:
    sessions, table, requests, skipped = _load_sessions(config)
    buffer = StringIO()
    write_sessions_file(sessions, buffer)
    _write_text(_out_path(config, "sessions.tsv"), buffer.getvalue())
    pages = len({p for s in sessions for p in s.pages})
    lengths = [len(s) for s in sessions]
    print(f"pages {pages}")
    print(f"requests {sum(lengths)}")
    print(f"sessions {len(sessions)}")
    for l in (1, 2, 3):
        print(f"l={l} {sum(1 for length in lengths if length == l)}")
    if skipped:
        print(f"skipped {skipped}")
    return 0


def cmd_build(config: RunConfig) -> int:
    sessions, _, _, _ = _load_sessions(config)
    model = build_vlmc(sessions, config.build_params())
    _write_text(_out_path(config, "model.txt"), model.to_text())
    rows = ["order,states"]
    for i, count in enumerate(model.order_state_counts, start=1):
        rows.append(f"{i},{count}")
    _write_text(_out_path(config, "state_counts.csv"), "\n".join(rows) + "\n")
    return 0


def cmd_trails(config: RunConfig, model_path: Optional[str] = None) -> int:
    if config.length_mode == "both":
        raise ValueError("the trails command needs a single length mode")
    if model_path:
        with open(model_path, "r", encoding="utf-8") as handle:
            model = ModelGraph.from_text(handle.read())
    else:
        sessions, _, _, _ = _load_sessions(config)
        model = build_vlmc(sessions, config.build_params())
    ranked = top_m_trails(extract_trails(model, config.trail_query()), config.top_m)
    rows = ["rank,trail,probability"]
    for i, (tokens, probability) in enumerate(ranked.entries, start=1):
        rows.append(f"{i},{render_sequence(tokens)},{float(probability):.4f}")
    _write_text(_out_path(config, "trails.csv"), "\n".join(rows) + "\n")
    return 0


def _length_modes(config: RunConfig) -> list[str]:
    if config.length_mode == "both":
        return ["strict", "nonstrict"]
    return [config.length_mode]


def cmd_summarize(config: RunConfig, dump_ngrams: bool = False) -> int:
    sessions, _, _, _ = _load_sessions(config)
    if dump_ngrams:
        table = count_ngrams(sessions, config.mtl)
        buffer = StringIO()
        write_ngram_csv(table, buffer)
        _write_text(_out_path(config, f"ngrams_{config.mtl}.csv"), buffer.getvalue())
    rows = ["order,gamma,mode,mtl,length_mode,m,footrule,overlap"]
    for order in range(1, config.target_order + 1):
        model = build_vlmc(sessions, config.build_params(target_order=order))
        for mode in _length_modes(config):
            query = config.trail_query(length_mode=mode)
            comparison = summarisation_eval(model, sessions, config.mtl, query)
            rows.append(
                f"{order},{config.gamma},{config.gamma_mode},{config.mtl},{mode},"
                f"{config.top_m},{comparison.footrule:.4f},{comparison.overlap:.4f}"
            )
    _write_text(_out_path(config, "summarize.csv"), "\n".join(rows) + "\n")
    return 0


def cmd_predict(config: RunConfig) -> int:
    sessions, _, _, _ = _load_sessions(config)
    ordered = list(sessions)
    order_mode = "time"
    if config.shuffle_folds:
        random.Random(config.seed).shuffle(ordered)
        order_mode = "given"
    plans = temporal_folds(ordered, config.k_total)
    rows = ["fold,order,states,mae,st_mae,n_test,skipped,fallbacks"]
    for plan in plans:
        for order in range(1, config.target_order + 1):
            report = prediction_eval(ordered, config.build_params(target_order=order), plan, order=order_mode)
            rows.append(
                f"{plan.train_upto},{order},{report.states},{report.mae:.4f},"
                f"{report.st_mae:.4f},{report.n_test},{report.n_skipped},{report.n_fallback}"
            )
    _write_text(_out_path(config, "predict.csv"), "\n".join(rows) + "\n")
    return 0


def cmd_report(config: RunConfig) -> int:
    status = cmd_summarize(config)
    if status != 0:
        return status
    return cmd_predict(config)


# -- argument parsing -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navchain", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--input", help="input file path")
    common.add_argument("--input-kind", choices=["raw", "sessions"], dest="input_kind")
    common.add_argument("--delimiter", help="log field delimiter (',', ';', 'tab', 'ws', ...)")
    common.add_argument("--columns", help="comma-separated column roles for raw logs")
    common.add_argument("--gap-seconds", type=float, dest="gap_seconds")
    common.add_argument("--max-session-len", type=int, dest="max_session_len")
    common.add_argument("--exclude-suffixes", dest="exclude_suffixes")
    common.add_argument("--keep-suffixes", dest="keep_suffixes")
    common.add_argument("--exclude-status-classes", dest="exclude_status_classes")
    common.add_argument("--order", type=int, dest="target_order", help="target model order")
    common.add_argument("--gamma", help="divergence threshold, a decimal or fraction")
    common.add_argument("--gamma-mode", choices=["max", "avg"], dest="gamma_mode")
    common.add_argument("--num-visits", type=int, dest="num_visits")
    common.add_argument("--lambda", dest="lam", help="trail probability cut-point")
    common.add_argument("--mtl", type=int, help="maximum trail length")
    common.add_argument("--length-mode", choices=["strict", "nonstrict", "both"], dest="length_mode")
    common.add_argument("--top-m", type=int, dest="top_m")
    common.add_argument("--folds", type=int, dest="k_total")
    common.add_argument("--shuffle-folds", action="store_true", dest="shuffle_folds", default=None)
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sessionize", parents=[common])
    sub.add_parser("build", parents=[common])
    trails_parser = sub.add_parser("trails", parents=[common])
    trails_parser.add_argument("--model", help="serialized model file to query instead of building")
    summarize_parser = sub.add_parser("summarize", parents=[common])
    summarize_parser.add_argument("--dump-ngrams", action="store_true")
    sub.add_parser("predict", parents=[common])
    sub.add_parser("report", parents=[common])
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            config = RunConfig.from_text(handle.read())
    else:
        config = RunConfig()
    for field in fields(RunConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            setattr(config, field.name, value)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "sessionize":
            return cmd_sessionize(config)
        if args.command == "build":
            return cmd_build(config)
        if args.command == "trails":
            return cmd_trails(config, model_path=args.model)
        if args.command == "summarize":
            return cmd_summarize(config, dump_ngrams=args.dump_ngrams)
        if args.command == "predict":
            return cmd_predict(config)
        if args.command == "report":
            return cmd_report(config)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
