"""Command-line interface: prune, gen, bench, ablate.

Exit codes: 0 success, 1 I/O or validation failure, 2 flag misuse.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .scoring import PruneConfig, Variant, score_all
from .selection import resolve_budget, select_topk
from .synthgen import SceneSpec, generate
from .tensor_io import (
    SelectionReport,
    read_tensor,
    write_report,
    write_tensor,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default already exits 2; keep it explicit
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _parse_window(value: str) -> int | None:
    if value == "full":
        return None
    try:
        side = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be an odd integer or 'full', got {value!r}")
    if side < 1 or side % 2 == 0:
        raise argparse.ArgumentTypeError(f"window side must be odd and >= 1, got {side}")
    return side


def _parse_sizes(value: str) -> list[tuple[int, int, int, int]]:
    sizes = []
    for chunk in value.split(","):
        parts = chunk.strip().split("x")
        if len(parts) != 4:
            raise argparse.ArgumentTypeError(f"size must be KxHxWxD, got {chunk!r}")
        sizes.append(tuple(int(p) for p in parts))
    return sizes


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tau", type=float, default=0.5, help="softmax temperature (default 0.5)")
    parser.add_argument(
        "--window",
        type=_parse_window,
        default="full",
        help="odd neighborhood side or 'full' (default full)",
    )
    parser.add_argument("--history", type=int, default=1, help="history depth 1..3 (default 1)")
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=0.5,
        help="relevance weight in [0,1] (default 0.5)",
    )
    parser.add_argument(
        "--variant",
        choices=[v.value for v in Variant],
        default="full",
        help="scoring variant (default full)",
    )
    parser.add_argument("--keep-ratio", type=float, default=None, help="fraction of tokens to keep")
    parser.add_argument("--budget", type=int, default=None, help="absolute number of tokens to keep")


def _config_from_args(args) -> PruneConfig:
    window = args.window
    if window == "full":  # default string was never run through the type callback
        window = None
    return PruneConfig(
        tau=args.tau,
        window=window,
        history=args.history,
        lam=args.lam,
        variant=Variant(args.variant),
        keep_ratio=getattr(args, "keep_ratio", None),
        budget=getattr(args, "budget", None),
    )


def _require_keep(parser: argparse.ArgumentParser, args) -> None:
    has_ratio = args.keep_ratio is not None
    has_budget = args.budget is not None
    if has_ratio == has_budget:
        parser.error("exactly one of --keep-ratio / --budget is required")
    if has_ratio and not 0.0 < args.keep_ratio <= 1.0:
        parser.error(f"--keep-ratio must be in (0, 1], got {args.keep_ratio}")
    if has_budget and args.budget < 1:
        parser.error(f"--budget must be >= 1, got {args.budget}")


def cmd_prune(parser, args) -> int:
    _require_keep(parser, args)
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        visual = read_tensor(args.visual)
        text = read_tensor(args.text)
        start = time.perf_counter()
        table = score_all(visual, text, config)
        plan = resolve_budget(config, table.shape)
        selection = select_topk(table, plan, config)
        wall_ms = (time.perf_counter() - start) * 1000.0
        k, h, w = table.shape
        counts = [0] * k
        for tok in selection.kept:
            counts[tok.frame] += 1
        report = SelectionReport(
            config=config.to_dict(),
            budget=plan.total_budget,
            first_frame_quota=plan.first_frame_quota,
            kept=selection.kept,
            stats={
                "per_frame_kept": counts,
                "wall_ms": wall_ms,
                "zero_norm_visual": table.zero_norm_visual,
                "zero_norm_text": table.zero_norm_text,
            },
        )
        if args.out:
            write_report(args.out, report)
        total = k * h * w
        print(
            f"tokens={total} kept={plan.total_budget} "
            f"gamma={plan.gamma:.4g} wall_ms={wall_ms:.3f}"
        )
        return EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def cmd_gen(parser, args) -> int:
    if not args.spec:
        parser.error("--spec is required for gen")
    if not args.out:
        parser.error("--out is required for gen")
    try:
        spec = SceneSpec.from_json_file(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
        visual, text, labels = generate(spec)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_tensor(out / "visual.ept", visual)
        write_tensor(out / "text.ept", text)
        with open(out / "labels.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "shape": [spec.frames, spec.rows, spec.cols],
                    "labels": labels.to_strings(),
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        print(
            f"scene frames={spec.frames} rows={spec.rows} cols={spec.cols} "
            f"dim={spec.dim} -> {out}"
        )
        return EXIT_OK
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def cmd_bench(parser, args) -> int:
    if not args.sizes:
        parser.error("--sizes is required for bench")
    try:
        config = _config_from_args(args)
        if config.keep_ratio is None and config.budget is None:
            config.keep_ratio = 0.25
        kwargs = {} if args.seed is None else {"seed": args.seed}
        report = bench_mod.time_compression(
            args.sizes, config, runs=args.runs, warmups=args.warmups, **kwargs
        )
        verdict = bench_mod.scaling_check(report)
        print(report.to_table())
        print(
            f"scaling slope={verdict.slope:.3f} "
            f"band=[{verdict.low}, {verdict.high}] -> "
            + ("PASS" if verdict.passed else "FAIL")
        )
        if args.out:
            bench_mod.write_timing_json(args.out, report, verdict)
        return EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _ablate_grid() -> list[tuple[Variant, int | None, float]]:
    taus = [0.1, 0.5]
    windows: list[int | None] = [3, None]
    return [(v, w, t) for v in Variant for w in windows for t in taus]


def cmd_ablate(parser, args) -> int:
    _require_keep(parser, args)
    use_spec = args.spec is not None
    if not use_spec and (args.visual is None or args.text is None):
        parser.error("ablate needs --spec or both --visual and --text")
    try:
        labels = None
        if use_spec:
            spec = SceneSpec.from_json_file(args.spec)
            visual, text, labels = generate(spec)
        else:
            visual = read_tensor(args.visual)
            text = read_tensor(args.text)
        rows = []
        for variant, window, tau in _ablate_grid():
            config = PruneConfig(
                tau=tau,
                window=window,
                history=args.history,
                lam=args.lam,
                variant=variant,
                keep_ratio=args.keep_ratio,
                budget=args.budget,
            )
            table = score_all(visual, text, config)
            plan = resolve_budget(config, table.shape)
            selection = select_topk(table, plan, config)
            profile = bench_mod.retention_profile(selection, table, table.shape)
            row = {
                "variant": variant.value,
                "window": "full" if window is None else window,
                "tau": tau,
                "budget": plan.total_budget,
                "per_frame_kept": profile.per_frame_kept,
            }
            if labels is not None:
                mask = labels.object_mask()
                total_obj = int(mask.sum())
                hit = sum(
                    1 for tok in selection.kept if mask[tok.frame, tok.row, tok.col]
                )
                row["object_recall"] = (hit / total_obj) if total_obj else None
            rows.append(row)
        header = f"{'variant':>13} {'window':>6} {'tau':>5} {'kept':>6} {'frame0':>7} {'later':>7}"
        if labels is not None:
            header += f" {'recall':>7}"
        print(header)
        for row in rows:
            kept = row["per_frame_kept"]
            line = (
                f"{row['variant']:>13} {str(row['window']):>6} {row['tau']:>5} "
                f"{row['budget']:>6} {kept[0]:>7} {sum(kept[1:]):>7}"
            )
            if labels is not None:
                rec = row["object_recall"]
                line += f" {rec:>7.3f}" if rec is not None else f" {'-':>7}"
            print(line)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump({"grid": rows}, fh, indent=2)
                fh.write("\n")
        return EXIT_OK
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def build_parser() -> _Parser:
    parser = _Parser(prog="echoprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_prune = sub.add_parser("prune", help="score and select tokens from tensor files")
    p_prune.add_argument("--visual", required=True, help="rank-4 tensor file")
    p_prune.add_argument("--text", required=True, help="rank-2 tensor file")
    _add_config_flags(p_prune)
    p_prune.add_argument("--out", default=None, help="selection report JSON path")

    p_gen = sub.add_parser("gen", help="generate a synthetic scene from a spec JSON")
    p_gen.add_argument("--spec", required=True, help="scene spec JSON path")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None, help="override the scene file's seed")

    p_bench = sub.add_parser("bench", help="time the compression path across sizes")
    _add_config_flags(p_bench)
    p_bench.add_argument("--sizes", type=_parse_sizes, required=True, help="KxHxWxD,KxHxWxD,...")
    p_bench.add_argument("--runs", type=int, default=3, help="timed runs per size (default 3)")
    p_bench.add_argument("--warmups", type=int, default=1, help="warmup runs per size (default 1)")
    p_bench.add_argument("--seed", type=int, default=None, help="scene seed for the timing inputs")
    p_bench.add_argument("--out", default=None, help="timing report JSON path")

    p_ablate = sub.add_parser("ablate", help="run the variant/window/tau grid on one input")
    p_ablate.add_argument("--visual", default=None)
    p_ablate.add_argument("--text", default=None)
    p_ablate.add_argument("--spec", default=None, help="labeled synthetic scene spec")
    _add_config_flags(p_ablate)
    p_ablate.add_argument("--out", default=None, help="comparison JSON path")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "prune":
        return cmd_prune(parser, args)
    if args.command == "gen":
        return cmd_gen(parser, args)
    if args.command == "bench":
        return cmd_bench(parser, args)
    if args.command == "ablate":
        return cmd_ablate(parser, args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
