"""Wall-clock timing of the compression path and retention profiling.

Timing covers scoring plus selection end-to-end on deterministic
synthetic scenes, with warmup runs discarded. The scaling check fits
log(time) against log(token count); the neighborhood-window path is
expected to be close to linear in the token count.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .scoring import PruneConfig, ScoreTable, score_all
from .selection import Selection, resolve_budget, select_topk
from .synthgen import ObjectSpec, SceneSpec, generate

_BENCH_SEED = 20240

@dataclass
class TimingEntry:
    shape: tuple[int, int, int, int]
    token_count: int
    warmups: int
    runs: int
    median_ms: float
    mean_ms: float
    stddev_ms: float
    selection: Selection | None = None  # last timed selection, for audits

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "token_count": self.token_count,
            "warmups": self.warmups,
            "runs": self.runs,
            "median_ms": self.median_ms,
            "mean_ms": self.mean_ms,
            "stddev_ms": self.stddev_ms,
        }


@dataclass
class TimingReport:
    entries: list[TimingEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    def to_table(self) -> str:
        header = f"{'tokens':>8} {'KxHxWxD':>14} {'median_ms':>10} {'mean_ms':>10} {'stddev_ms':>10}"
        lines = [header]
        for e in self.entries:
            shape = "x".join(str(d) for d in e.shape)
            lines.append(
                f"{e.token_count:>8} {shape:>14} {e.median_ms:>10.3f} "
                f"{e.mean_ms:>10.3f} {e.stddev_ms:>10.3f}"
            )
        return "\n".join(lines)


@dataclass
class ScalingVerdict:
    slope: float
    passed: bool
    low: float = 0.8
    high: float = 1.3

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "passed": self.passed,
            "band": [self.low, self.high],
        }


@dataclass
class RetentionProfile:
    per_frame_kept: list[int]
    per_frame_fraction: list[float]
    kept_mean: dict
    dropped_mean: dict

    def to_dict(self) -> dict:
        return {
            "per_frame_kept": self.per_frame_kept,
            "per_frame_fraction": self.per_frame_fraction,
            "kept_mean": self.kept_mean,
            "dropped_mean": self.dropped_mean,
        }


def bench_scene(shape: tuple[int, int, int, int], seed: int = _BENCH_SEED) -> tuple:
    """Fixed-seed scene used for timing; one moving object plus noise."""
    k, h, w, d = shape
    patch = min(2, h, w)
    spec = SceneSpec(
        frames=k,
        rows=h,
        cols=w,
        dim=d,
        background_dirs=min(4, h * w),
        objects=[ObjectSpec(seed=7, start=(0, 0), velocity=(0, 1), patch=patch)],
        noise_sigma=0.05,
        query_target=("object", 0),
        seed=seed,
    )
    visual, text, _ = generate(spec)
    return visual, text


def compression_task(visual, text, config: PruneConfig) -> Selection:
    """The timed unit of work: score everything, resolve budget, select."""
    table = score_all(visual, text, config)
    plan = resolve_budget(config, table.shape)
    return select_topk(table, plan, config)


def time_compression(
    sizes: list[tuple[int, int, int, int]],
    config: PruneConfig,
    runs: int = 3,
    warmups: int = 1,
    seed: int = _BENCH_SEED,
) -> TimingReport:
    """Median/mean/stddev of the compression wall time per size."""
    if not sizes:
        raise ValueError("sizes must be nonempty")
    if runs < 3:
        raise ValueError(f"need at least 3 runs, got {runs}")
    if warmups < 1:
        raise ValueError(f"need at least 1 warmup, got {warmups}")
    report = TimingReport()
    for shape in sizes:
        visual, text = bench_scene(shape, seed=seed)
        selection = None
        for _ in range(warmups):
            selection = compression_task(visual, text, config)
        samples = []
        for _ in range(runs):
            start = time.perf_counter()
            selection = compression_task(visual, text, config)
            samples.append((time.perf_counter() - start) * 1000.0)
        report.entries.append(
            TimingEntry(
                shape=tuple(shape),
                token_count=shape[0] * shape[1] * shape[2],
                warmups=warmups,
                runs=runs,
                median_ms=float(np.median(samples)),
                mean_ms=float(np.mean(samples)),
                stddev_ms=float(np.std(samples)),
                selection=selection,
            )
        )
    return report


def retention_profile(
    selection: Selection, scores: ScoreTable, shape: tuple[int, int, int]
) -> RetentionProfile:
    """Exact per-frame kept counts plus mean score terms, kept vs dropped."""
    k, h, w = shape
    if scores.shape != (k, h, w):
        raise ValueError(f"score shape {scores.shape} != {shape}")
    kept_mask = np.zeros((k, h, w), dtype=bool)
    for tok in selection.kept:
        kept_mask[tok.frame, tok.row, tok.col] = True
    counts = kept_mask.reshape(k, -1).sum(axis=1)

    def _means(mask: np.ndarray) -> dict:
        if not mask.any():
            return {"r": None, "d_corr": None, "d_echo": None}
        return {
            "r": float(scores.r[mask].mean()),
            "d_corr": float(scores.d_corr[mask].mean()),
            "d_echo": float(scores.d_echo[mask].mean()),
        }

    return RetentionProfile(
        per_frame_kept=[int(c) for c in counts],
        per_frame_fraction=[float(c) / (h * w) for c in counts],
        kept_mean=_means(kept_mask),
        dropped_mean=_means(~kept_mask),
    )


def scaling_check(report: TimingReport, low: float = 0.8, high: float = 1.3) -> ScalingVerdict:
    """Fit log(median time) vs log(tokens); PASS when the slope sits in band."""
    if len(report.entries) < 4:
        raise ValueError(f"scaling check needs >= 4 sizes, got {len(report.entries)}")
    xs = np.log([e.token_count for e in report.entries])
    ys = np.log([max(e.median_ms, 1e-9) for e in report.entries])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return ScalingVerdict(slope=slope, passed=low <= slope <= high, low=low, high=high)


def write_timing_json(path, report: TimingReport, verdict: ScalingVerdict | None = None) -> None:
    doc = report.to_dict()
    if verdict is not None:
        doc["scaling"] = verdict.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
