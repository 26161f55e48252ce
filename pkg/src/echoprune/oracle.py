"""Naive reference implementation for equivalence testing.

Everything here is written token by token with plain Python floats and
explicit candidate materialization: no batching, no shared intermediates,
no fast paths. The accumulation order intentionally differs from the
vectorized path (oldest history frame first, reconstruction built as an
explicit vector before the final inner product), so agreement is checked
to a tolerance rather than bitwise.
"""

from __future__ import annotations

import math

import numpy as np

from .scoring import PruneConfig, ScoreTable, Variant, _as_array
from .selection import BudgetPlan, Selection, _split_quota
from .tensor_io import KeptToken


def _unit(vec: list[float]) -> list[float]:
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0.0:
        return [0.0] * len(vec)
    return [x / norm for x in vec]


def _dot(a: list[float], b: list[float]) -> float:
    total = 0.0
    for x, y in zip(a, b):
        total += x * y
    return total


def _candidate_positions(
    row: int, col: int, rows: int, cols: int, window: int | None
) -> list[tuple[int, int]]:
    if window is None:
        return [(r, c) for r in range(rows) for c in range(cols)]
    rad = (window - 1) // 2
    out = []
    for r in range(max(0, row - rad), min(rows - 1, row + rad) + 1):
        for c in range(max(0, col - rad), min(cols - 1, col + rad) + 1):
            out.append((r, c))
    return out


def _echo_one(
    token: list[float],
    frames: list[list[list[list[float]]]],
    row: int,
    col: int,
    window: int | None,
    tau: float,
) -> float:
    """Echo error of one token against explicit candidate frames."""
    rows = len(frames[0])
    cols = len(frames[0][0])
    dim = len(token)
    cands: list[list[float]] = []
    for frame in frames:
        for (r, c) in _candidate_positions(row, col, rows, cols, window):
            cands.append(frame[r][c])
    rho = [_dot(token, cand) / tau for cand in cands]
    peak = max(rho)
    expv = [math.exp(v - peak) for v in rho]
    denom = sum(expv)
    probs = [e / denom for e in expv]
    recon = [0.0] * dim
    for p, cand in zip(probs, cands):
        for d in range(dim):
            recon[d] += p * cand[d]
    return _dot(token, recon)


def oracle_score(visual, text, config: PruneConfig) -> ScoreTable:
    """Token-by-token transcription of the scoring pipeline."""
    v = _as_array(visual, 4, "visual grid")
    t = _as_array(text, 2, "text set")
    if v.shape[-1] != t.shape[-1]:
        raise ValueError(f"dim mismatch: visual D={v.shape[-1]}, text D={t.shape[-1]}")
    k, h, w, dim = v.shape
    vu = [
        [[_unit([float(x) for x in v[f, r, c]]) for c in range(w)] for r in range(h)]
        for f in range(k)
    ]
    tu = [_unit([float(x) for x in t[j]]) for j in range(t.shape[0])]
    zero_v = sum(
        1
        for f in range(k)
        for r in range(h)
        for c in range(w)
        if all(x == 0.0 for x in vu[f][r][c])
    )
    zero_t = sum(1 for tok in tu if all(x == 0.0 for x in tok))

    r_arr = np.zeros((k, h, w))
    corr = np.zeros((k, h, w))
    echo = np.zeros((k, h, w))
    flags = np.zeros((k, h, w), dtype=bool)
    flags[0] = True
    if config.variant == Variant.REVERSE:
        flags[k - 1] = True

    for f in range(k):
        for row in range(h):
            for col in range(w):
                token = vu[f][row][col]
                r_arr[f, row, col] = max(_dot(token, txt) for txt in tu)
                # correspondence
                if config.variant == Variant.REVERSE:
                    if 1 <= f <= k - 2:
                        corr[f, row, col] = _dot(token, vu[f + 1][row][col])
                else:
                    if f >= 1:
                        corr[f, row, col] = _dot(token, vu[f - 1][row][col])
                # echo: history frames enumerated oldest-first on purpose
                fwd_frames = [
                    vu[f - 1 - j]
                    for j in reversed(range(config.history))
                    if f - 1 - j >= 0
                ]
                bwd_frames = [
                    vu[f + 1 + j]
                    for j in reversed(range(config.history))
                    if f + 1 + j <= k - 1
                ]
                if config.variant == Variant.REVERSE:
                    if bwd_frames:
                        echo[f, row, col] = _echo_one(
                            token, bwd_frames, row, col, config.window, config.tau
                        )
                elif config.variant == Variant.BIDIRECTION:
                    parts = []
                    if fwd_frames:
                        parts.append(
                            _echo_one(token, fwd_frames, row, col, config.window, config.tau)
                        )
                    if bwd_frames:
                        parts.append(
                            _echo_one(token, bwd_frames, row, col, config.window, config.tau)
                        )
                    if parts:
                        echo[f, row, col] = sum(parts) / len(parts)
                else:
                    if fwd_frames:
                        echo[f, row, col] = _echo_one(
                            token, fwd_frames, row, col, config.window, config.tau
                        )

    s = np.zeros((k, h, w))
    for f in range(k):
        for row in range(h):
            for col in range(w):
                if config.variant == Variant.ECHO_ONLY:
                    delta = echo[f, row, col]
                elif config.variant == Variant.CORR_ONLY:
                    delta = corr[f, row, col]
                else:
                    delta = corr[f, row, col] + echo[f, row, col]
                if config.variant == Variant.NO_RELEVANCE:
                    s[f, row, col] = -delta
                else:
                    s[f, row, col] = config.lam * r_arr[f, row, col] - (
                        1.0 - config.lam
                    ) * delta
    return ScoreTable(
        r=r_arr,
        d_corr=corr,
        d_echo=echo,
        s=s,
        first_frame_flag=flags,
        zero_norm_visual=zero_v,
        zero_norm_text=zero_t,
    )


def oracle_select(
    scores: ScoreTable, plan: BudgetPlan, config: PruneConfig
) -> Selection:
    """Full-sort selection mirroring the two-stage quota contract."""
    k, h, w = scores.shape
    tokens = [(f, r, c) for f in range(k) for r in range(h) for c in range(w)]
    quota = plan.first_frame_quota
    chosen: list[tuple[int, int, int]] = []
    if quota > 0:
        quota_frames = sorted(
            {f for (f, r, c) in tokens if scores.first_frame_flag[f, r, c]}
        )
        shares = _split_quota(quota, quota_frames)
        for f, share in shares.items():
            members = [tok for tok in tokens if tok[0] == f]
            members.sort(key=lambda tok: (-scores.r[tok], tok))
            chosen.extend(members[:share])
        pool = [
            tok for tok in tokens if not scores.first_frame_flag[tok]
        ]
    else:
        pool = list(tokens)
    pool.sort(key=lambda tok: (-scores.s[tok], tok))
    need = plan.total_budget - len(chosen)
    chosen.extend(pool[:need])
    if len(chosen) < plan.total_budget:
        taken = set(chosen)
        leftovers = [tok for tok in tokens if tok not in taken]
        leftovers.sort(key=lambda tok: (-scores.s[tok], tok))
        chosen.extend(leftovers[: plan.total_budget - len(chosen)])
    kept = [
        KeptToken(
            frame=f,
            row=r,
            col=c,
            score=float(scores.s[f, r, c]),
            r=float(scores.r[f, r, c]),
            d_corr=float(scores.d_corr[f, r, c]),
            d_echo=float(scores.d_echo[f, r, c]),
        )
        for (f, r, c) in sorted(chosen)
    ]
    return Selection(kept=kept)
