"""Budget resolution and token selection.

Selection runs in two stages. Quota frames (the boundary frames that have
no reconstruction history) first keep their share of the quota ranked by
relevance alone; the remaining budget then goes to a global Top-K by
combined score over the other frames. If the non-quota pool cannot fill
the budget (extreme keep ratios), leftover quota-frame tokens fill the
rest so that |kept| == budget always holds.

Ordering is made total by the fixed tie-break: score descending, then
frame, row, col ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scoring import PruneConfig, ScoreTable
from .tensor_io import KeptToken


class BudgetError(ValueError):
    """Budget cannot be satisfied for the given grid shape."""


@dataclass
class BudgetPlan:
    total_budget: int
    first_frame_quota: int
    gamma: float


@dataclass
class Selection:
    """Kept tokens, ordered by (frame, row, col) ascending."""

    kept: list[KeptToken]

    def __len__(self) -> int:
        return len(self.kept)

    def index_set(self) -> set[tuple[int, int, int]]:
        return {tok.key() for tok in self.kept}

    def index_list(self) -> list[tuple[int, int, int]]:
        return [tok.key() for tok in self.kept]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resolve_budget(config: PruneConfig, shape: tuple[int, int, int]) -> BudgetPlan:
    """Turn a keep ratio or absolute budget into (B, quota, gamma).

    B = round(ratio * total) clamped to [1, total]; quota = round(HW / gamma)
    capped at B, where gamma = total / B is the compression factor.
    """
    k, h, w = shape
    if k < 1 or h < 1 or w < 1:
        raise ValueError(f"invalid shape {shape}")
    total = k * h * w
    if config.budget is not None:
        budget = config.budget
        if budget < 1 or budget > total:
            raise BudgetError(f"budget {budget} outside [1, {total}]")
    elif config.keep_ratio is not None:
        budget = _round_half_up(config.keep_ratio * total)
        budget = min(max(budget, 1), total)
    else:
        raise BudgetError("config sets neither keep_ratio nor budget")
    if budget == 0:
        raise BudgetError("budget resolved to zero")
    gamma = total / budget
    # quota = round(H*W / gamma) = round(H*W*B / total), done in exact integers
    quota = (2 * h * w * budget + total) // (2 * total)
    quota = min(quota, budget)
    return BudgetPlan(total_budget=budget, first_frame_quota=int(quota), gamma=gamma)


def _tie_order(values: np.ndarray, frames: int, rows: int, cols: int) -> np.ndarray:
    """Flat indices sorted by (value desc, frame asc, row asc, col asc)."""
    flat = values.reshape(-1)
    # lexsort: last key is primary; flat index order encodes (frame,row,col)
    idx = np.arange(flat.size)
    return np.lexsort((idx, -flat))


def _split_quota(quota: int, quota_frames: list[int]) -> dict[int, int]:
    """Share the quota equally; floor split, remainder to the earliest frame."""
    if not quota_frames:
        return {}
    base = quota // len(quota_frames)
    shares = {f: base for f in quota_frames}
    shares[min(quota_frames)] += quota - base * len(quota_frames)
    return shares


def _selection_from_flat(flat_indices, scores: ScoreTable) -> Selection:
    k, h, w = scores.shape
    flat = np.sort(np.asarray(list(flat_indices), dtype=np.int64))
    frames, rem = np.divmod(flat, h * w)
    rows, cols = np.divmod(rem, w)
    kept = [
        KeptToken(frame=f, row=row, col=col, score=s, r=r, d_corr=dc, d_echo=de)
        for f, row, col, s, r, dc, de in zip(
            frames.tolist(),
            rows.tolist(),
            cols.tolist(),
            scores.s.reshape(-1)[flat].tolist(),
            scores.r.reshape(-1)[flat].tolist(),
            scores.d_corr.reshape(-1)[flat].tolist(),
            scores.d_echo.reshape(-1)[flat].tolist(),
        )
    ]
    return Selection(kept=kept)


def select_topk(
    scores: ScoreTable, plan: BudgetPlan, config: PruneConfig
) -> Selection:
    """Quota stage by relevance, then global Top-K by combined score.

    Quota frames are identified by first_frame_flag. When the quota is
    zero the stage is skipped entirely and every token competes in the
    global stage.
    """
    k, h, w = scores.shape
    total = k * h * w
    budget = plan.total_budget
    if budget < 1 or budget > total:
        raise BudgetError(f"plan budget {budget} outside [1, {total}]")
    quota = plan.first_frame_quota
    flags_flat = scores.first_frame_flag.reshape(-1)
    chosen: list[int] = []
    if quota > 0:
        quota_frames = sorted(
            int(f) for f in np.unique(np.flatnonzero(flags_flat) // (h * w))
        )
        shares = _split_quota(quota, quota_frames)
        r_order = _tie_order(scores.r, k, h, w)
        for f, share in shares.items():
            frame_members = r_order[(r_order // (h * w)) == f]
            chosen.extend(int(i) for i in frame_members[:share])
        pool_mask = ~flags_flat
    else:
        pool_mask = np.ones(total, dtype=bool)
    s_order = _tie_order(scores.s, k, h, w)
    pool_order = s_order[pool_mask[s_order]]
    need = budget - len(chosen)
    chosen.extend(int(i) for i in pool_order[:need])
    if len(chosen) < budget:
        # non-quota pool exhausted: spill into quota-frame leftovers by score
        taken = set(chosen)
        leftovers = [int(i) for i in s_order if int(i) not in taken]
        chosen.extend(leftovers[: budget - len(chosen)])
    return _selection_from_flat(chosen, scores)


def select_uniform(scores: ScoreTable, plan: BudgetPlan) -> Selection:
    """Per-frame Top-K under a uniform frame budget (ablation baseline).

    Each frame keeps floor(B/K) tokens (the remainder goes to the earliest
    frames), ranked by combined score; quota frames rank by relevance.
    """
    k, h, w = scores.shape
    budget = plan.total_budget
    base, extra = divmod(budget, k)
    flags_flat = scores.first_frame_flag.reshape(-1)
    r_order = _tie_order(scores.r, k, h, w)
    s_order = _tie_order(scores.s, k, h, w)
    chosen: list[int] = []
    for f in range(k):
        share = base + (1 if f < extra else 0)
        if share == 0:
            continue
        frame_flagged = bool(flags_flat[f * h * w])
        order = r_order if frame_flagged else s_order
        members = order[(order // (h * w)) == f]
        chosen.extend(int(i) for i in members[:share])
    return _selection_from_flat(chosen, scores)
