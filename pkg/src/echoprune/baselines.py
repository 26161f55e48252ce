"""Comparison pruners: seeded uniform-random and relevance-only selection.

The random baseline must be reproducible across implementations, so the
generator is pinned down exactly: SplitMix64 over a 64-bit state,

    state += 0x9E3779B97F4A7C15                      (mod 2^64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9         (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB         (mod 2^64)
    output = z ^ (z >> 31)

Bounded draws use rejection sampling (redraw while the raw 64-bit value
falls in the biased tail, then take value mod bound), and the subset is
produced by a partial Fisher-Yates shuffle of the flat token indices.
"""

from __future__ import annotations

import numpy as np

from .scoring import PruneConfig, Variant, normalize, relevance
from .selection import BudgetPlan, ScoreTable, Selection, select_topk
from .tensor_io import KeptToken

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Minimal deterministic 64-bit generator (see module docstring)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_u64()
            if value < threshold:
                return value % bound


def select_random(
    shape: tuple[int, int, int], budget: int, seed: int
) -> Selection:
    """Uniform sample of ``budget`` tokens without replacement."""
    k, h, w = shape
    total = k * h * w
    if not 1 <= budget <= total:
        raise ValueError(f"budget {budget} outside [1, {total}]")
    rng = SplitMix64(seed)
    indices = list(range(total))
    for i in range(budget):
        j = i + rng.next_below(total - i)
        indices[i], indices[j] = indices[j], indices[i]
    kept = []
    for flat in sorted(indices[:budget]):
        f, rem = divmod(flat, h * w)
        row, col = divmod(rem, w)
        kept.append(
            KeptToken(frame=f, row=row, col=col, score=0.0, r=0.0, d_corr=0.0, d_echo=0.0)
        )
    return Selection(kept=kept)


def select_relevance_only(visual, text, budget: int) -> Selection:
    """Global Top-K by crossmodal relevance alone ("cosine" baseline).

    Equivalent to the full pruner with lam=1 and no quota stage.
    """
    from .scoring import _as_array

    v = _as_array(visual, 4, "visual grid")
    t = _as_array(text, 2, "text set")
    vu, _ = normalize(v)
    tu, _ = normalize(t)
    rel = relevance(vu, tu)
    k, h, w = rel.shape
    zeros = np.zeros_like(rel)
    table = ScoreTable(
        r=rel,
        d_corr=zeros,
        d_echo=zeros,
        s=rel,
        first_frame_flag=np.zeros((k, h, w), dtype=bool),
    )
    plan = BudgetPlan(
        total_budget=budget, first_frame_quota=0, gamma=(k * h * w) / budget
    )
    config = PruneConfig(tau=0.5, lam=1.0, variant=Variant.FULL, budget=budget)
    return select_topk(table, plan, config)
