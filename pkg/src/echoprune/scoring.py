"""Per-token scoring: crossmodal relevance, temporal redundancy, combined rank.

Every visual token gets four numbers:

    r       max inner product against the normalized text tokens
    d_corr  inner product with the token at the same position in the
            matching-direction neighbor frame (correspondence)
    d_echo  inner product with its softmax-weighted reconstruction from a
            candidate window in the history frames (echo)
    s       lam * r - (1 - lam) * delta, where delta depends on the variant

Inputs are L2-normalized first; all arithmetic runs in float64. Candidate
enumeration order is fixed (nearest history frame first, row-major window
offsets within a frame) so results are bit-reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tensor_io import TextTokenSet, VisualTokenGrid


class Variant(str, Enum):
    FULL = "full"
    ECHO_ONLY = "echo-only"
    CORR_ONLY = "corr-only"
    NO_RELEVANCE = "no-relevance"
    REVERSE = "reverse"
    BIDIRECTION = "bidirection"


TIE_BREAK = "score_desc,frame_asc,row_asc,col_asc"


@dataclass
class PruneConfig:
    """Scoring and budgeting knobs.

    window: odd side length of the square candidate neighborhood, or None
    for full-frame (holistic) matching. history: how many neighbor frames
    feed the echo candidate pool (1..3). lam: relevance weight in the
    combined score. Exactly one of keep_ratio / budget drives the budget.
    Defaults mirror the holistic configuration (tau=0.5, full-frame).
    """

    tau: float = 0.5
    window: int | None = None
    history: int = 1
    lam: float = 0.5
    variant: Variant = Variant.FULL
    keep_ratio: float | None = None
    budget: int | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.window is not None:
            if self.window < 1 or self.window % 2 == 0:
                raise ValueError(f"window side must be odd and >= 1, got {self.window}")
        if not 1 <= self.history <= 3:
            raise ValueError(f"history must be in 1..3, got {self.history}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        self.variant = Variant(self.variant)
        if self.keep_ratio is not None and self.budget is not None:
            raise ValueError("set keep_ratio or budget, not both")
        if self.keep_ratio is not None and not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError(f"keep_ratio must be in (0, 1], got {self.keep_ratio}")
        if self.budget is not None and self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")

    def to_dict(self) -> dict:
        keep: dict = {}
        if self.keep_ratio is not None:
            keep = {"ratio": self.keep_ratio}
        elif self.budget is not None:
            keep = {"budget": self.budget}
        return {
            "tau": self.tau,
            "window": "full" if self.window is None else self.window,
            "history": self.history,
            "lambda": self.lam,
            "variant": self.variant.value,
            "keep": keep,
            "tie_break": TIE_BREAK,
        }


@dataclass
class ScoreTable:
    """Per-token score terms over a (frames, rows, cols) grid."""

    r: np.ndarray
    d_corr: np.ndarray
    d_echo: np.ndarray
    s: np.ndarray
    first_frame_flag: np.ndarray
    zero_norm_visual: int = 0
    zero_norm_text: int = 0

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.s.shape


def _as_array(x, ndim: int, what: str) -> np.ndarray:
    if isinstance(x, (VisualTokenGrid, TextTokenSet)):
        x = x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{what} must be {ndim}-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


def normalize(tokens: np.ndarray) -> tuple[np.ndarray, int]:
    """L2-normalize along the last axis.

    Zero-norm tokens are left all-zero (they contribute 0 to every inner
    product downstream); the second return value counts them.
    """
    arr = np.asarray(tokens, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    zero = norms[..., 0] == 0.0
    safe = np.where(norms == 0.0, 1.0, norms)
    return arr / safe, int(np.count_nonzero(zero))


def relevance(visual_unit: np.ndarray, text_unit: np.ndarray) -> np.ndarray:
    """Max inner product of each visual token against all text tokens."""
    if visual_unit.shape[-1] != text_unit.shape[-1]:
        raise ValueError(
            f"dim mismatch: visual D={visual_unit.shape[-1]}, "
            f"text D={text_unit.shape[-1]}"
        )
    k, h, w, d = visual_unit.shape
    sims = visual_unit.reshape(-1, d) @ text_unit.T
    return sims.max(axis=1).reshape(k, h, w)


def quota_flags(frames: int, rows: int, cols: int, variant: Variant) -> np.ndarray:
    """Boolean mask of tokens in quota frames (no-history boundary frames).

    Frame 0 is always flagged; the reverse variant additionally flags the
    last frame (it has no successor to reconstruct from).
    """
    flags = np.zeros((frames, rows, cols), dtype=bool)
    flags[0] = True
    if variant == Variant.REVERSE:
        flags[frames - 1] = True
    return flags


def corr_error(visual_unit: np.ndarray, variant: Variant = Variant.FULL) -> np.ndarray:
    """Same-position inner product with the matching-direction neighbor frame.

    Forward (previous frame) for every variant except reverse, which
    mirrors to the following frame. Boundary frames without the needed
    neighbor, plus frame 0 under reverse, carry 0.
    """
    k = visual_unit.shape[0]
    d_corr = np.zeros(visual_unit.shape[:3])
    if variant == Variant.REVERSE:
        if k >= 3:
            d_corr[1:-1] = np.sum(visual_unit[1:-1] * visual_unit[2:], axis=-1)
    else:
        if k >= 2:
            d_corr[1:] = np.sum(visual_unit[1:] * visual_unit[:-1], axis=-1)
    return d_corr


def _candidate_sims(
    visual_unit: np.ndarray, window: int | None, history: int, backward: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Similarity of every token to its history-window candidates.

    Returns (sims, available): sims has shape (frames, rows, cols, C) with
    -inf marking slots that do not exist (clipped window positions, or
    history frames beyond the sequence boundary); available[k] is True
    when frame k has at least one candidate. Candidate order is fixed:
    nearest history frame first, row-major window offsets within a frame.
    """
    k, h, w, d = visual_unit.shape
    if window is None:
        offsets = None
        n_off = h * w
    else:
        rad = (window - 1) // 2
        offsets = [
            (dy, dx) for dy in range(-rad, rad + 1) for dx in range(-rad, rad + 1)
        ]
        n_off = len(offsets)
    sims = np.full((k, h, w, history * n_off), -np.inf)
    available = np.zeros(k, dtype=bool)
    for j in range(1, history + 1):
        if j > k - 1:
            break
        if backward:
            tgt, cand = visual_unit[: k - j], visual_unit[j:]
            tgt_slice = slice(0, k - j)
        else:
            tgt, cand = visual_unit[j:], visual_unit[: k - j]
            tgt_slice = slice(j, k)
        base = (j - 1) * n_off
        if offsets is None:
            block = tgt.reshape(-1, h * w, d) @ cand.reshape(-1, h * w, d).transpose(0, 2, 1)
            sims[tgt_slice, :, :, base : base + n_off] = block.reshape(-1, h, w, n_off)
        else:
            for oi, (dy, dx) in enumerate(offsets):
                r0, r1 = max(0, -dy), min(h, h - dy)
                c0, c1 = max(0, -dx), min(w, w - dx)
                if r0 >= r1 or c0 >= c1:
                    continue
                sims[tgt_slice, r0:r1, c0:c1, base + oi] = np.einsum(
                    "khwd,khwd->khw",
                    tgt[:, r0:r1, c0:c1],
                    cand[:, r0 + dy : r1 + dy, c0 + dx : c1 + dx],
                )
        available[tgt_slice] = True
    return sims, available


def _echo_direction(
    visual_unit: np.ndarray,
    tau: float,
    window: int | None,
    history: int,
    backward: bool = False,
    collect_weights: bool = False,
):
    """Echo error against up to ``history`` frames in one temporal direction.

    Returns (d_echo, available) where available[k] is False for frames
    with no history frame in this direction (their d_echo stays 0). With
    collect_weights, also returns (weights, sims, valid) arrays of shape
    (frames, rows, cols, C); weight rows of available frames sum to 1
    over their valid candidates.
    """
    k, h, w, _ = visual_unit.shape
    d_echo = np.zeros((k, h, w))
    sims, available = _candidate_sims(visual_unit, window, history, backward)
    valid = np.isfinite(sims)
    weights = np.zeros_like(sims) if collect_weights else None
    if available.any():
        act = np.flatnonzero(available)
        block = sims[act]
        rho = block / tau
        rho_max = np.max(rho, axis=-1, keepdims=True)  # >= one finite slot per row
        expv = np.exp(rho - rho_max)
        p = expv / np.sum(expv, axis=-1, keepdims=True)
        d_echo[act] = np.sum(p * np.where(valid[act], block, 0.0), axis=-1)
        if collect_weights:
            weights[act] = p
    if collect_weights:
        return d_echo, available, (weights, np.where(valid, sims, 0.0), valid)
    return d_echo, available


def echo_error(visual_unit: np.ndarray, config: PruneConfig) -> np.ndarray:
    """Softmax-reconstruction similarity per token (see module docstring).

    Forward by default; reverse uses following frames; bidirection averages
    the two directions, falling back to the single available one at the
    sequence boundaries. Tokens with no history in the active direction(s)
    get 0.
    """
    if config.variant == Variant.REVERSE:
        d_echo, _ = _echo_direction(
            visual_unit, config.tau, config.window, config.history, backward=True
        )
        return d_echo
    if config.variant == Variant.BIDIRECTION:
        fwd, fa = _echo_direction(
            visual_unit, config.tau, config.window, config.history, backward=False
        )
        bwd, ba = _echo_direction(
            visual_unit, config.tau, config.window, config.history, backward=True
        )
        n = (fa.astype(np.float64) + ba.astype(np.float64))[:, None, None]
        both = fwd + bwd
        with np.errstate(invalid="ignore"):
            out = np.where(n > 0, both / np.maximum(n, 1.0), 0.0)
        return out
    d_echo, _ = _echo_direction(
        visual_unit, config.tau, config.window, config.history, backward=False
    )
    return d_echo


def echo_weights(visual_unit: np.ndarray, config: PruneConfig):
    """Per-token softmax weights and candidate similarities.

    Uses the variant's primary direction (following frames for reverse,
    preceding otherwise). Returns (weights, sims, valid, available) where
    the first three are (frames, rows, cols, C) arrays; rows of frames
    without history are all zero and available marks which frames count.
    """
    backward = config.variant == Variant.REVERSE
    _, available, (weights, sims, valid) = _echo_direction(
        visual_unit,
        config.tau,
        config.window,
        config.history,
        backward=backward,
        collect_weights=True,
    )
    return weights, sims, valid, available


def combine_scores(
    r: np.ndarray, d_corr: np.ndarray, d_echo: np.ndarray, config: PruneConfig
) -> np.ndarray:
    """Blend relevance and redundancy into the selection score."""
    if r.shape != d_corr.shape or r.shape != d_echo.shape:
        raise ValueError("score term shapes differ")
    variant = config.variant
    if variant == Variant.ECHO_ONLY:
        delta = d_echo
    elif variant == Variant.CORR_ONLY:
        delta = d_corr
    else:
        delta = d_corr + d_echo
    if variant == Variant.NO_RELEVANCE:
        return -delta
    return config.lam * r - (1.0 - config.lam) * delta


def score_all(visual, text, config: PruneConfig) -> ScoreTable:
    """Normalize inputs and compute the full score table.

    Deterministic for fixed inputs and config. Quota-frame tokens carry
    first_frame_flag; redundancy terms are zero wherever the needed
    temporal neighbor does not exist.
    """
    v = _as_array(visual, 4, "visual grid")
    t = _as_array(text, 2, "text set")
    if v.shape[-1] != t.shape[-1]:
        raise ValueError(f"dim mismatch: visual D={v.shape[-1]}, text D={t.shape[-1]}")
    vu, zv = normalize(v)
    tu, zt = normalize(t)
    r = relevance(vu, tu)
    d_corr = corr_error(vu, config.variant)
    d_echo = echo_error(vu, config)
    flags = quota_flags(v.shape[0], v.shape[1], v.shape[2], config.variant)
    s = combine_scores(r, d_corr, d_echo, config)
    return ScoreTable(
        r=r,
        d_corr=d_corr,
        d_echo=d_echo,
        s=s,
        first_frame_flag=flags,
        zero_norm_visual=zv,
        zero_norm_text=zt,
    )
