"""Deterministic synthetic embedding scenes with ground-truth labels.

A scene is a static background (a few cluster directions tiled over the
grid), zero or more moving object patches, and optional novelty events
whose directions are orthogonalized against every background cluster.
Tokens are (direction + gaussian noise), renormalized, so everything
stays near unit norm and the redundancy structure is known by
construction. The text set points at one object or event, which gives
labeled scenes for recall measurements.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tensor_io import TextTokenSet, VisualTokenGrid

LABEL_BACKGROUND = 0
LABEL_OBJECT = 1
LABEL_NOVELTY = 2


@dataclass
class ObjectSpec:
    seed: int
    start: tuple[int, int]
    velocity: tuple[float, float]
    patch: int = 2


@dataclass
class NoveltySpec:
    frame: int
    region: tuple[int, int, int, int]  # row0, col0, n_rows, n_cols
    seed: int = 0


@dataclass
class SceneSpec:
    frames: int
    rows: int
    cols: int
    dim: int
    background_dirs: int = 4
    objects: list[ObjectSpec] = field(default_factory=list)
    novelty_events: list[NoveltySpec] = field(default_factory=list)
    noise_sigma: float = 0.05
    query_target: tuple[str, int] | None = None  # ("object"|"novelty", index)
    distractors: int = 0
    seed: int = 0

    def __post_init__(self):
        if min(self.frames, self.rows, self.cols, self.dim) < 1:
            raise ValueError("frames, rows, cols, dim must all be >= 1")
        if self.background_dirs < 1:
            raise ValueError("need at least one background direction")
        if not 0.0 <= self.noise_sigma < 0.5:
            raise ValueError(f"noise_sigma must be in [0, 0.5), got {self.noise_sigma}")
        for obj in self.objects:
            if obj.patch < 1 or obj.patch > min(self.rows, self.cols):
                raise ValueError(f"object patch {obj.patch} does not fit the grid")
        for ev in self.novelty_events:
            if not 0 <= ev.frame < self.frames:
                raise ValueError(f"novelty frame {ev.frame} out of range")
            r0, c0, nr, nc = ev.region
            if r0 < 0 or c0 < 0 or r0 + nr > self.rows or c0 + nc > self.cols:
                raise ValueError(f"novelty region {ev.region} out of grid")
        if self.query_target is not None:
            kind, idx = self.query_target
            pool = self.objects if kind == "object" else self.novelty_events
            if kind not in ("object", "novelty"):
                raise ValueError(f"unknown query target kind {kind!r}")
            if not 0 <= idx < len(pool):
                raise ValueError(f"query target index {idx} out of range")

    @classmethod
    def from_json(cls, doc: dict) -> "SceneSpec":
        objects = [
            ObjectSpec(
                seed=int(o["seed"]),
                start=(int(o["start"][0]), int(o["start"][1])),
                velocity=(float(o["velocity"][0]), float(o["velocity"][1])),
                patch=int(o.get("patch", 2)),
            )
            for o in doc.get("objects", [])
        ]
        events = [
            NoveltySpec(
                frame=int(e["frame"]),
                region=tuple(int(x) for x in e["region"]),
                seed=int(e.get("seed", 0)),
            )
            for e in doc.get("novelty_events", [])
        ]
        target = None
        if doc.get("query_target") is not None:
            target = (str(doc["query_target"]["kind"]), int(doc["query_target"]["index"]))
        return cls(
            frames=int(doc["frames"]),
            rows=int(doc["rows"]),
            cols=int(doc["cols"]),
            dim=int(doc["dim"]),
            background_dirs=int(doc.get("background_dirs", 4)),
            objects=objects,
            novelty_events=events,
            noise_sigma=float(doc.get("noise_sigma", 0.05)),
            query_target=target,
            distractors=int(doc.get("distractors", 0)),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def from_json_file(cls, path) -> "SceneSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class TokenLabels:
    """Per-token ground truth: kind in {background, object, novelty} + id."""

    kind: np.ndarray  # (frames, rows, cols) uint8
    ident: np.ndarray  # (frames, rows, cols) int16, -1 for background

    def object_mask(self, index: int | None = None) -> np.ndarray:
        mask = self.kind == LABEL_OBJECT
        if index is not None:
            mask &= self.ident == index
        return mask

    def novelty_mask(self, index: int | None = None) -> np.ndarray:
        mask = self.kind == LABEL_NOVELTY
        if index is not None:
            mask &= self.ident == index
        return mask

    def to_strings(self) -> list:
        names = {LABEL_BACKGROUND: "background", LABEL_OBJECT: "object", LABEL_NOVELTY: "novelty"}
        k, h, w = self.kind.shape
        out = []
        for f in range(k):
            frame = []
            for r in range(h):
                row = []
                for c in range(w):
                    kind = int(self.kind[f, r, c])
                    if kind == LABEL_BACKGROUND:
                        row.append("background")
                    else:
                        row.append(f"{names[kind]}:{int(self.ident[f, r, c])}")
                frame.append(row)
            out.append(frame)
        return out


def _unit_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    return arr / np.where(norms == 0.0, 1.0, norms)


def _direction(seed: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def _orthogonalize(vec: np.ndarray, basis: np.ndarray) -> np.ndarray:
    out = vec.copy()
    for b in basis:
        out -= np.dot(out, b) * b
    norm = np.linalg.norm(out)
    if norm < 1e-9:
        raise ValueError("novelty direction degenerate after orthogonalization")
    return out / norm


def _object_patch(
    obj: ObjectSpec, frame: int, rows: int, cols: int
) -> tuple[int, int]:
    r = int(round(obj.start[0] + frame * obj.velocity[0]))
    c = int(round(obj.start[1] + frame * obj.velocity[1]))
    r = min(max(r, 0), rows - obj.patch)
    c = min(max(c, 0), cols - obj.patch)
    return r, c


def generate(spec: SceneSpec) -> tuple[VisualTokenGrid, TextTokenSet, TokenLabels]:
    """Build the scene; bit-identical output for identical specs."""
    k, h, w, dim = spec.frames, spec.rows, spec.cols, spec.dim
    rng = np.random.default_rng(spec.seed)
    bg_dirs = _unit_rows(rng.standard_normal((spec.background_dirs, dim)))
    # orthonormal basis of the background span, for novelty orthogonalization
    bg_basis = np.linalg.qr(bg_dirs.T)[0].T[: min(spec.background_dirs, dim)]

    cluster = (np.arange(h)[:, None] * w + np.arange(w)[None, :]) % spec.background_dirs
    base = bg_dirs[cluster]  # (h, w, dim)
    video = np.repeat(base[None], k, axis=0)
    kind = np.full((k, h, w), LABEL_BACKGROUND, dtype=np.uint8)
    ident = np.full((k, h, w), -1, dtype=np.int16)

    obj_dirs = [_direction(obj.seed, dim) for obj in spec.objects]
    for oi, obj in enumerate(spec.objects):
        for f in range(k):
            r0, c0 = _object_patch(obj, f, h, w)
            video[f, r0 : r0 + obj.patch, c0 : c0 + obj.patch] = obj_dirs[oi]
            kind[f, r0 : r0 + obj.patch, c0 : c0 + obj.patch] = LABEL_OBJECT
            ident[f, r0 : r0 + obj.patch, c0 : c0 + obj.patch] = oi

    nov_dirs = []
    for ni, ev in enumerate(spec.novelty_events):
        direction = _orthogonalize(_direction(ev.seed, dim), bg_basis)
        nov_dirs.append(direction)
        r0, c0, nr, nc = ev.region
        video[ev.frame, r0 : r0 + nr, c0 : c0 + nc] = direction
        kind[ev.frame, r0 : r0 + nr, c0 : c0 + nc] = LABEL_NOVELTY
        ident[ev.frame, r0 : r0 + nr, c0 : c0 + nc] = ni

    if spec.noise_sigma > 0:
        video = video + spec.noise_sigma * rng.standard_normal(video.shape)
    video = _unit_rows(video)

    if spec.query_target is not None:
        kind_name, idx = spec.query_target
        target_dir = obj_dirs[idx] if kind_name == "object" else nov_dirs[idx]
    else:
        target_dir = bg_dirs[0]
    text = [target_dir]
    for _ in range(spec.distractors):
        text.append(_unit_rows(rng.standard_normal((1, dim)))[0])
    text_arr = np.stack(text, axis=0)

    grid = VisualTokenGrid(video.astype(np.float32))
    tokens = TextTokenSet(text_arr.astype(np.float32))
    return grid, tokens, TokenLabels(kind=kind, ident=ident)


def subsample_frames(
    grid: VisualTokenGrid, target_frames: int
) -> tuple[VisualTokenGrid, float, float]:
    """Uniformly subsample to ``target_frames`` frames.

    Keeps frames at round(m * K / M) for m = 0..M-1 (deduplicated; padded
    from the tail on collisions). Returns (subsampled grid, sampling
    interval I = K/M, temporal resolution TR = M/K).
    """
    k = grid.frames
    m = target_frames
    if not 1 <= m <= k:
        raise ValueError(f"target_frames {m} outside [1, {k}]")
    indices: list[int] = []
    for i in range(m):
        idx = int(math.floor(i * k / m + 0.5))
        idx = min(idx, k - 1)
        if idx not in indices:
            indices.append(idx)
    tail = k - 1
    while len(indices) < m:
        if tail not in indices:
            indices.append(tail)
        tail -= 1
    indices.sort()
    sub = VisualTokenGrid(grid.data[indices])
    return sub, k / m, m / k
