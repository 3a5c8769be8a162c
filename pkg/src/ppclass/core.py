"""Windows, point patterns and labeled samples.

A :class:`Window` is a closed axis-aligned box in R^d equipped with Lebesgue
measure.  A :class:`PointPattern` is a finite (possibly empty) list of points
inside a window, stored as a read-only ``(n, d)`` float array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InvariantError(RuntimeError):
    """A numeric or structural invariant was violated at run time."""


def _as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"a point must be a 1-d coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point coordinates must be finite, got {arr.tolist()}")
    return arr


def euclidean(p, q) -> float:
    """Euclidean distance between two coordinate vectors."""
    a, b = _as_point(p), _as_point(q)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return math.sqrt(float(np.sum((a - b) ** 2)))


@dataclass(frozen=True)
class Window:
    """Closed box ``[lower[0], upper[0]] x ... x [lower[d-1], upper[d-1]]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("lower and upper must be nonempty and of equal length")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise ValueError(f"invalid window bounds lower={lo} upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int = 2) -> "Window":
        return cls((0.0,) * dim, (1.0,) * dim)

    @classmethod
    def square(cls, lo: float, hi: float, dim: int = 2) -> "Window":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def measure(self) -> float:
        return float(np.prod(self.sides))

    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.sides**2)))

    def contains(self, p) -> bool:
        a = _as_point(p)
        if a.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: point has {a.shape[0]}, window has {self.dim}")
        return bool(np.all(a >= self.lower) and np.all(a <= self.upper))

    def contains_all(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of ``points`` lying in the closed box."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def grid_axes(self, nodes) -> list:
        """Midpoints of a regular grid, one array per axis."""
        if np.isscalar(nodes):
            nodes = [int(nodes)] * self.dim
        axes = []
        for lo, hi, g in zip(self.lower, self.upper, nodes):
            h = (hi - lo) / g
            axes.append(lo + h * (np.arange(g) + 0.5))
        return axes

    def grid(self, nodes) -> tuple:
        """Midpoint grid nodes as an ``(N, d)`` array and the cell volume."""
        axes = self.grid_axes(nodes)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        cell = float(np.prod([(hi - lo) / len(a) for lo, hi, a in zip(self.lower, self.upper, axes)]))
        return pts, cell

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.lower) + rng.random((n, self.dim)) * self.sides

    def scaled(self, factor: float) -> "Window":
        return Window(tuple(factor * v for v in self.lower), tuple(factor * v for v in self.upper))


def bounding_window(points: np.ndarray, margin: float = 0.01) -> Window:
    """Bounding box of ``points`` enlarged by ``margin`` of each side length."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("cannot infer a window from zero points")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return Window(tuple(lo - margin * span), tuple(hi + margin * span))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite set of points observed in ``window``.

    Points are kept in insertion order; duplicates are allowed.
    """

    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, self.window.dim)
        if pts.ndim != 2 or pts.shape[1] != self.window.dim:
            raise ValueError(
                f"points must have shape (n, {self.window.dim}), got {np.shape(self.points)}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        inside = self.window.contains_all(pts)
        if not np.all(inside):
            bad = pts[~inside][0].tolist()
            raise ValueError(f"point {bad} lies outside window {self.window}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls, window: Window) -> "PointPattern":
        return cls(np.empty((0, window.dim)), window)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.window, self.points.tobytes()))

    def __repr__(self) -> str:
        return f"PointPattern(n={self.count}, window={self.window})"

    def concat(self, other: "PointPattern") -> "PointPattern":
        check_same_window(self, other)
        return PointPattern(np.vstack([self.points, other.points]), self.window)

    def scaled(self, factor: float) -> "PointPattern":
        return PointPattern(self.points * factor, self.window.scaled(factor))


@dataclass(frozen=True)
class LabeledPattern:
    """A pattern with its class label; ``label`` is ``None`` for unlabeled data."""

    pattern: PointPattern
    label: Optional[int] = None
    pattern_id: str = field(default="", compare=False)

    def __post_init__(self):
        if self.label is not None:
            if isinstance(self.label, bool) or int(self.label) != self.label or self.label < 0:
                raise ValueError(f"label must be a nonnegative integer, got {self.label!r}")
            object.__setattr__(self, "label", int(self.label))


def check_same_window(*patterns: PointPattern) -> Window:
    w = patterns[0].window
    for p in patterns[1:]:
        if p.window != w:
            raise ValueError(f"window mismatch: {w} vs {p.window}")
    return w


def labels_of(training: Sequence[LabeledPattern], n_classes: Optional[int] = None) -> np.ndarray:
    """Integer label array, validated against ``n_classes`` when given."""
    labels = np.array([lp.label if lp.label is not None else -1 for lp in training], dtype=int)
    if np.any(labels < 0):
        raise ValueError("all training patterns must carry a label")
    if n_classes is not None and labels.size and labels.max() >= n_classes:
        raise ValueError(f"label {labels.max()} outside declared class count {n_classes}")
    return labels


def window_contains(w: Window, p) -> bool:
    return w.contains(p)
