"""Distances between point patterns.

Two families are provided: the Hausdorff distance ``d_H`` between point sets
and the combined distance

    d(x, y) = d_H(x, y) / diam(S) + d0(x, y)

where ``d0`` only looks at the cardinalities ``#x`` and ``#y``.  Three ``d0``
variants are available: ``"cardinality"``, ``"hellinger"`` and ``"kl"``.

Empty patterns follow a fixed convention: ``d_H(empty, empty) = 0`` and
``d_H(empty, y) = diam(S)`` for nonempty ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .core import PointPattern, Window, check_same_window

D0_KINDS = ("cardinality", "hellinger", "kl")


def hausdorff(x: PointPattern, y: PointPattern) -> float:
    """Hausdorff distance between the point sets of ``x`` and ``y``."""
    w = check_same_window(x, y)
    if x.count == 0 or y.count == 0:
        return 0.0 if x.count == y.count else w.diameter()
    d = cdist(x.points, y.points)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# Count-level d0 functions.  They broadcast over integer arrays.

def d0_cardinality_counts(nx, ny):
    delta = np.abs(np.asarray(nx, dtype=float) - np.asarray(ny, dtype=float))
    return delta / (1.0 + delta)


def d0_hellinger_counts(nx, ny):
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    sq = -np.expm1(-0.5 * (np.sqrt(nx) - np.sqrt(ny)) ** 2)
    return np.sqrt(sq)


def d0_kl_counts(nx, ny):
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    nx, ny = np.broadcast_arrays(nx, ny)
    out = np.ones(nx.shape)
    both = (nx > 0) & (ny > 0)
    expo = (ny[both] - nx[both]) * np.log(nx[both] / ny[both])
    out[both] = -np.expm1(expo)
    out[nx == ny] = 0.0
    return out if out.ndim else float(out)


_D0 = {
    "cardinality": d0_cardinality_counts,
    "hellinger": d0_hellinger_counts,
    "kl": d0_kl_counts,
}


def d0_counts(kind: str, nx, ny):
    try:
        fn = _D0[kind]
    except KeyError:
        raise ValueError(f"unknown d0 kind {kind!r}; expected one of {D0_KINDS}") from None
    return fn(nx, ny)


def d0_cardinality(x: PointPattern, y: PointPattern) -> float:
    """``|#x - #y| / (1 + |#x - #y|)``."""
    return float(d0_cardinality_counts(x.count, y.count))


def d0_hellinger(x: PointPattern, y: PointPattern) -> float:
    """Positive root of ``1 - exp(-(sqrt(#x) - sqrt(#y))**2 / 2)``."""
    return float(d0_hellinger_counts(x.count, y.count))


def d0_kl(x: PointPattern, y: PointPattern) -> float:
    """``1 - exp((#y - #x) log(#x / #y))``; 1 when exactly one pattern is empty."""
    return float(d0_kl_counts(x.count, y.count))


@dataclass(frozen=True)
class PatternMetric:
    """Hausdorff (``d0=None``) or combined distance on patterns in ``window``."""

    window: Window
    d0: Optional[str] = None

    def __post_init__(self):
        if self.d0 is not None and self.d0 not in D0_KINDS:
            raise ValueError(f"unknown d0 kind {self.d0!r}; expected one of {D0_KINDS}")
        if self.d0 is not None and not self.window.diameter() > 0:
            raise ValueError("combined distance needs a window with positive diameter")

    @property
    def kind(self) -> str:
        return "hausdorff" if self.d0 is None else "combined"

    def __call__(self, x: PointPattern, y: PointPattern) -> float:
        return combined_distance(self, x, y)

    def from_hausdorff(self, h: np.ndarray, nx, ny) -> np.ndarray:
        """Turn a Hausdorff matrix ``h[i, j]`` into this metric's distances.

        ``nx`` and ``ny`` are the pattern cardinalities along rows and columns.
        """
        h = np.asarray(h, dtype=float)
        if self.d0 is None:
            return h
        nx = np.asarray(nx)[:, None]
        ny = np.asarray(ny)[None, :]
        return h / self.window.diameter() + d0_counts(self.d0, nx, ny)

    def pairwise(self, xs: Sequence[PointPattern], ys: Optional[Sequence[PointPattern]] = None) -> np.ndarray:
        h = hausdorff_matrix(xs, ys)
        ys = xs if ys is None else ys
        return self.from_hausdorff(h, [p.count for p in xs], [p.count for p in ys])


def combined_distance(m: PatternMetric, x: PointPattern, y: PointPattern) -> float:
    w = check_same_window(x, y)
    if w != m.window:
        raise ValueError(f"window mismatch: metric on {m.window}, patterns on {w}")
    h = hausdorff(x, y)
    if m.d0 is None:
        return h
    return h / w.diameter() + float(d0_counts(m.d0, x.count, y.count))


@numba.njit(cache=True)
def _directed(a, b, current):
    # max over rows of a of the min distance to b; early exit is exact
    h = current
    for i in range(a.shape[0]):
        cmin = np.inf
        for j in range(b.shape[0]):
            s = 0.0
            for k in range(a.shape[1]):
                t = a[i, k] - b[j, k]
                s += t * t
            if s < cmin:
                cmin = s
                if cmin <= h:
                    break
        if cmin > h:
            h = cmin
    return h


@numba.njit(cache=True)
def _hausdorff_block(pa, oa, pb, ob, diam, symmetric):
    na = oa.shape[0] - 1
    nb = ob.shape[0] - 1
    out = np.zeros((na, nb))
    for i in range(na):
        a = pa[oa[i]:oa[i + 1]]
        j0 = i + 1 if symmetric else 0
        for j in range(j0, nb):
            b = pb[ob[j]:ob[j + 1]]
            if a.shape[0] == 0 or b.shape[0] == 0:
                v = 0.0 if a.shape[0] == b.shape[0] else diam
            else:
                h2 = _directed(a, b, 0.0)
                h2 = _directed(b, a, h2)
                v = np.sqrt(h2)
            out[i, j] = v
            if symmetric:
                out[j, i] = v
    return out


def _stack(patterns: Sequence[PointPattern]):
    dim = patterns[0].window.dim
    counts = np.array([p.count for p in patterns], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    pts = np.vstack([p.points for p in patterns]) if counts.sum() else np.empty((0, dim))
    return np.ascontiguousarray(pts, dtype=float), offsets


def hausdorff_matrix(xs: Sequence[PointPattern], ys: Optional[Sequence[PointPattern]] = None) -> np.ndarray:
    """Matrix of Hausdorff distances between ``xs`` and ``ys`` (``xs`` if omitted)."""
    xs = list(xs)
    symmetric = ys is None
    ys = xs if symmetric else list(ys)
    if not xs or not ys:
        return np.zeros((len(xs), len(ys)))
    w = check_same_window(*xs, *ys)
    pa, oa = _stack(xs)
    pb, ob = (pa, oa) if symmetric else _stack(ys)
    return _hausdorff_block(pa, oa, pb, ob, w.diameter(), symmetric)
