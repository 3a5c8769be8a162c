"""Edge-corrected kernel estimation of a Poisson intensity.

For one realization ``{xi_1, ..., xi_n}`` the estimate at ``zeta`` is

    lam(zeta) = (1 / K(zeta)) * sum_i sigma**-d * k(|zeta - xi_i| / sigma)

with ``K(zeta) = integral over S of sigma**-d * k(|zeta - xi| / sigma) dxi``.
The normalizer ``K`` is the edge correction: near the window boundary part of
the kernel mass falls outside ``S`` and ``K`` shrinks accordingly.  Replicated
realizations are combined by averaging the single-realization estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from .core import PointPattern, Window, check_same_window

KERNELS = ("gaussian", "uniform")
# Gaussian tails beyond this many bandwidths are dropped (local quadrature, sparse sums).
GAUSS_CUTOFF = 8.0
MAX_GRID = 2048
_CHUNK = 2_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel profile ``k`` with bandwidth ``sigma`` in dimension ``dim``.

    ``gaussian`` is ``k(u) = exp(-u**2 / 2)``, ``uniform`` is ``k(u) = 1{u <= 1}``.
    """

    kind: str = "gaussian"
    sigma: float = 0.1
    dim: int = 2

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    def profile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * u * u)
        return (u <= 1.0).astype(float)

    @property
    def reach(self) -> float:
        """Radius beyond which the kernel is (numerically) zero."""
        return self.sigma * (GAUSS_CUTOFF if self.kind == "gaussian" else 1.0)

    def scaled_sq(self, d2):
        """``sigma**-d * k(r / sigma)`` from squared distances ``r**2``."""
        s2 = self.sigma * self.sigma
        if self.kind == "gaussian":
            out = np.exp(d2 * (-0.5 / s2))
        else:
            out = (d2 <= s2).astype(float)
        out *= self.sigma ** (-self.dim)
        return out


def kernel_sums(kernel: KernelSpec, queries, sources, offsets=None) -> np.ndarray:
    """Sum of scaled kernels centered at ``sources``, evaluated at ``queries``.

    With ``offsets`` (segment boundaries into ``sources``, length ``m + 1``)
    the sum is split per segment and an ``(nq, m)`` matrix is returned.
    """
    q = np.asarray(queries, dtype=float).reshape(-1, kernel.dim)
    s = np.asarray(sources, dtype=float).reshape(-1, kernel.dim)
    nseg = None if offsets is None else len(offsets) - 1
    out = np.zeros(q.shape[0]) if nseg is None else np.zeros((q.shape[0], nseg))
    if q.shape[0] == 0 or s.shape[0] == 0:
        return out
    if _use_sparse(kernel, s):
        return _sparse_kernel_sums(kernel, q, s, offsets, out)
    if nseg is not None:
        offsets = np.asarray(offsets)
        starts = offsets[:-1]
        nonempty = np.flatnonzero(offsets[1:] > starts)
    step = max(1, _CHUNK // s.shape[0])
    for a in range(0, q.shape[0], step):
        block = _profile_inplace(kernel, cdist(q[a:a + step], s, "sqeuclidean"))
        if nseg is None:
            out[a:a + step] = block.sum(axis=1)
        else:
            out[a:a + step, nonempty] = np.add.reduceat(block, starts[nonempty], axis=1)
    out *= kernel.sigma ** (-kernel.dim)
    return out


def _use_sparse(kernel: KernelSpec, sources: np.ndarray) -> bool:
    # worthwhile only when the kernel reach covers a small part of the sources' extent
    if sources.shape[0] < 500:
        return False
    span = np.ptp(sources, axis=0)
    return bool(np.all(span > 0) and np.prod(np.minimum(2 * kernel.reach / span, 1.0)) < 0.1)


def _sparse_kernel_sums(kernel, q, s, offsets, out):
    tq, ts = cKDTree(q), cKDTree(s)
    pairs = tq.sparse_distance_matrix(ts, kernel.reach, output_type="ndarray")
    vals = kernel.scaled_sq(pairs["v"] ** 2)
    if offsets is None:
        out += np.bincount(pairs["i"], weights=vals, minlength=q.shape[0])
        return out
    seg = np.searchsorted(np.asarray(offsets), pairs["j"], side="right") - 1
    nseg = out.shape[1]
    flat = np.bincount(pairs["i"] * nseg + seg, weights=vals, minlength=q.shape[0] * nseg)
    out += flat.reshape(q.shape[0], nseg)
    return out


def self_kernel_sums(kernel: KernelSpec, points, offsets) -> np.ndarray:
    """``kernel_sums(kernel, points, points, offsets)`` evaluating each pair once.

    Rows are processed in blocks against the columns from the block start on;
    the part right of the diagonal block also supplies the transposed sums.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, kernel.dim)
    offsets = np.asarray(offsets)
    n, nseg = pts.shape[0], offsets.size - 1
    out = np.zeros((n, nseg))
    if n == 0:
        return out
    seg = np.repeat(np.arange(nseg), np.diff(offsets))
    step = max(1, min(n, _CHUNK // n))
    for a in range(0, n, step):
        b = min(n, a + step)
        block = _profile_inplace(kernel, cdist(pts[a:b], pts[a:], "sqeuclidean"))
        cols = seg[a:]
        starts = np.flatnonzero(np.r_[True, cols[1:] != cols[:-1]])
        out[a:b, cols[starts]] += np.add.reduceat(block, starts, axis=1)
        if b < n:
            rest = block[:, b - a:]
            rows = seg[a:b]
            rstarts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
            out[b:, rows[rstarts]] += np.add.reduceat(rest, rstarts, axis=0).T
    out *= kernel.sigma ** (-kernel.dim)
    return out


def _profile_inplace(kernel: KernelSpec, d2: np.ndarray) -> np.ndarray:
    """Unscaled ``k(r / sigma)`` from squared distances, overwriting ``d2``."""
    s2 = kernel.sigma * kernel.sigma
    if kernel.kind == "gaussian":
        np.multiply(d2, -0.5 / s2, out=d2)
        return np.exp(d2, out=d2)
    return (d2 <= s2).astype(float)


def quadrature_normalizer(window: Window, kernel: KernelSpec, zeta, nodes: int = 64) -> np.ndarray:
    """``K(zeta)`` by the midpoint rule on the kernel's support clipped to ``window``.

    Each query gets its own ``nodes**d`` grid spanning the box
    ``[zeta - reach, zeta + reach]`` intersected with the window.
    """
    z = np.asarray(zeta, dtype=float).reshape(-1, window.dim)
    lo_w, hi_w = np.asarray(window.lower), np.asarray(window.upper)
    out = np.empty(z.shape[0])
    u = (np.arange(nodes) + 0.5) / nodes
    for i, p in enumerate(z):
        lo = np.maximum(lo_w, p - kernel.reach)
        hi = np.minimum(hi_w, p + kernel.reach)
        axes = [a + (b - a) * u for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        d2 = sum((m - c) ** 2 for m, c in zip(mesh, p))
        out[i] = kernel.scaled_sq(d2).sum() * np.prod((hi - lo) / nodes)
    return out


def gaussian_box_normalizer(window: Window, kernel: KernelSpec, zeta) -> np.ndarray:
    """Exact ``K(zeta)`` for the Gaussian kernel on a box (product of normal CDF differences)."""
    z = np.asarray(zeta, dtype=float).reshape(-1, window.dim)
    return np.prod(_gaussian_axis_factors(window, kernel.sigma, z), axis=1)


def _gaussian_axis_factors(window: Window, sigma: float, z: np.ndarray) -> np.ndarray:
    lo, hi = np.asarray(window.lower), np.asarray(window.upper)
    return math.sqrt(2 * math.pi) * (ndtr((hi - z) / sigma) - ndtr((lo - z) / sigma))


def window_normalizer(window: Window, kernel: KernelSpec, zeta, nodes: int = 64) -> np.ndarray:
    if kernel.kind == "gaussian":
        return gaussian_box_normalizer(window, kernel, zeta)
    return quadrature_normalizer(window, kernel, zeta, nodes)


def integration_nodes(window: Window, kernel: KernelSpec, grid: int) -> list:
    """Per-axis node counts: at least ``grid``, and fine enough that a cell is at most sigma/2."""
    return [int(min(MAX_GRID, max(grid, math.ceil(2 * side / kernel.sigma)))) for side in window.sides]


def source_masses(window: Window, kernel: KernelSpec, sources, grid: int = 64) -> np.ndarray:
    """``integral over S of k_sigma(zeta - s) / K(zeta) dzeta`` for each source ``s``.

    Summing these over a pattern gives the integrated single-realization estimate.
    """
    s = np.asarray(sources, dtype=float).reshape(-1, window.dim)
    if s.shape[0] == 0:
        return np.zeros(0)
    nodes = integration_nodes(window, kernel, grid)
    axes = window.grid_axes(nodes)
    cells = [(hi - lo) / g for lo, hi, g in zip(window.lower, window.upper, nodes)]
    if kernel.kind == "gaussian":
        # separable: both the kernel and the box normalizer factor over axes
        out = np.full(s.shape[0], kernel.sigma ** (-window.dim))
        for k, (ax, h) in enumerate(zip(axes, cells)):
            fac = _gaussian_axis_factors(
                Window((window.lower[k],), (window.upper[k],)), kernel.sigma, ax[:, None]
            )[:, 0]
            e = np.exp(-0.5 * ((ax[:, None] - s[None, :, k]) / kernel.sigma) ** 2)
            out *= h * ((1.0 / fac) @ e)
        return out
    nodes_pts, cell = window.grid(nodes)
    weights = cell / window_normalizer(window, kernel, nodes_pts, grid)
    out = np.empty(s.shape[0])
    step = max(1, _CHUNK // nodes_pts.shape[0])
    for a in range(0, s.shape[0], step):
        out[a:a + step] = weights @ kernel.scaled_sq(cdist(nodes_pts, s[a:a + step], "sqeuclidean"))
    return out


def estimate_single(pattern: PointPattern, kernel: KernelSpec, zeta, nodes: int = 64):
    """Edge-corrected estimate from one realization at ``zeta`` (one point or an array)."""
    z = _checked_queries(pattern.window, zeta)
    k = window_normalizer(pattern.window, kernel, z, nodes)
    out = kernel_sums(kernel, z, pattern.points) / k
    return _unwrap(out, zeta)


class IntensityEstimate:
    """Average of single-realization estimates over ``training`` replicates.

    Parameters
    ----------
    training : sequence of PointPattern
        Replicates sharing one window; ``m = len(training)``.
    kernel : KernelSpec
    grid : int
        Midpoint grid resolution per axis used for integrals and tables.
        It is refined automatically so that a cell never exceeds sigma / 2.
    """

    def __init__(self, training: Sequence[PointPattern], kernel: KernelSpec, grid: int = 64):
        training = list(training)
        if not training:
            raise ValueError("need at least one training replicate")
        self.window = check_same_window(*training)
        if kernel.dim != self.window.dim:
            raise ValueError(f"kernel dimension {kernel.dim} does not match window dimension {self.window.dim}")
        self.training = training
        self.kernel = kernel
        self.grid = int(grid)
        counts = [p.count for p in training]
        self.sources = np.vstack([p.points for p in training]) if sum(counts) else np.empty((0, self.window.dim))
        self._mass = None
        self._table = None

    @property
    def m(self) -> int:
        return len(self.training)

    def normalizer(self, zeta):
        z = _checked_queries(self.window, zeta)
        return _unwrap(window_normalizer(self.window, self.kernel, z, self.grid), zeta)

    def __call__(self, zeta):
        z = _checked_queries(self.window, zeta)
        return _unwrap(self._evaluate(z), zeta)

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        k = window_normalizer(self.window, self.kernel, z, self.grid)
        return kernel_sums(self.kernel, z, self.sources) / (self.m * k)

    def grid_table(self) -> tuple:
        """``(nodes, values, cell)`` on the integration grid; the normalizer there is cached too."""
        if self._table is None:
            nodes = integration_nodes(self.window, self.kernel, self.grid)
            pts, cell = self.window.grid(nodes)
            k = window_normalizer(self.window, self.kernel, pts, self.grid)
            if np.any(k <= 0):
                raise ValueError("normalizer vanished on the grid")
            if self.kernel.kind == "gaussian" and self.window.dim == 2:
                sums = self._separable_sums(nodes)
            else:
                sums = kernel_sums(self.kernel, pts, self.sources)
            self.cached_normalizer = k
            self._table = (pts, sums / (self.m * k), cell)
        return self._table

    def _separable_sums(self, nodes) -> np.ndarray:
        ax, ay = self.window.grid_axes(nodes)
        s = self.sources
        sig = self.kernel.sigma
        ex = np.exp(-0.5 * ((ax[:, None] - s[None, :, 0]) / sig) ** 2)
        ey = np.exp(-0.5 * ((ay[:, None] - s[None, :, 1]) / sig) ** 2)
        return (ex @ ey.T).ravel() * sig ** (-2)

    def integrated(self) -> float:
        """``mu_hat(S)``, the midpoint-rule integral of the estimate."""
        if self._mass is None:
            _, values, cell = self.grid_table()
            self._mass = float(values.sum() * cell)
        return self._mass


def estimate_replicates(e: IntensityEstimate, zeta):
    return e(zeta)


def normalizer(e: IntensityEstimate, zeta):
    return e.normalizer(zeta)


def integrated_intensity(e: IntensityEstimate) -> float:
    return e.integrated()


def _checked_queries(window: Window, zeta) -> np.ndarray:
    z = np.asarray(zeta, dtype=float).reshape(-1, window.dim)
    inside = window.contains_all(z)
    if not np.all(inside):
        raise ValueError(f"query {z[~inside][0].tolist()} lies outside window {window}")
    return z


def _unwrap(values: np.ndarray, zeta):
    return float(values[0]) if np.ndim(zeta) == 1 else values
