"""Samplers for Poisson and Strauss point processes, and the benchmark intensities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .core import InvariantError, PointPattern, Window

SAFETY_FACTOR = 1.1


@dataclass(frozen=True)
class IntensitySpec:
    """A nonnegative intensity on ``window`` with a certified upper bound.

    ``evaluate`` maps an ``(n, d)`` array of locations to ``n`` intensities.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    window: Window
    sup_bound: float
    name: str = ""
    params: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not np.isfinite(self.sup_bound) or self.sup_bound < 0:
            raise ValueError(f"sup_bound must be finite and nonnegative, got {self.sup_bound}")

    @classmethod
    def from_function(cls, fn, window: Window, grid: int = 64, name: str = "", params=()) -> "IntensitySpec":
        """Bound ``fn`` by its grid maximum times the safety factor, then spot-check it."""
        nodes, _ = window.grid(grid)
        values = np.asarray(fn(nodes), dtype=float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"intensity {name or fn} is negative or non-finite on the grid")
        spec = cls(fn, window, SAFETY_FACTOR * float(values.max()), name, tuple(params))
        spec.check_bound(grid + 1)
        return spec

    @classmethod
    def constant(cls, value: float, window: Window) -> "IntensitySpec":
        value = float(value)
        return cls(lambda p: np.full(np.shape(p)[0], value), window, value, "constant", (value,))

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.evaluate(np.asarray(points, dtype=float).reshape(-1, self.window.dim)), dtype=float)

    def check_bound(self, grid: int) -> None:
        """Evaluate on a closed grid including the boundary and compare with the bound."""
        axes = [np.linspace(lo, hi, grid) for lo, hi in zip(self.window.lower, self.window.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        values = self(np.stack([m.ravel() for m in mesh], axis=1))
        if np.any(values < 0):
            raise InvariantError(f"intensity {self.name} takes negative values")
        if np.any(values > self.sup_bound):
            raise InvariantError(
                f"intensity {self.name} exceeds its bound {self.sup_bound} (max {values.max()})"
            )

    def mass(self, grid: int = 256) -> float:
        """Expected count ``mu(S)`` by the midpoint rule."""
        nodes, cell = self.window.grid(grid)
        return float(self(nodes).sum() * cell)


def sample_poisson(spec: IntensitySpec, seed) -> PointPattern:
    """Inhomogeneous Poisson pattern by thinning a homogeneous one at ``sup_bound``."""
    if not spec.sup_bound > 0:
        if spec.sup_bound == 0:
            return PointPattern.empty(spec.window)
        raise ValueError("sup_bound must be positive")
    rng = np.random.default_rng(seed)
    w = spec.window
    n = rng.poisson(spec.sup_bound * w.measure())
    cand = w.uniform(rng, n)
    keep_u = rng.random(n)
    if n == 0:
        return PointPattern.empty(w)
    lam = spec(cand)
    if np.any(lam > spec.sup_bound) or np.any(lam < 0):
        raise InvariantError(f"intensity {spec.name} left [0, sup_bound] during thinning")
    return PointPattern(cand[keep_u * spec.sup_bound < lam], w)


@dataclass(frozen=True)
class StraussSpec:
    """Strauss process with density ``c * beta**n(x) * gamma**s_r(x)`` w.r.t. unit Poisson."""

    beta: float
    gamma: float
    r: float
    window: Window
    mcmc_steps: int = 20000
    rng_seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if int(self.mcmc_steps) < 1:
            raise ValueError("mcmc_steps must be a positive integer")


# Proposal mix: birth, death, move.
P_BIRTH, P_DEATH = 0.4, 0.4


@numba.njit(cache=True)
def _close_count(pts, n, q, skip, r2):
    t = 0
    for i in range(n):
        if i == skip:
            continue
        s = 0.0
        for k in range(pts.shape[1]):
            z = pts[i, k] - q[k]
            s += z * z
        if s < r2:
            t += 1
    return t


@numba.njit(cache=True)
def _gamma_pow(gamma, t):
    if t == 0:
        return 1.0
    return gamma ** t


@numba.njit(cache=True)
def _strauss_chain(init, lower, sides, beta, gamma, r, u, cap):
    d = lower.shape[0]
    pts = np.empty((cap, d))
    n = init.shape[0]
    pts[:n] = init
    area = 1.0
    for k in range(d):
        area *= sides[k]
    r2 = r * r
    cand = np.empty(d)
    for s in range(u.shape[0]):
        for k in range(d):
            cand[k] = lower[k] + u[s, 3 + k] * sides[k]
        kind = u[s, 0]
        if kind < P_BIRTH:
            t = _close_count(pts, n, cand, -1, r2)
            ratio = beta * _gamma_pow(gamma, t) * area * P_DEATH / (P_BIRTH * (n + 1))
            if u[s, 1] < ratio:
                if n == cap:
                    return pts[:n].copy(), False
                pts[n] = cand
                n += 1
        elif kind < P_BIRTH + P_DEATH:
            if n == 0:
                continue
            j = min(int(u[s, 2] * n), n - 1)
            t = _close_count(pts, n, pts[j], j, r2)
            g = _gamma_pow(gamma, t)
            # hard core: removing a conflicting point is always accepted
            if g == 0.0 or u[s, 1] < n * P_BIRTH / (beta * g * area * P_DEATH):
                pts[j] = pts[n - 1]
                n -= 1
        else:
            if n == 0:
                continue
            j = min(int(u[s, 2] * n), n - 1)
            t_old = _close_count(pts, n, pts[j], j, r2)
            t_new = _close_count(pts, n, cand, j, r2)
            if t_new <= t_old:
                ratio = 1.0
            else:
                ratio = _gamma_pow(gamma, t_new - t_old)
            if u[s, 1] < ratio:
                pts[j] = cand
    return pts[:n].copy(), True


def sample_strauss(spec: StraussSpec, seed=None) -> PointPattern:
    """Run a birth/death/move Metropolis-Hastings chain for ``spec.mcmc_steps`` steps.

    The chain starts from a homogeneous Poisson(beta) pattern.  ``seed``
    overrides ``spec.rng_seed`` when given.
    """
    rng = np.random.default_rng(spec.rng_seed if seed is None else seed)
    w = spec.window
    n0 = rng.poisson(spec.beta * w.measure())
    init = w.uniform(rng, n0)
    u = rng.random((int(spec.mcmc_steps), 3 + w.dim))
    cap = int(n0 + 20 * spec.beta * w.measure() + 1000)
    pts, ok = _strauss_chain(init, np.asarray(w.lower), w.sides, float(spec.beta), float(spec.gamma),
                             float(spec.r), u, cap)
    if not ok:
        raise InvariantError(f"Strauss chain exceeded {cap} points")
    return PointPattern(np.clip(pts, w.lower, w.upper), w)


def pair_count(pattern: PointPattern, r: float) -> int:
    """``s_r(x)``: number of unordered pairs closer than ``r``."""
    from scipy.spatial.distance import pdist

    if pattern.count < 2:
        return 0
    return int(np.sum(pdist(pattern.points) < r))


# Benchmark intensities -----------------------------------------------------

UNIT = Window.unit(2)
SHIFTED_WINDOW = Window.square(-1.0, 1.0)
SHIFTED_CENTERS = ((-0.25, 0.0), (0.0, 0.25))


def _xy_sin(points):
    prod = points[:, 0] * points[:, 1]
    out = np.zeros_like(prod)
    nz = prod != 0
    out[nz] = prod[nz] * np.sin(1.0 / prod[nz])
    return out


def _bump(height, spread, center):
    c = np.asarray(center, dtype=float)

    def fn(points):
        return height * np.exp(-spread * np.sum((points - c) ** 2, axis=1))

    return fn


def _smooth(c, d):
    return _bump(c, d, (0.5, 0.5))


# name -> (defaults, window, factory)
SCENARIO_INTENSITIES = {
    "smooth0": ((500.0,), UNIT, lambda c2: _smooth(c2, 20.0)),
    "smooth1": ((500.0, 20.0), UNIT, lambda c1, d1: _smooth(c1, d1)),
    "wiggly0": ((), UNIT, lambda: (lambda p: 80.0 + 80.0 * _xy_sin(p))),
    "wiggly1": ((80.0,), UNIT, lambda c2: (lambda p: c2 + 30.0 * _xy_sin(p))),
    "shifted0": ((300.0, 8.0), SHIFTED_WINDOW, lambda h, s: _bump(h, s, SHIFTED_CENTERS[0])),
    "shifted1": ((300.0, 8.0), SHIFTED_WINDOW, lambda h, s: _bump(h, s, SHIFTED_CENTERS[1])),
}


def scenario_intensity(name: str, params: Sequence[float] = ()) -> IntensitySpec:
    """One of the benchmark intensities; an empty ``params`` selects the defaults.

    ``smooth0(c2)``, ``smooth1(c1, d1)``, ``wiggly0()``, ``wiggly1(c2)`` live on the
    unit square; ``shifted0(height, spread)`` and ``shifted1(height, spread)`` on
    ``[-1, 1]^2``.
    """
    try:
        defaults, window, factory = SCENARIO_INTENSITIES[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_INTENSITIES)}") from None
    params = tuple(float(v) for v in params) or defaults
    if len(params) != len(defaults):
        raise ValueError(f"scenario {name!r} takes {len(defaults)} parameters, got {len(params)}")
    if name == "wiggly1" and params[0] < 30:
        raise ValueError("wiggly1 needs c2 >= 30 to stay nonnegative")
    if any(v < 0 for v in params):
        raise ValueError(f"scenario {name!r} parameters must be nonnegative")
    return IntensitySpec.from_function(factory(*params), window, name=name, params=params)
