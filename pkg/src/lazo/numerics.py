"""Random direction sampling, feasible-set projections, and RNG stream plumbing.

Every random draw in the package flows through a stream keyed by
``(seed, trial, purpose)`` so that adding a diagnostic never shifts the
draws consumed by the optimization itself.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


class Stream(enum.IntEnum):
    """Purpose component of an RNG stream key."""

    DIRECTIONS = 0
    ORACLE = 1
    INIT = 2
    DIAGNOSTICS = 3
    PROJECTIONS = 4


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the stream keyed by ``seed`` and ``path``.

    Equal keys yield bitwise-identical draw sequences; distinct paths under
    the same seed are statistically independent (SeedSequence spawn keys).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def sample_unit_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    """Draw one point uniformly from the unit sphere in R^d.

    Normalized standard Gaussian draw: rejection-free and exactly uniform
    in any dimension.
    """
    if d < 1:
        raise DimensionError(f"direction dimension must be >= 1, got {d}")
    while True:
        u = rng.standard_normal(d)
        n = math.sqrt(u @ u)
        if n > 0.0:  # zero draw has probability ~0 but would divide by zero
            return u / n


def sample_unit_spheres(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Draw ``n`` independent uniform sphere points as an (n, d) array."""
    if d < 1:
        raise DimensionError(f"direction dimension must be >= 1, got {d}")
    u = rng.standard_normal((n, d))
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    # redraw the (measure-zero) degenerate rows rather than dividing by 0
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        u[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(u, axis=1, keepdims=True)
    return u / norms


def random_projection_matrix(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """A (k, d) matrix of i.i.d. standard normal entries.

    Used to project high-dimensional direction sets down to k dimensions
    for the symmetry diagnostics.
    """
    if d < 1 or k < 1:
        raise DimensionError(f"dimensions must be >= 1, got d={d}, k={k}")
    if k > d:
        raise DimensionError(f"projection dimension k={k} exceeds d={d}")
    return rng.standard_normal((k, d))


class FeasibleSet:
    """Closed convex decision set with a Euclidean projection."""

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        raise NotImplementedError

    @property
    def is_constrained(self) -> bool:
        return True


@dataclass(frozen=True)
class Ball(FeasibleSet):
    """Euclidean ball of radius ``radius`` centered at the origin."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DimensionError(f"ball radius must be positive, got {self.radius}")

    def project(self, x: np.ndarray) -> np.ndarray:
        n = math.sqrt(float(x @ x))
        if n <= self.radius:
            return x.copy()
        y = x * (self.radius / n)
        # rounding can leave the norm an ulp above the radius; nudge toward 0
        # so the projection is exactly idempotent
        while math.sqrt(float(y @ y)) > self.radius:
            y = np.nextafter(y, 0.0)
        return y

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return math.sqrt(float(x @ x)) <= self.radius + tol


@dataclass(frozen=True)
class Box(FeasibleSet):
    """Axis-aligned box with per-coordinate bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise DimensionError("box bounds must have equal shapes")
        if np.any(lo > hi):
            raise DimensionError("box lower bound exceeds upper bound")

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class Unconstrained(FeasibleSet):
    """All of R^d; projection is the identity."""

    def project(self, x: np.ndarray) -> np.ndarray:
        return x.copy()

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return True

    @property
    def is_constrained(self) -> bool:
        return False


def project(x: np.ndarray, feasible_set: FeasibleSet) -> np.ndarray:
    """Euclidean-nearest point of ``feasible_set`` to ``x``."""
    return feasible_set.project(x)
