"""Zeroth-order gradient estimators and the lazy-query decision rules.

All estimators perturb the iterate along uniform sphere directions and
build gradient estimates from metered loss queries. The lazy variants
decide per round whether the previous perturbed-point value is still
informative (temporal variation at most a threshold) and reuse it for a
one-query residual estimate, otherwise they spend a second query on the
mirror point and fall back to the symmetric two-point estimate.

Rule "a" normalizes the loss change by the distance between the two
query points; rule "b" compares the raw loss change against a single
configured budget (the threshold times stepsize times Lipschitz scale,
supplied as one number because only the product is ever tuned).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DegenerateInputError, SequencingError
from .numerics import sample_unit_sphere

VARIANTS = (
    "one_point",
    "residual",
    "two_point_asym",
    "two_point_sym",
    "lazo_a",
    "lazo_b",
    "multi_lazo_a",
    "multi_lazo_b",
    "multi_point_sym",
)

SINGLE_LAZY_VARIANTS = ("lazo_a", "lazo_b")
MULTI_VARIANTS = ("multi_lazo_a", "multi_lazo_b", "multi_point_sym")

RULE_ONE_POINT = "one_point"
RULE_FRESH = "fresh_two_point"
RULE_REUSED = "reused"
RULE_MIXED = "mixed"


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters of one gradient estimator.

    ``threshold`` is the reuse threshold for rule-a variants (may be inf
    to always reuse or 0 to never reuse). ``lipschitz_scale`` plays the
    same role for rule-b variants but is compared directly against the
    raw loss change |f_t(w_t) - f_s(w_s)|: it equals threshold * stepsize
    * Lipschitz constant, collapsed into one number. ``history_len`` (H)
    and ``directions_per_round`` (K) only matter for the multi variants.
    """

    variant: str
    delta: float
    threshold: float = math.inf
    lipschitz_scale: float = math.inf
    history_len: int = 1
    directions_per_round: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown estimator variant {self.variant!r}")
        if not self.delta > 0.0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.threshold < 0.0 or math.isnan(self.threshold):
            raise ConfigError("threshold must be >= 0 or +inf")
        if self.lipschitz_scale < 0.0 or math.isnan(self.lipschitz_scale):
            raise ConfigError("lipschitz_scale must be >= 0 or +inf")
        if self.history_len < 1 or self.directions_per_round < 1:
            raise ConfigError("history_len and directions_per_round must be >= 1")

    @property
    def uses_rule_b(self) -> bool:
        return self.variant in ("lazo_b", "multi_lazo_b")


class CacheEntry(NamedTuple):
    direction: np.ndarray  # unit perturbation u
    point: np.ndarray  # w = x + delta * u
    value: float  # queried loss at w


class QueryCache:
    """Ring buffer of the last H rounds of perturbed-point queries.

    Each slot holds one round's entries (at most K). The squared norm of
    the last round's gradient estimate rides along for the
    instance-dependent bound validator.
    """

    def __init__(self, history_len: int = 1, directions_per_round: int = 1):
        if history_len < 1 or directions_per_round < 1:
            raise ConfigError("cache depth and width must be >= 1")
        self.history_len = history_len
        self.directions_per_round = directions_per_round
        self._rounds: deque = deque(maxlen=history_len)
        self.last_estimate_sq_norm: Optional[float] = None

    def __len__(self) -> int:
        return len(self._rounds)

    def push_round(self, t: int, entries, x: np.ndarray, delta: float) -> None:
        """Store round t's entries, evicting the oldest round when full."""
        if len(entries) > self.directions_per_round:
            raise ConfigError(
                f"{len(entries)} entries exceed the per-round capacity "
                f"{self.directions_per_round}"
            )
        for e in entries:
            drift = np.max(np.abs(e.point - x - delta * e.direction))
            if drift > 1e-12:
                raise ValueError("cache entry point is inconsistent with x + delta*u")
        self._rounds.append((t, list(entries)))

    def latest_entry(self) -> CacheEntry:
        """The single entry of the most recent round (single-point variants)."""
        if not self._rounds:
            raise SequencingError("query cache is empty; run the bootstrap round first")
        return self._rounds[-1][1][0]

    def rounds_newest_first(self):
        """Yield (round_index, entries) starting from the most recent round."""
        return reversed(self._rounds)


@dataclass
class GradientEstimate:
    """One round's gradient estimate plus its query accounting."""

    vector: np.ndarray
    queries_used: int
    rule_fired: str
    variation_observed: Optional[float] = None
    reused_count: int = 0
    fresh_count: int = 0


# ---------------------------------------------------------------------------
# temporal variation rules
# ---------------------------------------------------------------------------

def temporal_variation_a(f_now: float, f_prev: float, w_now: np.ndarray,
                         w_prev: np.ndarray) -> float:
    """Loss change between rounds normalized by query-point distance.

    Coincident points with coincident values count as variation 0 (the
    residual estimate there is exactly 0, so reuse is safe); coincident
    points with differing values are pure noise and return +inf.
    """
    diff = abs(f_now - f_prev)
    delta_w = w_now - w_prev
    dist = math.sqrt(float(delta_w @ delta_w))
    if dist < 1e-12:
        return 0.0 if diff < 1e-12 else math.inf
    return diff / dist


def temporal_variation_b(f_now: float, f_prev: float, eta: float,
                         lipschitz: float) -> float:
    """Loss change normalized by stepsize times Lipschitz constant."""
    if not eta > 0.0 or not lipschitz > 0.0:
        raise ConfigError("eta and lipschitz must both be positive")
    return abs(f_now - f_prev) / (eta * lipschitz)


# ---------------------------------------------------------------------------
# point estimators
# ---------------------------------------------------------------------------

def _residual_vector(d: int, delta: float, u: np.ndarray, f_now: float,
                     f_prev: float) -> np.ndarray:
    return (d / delta) * (f_now - f_prev) * u


def _symmetric_vector(d: int, delta: float, u: np.ndarray, f_plus: float,
                      f_minus: float) -> np.ndarray:
    return (d / (2.0 * delta)) * (f_plus - f_minus) * u


def estimate_one_point(oracle, x: np.ndarray, u: np.ndarray, delta: float) -> GradientEstimate:
    """Single-query estimate (d/delta) f(x + delta u) u."""
    d = x.size
    f_val = oracle.query(x + delta * u)
    return GradientEstimate((d / delta) * f_val * u, 1, RULE_ONE_POINT)


def estimate_residual(oracle, x: np.ndarray, u: np.ndarray, delta: float,
                      cache: QueryCache) -> GradientEstimate:
    """One fresh query differenced against the previous round's cached value."""
    d = x.size
    prev = cache.latest_entry()
    w = x + delta * u
    f_now = oracle.query(w)
    vec = _residual_vector(d, delta, u, f_now, prev.value)
    cache.push_round(oracle.round_index, [CacheEntry(u, w, f_now)], x, delta)
    cache.last_estimate_sq_norm = float(vec @ vec)
    return GradientEstimate(vec, 1, RULE_REUSED)


def estimate_two_point_asym(oracle, x: np.ndarray, u: np.ndarray,
                            delta: float) -> GradientEstimate:
    """(d/delta) (f(x + delta u) - f(x)) u, two metered queries."""
    d = x.size
    f_plus = oracle.query(x + delta * u)
    f_base = oracle.query(x)
    return GradientEstimate((d / delta) * (f_plus - f_base) * u, 2, RULE_FRESH)


def estimate_two_point_sym(oracle, x: np.ndarray, u: np.ndarray,
                           delta: float) -> GradientEstimate:
    """(d/2delta) (f(x + delta u) - f(x - delta u)) u, two metered queries."""
    d = x.size
    f_plus = oracle.query(x + delta * u)
    f_minus = oracle.query(x - delta * u)
    return GradientEstimate(_symmetric_vector(d, delta, u, f_plus, f_minus), 2, RULE_FRESH)


# ---------------------------------------------------------------------------
# lazy-query steps
# ---------------------------------------------------------------------------

def _observed_variation(config: EstimatorConfig, eta: float, f_now: float,
                        entry: CacheEntry, w: np.ndarray) -> tuple:
    """(observed statistic, reuse threshold) for the configured rule."""
    if config.uses_rule_b:
        # raw loss gap against the collapsed budget threshold*eta*L
        return abs(f_now - entry.value), config.lipschitz_scale
    return temporal_variation_a(f_now, entry.value, w, entry.point), config.threshold


def lazo_step(oracle, x: np.ndarray, cache: QueryCache, config: EstimatorConfig,
              rng: np.random.Generator, eta: float) -> GradientEstimate:
    """One adaptive round: reuse the cached query when variation allows.

    Queries f_t at the fresh perturbed point; if the temporal variation
    against the cached previous round is within the threshold the residual
    estimate ships with a single query, otherwise a second (mirror) query
    upgrades it to the symmetric two-point estimate. Equality with the
    threshold reuses.
    """
    d = x.size
    delta = config.delta
    prev = cache.latest_entry()
    u = sample_unit_sphere(rng, d)
    w = x + delta * u
    f_now = oracle.query(w)
    variation, limit = _observed_variation(config, eta, f_now, prev, w)
    if variation <= limit:
        vec = _residual_vector(d, delta, u, f_now, prev.value)
        est = GradientEstimate(vec, 1, RULE_REUSED, variation, reused_count=1)
    else:
        f_minus = oracle.query(x - delta * u)
        vec = _symmetric_vector(d, delta, u, f_now, f_minus)
        est = GradientEstimate(vec, 2, RULE_FRESH, variation, fresh_count=1)
    cache.push_round(oracle.round_index, [CacheEntry(u, w, f_now)], x, delta)
    cache.last_estimate_sq_norm = float(vec @ vec)
    return est


def multipoint_lazo_step(oracle, x: np.ndarray, cache: QueryCache,
                         config: EstimatorConfig, rng: np.random.Generator,
                         eta: float) -> GradientEstimate:
    """One multi-direction lazy round over an H-round reuse window.

    Fresh directions are drawn one at a time. Each one is queried once and
    scanned against every cached entry of the last H rounds (newest round
    first); every match within the threshold contributes a full-weight
    residual term and consumes one of the K estimator slots, capped so the
    total never exceeds K. A direction with no match spends one extra
    mirror query and contributes a symmetric term. The accumulated sum is
    divided by K once at the end.
    """
    d = x.size
    delta = config.delta
    K = config.directions_per_round
    if len(cache) == 0:
        raise SequencingError("multi-point cache is empty; bootstrap rounds missing")
    acc = np.zeros(d)
    recorded = []
    slots = 0
    queries = 0
    reused_n = 0
    fresh_n = 0
    first_variation: Optional[float] = None
    while slots < K:
        u = sample_unit_sphere(rng, d)
        w = x + delta * u
        f_now = oracle.query(w)
        queries += 1
        matched = []
        for _, entries in cache.rounds_newest_first():
            for entry in entries:
                variation, limit = _observed_variation(config, eta, f_now, entry, w)
                if first_variation is None:
                    first_variation = variation
                if variation <= limit:
                    matched.append(entry)
        if matched:
            take = min(len(matched), K - slots)
            for entry in matched[:take]:
                acc += _residual_vector(d, delta, u, f_now, entry.value)
            slots += take
            reused_n += take
        else:
            f_minus = oracle.query(x - delta * u)
            queries += 1
            acc += _symmetric_vector(d, delta, u, f_now, f_minus)
            slots += 1
            fresh_n += 1
        recorded.append(CacheEntry(u, w, f_now))
    vec = acc / K
    cache.push_round(oracle.round_index, recorded, x, delta)
    cache.last_estimate_sq_norm = float(vec @ vec)
    if fresh_n == 0:
        rule = RULE_REUSED
    elif reused_n == 0:
        rule = RULE_FRESH
    else:
        rule = RULE_MIXED
    return GradientEstimate(vec, queries, rule, first_variation, reused_n, fresh_n)


def multipoint_symmetric_step(oracle, x: np.ndarray, config: EstimatorConfig,
                              rng: np.random.Generator) -> GradientEstimate:
    """K-direction symmetric estimator: the 2K-query baseline."""
    d = x.size
    delta = config.delta
    K = config.directions_per_round
    acc = np.zeros(d)
    for _ in range(K):
        u = sample_unit_sphere(rng, d)
        f_plus = oracle.query(x + delta * u)
        f_minus = oracle.query(x - delta * u)
        acc += _symmetric_vector(d, delta, u, f_plus, f_minus)
    return GradientEstimate(acc / K, 2 * K, RULE_FRESH, fresh_count=K)


def multipoint_bootstrap_step(oracle, x: np.ndarray, cache: QueryCache,
                              config: EstimatorConfig,
                              rng: np.random.Generator) -> GradientEstimate:
    """One warm-up round: 2K-query symmetric estimate, all K entries cached."""
    d = x.size
    delta = config.delta
    K = config.directions_per_round
    acc = np.zeros(d)
    recorded = []
    for _ in range(K):
        u = sample_unit_sphere(rng, d)
        w = x + delta * u
        f_plus = oracle.query(w)
        f_minus = oracle.query(x - delta * u)
        acc += _symmetric_vector(d, delta, u, f_plus, f_minus)
        recorded.append(CacheEntry(u, w, f_plus))
    vec = acc / K
    cache.push_round(oracle.round_index, recorded, x, delta)
    cache.last_estimate_sq_norm = float(vec @ vec)
    return GradientEstimate(vec, 2 * K, RULE_FRESH, fresh_count=K)


# ---------------------------------------------------------------------------
# per-round bound checks
# ---------------------------------------------------------------------------

def instance_bound_rhs(f_now: float, f_prev: float, w_now: np.ndarray,
                       w_prev: np.ndarray, prev_estimate_sq_norm: float,
                       d: int, eta: float, delta: float) -> float:
    """Deterministic cap on the squared norm of the residual estimate.

    Equals (loss change / point distance)^2 times
    (8 d^2 + 2 d^2 eta^2/delta^2 * previous estimate squared norm).
    A zero loss change returns 0 regardless of the distance; coincident
    points with differing values make the bound vacuous.
    """
    diff = f_now - f_prev
    if diff == 0.0:
        return 0.0
    delta_w = w_now - w_prev
    dist_sq = float(delta_w @ delta_w)
    if dist_sq == 0.0:
        raise DegenerateInputError("coincident query points make the bound vacuous")
    ratio_sq = diff * diff / dist_sq
    d_sq = float(d * d)
    return ratio_sq * (8.0 * d_sq + 2.0 * d_sq * (eta * eta) / (delta * delta)
                       * prev_estimate_sq_norm)


def lemma2_condition(f_now: float, f_prev: float, w_now: np.ndarray,
                     w_prev: np.ndarray, prev_sq_norm: float, d: int,
                     L: float) -> bool:
    """Premise of the reduced-norm guarantee for the residual estimator.

    True iff the previous estimate's squared norm is at most d^2 L^2 and the
    squared loss-change-to-distance ratio is strictly below L^2 / (10 d).
    Under the matched stepsize preset, rounds satisfying this premise have
    residual estimates with squared norm below d L^2.
    """
    if prev_sq_norm > d * d * L * L:
        return False
    diff = f_now - f_prev
    delta_w = w_now - w_prev
    dist_sq = float(delta_w @ delta_w)
    if dist_sq == 0.0:
        return diff == 0.0
    return diff * diff / dist_sq < L * L / (10.0 * d)


# ---------------------------------------------------------------------------
# per-run engine
# ---------------------------------------------------------------------------

class EstimatorEngine:
    """Stateful per-run dispatcher for the configured estimator variant.

    Owns the query cache and the direction RNG stream; the optimizer calls
    ``step`` once per round. Lazy variants spend their first round(s) on
    symmetric bootstrap queries that seed the cache.
    """

    def __init__(self, config: EstimatorConfig, dimension: int, eta: float,
                 rng: np.random.Generator):
        self.config = config
        self.d = int(dimension)
        self.eta = float(eta)
        self.rng = rng
        if config.variant in SINGLE_LAZY_VARIANTS + ("residual",):
            self.cache: Optional[QueryCache] = QueryCache(1, 1)
        elif config.variant in ("multi_lazo_a", "multi_lazo_b"):
            self.cache = QueryCache(config.history_len, config.directions_per_round)
        else:
            self.cache = None

    @property
    def bootstrap_rounds(self) -> int:
        if self.config.variant in ("multi_lazo_a", "multi_lazo_b"):
            return self.config.history_len
        if self.config.variant in SINGLE_LAZY_VARIANTS + ("residual",):
            return 1
        return 0

    def _bootstrap_single(self, oracle, x: np.ndarray) -> GradientEstimate:
        # symmetric two-point round that seeds the cache (full query cost)
        delta = self.config.delta
        u = sample_unit_sphere(self.rng, self.d)
        w = x + delta * u
        f_plus = oracle.query(w)
        f_minus = oracle.query(x - delta * u)
        vec = _symmetric_vector(self.d, delta, u, f_plus, f_minus)
        self.cache.push_round(oracle.round_index, [CacheEntry(u, w, f_plus)], x, delta)
        self.cache.last_estimate_sq_norm = float(vec @ vec)
        return GradientEstimate(vec, 2, RULE_FRESH, fresh_count=1)

    def step(self, oracle, x: np.ndarray, t: int) -> GradientEstimate:
        """Produce round t's gradient estimate, spending metered queries."""
        cfg = self.config
        variant = cfg.variant
        if t < self.bootstrap_rounds:
            if variant in ("multi_lazo_a", "multi_lazo_b"):
                return multipoint_bootstrap_step(oracle, x, self.cache, cfg, self.rng)
            return self._bootstrap_single(oracle, x)
        if variant == "one_point":
            u = sample_unit_sphere(self.rng, self.d)
            return estimate_one_point(oracle, x, u, cfg.delta)
        if variant == "residual":
            u = sample_unit_sphere(self.rng, self.d)
            return estimate_residual(oracle, x, u, cfg.delta, self.cache)
        if variant == "two_point_asym":
            u = sample_unit_sphere(self.rng, self.d)
            return estimate_two_point_asym(oracle, x, u, cfg.delta)
        if variant == "two_point_sym":
            u = sample_unit_sphere(self.rng, self.d)
            return estimate_two_point_sym(oracle, x, u, cfg.delta)
        if variant in SINGLE_LAZY_VARIANTS:
            return lazo_step(oracle, x, self.cache, cfg, self.rng, self.eta)
        if variant == "multi_point_sym":
            return multipoint_symmetric_step(oracle, x, cfg, self.rng)
        # multi_lazo_a / multi_lazo_b
        return multipoint_lazo_step(oracle, x, self.cache, cfg, self.rng, self.eta)
