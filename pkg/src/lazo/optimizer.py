"""Projected zeroth-order SGD driver producing per-round trajectories.

Each run owns three RNG streams keyed by (seed, trial, purpose): one for
the estimator's directions, one for the oracle's round randomness, and one
for the initial point. Two methods sharing (seed, trial) therefore face
bitwise-identical loss sequences regardless of how many queries they spend.
"""

from __future__ import annotations

import hashlib
import math
import struct
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, LazoError
from .estimators import EstimatorConfig, EstimatorEngine, QueryCache
from .numerics import Ball, Box, FeasibleSet, Stream, Unconstrained, rng_stream
from .oracles import Oracle, make_oracle


def theorem1_step_sizes(radius: float, lipschitz: float, d: int, horizon: int) -> tuple:
    """Stepsize and perturbation radius of the matched sqrt(dT) preset.

    eta = R / (L sqrt(d T)) and delta = R sqrt(d / T).
    """
    if radius <= 0 or lipschitz <= 0 or d < 1 or horizon < 1:
        raise ConfigError("preset needs positive radius, lipschitz, d and horizon")
    eta = radius / (lipschitz * math.sqrt(d * horizon))
    delta = radius * math.sqrt(d / horizon)
    return eta, delta


@dataclass(frozen=True)
class RunConfig:
    """Full parameterization of one optimization run (one method, one problem)."""

    problem: str
    problem_params: dict
    estimator: EstimatorConfig
    horizon: int
    eta: float
    feasible_set: FeasibleSet = field(default_factory=Unconstrained)
    seed: int = 0
    trials: int = 10
    x0: str = "zeros"  # "zeros" | "random"
    lipschitz: Optional[float] = None  # known scale, for validators and presets

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if not self.eta > 0.0:
            raise ConfigError("eta must be positive")
        if self.x0 not in ("zeros", "random"):
            raise ConfigError(f"unknown x0 recipe {self.x0!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")

    def with_estimator(self, estimator: EstimatorConfig) -> "RunConfig":
        return replace(self, estimator=estimator)

    def build_oracle(self, trial: int = 0) -> Oracle:
        """Fresh oracle reproducing this run's loss sequence (replay handle)."""
        return make_oracle(self.problem, self.problem_params, self.seed, trial)


@dataclass
class RunSnapshot:
    """Mid-run state frozen right after a round began, before its queries."""

    round_index: int
    x: np.ndarray
    cache: Optional[QueryCache]
    oracle: Oracle
    config: RunConfig
    trial: int


@dataclass
class Trajectory:
    """Per-round record stream of one run (rounds 0..T inclusive)."""

    config: RunConfig
    trial: int
    x: np.ndarray  # (rounds, d) iterate entering each round
    loss: np.ndarray  # f_t(x_t), unmetered channel
    est_sq_norm: np.ndarray
    queries: np.ndarray  # metered queries spent in the round
    cum_queries: np.ndarray
    rule: np.ndarray  # per-round rule tag (unicode)
    variation: np.ndarray  # nan where the round had no lazy decision
    w: np.ndarray  # first perturbed query point of the round
    f_w: np.ndarray  # its queried value
    reused_terms: np.ndarray
    fresh_terms: np.ndarray
    final_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    duration: float = 0.0
    loss_checksum: str = ""
    snapshot: Optional[RunSnapshot] = None

    def __len__(self) -> int:
        return len(self.loss)


def initial_point(config: RunConfig, dimension: int, trial: int = 0) -> np.ndarray:
    """x_0 per the configured recipe; random draws stay inside the set."""
    if config.x0 == "zeros":
        return np.zeros(dimension)
    rng = rng_stream(config.seed, trial, Stream.INIT)
    fset = config.feasible_set
    if isinstance(fset, Ball):
        u = rng.standard_normal(dimension)
        u /= np.linalg.norm(u)
        r = fset.radius * rng.uniform() ** (1.0 / dimension)
        return r * u
    if isinstance(fset, Box):
        return rng.uniform(fset.lower, fset.upper)
    return rng.standard_normal(dimension)


def sgd_step(x: np.ndarray, gradient: np.ndarray, eta: float,
             feasible_set: FeasibleSet) -> np.ndarray:
    """Projected gradient update x <- Pi(x - eta * g)."""
    y = x - eta * gradient
    if feasible_set.is_constrained:
        return feasible_set.project(y)
    return y


_RULE_WIDTH = "U16"


def run(config: RunConfig, trial: int = 0,
        capture_round: Optional[int] = None) -> Trajectory:
    """Execute bootstrap plus T rounds of advance / estimate / update.

    With ``capture_round`` set, the run halts right after that round's
    randomness is frozen and attaches a :class:`RunSnapshot`; the returned
    trajectory then only covers the completed rounds.
    """
    t_start = time.perf_counter()
    oracle = config.build_oracle(trial)
    d = oracle.dimension
    engine = EstimatorEngine(config.estimator, d, config.eta,
                             rng_stream(config.seed, trial, Stream.DIRECTIONS))
    x = initial_point(config, d, trial)
    fset = config.feasible_set
    constrained = fset.is_constrained
    if constrained and not fset.contains(x, tol=1e-12):
        raise ConfigError("initial point lies outside the feasible set")
    T = config.horizon
    rounds = T + 1
    x_hist = np.empty((rounds, d))
    loss = np.empty(rounds)
    est_sq = np.empty(rounds)
    queries = np.zeros(rounds, dtype=np.int64)
    cum_queries = np.zeros(rounds, dtype=np.int64)
    rule = np.empty(rounds, dtype=_RULE_WIDTH)
    variation = np.full(rounds, np.nan)
    w_hist = np.empty((rounds, d))
    f_w = np.full(rounds, np.nan)
    reused = np.zeros(rounds, dtype=np.int64)
    fresh = np.zeros(rounds, dtype=np.int64)
    probe = np.zeros(d)
    hasher = hashlib.blake2b(digest_size=16)
    snapshot = None
    eta = config.eta
    completed = 0
    for t in range(rounds):
        try:
            oracle.advance_round(t)
            if capture_round is not None and t == capture_round:
                snapshot = RunSnapshot(t, x.copy(), engine.cache, oracle, config, trial)
                break
            hasher.update(struct.pack("<d", oracle.eval_unmetered(probe)))
            loss[t] = oracle.eval_unmetered(x)
            est = engine.step(oracle, x, t)
        except LazoError as exc:
            raise type(exc)(f"round {t}: {exc}") from exc
        x_hist[t] = x
        vec = est.vector
        est_sq[t] = float(vec @ vec)
        queries[t] = est.queries_used
        cum_queries[t] = oracle.query_count
        rule[t] = est.rule_fired
        if est.variation_observed is not None:
            variation[t] = est.variation_observed
        if engine.cache is not None and len(engine.cache) > 0:
            _, entries = next(iter(engine.cache.rounds_newest_first()))
            w_hist[t] = entries[0].point
            f_w[t] = entries[0].value
        else:
            w_hist[t] = np.nan
        reused[t] = est.reused_count
        fresh[t] = est.fresh_count
        x = sgd_step(x, vec, eta, fset) if constrained else x - eta * vec
        completed = t + 1
    duration = time.perf_counter() - t_start
    return Trajectory(
        config=config,
        trial=trial,
        x=x_hist[:completed],
        loss=loss[:completed],
        est_sq_norm=est_sq[:completed],
        queries=queries[:completed],
        cum_queries=cum_queries[:completed],
        rule=rule[:completed],
        variation=variation[:completed],
        w=w_hist[:completed],
        f_w=f_w[:completed],
        reused_terms=reused[:completed],
        fresh_terms=fresh[:completed],
        final_x=x.copy(),
        duration=duration,
        loss_checksum=hasher.hexdigest(),
        snapshot=snapshot,
    )
