"""Regret computation, estimator variance traces, and bound validators.

Everything here reads completed trajectories or frozen mid-run snapshots
through the unmetered oracle channel, so diagnostics never perturb query
counts or the optimization's RNG streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    IntegrityError,
    TraceError,
    UnsupportedOperationError,
)
from .estimators import (
    RULE_REUSED,
    EstimatorConfig,
    instance_bound_rhs,
    lemma2_condition,
)
from .numerics import random_projection_matrix, sample_unit_spheres
from .oracles import LinearRegressionOracle, Oracle, SyntheticQuadraticOracle
from .optimizer import RunConfig, RunSnapshot, Trajectory, initial_point


def _batch_values(oracle: Oracle, points: np.ndarray) -> np.ndarray:
    """Unmetered values at many points, vectorized when the oracle allows."""
    if hasattr(oracle, "eval_batch"):
        return np.asarray(oracle.eval_batch(points), dtype=float)
    return np.array([oracle.eval_unmetered(p) for p in points])


# ---------------------------------------------------------------------------
# best fixed decision and regret
# ---------------------------------------------------------------------------

def offline_gradient_descent(config: RunConfig, trial: int = 0, iters: int = 500,
                             lr: float = 0.1) -> np.ndarray:
    """Projected GD on the horizon-averaged loss via replayed true gradients.

    Each iteration replays the full round sequence, so this is meant for
    short horizons and as a cross-check of the closed forms.
    """
    probe = config.build_oracle(trial)
    if not probe.has_true_gradient:
        raise UnsupportedOperationError(
            f"problem {config.problem!r} exposes no true gradient"
        )
    d = probe.dimension
    x = initial_point(config, d, trial)
    fset = config.feasible_set
    for _ in range(iters):
        replay = config.build_oracle(trial)
        g = np.zeros(d)
        for t in range(config.horizon + 1):
            replay.advance_round(t)
            g += replay.true_gradient(x)
        x = fset.project(x - lr * g / (config.horizon + 1))
    return x


def best_fixed_decision(config: RunConfig, trial: int = 0) -> np.ndarray:
    """Minimizer of the cumulative loss over rounds 0..T, in the feasible set.

    Uses the closed form where one exists (center average for quadratics,
    normal equations for regression) and offline gradient descent otherwise.
    Problems without a true gradient are unsupported.
    """
    oracle = config.build_oracle(trial)
    if isinstance(oracle, SyntheticQuadraticOracle):
        centers = np.empty((config.horizon + 1, oracle.dimension))
        for t in range(config.horizon + 1):
            oracle.advance_round(t)
            centers[t] = oracle.center
        return config.feasible_set.project(centers.mean(axis=0))
    if isinstance(oracle, LinearRegressionOracle):
        return config.feasible_set.project(oracle.solve_normal_equations())
    return offline_gradient_descent(config, trial)


@dataclass
class RegretCurve:
    """Cumulative regret against a fixed comparator."""

    values: np.ndarray
    comparator: np.ndarray
    method: str  # how the comparator was obtained

    def final(self) -> float:
        return float(self.values[-1])


def regret_curve(trajectory: Trajectory, x_star: np.ndarray,
                 replay: Oracle, rtol: float = 1e-9) -> RegretCurve:
    """curve[t] = sum_{s<=t} f_s(x_s) - f_s(x_star), via unmetered replays.

    The replay must reproduce the trajectory's loss sequence; a mismatch
    beyond ``rtol`` raises an integrity error.
    """
    rounds = len(trajectory)
    gaps = np.empty(rounds)
    for t in range(rounds):
        replay.advance_round(t)
        ft_xt = replay.eval_unmetered(trajectory.x[t])
        recorded = trajectory.loss[t]
        if abs(ft_xt - recorded) > rtol * max(1.0, abs(recorded)):
            raise IntegrityError(
                f"replay loss {ft_xt!r} differs from recorded {recorded!r} at round {t}; "
                "seed or config mismatch"
            )
        gaps[t] = ft_xt - replay.eval_unmetered(x_star)
    return RegretCurve(np.cumsum(gaps), np.asarray(x_star, dtype=float), "given")


# ---------------------------------------------------------------------------
# estimator variance trace
# ---------------------------------------------------------------------------

@dataclass
class VarianceTrace:
    """Monte-Carlo moments of one estimator state at a frozen round."""

    n: int
    mean_vector: np.ndarray
    mean_sq_norm: float
    vector_variance: float  # trace of the sample covariance
    norm_variance: float  # sample variance of ||g||


def estimator_variance_trace(oracle: Oracle, x: np.ndarray,
                             config: EstimatorConfig, eta: float, n: int,
                             rng: np.random.Generator,
                             cache=None) -> VarianceTrace:
    """Sample the configured estimator at a frozen round, cache held fixed.

    Draws ``n`` fresh directions, evaluates every required point through the
    unmetered channel, and reports the estimator's MC moments. Variants that
    read the cache (residual and the lazy rules) require ``cache``.
    """
    if n < 2:
        raise ConfigError("variance trace needs n >= 2")
    variant = config.variant
    if variant.startswith("multi"):
        raise ConfigError("variance trace covers single-point variants only")
    d = x.size
    delta = config.delta
    U = sample_unit_spheres(rng, n, d)
    f_plus = _batch_values(oracle, x + delta * U)
    if variant == "one_point":
        coef = (d / delta) * f_plus
    elif variant == "two_point_asym":
        f_base = oracle.eval_unmetered(x)
        coef = (d / delta) * (f_plus - f_base)
    elif variant == "two_point_sym":
        f_minus = _batch_values(oracle, x - delta * U)
        coef = (d / (2.0 * delta)) * (f_plus - f_minus)
    else:  # residual, lazo_a, lazo_b
        if cache is None or len(cache) == 0:
            raise ConfigError(f"variant {variant!r} needs a bootstrapped cache")
        prev = cache.latest_entry()
        coef_reuse = (d / delta) * (f_plus - prev.value)
        if variant == "residual":
            coef = coef_reuse
        else:
            if config.uses_rule_b:
                observed = np.abs(f_plus - prev.value)
                limit = config.lipschitz_scale
            else:
                dists = np.linalg.norm(x + delta * U - prev.point, axis=1)
                diffs = np.abs(f_plus - prev.value)
                with np.errstate(divide="ignore", invalid="ignore"):
                    observed = np.where(
                        dists < 1e-12,
                        np.where(diffs < 1e-12, 0.0, np.inf),
                        diffs / dists,
                    )
                limit = config.threshold
            reuse = observed <= limit
            f_minus = _batch_values(oracle, x - delta * U)
            coef_sym = (d / (2.0 * delta)) * (f_plus - f_minus)
            coef = np.where(reuse, coef_reuse, coef_sym)
    G = coef[:, None] * U
    mean_vec = G.mean(axis=0)
    sq_norms = np.einsum("ij,ij->i", G, G)
    centered = G - mean_vec
    vec_var = float(np.einsum("ij,ij->i", centered, centered).sum() / (n - 1))
    norms = np.sqrt(sq_norms)
    return VarianceTrace(
        n=n,
        mean_vector=mean_vec,
        mean_sq_norm=float(sq_norms.mean()),
        vector_variance=vec_var,
        norm_variance=float(norms.var(ddof=1)),
    )


# ---------------------------------------------------------------------------
# symmetry diagnostic
# ---------------------------------------------------------------------------

@dataclass
class SymmetryReport:
    """Antipodal-pair census of the reuse region at one frozen round."""

    round_index: int
    n_samples: int
    member_fraction: float
    asymmetry_score: float
    member: np.ndarray  # (n_samples,) bool, reuse-rule membership per direction
    projected: list  # one (n_samples, k) array per random projection


def symmetry_diagnostic(snapshot: RunSnapshot, n_samples: int = 40000,
                        n_projections: int = 4, projection_dim: int = 2,
                        rng: Optional[np.random.Generator] = None,
                        threshold: Optional[float] = None) -> SymmetryReport:
    """Measure how symmetric the reuse region is at the snapshot round.

    Samples antipodal direction pairs (u, -u), tests the lazy rule's reuse
    membership for each through unmetered evaluations, and scores asymmetry
    as the fraction of members whose antipode is not a member. Gaussian
    random projections of all sampled directions are attached for plotting;
    the score itself is computed before any projection.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if n_samples < 2:
        raise ConfigError("need at least one antipodal pair")
    cfg = snapshot.config.estimator
    if cfg.variant not in ("lazo_a", "lazo_b", "residual"):
        raise ConfigError("symmetry diagnostic needs a lazy or residual run")
    if snapshot.cache is None or len(snapshot.cache) == 0:
        raise ConfigError("snapshot cache is empty; capture after the bootstrap round")
    prev = snapshot.cache.latest_entry()
    oracle = snapshot.oracle
    x = snapshot.x
    d = x.size
    delta = cfg.delta
    half = n_samples // 2
    U_half = sample_unit_spheres(rng, half, d)
    U = np.vstack([U_half, -U_half])
    n = len(U)
    W = x + delta * U
    f_now = _batch_values(oracle, W)
    if cfg.variant == "lazo_b":
        observed = np.abs(f_now - prev.value)
        limit = cfg.lipschitz_scale if threshold is None else threshold
    else:
        diffs = np.abs(f_now - prev.value)
        dists = np.linalg.norm(W - prev.point, axis=1)
        observed = np.where(
            dists < 1e-12,
            np.where(diffs < 1e-12, 0.0, np.inf),
            diffs / np.where(dists < 1e-12, 1.0, dists),
        )
        limit = cfg.threshold if threshold is None else threshold
    member = observed <= limit
    antipode = np.concatenate([np.arange(half, n), np.arange(0, half)])
    mismatches = int(np.count_nonzero(member & ~member[antipode]))
    members = int(np.count_nonzero(member))
    score = mismatches / max(1, members)
    projections = [
        random_projection_matrix(rng, d, projection_dim) for _ in range(n_projections)
    ]
    projected = [U @ P.T for P in projections]
    return SymmetryReport(
        round_index=snapshot.round_index,
        n_samples=n,
        member_fraction=members / n,
        asymmetry_score=score,
        member=member,
        projected=projected,
    )


# ---------------------------------------------------------------------------
# bound validation
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    """Outcome of the per-round deterministic bound checks on one trajectory."""

    rounds_checked: int
    eq8_violations: int
    lemma2_premise_rounds: int
    lemma2_violations: int
    lipschitz_used: Optional[float]
    second_moment_by_rule: dict


def validate_bounds(trajectory: Trajectory,
                    lipschitz: Optional[float] = None) -> BoundReport:
    """Check the instance-dependent bound on every reuse round.

    The bound is deterministic given the recorded perturbed points, loss
    values, and estimate norms, so its violation count must be zero on any
    faithfully recorded run. Reduced-norm (premise implies conclusion)
    checks run when a Lipschitz scale is known. Multi-direction rounds are
    skipped; the bound concerns single-point reuse.
    """
    cfg = trajectory.config
    rounds = len(trajectory)
    arrays = (trajectory.w, trajectory.f_w, trajectory.est_sq_norm, trajectory.rule)
    if any(len(a) != rounds for a in arrays):
        raise TraceError("trajectory arrays are inconsistent; cannot validate")
    L = lipschitz if lipschitz is not None else cfg.lipschitz
    d = trajectory.x.shape[1]
    eta = cfg.eta
    delta = cfg.estimator.delta
    single = cfg.estimator.variant in ("residual", "lazo_a", "lazo_b")
    checked = 0
    eq8_bad = 0
    premise_rounds = 0
    lemma2_bad = 0
    if single:
        for t in range(1, rounds):
            if trajectory.rule[t] != RULE_REUSED:
                continue
            if math.isnan(trajectory.f_w[t]) or math.isnan(trajectory.f_w[t - 1]):
                raise TraceError(f"round {t} lacks recorded perturbed-point values")
            checked += 1
            lhs = trajectory.est_sq_norm[t]
            rhs = instance_bound_rhs(
                trajectory.f_w[t], trajectory.f_w[t - 1],
                trajectory.w[t], trajectory.w[t - 1],
                trajectory.est_sq_norm[t - 1], d, eta, delta,
            )
            if lhs > rhs * (1.0 + 1e-9) + 1e-15:
                eq8_bad += 1
            if L is not None:
                if lemma2_condition(
                    trajectory.f_w[t], trajectory.f_w[t - 1],
                    trajectory.w[t], trajectory.w[t - 1],
                    trajectory.est_sq_norm[t - 1], d, L,
                ):
                    premise_rounds += 1
                    if not lhs < d * L * L * (1.0 + 1e-12):
                        lemma2_bad += 1
    by_rule = {}
    for tag in np.unique(trajectory.rule):
        mask = trajectory.rule == tag
        by_rule[str(tag)] = float(trajectory.est_sq_norm[mask].mean())
    return BoundReport(
        rounds_checked=checked,
        eq8_violations=eq8_bad,
        lemma2_premise_rounds=premise_rounds,
        lemma2_violations=lemma2_bad,
        lipschitz_used=L,
        second_moment_by_rule=by_rule,
    )


# ---------------------------------------------------------------------------
# loss-scale constants
# ---------------------------------------------------------------------------

def loss_scale_constants(config: RunConfig, trial: int = 0,
                         n_points: int = 16, radius: float = 1.0) -> tuple:
    """Empirical (max |f|, max per-round |f_t - f_{t-1}|) over a probe grid.

    Reported statistics only; no algorithm consumes them. The grid is a
    fixed random sample of the ball of ``radius`` (probe stream 9).
    """
    oracle = config.build_oracle(trial)
    d = oracle.dimension
    rng = np.random.default_rng(config.seed + 9)
    points = radius * sample_unit_spheres(rng, n_points, d)
    points *= rng.uniform(0.0, 1.0, (n_points, 1)) ** (1.0 / d)
    g_max = 0.0
    v_max = 0.0
    prev = None
    for t in range(config.horizon + 1):
        oracle.advance_round(t)
        vals = _batch_values(oracle, points)
        g_max = max(g_max, float(np.abs(vals).max()))
        if prev is not None:
            v_max = max(v_max, float(np.abs(vals - prev).max()))
        prev = vals
    return g_max, v_max
