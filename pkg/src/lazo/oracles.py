"""Time-varying loss oracles with metered and unmetered evaluation channels.

A metered ``query`` counts toward query complexity; ``eval_unmetered``
returns the same frozen-round value without spending budget (used for
regret bookkeeping and diagnostics only). Each round's randomness is
frozen when ``advance_round`` is called, so repeated evaluations within
a round are reproducible.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, SequencingError, UnsupportedOperationError
from .numerics import Stream, rng_stream


class Oracle:
    """Base class: round sequencing, query metering, channel plumbing.

    Subclasses implement ``_value`` (loss at a point for the frozen round)
    and ``_freeze_round`` (draw and store the round's randomness).
    """

    has_true_gradient = False

    def __init__(self, dimension: int, seed: int, trial: int = 0):
        if dimension < 1:
            raise DimensionError(f"oracle dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.trial = int(trial)
        self._round = -1
        self._queries = 0
        self._round_rng = rng_stream(self.seed, self.trial, Stream.ORACLE, 1)

    def _init_rng(self) -> np.random.Generator:
        """Stream for once-per-run parameter draws."""
        return rng_stream(self.seed, self.trial, Stream.ORACLE, 0)

    @property
    def round_index(self) -> int:
        return self._round

    @property
    def query_count(self) -> int:
        return self._queries

    def advance_round(self, t: int) -> None:
        """Freeze round ``t``'s randomness. Rounds must advance by exactly 1."""
        if t != self._round + 1:
            raise SequencingError(
                f"advance_round({t}) after round {self._round}; rounds are sequential"
            )
        self._round = t
        self._freeze_round(t)

    def reset(self) -> None:
        """Rewind to the pre-run state; the same round sequence replays."""
        self._round = -1
        self._queries = 0
        self._round_rng = rng_stream(self.seed, self.trial, Stream.ORACLE, 1)
        self._reset_state()

    def _check_point(self, x: np.ndarray) -> None:
        if self._round < 0:
            raise SequencingError("oracle queried before the first advance_round")
        if x.shape != (self.dimension,):
            raise DimensionError(
                f"point has shape {x.shape}, oracle dimension is {self.dimension}"
            )

    def query(self, x: np.ndarray) -> float:
        """Loss at ``x`` for the frozen round. Increments the metered count."""
        self._check_point(x)
        self._queries += 1
        return self._value(x)

    def eval_unmetered(self, x: np.ndarray) -> float:
        """Same value contract as ``query`` but leaves the meter untouched."""
        self._check_point(x)
        return self._value(x)

    def true_gradient(self, x: np.ndarray) -> np.ndarray:
        """Exact gradient of the noiseless round loss, where supported."""
        if not self.has_true_gradient:
            raise UnsupportedOperationError(
                f"{type(self).__name__} does not expose a true gradient"
            )
        self._check_point(x)
        return self._gradient(x)

    # subclass hooks -----------------------------------------------------
    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _freeze_round(self, t: int) -> None:
        pass

    def _reset_state(self) -> None:
        pass

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SyntheticQuadraticOracle(Oracle):
    """f_t(x) = (x - a_t)' C (x - a_t) + z_t with a configurable center path.

    The closed-form gradient and minimizer make this the unit-test and
    regret-slope workhorse. Schedules:

    - ``stationary``: a_t = a_0 every round.
    - ``drift``: a_t random-walks with per-round Gaussian steps.
    - ``burst``: a_t = a_0 except inside the window ``t mod 100 in [35, 65]``
      where every coordinate gains ``burst_amp * sin(7 (t mod 100))``.
    - ``path``: explicit per-round centers (cycled if shorter than the run).
    """

    has_true_gradient = True

    def __init__(
        self,
        dimension: int,
        seed: int,
        trial: int = 0,
        center=None,
        curvature=None,
        schedule: str = "stationary",
        drift_std: float = 0.01,
        burst_amp: float = 1.0,
        noise_std: float = 0.0,
        path=None,
    ):
        super().__init__(dimension, seed, trial)
        d = self.dimension
        self._a0 = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        if self._a0.shape != (d,):
            raise DimensionError("center must have the oracle dimension")
        if curvature is None:
            self._curv = None  # identity
        else:
            self._curv = np.asarray(curvature, dtype=float)
            if self._curv.shape != (d, d):
                raise DimensionError("curvature matrix must be d x d")
        if schedule not in ("stationary", "drift", "burst", "path"):
            raise ConfigError(f"unknown schedule {schedule!r}")
        if schedule == "path" and path is None:
            raise ConfigError("schedule 'path' requires explicit centers")
        self.schedule = schedule
        self.drift_std = float(drift_std)
        self.burst_amp = float(burst_amp)
        self.noise_std = float(noise_std)
        self._path = None if path is None else [np.asarray(c, dtype=float) for c in path]
        self._a = self._a0.copy()
        self._z = 0.0

    def _reset_state(self) -> None:
        self._a = self._a0.copy()
        self._z = 0.0

    def _freeze_round(self, t: int) -> None:
        if self.schedule == "stationary":
            self._a = self._a0
        elif self.schedule == "drift":
            self._a = self._a + self.drift_std * self._round_rng.standard_normal(self.dimension)
        elif self.schedule == "burst":
            m = t % 100
            if 35 <= m <= 65:
                self._a = self._a0 + self.burst_amp * math.sin(7.0 * m)
            else:
                self._a = self._a0
        else:  # path
            self._a = self._path[t % len(self._path)]
        if self.noise_std > 0.0:
            self._z = self.noise_std * float(self._round_rng.standard_normal())
        else:
            self._z = 0.0

    @property
    def center(self) -> np.ndarray:
        """The frozen round's minimizer of the noiseless loss."""
        return self._a

    def _value(self, x: np.ndarray) -> float:
        r = x - self._a
        if self._curv is None:
            return float(r @ r) + self._z
        return float(r @ (self._curv @ r)) + self._z

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Unmetered vectorized evaluation of the frozen round loss."""
        R = X - self._a
        if self._curv is None:
            return np.einsum("ij,ij->i", R, R) + self._z
        return np.einsum("ij,ij->i", R @ self._curv, R) + self._z

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        r = x - self._a
        if self._curv is None:
            return 2.0 * r
        return (self._curv + self._curv.T) @ r

    def lipschitz_constant(self, radius: float) -> float:
        """Bound on the gradient norm over a centered ball of ``radius``."""
        reach = radius + float(np.linalg.norm(self._a0))
        if self._curv is None:
            return 2.0 * reach
        sym = 0.5 * (self._curv + self._curv.T)
        lam = float(np.linalg.eigvalsh(sym)[-1])
        return 2.0 * lam * reach


class LinearRegressionOracle(Oracle):
    """Least-squares loss with a fresh additive noise level each round.

    f_t(x) = 1/(2 n_samples) * ||y - theta x||^2 + z_t, with z_t drawn once
    per round and shared by every evaluation in that round. The noiseless
    part is a fixed convex quadratic; only the offset moves between rounds.
    """

    has_true_gradient = True

    def __init__(
        self,
        dimension: int = 2,
        seed: int = 0,
        trial: int = 0,
        n_samples: int = 100,
        feature_std: float = 2.0,
        target_noise_std: float = 1.0,
        round_noise_std: float = 1.0,
    ):
        super().__init__(dimension, seed, trial)
        self.n_samples = int(n_samples)
        self.round_noise_std = float(round_noise_std)
        rng = self._init_rng()
        d, p = self.dimension, self.n_samples
        theta = np.empty((p, d))
        theta[:, 0] = 1.0
        if d > 1:
            theta[:, 1:] = feature_std * rng.standard_normal((p, d - 1))
        x_true = np.full(d, 3.0)
        x_true[0] = 4.0
        self.theta = theta
        self.y = theta @ x_true + target_noise_std * rng.standard_normal(p)
        self._z = 0.0

    def _reset_state(self) -> None:
        self._z = 0.0

    def _freeze_round(self, t: int) -> None:
        if self.round_noise_std > 0.0:
            self._z = self.round_noise_std * float(self._round_rng.standard_normal())
        else:
            self._z = 0.0

    def _value(self, x: np.ndarray) -> float:
        r = self.y - self.theta @ x
        return 0.5 / self.n_samples * float(r @ r) + self._z

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        R = self.y[None, :] - X @ self.theta.T
        return 0.5 / self.n_samples * np.einsum("ij,ij->i", R, R) + self._z

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        return self.theta.T @ (self.theta @ x - self.y) / self.n_samples

    def solve_normal_equations(self) -> np.ndarray:
        """Minimizer of the noiseless loss (identical every round)."""
        return np.linalg.lstsq(self.theta, self.y, rcond=None)[0]

    def lipschitz_constant(self, radius: float) -> float:
        """Gradient-norm bound over a centered ball of ``radius``."""
        gram = self.theta.T @ self.theta / self.n_samples
        lam = float(np.linalg.eigvalsh(gram)[-1])
        pull = float(np.linalg.norm(self.theta.T @ self.y / self.n_samples))
        return lam * radius + pull


class LQROracle(Oracle):
    """Discounted finite-rollout LQR cost under intermittently drifting dynamics.

    The decision is a flattened state-feedback gain K (control_dim x state_dim).
    One metered query runs one rollout per panel state under the frozen
    (A_t, B_t) and returns the panel-averaged discounted quadratic cost.

    The dynamics drift by an entrywise Gaussian random walk, reset every
    ``reset_period`` rounds, and gain a sinusoidal burst term on every entry
    inside the burst window -- the regime-switching schedule the lazy-query
    benchmark is designed around. Costs are clamped at ``cost_cap`` so
    unstable closed loops cannot overflow; ``capped_evaluations`` counts how
    often the clamp fired.
    """

    def __init__(
        self,
        seed: int = 0,
        trial: int = 0,
        state_dim: int = 6,
        control_dim: int = 6,
        discount: float = 0.5,
        rollout_len: int = 10,
        init_state_scale: float = 1.0,
        init_panel: int = 1,
        state_cost_scale: float = 1.0,
        control_cost_scale: float = 1.0,
        cost_cap: float = 1e8,
        reset_period: int = 100,
        burst_window: tuple = (35, 65),
        burst_amp: float = 7.0,
        burst_freq: float = 7.0,
        reset_noise: float = 1.0,
        calm_noise: float = 0.1,
    ):
        super().__init__(control_dim * state_dim, seed, trial)
        self.state_dim = int(state_dim)
        self.control_dim = int(control_dim)
        self.discount = float(discount)
        self.rollout_len = int(rollout_len)
        if not 0.0 < self.discount < 1.0:
            raise ConfigError("discount must lie in (0, 1)")
        if self.rollout_len < 1:
            raise ConfigError("rollout_len must be >= 1")
        self.state_cost = state_cost_scale * np.eye(self.state_dim)
        self.control_cost = control_cost_scale * np.eye(self.control_dim)
        self.cost_cap = float(cost_cap)
        self.reset_period = int(reset_period)
        self.burst_window = (int(burst_window[0]), int(burst_window[1]))
        self.burst_amp = float(burst_amp)
        self.burst_freq = float(burst_freq)
        self.reset_noise = float(reset_noise)
        self.calm_noise = float(calm_noise)
        self.capped_evaluations = 0
        rng = self._init_rng()
        self.init_states = init_state_scale * rng.standard_normal(
            (int(init_panel), self.state_dim)
        )
        self._A: Optional[np.ndarray] = None
        self._B: Optional[np.ndarray] = None

    def _reset_state(self) -> None:
        self._A = None
        self._B = None
        self.capped_evaluations = 0

    def _freeze_round(self, t: int) -> None:
        n, p = self.state_dim, self.control_dim
        m = t % self.reset_period
        scale = self.reset_noise if m == 0 else self.calm_noise
        sA = scale * self._round_rng.standard_normal((n, n))
        sB = scale * self._round_rng.standard_normal((n, p))
        if m == 0:
            self._A = sA
            self._B = sB
        elif self.burst_window[0] <= m <= self.burst_window[1]:
            self._A = self._A + sA + self.burst_amp * math.sin(self.burst_freq * m)
            self._B = self._B + sB + self.burst_amp * math.cos(self.burst_freq * m)
        else:
            self._A = self._A + sA
            self._B = self._B + sB

    @property
    def dynamics(self) -> tuple:
        return self._A, self._B

    def _value(self, k_flat: np.ndarray) -> float:
        K = k_flat.reshape(self.control_dim, self.state_dim)
        closed = self._A + self._B @ K
        stage = self.state_cost + K.T @ self.control_cost @ K
        total = 0.0
        for x0 in self.init_states:
            total += self._rollout_cost(closed, stage, x0)
        cost = total / len(self.init_states)
        if not math.isfinite(cost) or cost > self.cost_cap:
            self.capped_evaluations += 1
            return self.cost_cap
        return cost

    def _rollout_cost(self, closed: np.ndarray, stage: np.ndarray, x0: np.ndarray) -> float:
        x = x0
        total = 0.0
        disc = 1.0
        for _ in range(self.rollout_len):
            x = closed @ x
            disc *= self.discount
            term = disc * float(x @ (stage @ x))
            if not math.isfinite(term) or term > self.cost_cap * self.rollout_len:
                return math.inf  # unstable rollout; caller clamps
            total += term
        return total / self.rollout_len


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ResourceAllocationOracle(Oracle):
    """Workload-balancing cost on a ring of agents with sinusoidal demands.

    Each agent i receives demand b_k^i = psi_i sin(omega_i k + phi_i) at
    rollout step k, holds workload y_k^i, and forwards fractions of it to
    its two ring neighbors. A negative workload (deficit) at step k incurs
    cost p_t^i (y_k^i)^2 where the per-round price p_t^i = sin(pi t / 12)
    plus uniform [0,1] noise is frozen when the round begins.

    The policy maps per-agent features [y, b, 1] through one linear layer
    per neighbor slot and a logistic squash; the two outgoing fractions are
    rescaled to sum to at most 1. Decision dimension: agents x 2 x 3.
    """

    N_FEATURES = 3

    def __init__(
        self,
        seed: int = 0,
        trial: int = 0,
        n_agents: int = 16,
        discount: float = 0.75,
        rollout_len: int = 10,
        demand_amp_range: tuple = (0.5, 1.5),
        demand_freq_range: tuple = (0.1, 0.5),
        price_noise: float = 1.0,
    ):
        if n_agents < 2:
            raise ConfigError("ring needs at least 2 agents")
        super().__init__(n_agents * 2 * self.N_FEATURES, seed, trial)
        self.n_agents = int(n_agents)
        self.discount = float(discount)
        self.rollout_len = int(rollout_len)
        self.price_noise = float(price_noise)
        rng = self._init_rng()
        self.demand_amp = rng.uniform(*demand_amp_range, self.n_agents)
        self.demand_freq = rng.uniform(*demand_freq_range, self.n_agents)
        self.demand_phase = rng.uniform(0.0, 2.0 * math.pi, self.n_agents)
        self._price = np.zeros(self.n_agents)

    def _reset_state(self) -> None:
        self._price = np.zeros(self.n_agents)

    def _freeze_round(self, t: int) -> None:
        base = math.sin(math.pi * t / 12.0)
        self._price = base + self.price_noise * self._round_rng.uniform(0.0, 1.0, self.n_agents)

    @property
    def prices(self) -> np.ndarray:
        return self._price

    def demand(self, k: int) -> np.ndarray:
        return self.demand_amp * np.sin(self.demand_freq * k + self.demand_phase)

    def forward_fractions(self, weights: np.ndarray, y: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Per-agent outgoing fractions (n_agents, 2): slot 0 -> left, 1 -> right."""
        feats = np.stack([y, b, np.ones_like(y)], axis=1)  # (n, 3)
        logits = np.einsum("nsf,nf->ns", weights, feats)
        a = _sigmoid(logits)
        total = a.sum(axis=1)
        return a / np.maximum(1.0, total)[:, None]

    def _value(self, theta_flat: np.ndarray) -> float:
        n = self.n_agents
        weights = theta_flat.reshape(n, 2, self.N_FEATURES)
        y = np.zeros(n)
        total = 0.0
        disc = 1.0
        for k in range(1, self.rollout_len + 1):
            b = self.demand(k)
            a = self.forward_fractions(weights, y, b)
            sent_left = a[:, 0] * y
            sent_right = a[:, 1] * y
            inflow = np.roll(sent_left, -1) + np.roll(sent_right, 1)
            y = y - (sent_left + sent_right) + inflow - b
            disc *= self.discount
            deficit = np.minimum(y, 0.0)
            total += disc * float(self._price @ (deficit * deficit))
        return total


_ORACLES = {
    "quadratic": SyntheticQuadraticOracle,
    "regression": LinearRegressionOracle,
    "lqr": LQROracle,
    "resource_allocation": ResourceAllocationOracle,
}


def make_oracle(problem: str, params: dict, seed: int, trial: int = 0) -> Oracle:
    """Build a benchmark oracle from its config-file identifier and params."""
    try:
        cls = _ORACLES[problem]
    except KeyError:
        raise ConfigError(
            f"unknown problem {problem!r}; expected one of {sorted(_ORACLES)}"
        ) from None
    return cls(seed=seed, trial=trial, **params)
