"""Synchronous multi-agent update dynamics.

Each round, every agent reads the previous iterate matrix, builds a
zeroth-order coordinate gradient estimate from its own oracle draws, and
moves against both the Laplacian disagreement with its neighbors and the
(optionally powerball-transformed) estimate:

    x_{i,k+1} = x_{i,k} - alpha * sum_j L_ij x_{j,k} - eta * g~_{i,k}

Randomness is split per (agent, purpose) from one master seed with
counter-based spawn keys, so results never depend on update order or on the
degree of parallelism.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .estimator import (
    SmoothingSchedule,
    central_estimate,
    forward_estimate,
    sample_coordinates,
)
from .graph import SpectralProfile, Topology, is_connected, laplacian_spectrum
from .metrics import IterationRecord, capture_record

__all__ = [
    "HyperParams",
    "SwarmState",
    "RunStreams",
    "Trajectory",
    "DivergenceError",
    "ALGORITHMS",
    "powerball",
    "consensus_term",
    "zoom_step",
    "zoom_pb_step",
    "theorem_schedule",
    "run",
]

ALGORITHMS = ("zoom", "zoom_pb", "dsgd")
ESTIMATORS = ("forward", "central")

# Any iterate entry beyond this magnitude aborts the run: a mis-set step
# size with the powerball transform can overflow, and we fail loudly.
DIVERGENCE_LIMIT = 1e12

_PURPOSE_DATA = 0
_PURPOSE_COORD = 1
_PURPOSE_INIT = 2


class DivergenceError(RuntimeError):
    """An agent iterate went non-finite or beyond the divergence guard."""

    def __init__(self, k: int, agent: int):
        super().__init__(f"iterate diverged at iteration {k} on agent {agent}")
        self.k = k
        self.agent = agent


@dataclass(frozen=True)
class HyperParams:
    """Step sizes and estimator settings for one run.

    ``alpha`` must lie inside ``(0, alpha_max)`` of the run's topology; that
    is enforced by :func:`run` where the spectral profile is known.  Values
    of ``gamma`` outside ``[1/2, 1]`` are accepted for robustness
    experiments but flagged, since the convergence guarantees do not cover
    them.
    """

    alpha: float
    eta: float
    T: int
    gamma: float = 0.7
    n_c: int = 1
    estimator: str = "forward"
    smoothing: SmoothingSchedule = field(default_factory=SmoothingSchedule)

    def __post_init__(self) -> None:
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.eta < 0.0:
            raise ValueError("eta must be nonnegative")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")
        if self.n_c < 1:
            raise ValueError("n_c must be at least 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if not 0.5 <= self.gamma <= 1.0:
            warnings.warn(
                f"gamma={self.gamma} lies outside [0.5, 1], the range covered by the "
                "convergence guarantees",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class SwarmState:
    """Iterate matrix at round ``k``; row ``i`` is agent ``i``'s point."""

    iterates: np.ndarray
    k: int

    @property
    def mean_iterate(self) -> np.ndarray:
        return self.iterates.mean(axis=0)


@dataclass
class RunStreams:
    """One RNG stream per (agent, purpose), split from a master seed.

    Purposes are data sampling, coordinate sampling, and initialization.
    The split is counter-based (seed sequence spawn keys), so streams are
    independent of thread scheduling and of each other.
    """

    data: list[np.random.Generator]
    coords: list[np.random.Generator]
    init: list[np.random.Generator]

    @classmethod
    def from_seed(cls, master_seed: int, n_agents: int) -> "RunStreams":
        def stream(agent: int, purpose: int) -> np.random.Generator:
            return np.random.default_rng(
                np.random.SeedSequence(master_seed, spawn_key=(agent, purpose))
            )

        return cls(
            data=[stream(i, _PURPOSE_DATA) for i in range(n_agents)],
            coords=[stream(i, _PURPOSE_COORD) for i in range(n_agents)],
            init=[stream(i, _PURPOSE_INIT) for i in range(n_agents)],
        )


@dataclass(frozen=True)
class Trajectory:
    """Immutable result of one run: metric records plus the final state."""

    records: tuple[IterationRecord, ...]
    final_state: SwarmState
    algorithm: str
    params: HyperParams
    seed: int
    final_accuracy: float | None = None


def powerball(v: np.ndarray, gamma: float) -> np.ndarray:
    """Signed power transform ``sgn(v_j) |v_j|^gamma``, elementwise."""
    v = np.asarray(v, dtype=float)
    if gamma == 1.0:
        return v.copy()  # exact identity keeps the gamma=1 reduction bit-identical
    return np.sign(v) * np.abs(v) ** gamma


def consensus_term(profile: SpectralProfile, state: SwarmState, i: int) -> np.ndarray:
    """Laplacian-weighted disagreement ``sum_j L_ij x_{j,k}`` for agent ``i``."""
    return profile.laplacian[i] @ state.iterates


def _advance(
    state: SwarmState,
    profile: SpectralProfile,
    params: HyperParams,
    problem,
    streams: RunStreams,
    algorithm: str,
) -> SwarmState:
    """One synchronous round; every agent reads only round-k data."""
    iterates = state.iterates
    n, p = iterates.shape
    mixing = profile.laplacian @ iterates
    estimate = forward_estimate if params.estimator == "forward" else central_estimate
    delta = params.smoothing.delta(p, n, state.k)
    nxt = np.empty_like(iterates)
    for i in range(n):
        row = iterates[i]
        xi = problem.sample(i, streams.data[i])
        if algorithm == "dsgd":
            g = problem.stochastic_gradient(i, row, xi)
        else:
            coords = sample_coordinates(p, params.n_c, streams.coords[i])
            g = estimate(
                lambda z, agent=i, realization=xi: problem.evaluate(agent, z, realization),
                row,
                coords,
                delta,
            )
            if algorithm == "zoom_pb":
                g = powerball(g, params.gamma)
        nxt[i] = row - params.alpha * mixing[i] - params.eta * g
    bad = ~np.isfinite(nxt) | (np.abs(nxt) > DIVERGENCE_LIMIT)
    if bad.any():
        raise DivergenceError(k=state.k, agent=int(np.argwhere(bad)[0][0]))
    return SwarmState(nxt, state.k + 1)


def zoom_step(
    state: SwarmState,
    profile: SpectralProfile,
    params: HyperParams,
    problem,
    streams: RunStreams,
) -> SwarmState:
    """One round of the plain coordinate-estimate dynamics."""
    return _advance(state, profile, params, problem, streams, "zoom")


def zoom_pb_step(
    state: SwarmState,
    profile: SpectralProfile,
    params: HyperParams,
    problem,
    streams: RunStreams,
) -> SwarmState:
    """One round with the estimate passed through the powerball transform."""
    return _advance(state, profile, params, problem, streams, "zoom_pb")


def theorem_schedule(
    n_agents: int, p: int, T: int, kappa_delta: float = 1.0
) -> tuple[float, SmoothingSchedule]:
    """Gradient step and smoothing decay prescribed by the convergence analysis.

    Returns ``eta = sqrt(n) / sqrt(p T)`` and a decaying schedule that meets
    the smoothing cap with equality.  Warns (without rejecting) when the
    horizon falls below ``n^3 / p``, the premise the prescribed rates assume.
    """
    if min(n_agents, p, T) < 1:
        raise ValueError("n_agents, p and T must all be positive")
    if T < n_agents**3 / p:
        warnings.warn(
            f"horizon T={T} is below n^3/p = {n_agents ** 3 / p:g}; "
            "the prescribed rates assume a longer run",
            RuntimeWarning,
            stacklevel=2,
        )
    eta = math.sqrt(n_agents) / math.sqrt(p * T)
    return eta, SmoothingSchedule(kappa_delta=kappa_delta, mode="theorem_decay")


def run(
    topo: Topology,
    problem,
    params: HyperParams,
    algorithm: str = "zoom",
    seed: int = 0,
    record_every: int = 10,
    init: str = "zeros",
    init_scale: float = 1.0,
) -> Trajectory:
    """Execute ``params.T`` synchronous rounds and record metrics along the way.

    Fully deterministic given ``seed``: all randomness flows through
    per-(agent, purpose) streams split from it.  Records are captured at
    iteration 0, every ``record_every`` rounds, and at the final round.

    Args:
        topo: connected communication graph; disconnected graphs are
            rejected because the dynamics assume connectivity.
        problem: a :class:`~zoswarm.problems.StochasticProblem` with
            ``local_count == topo.n``.
        params: hyperparameters; ``alpha`` must lie in the open interval
            ``(0, alpha_max)`` of this topology's spectrum.
        algorithm: ``"zoom"``, ``"zoom_pb"``, or ``"dsgd"`` (the first-order
            reference baseline, same loop and RNG discipline with the
            estimate replaced by the analytic stochastic gradient).
        seed: master seed for the run.
        record_every: metric recording cadence (iterations).
        init: ``"zeros"`` starts every agent at the origin; ``"gaussian"``
            draws i.i.d. normal rows scaled by ``init_scale`` from the
            per-agent init streams.

    Returns:
        A :class:`Trajectory` of records plus the final swarm state.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    if not is_connected(topo):
        raise ValueError("communication graph must be connected")
    if problem.local_count != topo.n:
        raise ValueError(
            f"problem carries {problem.local_count} agents but the topology has {topo.n}"
        )
    profile = laplacian_spectrum(topo)
    if not 0.0 < params.alpha < profile.alpha_max:
        raise ValueError(
            f"alpha={params.alpha} must lie in (0, {profile.alpha_max:g}) for this topology"
        )
    n, p = topo.n, problem.dimension
    streams = RunStreams.from_seed(seed, n)
    if init == "zeros":
        start = np.zeros((n, p))
    elif init == "gaussian":
        start = np.stack([streams.init[i].standard_normal(p) * init_scale for i in range(n)])
    else:
        raise ValueError(f"init must be 'zeros' or 'gaussian', got {init!r}")

    if algorithm == "dsgd":
        calls_per_round = n
    elif params.estimator == "forward":
        calls_per_round = n * (params.n_c + 1)
    else:
        calls_per_round = n * 2 * params.n_c

    started = time.perf_counter()
    state = SwarmState(start, 0)
    records = [capture_record(problem, state.iterates, 0, params.gamma, 0, 0.0)]
    for k in range(params.T):
        state = _advance(state, profile, params, problem, streams, algorithm)
        done = k + 1
        if done % record_every == 0 or done == params.T:
            wall_ms = (time.perf_counter() - started) * 1000.0
            records.append(
                capture_record(
                    problem, state.iterates, done, params.gamma, done * calls_per_round, wall_ms
                )
            )
    final_accuracy = problem.test_accuracy(state.mean_iterate)
    return Trajectory(
        records=tuple(records),
        final_state=state,
        algorithm=algorithm,
        params=params,
        seed=seed,
        final_accuracy=final_accuracy,
    )
