"""Stochastic black-box objectives split across agents.

Two problem families live here: the synthetic non-linear least-squares
binary classification benchmark, and a quadratic toy with a known minimizer
used as a test oracle.  Both expose analytic gradients for diagnostics and
for the first-order reference baseline; the zeroth-order algorithms only
ever see function values.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "StochasticProblem",
    "ClassificationDataset",
    "ClassificationProblem",
    "QuadraticToyProblem",
    "sigmoid",
    "make_synthetic_classification",
    "nlls_evaluate",
    "nlls_true_gradient",
    "make_quadratic_toy",
    "accuracy",
    "save_samples",
    "load_samples",
    "dataset_to_files",
    "dataset_from_files",
]


def sigmoid(t):
    """Overflow-safe logistic function, elementwise."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(arr)
    pos = arr >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    exp_t = np.exp(arr[~pos])
    out[~pos] = exp_t / (1.0 + exp_t)
    if np.ndim(t) == 0:
        return float(out[0])
    return out.reshape(np.shape(t))


def _sigmoid_scalar(t: float) -> float:
    # scalar fast path for the per-sample oracle; math.exp beats np.exp here
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


class StochasticProblem(ABC):
    """Black-box objective ``f(x) = (1/n) sum_i E_xi[F_i(x, xi)]``.

    Subclasses set ``dimension`` and ``local_count`` and implement the
    per-agent sampling/evaluation surface.  ``evaluate`` must be
    deterministic given ``(agent, x, xi)`` so that several probes within one
    gradient estimate share the same realization.  The ``true_*`` gradients
    and full-batch losses are simulator privileges used only for diagnostics
    and the first-order baseline.
    """

    dimension: int
    local_count: int

    @abstractmethod
    def sample(self, agent: int, rng: np.random.Generator):
        """Draw one realization ``xi`` for this agent from its own stream."""

    @abstractmethod
    def evaluate(self, agent: int, x: np.ndarray, xi) -> float:
        """Single-sample value ``F_agent(x, xi)``."""

    @abstractmethod
    def stochastic_gradient(self, agent: int, x: np.ndarray, xi) -> np.ndarray:
        """Analytic per-sample gradient of ``F_agent(., xi)`` at ``x``."""

    @abstractmethod
    def true_local_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        """Full-batch gradient of ``f_agent`` at ``x``."""

    @abstractmethod
    def local_loss(self, agent: int, x: np.ndarray) -> float:
        """Full-batch value of ``f_agent`` at ``x``."""

    def true_global_gradient(self, x: np.ndarray) -> np.ndarray:
        grads = [self.true_local_gradient(i, x) for i in range(self.local_count)]
        return np.mean(grads, axis=0)

    def full_loss(self, x: np.ndarray) -> float:
        return float(np.mean([self.local_loss(i, x) for i in range(self.local_count)]))

    def test_accuracy(self, x: np.ndarray) -> float | None:
        """Held-out accuracy at ``x``, or ``None`` when there is no test set."""
        return None

    def optimal_value(self) -> float | None:
        """``f*`` when known analytically, else ``None``."""
        return None


@dataclass(frozen=True)
class ClassificationDataset:
    """Synthetic binary classification data plus its per-agent partition.

    Labels follow the generating rule ``y = 1`` iff the logistic response at
    the all-ones reference vector is at least one half, which for standard
    normal features is the same as the feature sum being nonnegative.
    ``shard_bounds[i] = (start, stop)`` is agent ``i``'s contiguous block of
    training indices.
    """

    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    shard_bounds: tuple[tuple[int, int], ...]

    @property
    def d(self) -> int:
        return self.train_features.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_features.shape[0]

    @property
    def n_test(self) -> int:
        return self.test_features.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.shard_bounds)

    def shard_slice(self, agent: int) -> slice:
        start, stop = self.shard_bounds[agent]
        return slice(start, stop)


def make_synthetic_classification(
    n_train: int = 2000,
    n_test: int = 200,
    d: int = 100,
    n_agents: int = 10,
    seed: int = 0,
) -> ClassificationDataset:
    """Generate the synthetic benchmark dataset.

    Features are i.i.d. standard normal; labels come from thresholding the
    logistic response at the all-ones vector.  Training indices are split
    into ``n_agents`` contiguous shards of equal size, any remainder going
    to the last agent.  Deterministic per seed.
    """
    if min(n_train, n_test, d, n_agents) < 1:
        raise ValueError("all dataset sizes must be positive")
    if n_agents > n_train:
        raise ValueError("cannot shard fewer training samples than agents")
    rng = np.random.default_rng(seed)
    train = rng.standard_normal((n_train, d))
    test = rng.standard_normal((n_test, d))
    reference = np.ones(d)
    train_labels = (sigmoid(train @ reference) >= 0.5).astype(np.int64)
    test_labels = (sigmoid(test @ reference) >= 0.5).astype(np.int64)
    base = n_train // n_agents
    bounds = tuple(
        (i * base, (i + 1) * base if i < n_agents - 1 else n_train) for i in range(n_agents)
    )
    return ClassificationDataset(train, train_labels, test, test_labels, bounds)


def nlls_evaluate(dataset: ClassificationDataset, agent: int, x: np.ndarray, xi: int) -> float:
    """Squared logistic residual ``(y - phi(x; a))^2`` for one sampled pair."""
    a = dataset.train_features[xi]
    y = float(dataset.train_labels[xi])
    phi = _sigmoid_scalar(float(a @ x))
    return (y - phi) ** 2


def _nlls_gradient_over(features: np.ndarray, labels: np.ndarray, x: np.ndarray) -> np.ndarray:
    phi = sigmoid(features @ x)
    coef = -2.0 * (labels - phi) * phi * (1.0 - phi)
    return coef @ features / labels.size


def _nlls_loss_over(features: np.ndarray, labels: np.ndarray, x: np.ndarray) -> float:
    phi = sigmoid(features @ x)
    return float(np.mean((labels - phi) ** 2))


def nlls_true_gradient(dataset: ClassificationDataset, agent: int, x: np.ndarray) -> np.ndarray:
    """Full-shard analytic gradient, ``mean of -2 (y - phi) phi (1 - phi) a``."""
    sl = dataset.shard_slice(agent)
    return _nlls_gradient_over(
        dataset.train_features[sl], dataset.train_labels[sl].astype(float), x
    )


def accuracy(dataset: ClassificationDataset, x: np.ndarray) -> float:
    """Fraction of test samples whose thresholded response matches the label.

    Responses exactly at one half classify as positive, matching the
    generation rule.
    """
    predicted = sigmoid(dataset.test_features @ x) >= 0.5
    return float(np.mean(predicted == (dataset.test_labels == 1)))


class ClassificationProblem(StochasticProblem):
    """Stochastic view of the classification benchmark, batch size 1.

    A realization ``xi`` is a uniformly drawn training index from the
    agent's own shard (with replacement across iterations).  With
    ``shared_pool=True`` every agent draws from the whole training set
    instead, and local statistics coincide with the global ones.
    """

    def __init__(self, dataset: ClassificationDataset, shared_pool: bool = False):
        self.dataset = dataset
        self.shared_pool = bool(shared_pool)
        self.dimension = dataset.d
        self.local_count = dataset.n_agents

    def _slice(self, agent: int) -> slice:
        if self.shared_pool:
            return slice(0, self.dataset.n_train)
        return self.dataset.shard_slice(agent)

    def sample(self, agent: int, rng: np.random.Generator) -> int:
        sl = self._slice(agent)
        return int(rng.integers(sl.start, sl.stop))

    def evaluate(self, agent: int, x: np.ndarray, xi: int) -> float:
        return nlls_evaluate(self.dataset, agent, x, xi)

    def stochastic_gradient(self, agent: int, x: np.ndarray, xi: int) -> np.ndarray:
        a = self.dataset.train_features[xi]
        y = float(self.dataset.train_labels[xi])
        phi = _sigmoid_scalar(float(a @ x))
        return (-2.0 * (y - phi) * phi * (1.0 - phi)) * a

    def true_local_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        sl = self._slice(agent)
        return _nlls_gradient_over(
            self.dataset.train_features[sl], self.dataset.train_labels[sl].astype(float), x
        )

    def local_loss(self, agent: int, x: np.ndarray) -> float:
        sl = self._slice(agent)
        return _nlls_loss_over(
            self.dataset.train_features[sl], self.dataset.train_labels[sl].astype(float), x
        )

    def test_accuracy(self, x: np.ndarray) -> float | None:
        return accuracy(self.dataset, x)


class QuadraticToyProblem(StochasticProblem):
    """Per-agent quadratics ``f_i(x) = 0.5 ||x - c_i||^2`` with a known optimum.

    The stochastic oracle is ``F_i(x, z) = f_i(x) + z . (x - c_i)`` with
    ``z ~ N(0, zeta^2 I)``, so each coordinate of the stochastic gradient
    deviates from the true one with standard deviation exactly ``zeta``.
    A plain additive noise term would cancel in finite differences and leave
    the gradients noiseless, which is not what a variance knob is for.
    The global minimizer is the centroid of the centers.
    """

    def __init__(self, centers: np.ndarray, zeta: float = 0.0):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim != 2:
            raise ValueError("centers must be an (n_agents, p) matrix")
        if zeta < 0.0:
            raise ValueError("noise level zeta must be nonnegative")
        self.centers = centers
        self.zeta = float(zeta)
        self.local_count, self.dimension = centers.shape

    def sample(self, agent: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dimension) * self.zeta

    def evaluate(self, agent: int, x: np.ndarray, z: np.ndarray) -> float:
        diff = x - self.centers[agent]
        return float(0.5 * diff @ diff + z @ diff)

    def stochastic_gradient(self, agent: int, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return (x - self.centers[agent]) + z

    def true_local_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        return x - self.centers[agent]

    def local_loss(self, agent: int, x: np.ndarray) -> float:
        diff = x - self.centers[agent]
        return float(0.5 * diff @ diff)

    def centroid(self) -> np.ndarray:
        return self.centers.mean(axis=0)

    def optimal_value(self) -> float:
        c = self.centroid()
        return float(np.mean([0.5 * np.sum((c - ci) ** 2) for ci in self.centers]))


def make_quadratic_toy(
    n_agents: int,
    p: int,
    seed: int = 0,
    zeta: float = 0.0,
    spread: float = 1.0,
    centers: np.ndarray | None = None,
) -> QuadraticToyProblem:
    """Build a quadratic toy; centers default to seeded normals scaled by ``spread``."""
    if p < 1 or n_agents < 1:
        raise ValueError("n_agents and p must be positive")
    if centers is None:
        centers = np.random.default_rng(seed).standard_normal((n_agents, p)) * spread
    return QuadraticToyProblem(centers, zeta=zeta)


def save_samples(path: str | Path, features: np.ndarray, labels: np.ndarray) -> None:
    """Write samples as text rows: the feature values then the label."""
    table = np.column_stack([features, np.asarray(labels, dtype=float)])
    np.savetxt(path, table, fmt="%.17g")


def load_samples(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read samples written by :func:`save_samples`."""
    table = np.loadtxt(path, ndmin=2)
    return table[:, :-1], table[:, -1].astype(np.int64)


def dataset_to_files(dataset: ClassificationDataset, train_path, test_path) -> None:
    save_samples(train_path, dataset.train_features, dataset.train_labels)
    save_samples(test_path, dataset.test_features, dataset.test_labels)


def dataset_from_files(train_path, test_path, n_agents: int) -> ClassificationDataset:
    train_features, train_labels = load_samples(train_path)
    test_features, test_labels = load_samples(test_path)
    n_train = train_features.shape[0]
    if n_agents > n_train:
        raise ValueError("cannot shard fewer training samples than agents")
    base = n_train // n_agents
    bounds = tuple(
        (i * base, (i + 1) * base if i < n_agents - 1 else n_train) for i in range(n_agents)
    )
    return ClassificationDataset(train_features, train_labels, test_features, test_labels, bounds)
