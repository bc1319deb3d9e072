"""Communication topologies and the Laplacian spectra that bound consensus steps.

Agents exchange iterates over an undirected weighted graph.  The admissible
consensus step size for the swarm update is governed by two spectral
quantities of the graph Laplacian ``L``: its smallest positive eigenvalue
``rho2`` and the spectral radius of ``L^2``.  ``laplacian_spectrum`` packages
both together with the Laplacian itself, so callers never recompute them.

All operations here are pure functions on immutable inputs and are safe to
call concurrently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Topology",
    "SpectralProfile",
    "GraphSamplingError",
    "EigenSolveError",
    "erdos_renyi",
    "laplacian_spectrum",
    "is_connected",
    "save_edge_list",
    "load_edge_list",
]

# Eigenvalues below this magnitude are treated as members of the null space
# when locating the smallest positive eigenvalue.
ZERO_EIGENVALUE_TOL = 1e-9


class GraphSamplingError(RuntimeError):
    """No connected graph was found within the retry budget."""


class EigenSolveError(RuntimeError):
    """The symmetric eigenvalue solver failed to converge."""


@dataclass(frozen=True)
class Topology:
    """Undirected weighted communication graph over agents ``0..n-1``.

    ``weights[i, j] > 0`` exactly when agents ``i`` and ``j`` can talk to
    each other; the matrix is symmetric with a zero diagonal (no self
    loops).  Weights are dimensionless mixing coefficients, not distances.
    """

    n: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("agent count must be positive")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n, self.n):
            raise ValueError(f"weights must be {self.n}x{self.n}, got {w.shape}")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("self weights must be zero")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def degrees(self) -> np.ndarray:
        """Weighted degree of every agent."""
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[int, int, float]]:
        """All edges as ``(i, j, weight)`` with ``i < j``."""
        rows, cols = np.nonzero(np.triu(self.weights, k=1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(rows, cols)]


@dataclass(frozen=True)
class SpectralProfile:
    """Laplacian of a topology plus the spectral bounds derived from it.

    ``alpha_max = rho2 / (2 * rho_l2)`` is the upper end of the open
    interval of admissible consensus step sizes; ``rho2`` is the smallest
    positive Laplacian eigenvalue and ``rho_l2`` the spectral radius of
    ``L^2``.
    """

    laplacian: np.ndarray
    rho2: float
    rho_l2: float
    alpha_max: float


def erdos_renyi(n: int, prob: float, seed: int = 0, max_attempts: int = 100) -> Topology:
    """Sample a connected Erdos-Renyi graph with unit edge weights.

    Every unordered pair of agents is linked independently with probability
    ``prob``.  The sampler is deterministic for a fixed ``seed``; if the
    draw comes out disconnected it retries with ``seed + 1``, ``seed + 2``,
    ... up to ``max_attempts`` times before giving up.

    Args:
        n: number of agents, at least 2.
        prob: edge probability in (0, 1].
        seed: base seed for the edge draws.
        max_attempts: connectivity retry budget.

    Returns:
        A connected :class:`Topology` with 0/1 weights.

    Raises:
        GraphSamplingError: if every attempt in the budget is disconnected.
    """
    if n < 2:
        raise ValueError("an Erdos-Renyi topology needs at least 2 agents")
    if not 0.0 < prob <= 1.0:
        raise ValueError("edge probability must lie in (0, 1]")
    upper = np.triu_indices(n, k=1)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        draws = rng.random(n * (n - 1) // 2)
        weights = np.zeros((n, n))
        weights[upper] = (draws < prob).astype(float)
        weights = weights + weights.T
        topo = Topology(n, weights)
        if is_connected(topo):
            return topo
    raise GraphSamplingError(
        f"no connected graph of {n} agents at edge probability {prob} "
        f"within {max_attempts} attempts starting from seed {seed}"
    )


def is_connected(topo: Topology) -> bool:
    """True iff a traversal from agent 0 over positive-weight edges reaches everyone."""
    seen = np.zeros(topo.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(topo.weights[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return bool(seen.all())


def laplacian_spectrum(topo: Topology) -> SpectralProfile:
    """Compute the Laplacian ``L = Deg - A`` and its step-bounding spectrum.

    Uses a dense symmetric eigen-decomposition: topologies here stay small,
    so exactness wins over scalability.

    Raises:
        EigenSolveError: if the eigenvalue iteration does not converge.
        ValueError: if the graph has no positive Laplacian eigenvalue
            (i.e. no edges at all), in which case no consensus step bound
            exists.
    """
    adjacency = topo.weights
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    try:
        eigenvalues = np.linalg.eigvalsh(laplacian)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(f"eigenvalue solver failed on a {topo.n}-agent Laplacian") from exc
    positive = eigenvalues[eigenvalues > ZERO_EIGENVALUE_TOL]
    if positive.size == 0:
        raise ValueError("graph has no edges; the Laplacian spectrum is all zero")
    rho2 = float(positive.min())
    rho_l2 = float(np.abs(eigenvalues).max() ** 2)
    return SpectralProfile(
        laplacian=laplacian,
        rho2=rho2,
        rho_l2=rho_l2,
        alpha_max=rho2 / (2.0 * rho_l2),
    )


def save_edge_list(topo: Topology, path: str | Path) -> None:
    """Write the topology as a plain-text edge list, one ``i j weight`` line per edge."""
    lines = [f"# {topo.n} agents"]
    for i, j, w in topo.edges():
        lines.append(f"{i} {j} {w!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path: str | Path, n: int | None = None) -> Topology:
    """Read a plain-text edge list back into a :class:`Topology`.

    Lines are ``i j weight`` with zero-based indices; ``#`` starts a comment.
    ``n`` may be given explicitly to keep trailing isolated agents; otherwise
    the agent count is inferred as the largest index seen plus one.
    """
    edges: list[tuple[int, int, float]] = []
    max_index = -1
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed edge line: {raw!r}")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if i == j:
            raise ValueError(f"self edge on agent {i} is not allowed")
        if i < 0 or j < 0:
            raise ValueError("agent indices must be nonnegative")
        edges.append((i, j, w))
        max_index = max(max_index, i, j)
    count = n if n is not None else max_index + 1
    if count < 1:
        raise ValueError("edge list is empty and no agent count was given")
    weights = np.zeros((count, count))
    for i, j, w in edges:
        if i >= count or j >= count:
            raise ValueError(f"edge ({i}, {j}) exceeds agent count {count}")
        weights[i, j] = w
        weights[j, i] = w
    return Topology(count, weights)
