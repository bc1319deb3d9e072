"""Per-iteration metrics, run summaries, CSV emission, and assumption probes.

The gradients reported here are the problems' analytic full-batch gradients,
a simulator privilege the algorithms never see: the convergence statements
are phrased in true gradients while the dynamics stay zeroth-order.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

__all__ = [
    "IterationRecord",
    "AssumptionProbe",
    "RunSummary",
    "CSV_FIELDS",
    "holder_norm_sq",
    "consensus_error",
    "capture_record",
    "summarize",
    "write_csv",
    "read_csv",
    "records_match",
    "probe_assumptions",
]

CSV_FIELDS = (
    "k",
    "mean_train_loss",
    "grad_norm_sq",
    "grad_norm_1pg_sq",
    "consensus_err",
    "oracle_calls",
    "wall_ms",
)


@dataclass(frozen=True)
class IterationRecord:
    """Snapshot of the swarm at iteration ``k``.

    ``grad_norm_1pg_sq`` is the squared ``(1+gamma)``-norm of the true
    gradient at the mean iterate; with ``gamma = 1`` it coincides exactly
    with ``grad_norm_sq``.  ``oracle_calls`` counts cumulative black-box
    evaluations made by the algorithm (never by the diagnostics).
    ``wall_ms`` is elapsed wall-clock time and is the one field excluded
    from determinism comparisons.
    """

    k: int
    mean_train_loss: float
    grad_norm_sq: float
    grad_norm_1pg_sq: float
    consensus_err: float
    oracle_calls: int
    wall_ms: float


@dataclass(frozen=True)
class AssumptionProbe:
    """Empirical lower bounds for the constants the analysis assumes exist.

    Finite samples cannot certify the bounds; these are diagnostics, never
    pass/fail gates.  ``zeta_hat`` is the largest observed per-coordinate
    stochastic-gradient deviation, ``sigma2_hat`` the largest observed
    local-vs-global gradient gap, ``lipschitz_hat`` the steepest observed
    gradient difference quotient.
    """

    zeta_hat: float
    sigma2_hat: float
    lipschitz_hat: float


@dataclass(frozen=True)
class RunSummary:
    """Time averages over recorded iterations before the horizon, plus finals."""

    avg_grad_norm_sq: float
    avg_consensus_err: float
    final_loss: float
    final_accuracy: float | None = None


def holder_norm_sq(v: np.ndarray, q: float) -> float:
    """Squared q-norm ``(sum |v_j|^q)^(2/q)``."""
    if q <= 0.0:
        raise ValueError("norm order must be positive")
    v = np.asarray(v, dtype=float)
    if q == 2.0:
        return float(v @ v)  # keep the gamma = 1 case bit-identical to the plain squared norm
    return float(np.sum(np.abs(v) ** q) ** (2.0 / q))


def consensus_error(iterates: np.ndarray, mean_iterate: np.ndarray | None = None) -> float:
    """Mean squared deviation of agent rows from the swarm mean."""
    if mean_iterate is None:
        mean_iterate = iterates.mean(axis=0)
    return float(((iterates - mean_iterate) ** 2).sum(axis=1).mean())


def capture_record(
    problem,
    iterates: np.ndarray,
    k: int,
    gamma: float,
    oracle_calls: int,
    wall_ms: float,
) -> IterationRecord:
    """Evaluate all diagnostics at the current swarm mean."""
    mean_iterate = iterates.mean(axis=0)
    grad = problem.true_global_gradient(mean_iterate)
    return IterationRecord(
        k=int(k),
        mean_train_loss=float(problem.full_loss(mean_iterate)),
        grad_norm_sq=float(grad @ grad),
        grad_norm_1pg_sq=holder_norm_sq(grad, 1.0 + gamma),
        consensus_err=consensus_error(iterates, mean_iterate),
        oracle_calls=int(oracle_calls),
        wall_ms=float(wall_ms),
    )


def summarize(trajectory) -> RunSummary:
    """Time-averaged stationarity and consensus measures plus final values.

    Averages are plain means over recorded iterations strictly before the
    horizon; the final record supplies ``final_loss``.  Accuracy is carried
    through when the problem has a test set.
    """
    records = trajectory.records
    if not records:
        raise ValueError("cannot summarize an empty trajectory")
    horizon = trajectory.params.T
    window = [r for r in records if r.k < horizon] or list(records)
    return RunSummary(
        avg_grad_norm_sq=float(np.mean([r.grad_norm_sq for r in window])),
        avg_consensus_err=float(np.mean([r.consensus_err for r in window])),
        final_loss=records[-1].mean_train_loss,
        final_accuracy=trajectory.final_accuracy,
    )


def _format_row(record: IterationRecord) -> str:
    return ",".join(
        (
            str(record.k),
            repr(record.mean_train_loss),
            repr(record.grad_norm_sq),
            repr(record.grad_norm_1pg_sq),
            repr(record.consensus_err),
            str(record.oracle_calls),
            repr(record.wall_ms),
        )
    )


def write_csv(records, path: str | Path) -> None:
    """Write records to ``path`` atomically (temp file then rename)."""
    path = Path(path)
    body = "\n".join([",".join(CSV_FIELDS)] + [_format_row(r) for r in records]) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path: str | Path) -> list[IterationRecord]:
    """Read back a record CSV written by :func:`write_csv`."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != ",".join(CSV_FIELDS):
        raise ValueError(f"{path} does not carry the expected record header")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        records.append(
            IterationRecord(
                k=int(parts[0]),
                mean_train_loss=float(parts[1]),
                grad_norm_sq=float(parts[2]),
                grad_norm_1pg_sq=float(parts[3]),
                consensus_err=float(parts[4]),
                oracle_calls=int(parts[5]),
                wall_ms=float(parts[6]),
            )
        )
    return records


def records_match(a, b) -> bool:
    """Exact equality of two record sequences, ignoring wall-clock timing."""
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if (
            ra.k != rb.k
            or ra.mean_train_loss != rb.mean_train_loss
            or ra.grad_norm_sq != rb.grad_norm_sq
            or ra.grad_norm_1pg_sq != rb.grad_norm_1pg_sq
            or ra.consensus_err != rb.consensus_err
            or ra.oracle_calls != rb.oracle_calls
        ):
            return False
    return True


def probe_assumptions(
    problem,
    sample_points,
    draws_per_point: int = 4,
    rng: np.random.Generator | None = None,
) -> AssumptionProbe:
    """Empirically probe gradient variance, similarity and smoothness.

    ``zeta_hat`` scans per-coordinate deviations of stochastic gradients
    from the local full-batch gradient; ``sigma2_hat`` scans local-vs-global
    gradient gaps; ``lipschitz_hat`` scans difference quotients of the
    stochastic gradient over all pairs of probe points under a shared
    realization.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    points = [np.asarray(x, dtype=float) for x in sample_points]
    if not points:
        raise ValueError("need at least one probe point")
    zeta_hat = 0.0
    sigma2_hat = 0.0
    lipschitz_hat = 0.0
    for x in points:
        global_grad = problem.true_global_gradient(x)
        for agent in range(problem.local_count):
            local_grad = problem.true_local_gradient(agent, x)
            sigma2_hat = max(sigma2_hat, float(np.linalg.norm(local_grad - global_grad)))
            for _ in range(draws_per_point):
                xi = problem.sample(agent, rng)
                deviation = problem.stochastic_gradient(agent, x, xi) - local_grad
                zeta_hat = max(zeta_hat, float(np.abs(deviation).max()))
    for x, y in combinations(points, 2):
        gap = float(np.linalg.norm(x - y))
        if gap == 0.0:
            continue
        for agent in range(problem.local_count):
            xi = problem.sample(agent, rng)
            num = np.linalg.norm(
                problem.stochastic_gradient(agent, x, xi)
                - problem.stochastic_gradient(agent, y, xi)
            )
            lipschitz_hat = max(lipschitz_hat, float(num) / gap)
    return AssumptionProbe(zeta_hat=zeta_hat, sigma2_hat=sigma2_hat, lipschitz_hat=lipschitz_hat)
