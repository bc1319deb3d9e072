"""Experiment orchestration: config files, batteries, sweeps, baselines.

Configs are flat ``key = value`` lines with dotted section prefixes
(``topology.n = 10``); ``#`` starts a comment.  A battery runs every
configured algorithm over every master seed, writes one record CSV per
(algorithm, seed) plus a ``summary.csv`` of per-algorithm medians, and is
reproducible byte for byte apart from the wall-clock column.
"""

from __future__ import annotations

import importlib.resources
import math
import os
import statistics
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dynamics, estimator, graph, metrics, problems

__all__ = [
    "ConfigError",
    "AlgorithmSpec",
    "ExperimentConfig",
    "RunResult",
    "BatteryResult",
    "parse_config",
    "load_config",
    "bundled_config",
    "build_problem",
    "build_topology",
    "resolve_hyperparams",
    "run_battery",
    "run_baseline_dsgd",
    "gamma_sweep",
    "record_csv_fingerprint",
    "self_check",
]

SUMMARY_FIELDS = (
    "algorithm",
    "gamma",
    "estimator",
    "seed_count",
    "median_final_loss",
    "median_avg_grad_norm_sq",
    "median_avg_consensus_err",
    "median_accuracy",
)

SWEEP_FIELDS = (
    "gamma",
    "estimator",
    "within_guarantee_range",
    "seed_count",
    "median_initial_loss",
    "median_final_loss",
    "median_avg_grad_norm_sq",
    "median_avg_consensus_err",
    "median_accuracy",
)

# Loss values in summaries are the full-batch loss at the mean iterate, not
# the average of per-agent losses.
_SUMMARY_NOTE = "# losses are full-batch values at the mean iterate"

ALGORITHM_KINDS = ("zoom", "zoom_pb", "dsgd")


class ConfigError(ValueError):
    """The experiment configuration is malformed or incomplete."""


@dataclass
class AlgorithmSpec:
    """One algorithm entry of a battery, before hyperparameter resolution.

    ``eta`` is either the literal string ``"theorem"`` or an explicit float;
    ``smoothing`` is ``theorem_decay[:kappa]``, ``fixed:<value>`` or
    ``scaled_fixed:<c>`` (fixed radius ``c / sqrt(T * p)``).  ``alpha``
    defaults to ``alpha_frac`` times the topology's admissible maximum.
    """

    label: str
    kind: str
    estimator: str = "forward"
    gamma: float | None = None
    eta: str | float = "theorem"
    alpha: float | None = None
    alpha_frac: float = 0.9
    n_c: int = 1
    smoothing: str = "theorem_decay:1.0"

    def __post_init__(self) -> None:
        if self.kind not in ALGORITHM_KINDS:
            raise ConfigError(f"unknown algorithm kind {self.kind!r} for {self.label!r}")
        if self.estimator not in dynamics.ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r} for {self.label!r}")


@dataclass
class ExperimentConfig:
    """Everything a battery needs: problem, topology, algorithms, seeds."""

    problem: dict = field(default_factory=dict)
    topology: dict = field(default_factory=dict)
    algorithms: list[AlgorithmSpec] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    T: int = 1000
    record_every: int = 10
    out_dir: str | None = None
    jobs: int = 1
    init: str = "zeros"
    init_scale: float = 1.0

    def validate(self) -> None:
        if not self.algorithms:
            raise ConfigError("at least one algorithm must be configured")
        if not self.seeds:
            raise ConfigError("at least one master seed must be configured")
        if self.T < 0:
            raise ConfigError("run.T must be nonnegative")
        if self.record_every < 1:
            raise ConfigError("run.record_every must be at least 1")
        if self.jobs < 1:
            raise ConfigError("run.jobs must be at least 1")


def _coerce(value: str):
    lowered = value.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines into an :class:`ExperimentConfig`."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()

    cfg = ExperimentConfig()
    defaults: dict[str, str] = {}
    per_algorithm: dict[str, dict[str, str]] = {}
    labels: list[str] = []

    for key, value in pairs.items():
        if key.startswith("problem."):
            cfg.problem[key[len("problem.") :]] = _coerce(value)
        elif key.startswith("topology."):
            cfg.topology[key[len("topology.") :]] = _coerce(value)
        elif key.startswith("defaults."):
            defaults[key[len("defaults.") :]] = value
        elif key.startswith("algorithm."):
            rest = key[len("algorithm.") :]
            if "." not in rest:
                raise ConfigError(f"algorithm key {key!r} needs a '<label>.<field>' suffix")
            label, fieldname = rest.split(".", 1)
            per_algorithm.setdefault(label, {})[fieldname] = value
        elif key == "algorithms":
            labels = [token.strip() for token in value.split(",") if token.strip()]
        elif key == "run.T":
            cfg.T = int(value)
        elif key == "run.record_every":
            cfg.record_every = int(value)
        elif key == "run.seeds":
            cfg.seeds = [int(token) for token in value.split(",") if token.strip()]
        elif key == "run.out":
            cfg.out_dir = value
        elif key == "run.jobs":
            cfg.jobs = int(value)
        elif key == "run.init":
            cfg.init = value
        elif key == "run.init_scale":
            cfg.init_scale = float(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    converters = {
        "estimator": str,
        "gamma": float,
        "eta": lambda v: v if v == "theorem" else float(v),
        "alpha": float,
        "alpha_frac": float,
        "n_c": int,
        "smoothing": str,
    }
    for label in labels:
        fields = dict(defaults)
        fields.update(per_algorithm.get(label, {}))
        kind = fields.pop("kind", label)
        kwargs = {}
        for name, value in fields.items():
            if name not in converters:
                raise ConfigError(f"unknown algorithm field {name!r} for {label!r}")
            kwargs[name] = converters[name](value)
        cfg.algorithms.append(AlgorithmSpec(label=label, kind=kind, **kwargs))

    stray = set(per_algorithm) - set(labels)
    if stray:
        raise ConfigError(f"algorithm settings for unlisted labels: {sorted(stray)}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a config from a file path or from the bundled configs by name."""
    candidate = Path(path)
    if candidate.exists():
        return parse_config(candidate.read_text())
    return bundled_config(str(path))


def bundled_config(name: str) -> ExperimentConfig:
    """Load one of the configs shipped inside the package (e.g. ``paper_iv_a``)."""
    if not name.endswith(".cfg"):
        name = name + ".cfg"
    resource = importlib.resources.files("zoswarm").joinpath("configs", name)
    if not resource.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return parse_config(resource.read_text())


def build_problem(cfg: ExperimentConfig) -> problems.StochasticProblem:
    """Instantiate the configured problem."""
    spec = dict(cfg.problem)
    name = spec.pop("name", None)
    if name == "classification":
        dataset = problems.make_synthetic_classification(
            n_train=spec.pop("n_train", 2000),
            n_test=spec.pop("n_test", 200),
            d=spec.pop("d", 100),
            n_agents=spec.pop("n_agents", 10),
            seed=spec.pop("seed", 0),
        )
        shared = spec.pop("shared_pool", False)
        if spec:
            raise ConfigError(f"unknown classification settings: {sorted(spec)}")
        return problems.ClassificationProblem(dataset, shared_pool=shared)
    if name == "quadratic_toy":
        toy = problems.make_quadratic_toy(
            n_agents=spec.pop("n_agents", 5),
            p=spec.pop("p", 10),
            seed=spec.pop("seed", 0),
            zeta=spec.pop("zeta", 0.0),
            spread=spec.pop("spread", 1.0),
        )
        if spec:
            raise ConfigError(f"unknown quadratic_toy settings: {sorted(spec)}")
        return toy
    raise ConfigError(f"unknown problem name {name!r}")


def build_topology(cfg: ExperimentConfig) -> graph.Topology:
    """Instantiate the configured communication graph."""
    spec = dict(cfg.topology)
    n = spec.pop("n", None)
    prob = spec.pop("prob", None)
    seed = spec.pop("seed", 0)
    if spec:
        raise ConfigError(f"unknown topology settings: {sorted(spec)}")
    if n is None or prob is None:
        raise ConfigError("topology needs both 'n' and 'prob'")
    return graph.erdos_renyi(int(n), float(prob), seed=int(seed))


def _parse_smoothing(token: str, p: int, T: int) -> estimator.SmoothingSchedule:
    head, _, arg = token.partition(":")
    if head == "theorem_decay":
        kappa = float(arg) if arg else 1.0
        return estimator.SmoothingSchedule(kappa_delta=kappa, mode="theorem_decay")
    if head == "fixed":
        if not arg:
            raise ConfigError("smoothing 'fixed' needs a value, e.g. fixed:0.01")
        return estimator.SmoothingSchedule(mode="fixed", fixed_value=float(arg))
    if head == "scaled_fixed":
        if not arg:
            raise ConfigError("smoothing 'scaled_fixed' needs a coefficient, e.g. scaled_fixed:10")
        if T < 1:
            raise ConfigError("scaled_fixed smoothing needs a positive horizon")
        return estimator.SmoothingSchedule(
            mode="fixed", fixed_value=float(arg) / math.sqrt(T * p)
        )
    raise ConfigError(f"unknown smoothing spec {token!r}")


def resolve_hyperparams(
    spec: AlgorithmSpec,
    profile: graph.SpectralProfile,
    n_agents: int,
    p: int,
    T: int,
) -> tuple[dynamics.HyperParams, str]:
    """Turn an algorithm spec into concrete hyperparameters.

    Returns the parameters and a faithfulness label: ``theorem`` when both
    the gradient step and the smoothing follow the schedule from the
    analysis, ``experiment`` when either is overridden explicitly.
    """
    smoothing = _parse_smoothing(spec.smoothing, p, T)
    if spec.eta == "theorem":
        eta, _ = dynamics.theorem_schedule(n_agents, p, max(T, 1))
    else:
        eta = float(spec.eta)
    gamma = spec.gamma
    if gamma is None:
        gamma = 0.7 if spec.kind == "zoom_pb" else 1.0
    alpha = spec.alpha if spec.alpha is not None else spec.alpha_frac * profile.alpha_max
    params = dynamics.HyperParams(
        alpha=alpha,
        eta=eta,
        T=T,
        gamma=gamma,
        n_c=spec.n_c,
        estimator=spec.estimator,
        smoothing=smoothing,
    )
    faithful = "theorem" if spec.eta == "theorem" and smoothing.mode == "theorem_decay" else "experiment"
    return params, faithful


@dataclass
class RunResult:
    """One (algorithm, seed) execution with its summary and CSV location."""

    label: str
    kind: str
    seed: int
    params: dynamics.HyperParams
    trajectory: dynamics.Trajectory
    summary: metrics.RunSummary
    csv_path: Path | None = None


@dataclass
class BatteryResult:
    """All runs of a battery plus the aggregated summary rows."""

    runs: list[RunResult]
    summary_rows: list[dict]
    out_dir: Path | None = None
    summary_path: Path | None = None

    def runs_for(self, label: str) -> list[RunResult]:
        return [r for r in self.runs if r.label == label]


def _median_or_none(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return float(statistics.median(values))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(path: Path, fields, rows, comments=()) -> None:
    lines = list(comments) + [",".join(fields)]
    for row in rows:
        lines.append(",".join(_format_cell(row[f]) for f in fields))
    body = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _execute(tasks, jobs: int):
    """Run the (callable,) task list, optionally on a thread pool.

    Each run owns its RNG streams, so results are independent of the degree
    of parallelism; only file writes need the per-file atomic rename.
    """
    if jobs <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def run_battery(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    jobs: int | None = None,
    quiet: bool = False,
    seeds: list[int] | None = None,
) -> BatteryResult:
    """Run every configured (algorithm, seed) pair and aggregate medians.

    Writes one record CSV per run plus ``summary.csv`` when an output
    directory is known (argument wins over ``run.out`` in the config); runs
    purely in memory otherwise.  Rerunning with identical config and seeds
    reproduces byte-identical outputs apart from the wall-clock column.
    """
    config.validate()
    seeds = list(seeds) if seeds is not None else list(config.seeds)
    if not seeds:
        raise ConfigError("at least one master seed is required")
    problem = build_problem(config)
    topo = build_topology(config)
    if problem.local_count != topo.n:
        raise ConfigError(
            f"problem has {problem.local_count} agents but topology.n = {topo.n}"
        )
    profile = graph.laplacian_spectrum(topo)

    resolved: list[tuple[AlgorithmSpec, dynamics.HyperParams, str]] = []
    for spec in config.algorithms:
        params, faithful = resolve_hyperparams(spec, profile, topo.n, problem.dimension, config.T)
        resolved.append((spec, params, faithful))

    target = Path(out_dir) if out_dir is not None else (
        Path(config.out_dir) if config.out_dir else None
    )
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)

    def make_task(spec: AlgorithmSpec, params: dynamics.HyperParams, seed: int):
        def task() -> RunResult:
            trajectory = dynamics.run(
                topo,
                problem,
                params,
                algorithm=spec.kind,
                seed=seed,
                record_every=config.record_every,
                init=config.init,
                init_scale=config.init_scale,
            )
            summary = metrics.summarize(trajectory)
            csv_path = None
            if target is not None:
                csv_path = target / f"{spec.label}_seed{seed}.csv"
                metrics.write_csv(trajectory.records, csv_path)
            return RunResult(
                label=spec.label,
                kind=spec.kind,
                seed=seed,
                params=params,
                trajectory=trajectory,
                summary=summary,
                csv_path=csv_path,
            )

        return task

    tasks = [
        make_task(spec, params, seed)
        for spec, params, _ in resolved
        for seed in seeds
    ]
    runs = _execute(tasks, jobs if jobs is not None else config.jobs)

    summary_rows = []
    comments = [_SUMMARY_NOTE]
    for spec, params, faithful in resolved:
        own = [r for r in runs if r.label == spec.label]
        summary_rows.append(
            {
                "algorithm": spec.label,
                "gamma": params.gamma,
                "estimator": spec.estimator if spec.kind != "dsgd" else "-",
                "seed_count": len(own),
                "median_final_loss": _median_or_none(r.summary.final_loss for r in own),
                "median_avg_grad_norm_sq": _median_or_none(
                    r.summary.avg_grad_norm_sq for r in own
                ),
                "median_avg_consensus_err": _median_or_none(
                    r.summary.avg_consensus_err for r in own
                ),
                "median_accuracy": _median_or_none(r.summary.final_accuracy for r in own),
            }
        )
        comments.append(
            f"# {spec.label}: kind={spec.kind} eta={params.eta!r} "
            f"delta_mode={params.smoothing.mode} schedule={faithful}-faithful"
        )
        if not quiet:
            row = summary_rows[-1]
            acc = row["median_accuracy"]
            acc_text = f" accuracy={acc:.4f}" if acc is not None else ""
            print(
                f"[battery] {spec.label}: median final loss "
                f"{row['median_final_loss']:.6g} over {len(own)} seed(s){acc_text}"
            )

    summary_path = None
    if target is not None:
        summary_path = target / "summary.csv"
        _write_table(summary_path, SUMMARY_FIELDS, summary_rows, comments)
    return BatteryResult(
        runs=runs, summary_rows=summary_rows, out_dir=target, summary_path=summary_path
    )


def run_baseline_dsgd(config: ExperimentConfig, seed: int | None = None) -> dynamics.Trajectory:
    """Run the first-order reference baseline once.

    Same loop structure and RNG discipline as the zeroth-order runs; only
    the gradient construction differs (the analytic per-sample gradient
    replaces the estimate), so the realization draws match those of a
    zeroth-order run with the same seed.
    """
    config.validate()
    problem = build_problem(config)
    topo = build_topology(config)
    profile = graph.laplacian_spectrum(topo)
    spec = AlgorithmSpec(label="dsgd", kind="dsgd")
    if config.algorithms:
        base = config.algorithms[0]
        spec.eta = base.eta
        spec.alpha = base.alpha
        spec.alpha_frac = base.alpha_frac
    params, _ = resolve_hyperparams(spec, profile, topo.n, problem.dimension, config.T)
    return dynamics.run(
        topo,
        problem,
        params,
        algorithm="dsgd",
        seed=seed if seed is not None else config.seeds[0],
        record_every=config.record_every,
        init=config.init,
        init_scale=config.init_scale,
    )


def gamma_sweep(
    config: ExperimentConfig,
    gammas,
    out_dir: str | Path | None = None,
    quiet: bool = False,
) -> list[dict]:
    """Run the powerball variant across ``gammas`` for both estimators.

    One battery row per (gamma, estimator), median over the config's seeds.
    Gammas outside ``[1/2, 1]`` still run but are flagged as outside the
    range the convergence guarantees cover.
    """
    gammas = list(gammas)
    if not gammas:
        raise ConfigError("gamma sweep needs at least one gamma value")
    base = config.algorithms[0] if config.algorithms else AlgorithmSpec(label="zoom_pb", kind="zoom_pb")
    sweep_cfg = replace(
        config,
        problem=dict(config.problem),
        topology=dict(config.topology),
        algorithms=[],
        seeds=list(config.seeds),
    )
    for gamma in gammas:
        for est in dynamics.ESTIMATORS:
            label = f"zoom_pb_g{gamma:g}_{est}"
            sweep_cfg.algorithms.append(
                AlgorithmSpec(
                    label=label,
                    kind="zoom_pb",
                    estimator=est,
                    gamma=float(gamma),
                    eta=base.eta,
                    alpha=base.alpha,
                    alpha_frac=base.alpha_frac,
                    n_c=base.n_c,
                    smoothing=base.smoothing,
                )
            )
    battery = run_battery(sweep_cfg, out_dir=None, quiet=True)

    rows = []
    for gamma in gammas:
        for est in dynamics.ESTIMATORS:
            label = f"zoom_pb_g{gamma:g}_{est}"
            own = battery.runs_for(label)
            in_range = 0.5 <= gamma <= 1.0
            if not in_range and not quiet:
                print(f"[sweep] gamma={gamma:g} lies outside [0.5, 1] covered by the guarantees")
            rows.append(
                {
                    "gamma": float(gamma),
                    "estimator": est,
                    "within_guarantee_range": in_range,
                    "seed_count": len(own),
                    "median_initial_loss": _median_or_none(
                        r.trajectory.records[0].mean_train_loss for r in own
                    ),
                    "median_final_loss": _median_or_none(r.summary.final_loss for r in own),
                    "median_avg_grad_norm_sq": _median_or_none(
                        r.summary.avg_grad_norm_sq for r in own
                    ),
                    "median_avg_consensus_err": _median_or_none(
                        r.summary.avg_consensus_err for r in own
                    ),
                    "median_accuracy": _median_or_none(r.summary.final_accuracy for r in own),
                }
            )
            if not quiet:
                row = rows[-1]
                print(
                    f"[sweep] gamma={gamma:g} {est}: median final loss "
                    f"{row['median_final_loss']:.6g}"
                )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "sweep.csv", SWEEP_FIELDS, rows, [_SUMMARY_NOTE])
    return rows


def record_csv_fingerprint(path: str | Path) -> str:
    """Record-CSV body with comments and the wall-clock column stripped.

    Wall time is the only nondeterministic quantity a record CSV carries;
    everything else must reproduce byte for byte across reruns.
    """
    kept = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            continue
        kept.append(line.rsplit(",", 1)[0])
    return "\n".join(kept)


def _check_spectrum_path3() -> None:
    topo = graph.Topology(3, np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float))
    profile = graph.laplacian_spectrum(topo)
    eigs = np.linalg.eigvalsh(profile.laplacian)
    assert np.allclose(eigs, [0.0, 1.0, 3.0], atol=1e-10)
    assert abs(profile.alpha_max - 1.0 / 18.0) < 1e-10


def _check_spectrum_pair() -> None:
    topo = graph.Topology(2, np.array([[0.0, 1.0], [1.0, 0.0]]))
    profile = graph.laplacian_spectrum(topo)
    assert abs(profile.rho2 - 2.0) < 1e-12
    assert abs(profile.alpha_max - 0.25) < 1e-12


def _check_connectivity() -> None:
    path3 = graph.Topology(3, np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float))
    broken = graph.Topology(3, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float))
    assert graph.is_connected(path3)
    assert not graph.is_connected(broken)


def _check_forward_estimate() -> None:
    sample = estimator.CoordinateSample((0,))
    got = estimator.forward_estimate(lambda z: float(z @ z), np.array([1.0, 0.0]), sample, 0.1)
    assert np.allclose(got, [4.2, 0.0], atol=1e-12)


def _check_central_quadratic() -> None:
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4))
    hessian = a + a.T
    b = rng.standard_normal(4)
    x = rng.standard_normal(4)
    oracle = lambda z: float(0.5 * z @ hessian @ z + b @ z)
    sample = estimator.CoordinateSample((1, 3))
    got = estimator.central_estimate(oracle, x, sample, 0.05)
    grad = hessian @ x + b
    expected = np.zeros(4)
    expected[[1, 3]] = (4 / 2) * grad[[1, 3]]
    assert np.allclose(got, expected, rtol=1e-9)


def _check_subset_average() -> None:
    from itertools import combinations

    rng = np.random.default_rng(2)
    p, n_c, delta = 4, 2, 0.05
    x = rng.standard_normal(p)
    c = rng.standard_normal(p)
    oracle = lambda z: float(0.5 * np.sum((z - c) ** 2))
    full = np.array([(oracle(x + delta * np.eye(p)[j]) - oracle(x)) / delta for j in range(p)])
    total = np.zeros(p)
    subsets = list(combinations(range(p), n_c))
    for s in subsets:
        total += estimator.forward_estimate(oracle, x, estimator.CoordinateSample(s), delta)
    assert np.allclose(total / len(subsets), full, atol=1e-10)


def _check_reduction() -> None:
    topo = graph.erdos_renyi(4, 0.8, seed=1)
    problem = problems.make_quadratic_toy(4, 6, seed=3, zeta=0.3)
    profile = graph.laplacian_spectrum(topo)
    eta, smoothing = dynamics.theorem_schedule(4, 6, 200)
    params = dynamics.HyperParams(
        alpha=0.9 * profile.alpha_max, eta=eta, T=200, gamma=1.0, smoothing=smoothing
    )
    a = dynamics.run(topo, problem, params, algorithm="zoom", seed=11)
    b = dynamics.run(topo, problem, params, algorithm="zoom_pb", seed=11)
    assert metrics.records_match(a.records, b.records)
    assert np.array_equal(a.final_state.iterates, b.final_state.iterates)


def _check_consensus_contraction() -> None:
    topo = graph.Topology(3, np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float))
    profile = graph.laplacian_spectrum(topo)
    problem = problems.make_quadratic_toy(3, 4, seed=0)
    params = dynamics.HyperParams(alpha=0.9 * profile.alpha_max, eta=0.0, T=1)
    streams = dynamics.RunStreams.from_seed(0, 3)
    state = dynamics.SwarmState(np.random.default_rng(9).standard_normal((3, 4)), 0)
    previous = metrics.consensus_error(state.iterates)
    for _ in range(300):
        state = dynamics.zoom_step(state, profile, params, problem, streams)
        current = metrics.consensus_error(state.iterates)
        assert current <= previous + 1e-12
        previous = current
    assert previous < 1e-6


def _check_gradient_vs_differences() -> None:
    dataset = problems.make_synthetic_classification(40, 10, 6, 2, seed=8)
    x = np.random.default_rng(3).standard_normal(6)
    analytic = problems.nlls_true_gradient(dataset, 0, x)
    sl = dataset.shard_slice(0)
    feats = dataset.train_features[sl]
    labels = dataset.train_labels[sl].astype(float)
    loss = lambda z: float(np.mean((labels - problems.sigmoid(feats @ z)) ** 2))
    fd = np.zeros(6)
    for j in range(6):
        e = np.zeros(6)
        e[j] = 1e-5
        fd[j] = (loss(x + e) - loss(x - e)) / 2e-5
    assert np.linalg.norm(fd - analytic) <= 1e-5 * max(np.linalg.norm(analytic), 1e-12)


def _check_mean_drift() -> None:
    topo = graph.erdos_renyi(4, 0.9, seed=0)
    profile = graph.laplacian_spectrum(topo)
    problem = problems.make_quadratic_toy(4, 5, seed=1, zeta=0.2)
    eta, smoothing = dynamics.theorem_schedule(4, 5, 100)
    params = dynamics.HyperParams(
        alpha=0.5 * profile.alpha_max, eta=eta, T=100, gamma=1.0, smoothing=smoothing
    )
    streams = dynamics.RunStreams.from_seed(4, 4)
    shadow = dynamics.RunStreams.from_seed(4, 4)
    state = dynamics.SwarmState(np.zeros((4, 5)), 0)
    for _ in range(5):
        nxt = dynamics.zoom_step(state, profile, params, problem, streams)
        total = np.zeros(5)
        delta = params.smoothing.delta(5, 4, state.k)
        for i in range(4):
            xi = problem.sample(i, shadow.data[i])
            coords = estimator.sample_coordinates(5, 1, shadow.coords[i])
            total += estimator.forward_estimate(
                lambda z, a=i, r=xi: problem.evaluate(a, z, r), state.iterates[i], coords, delta
            )
        predicted = state.mean_iterate - params.eta / 4 * total
        assert np.allclose(nxt.mean_iterate, predicted, atol=1e-10)
        state = nxt


SELF_CHECKS = (
    ("path-graph spectrum", _check_spectrum_path3),
    ("two-agent spectrum", _check_spectrum_pair),
    ("connectivity detection", _check_connectivity),
    ("forward difference estimate", _check_forward_estimate),
    ("central estimate exact on quadratics", _check_central_quadratic),
    ("subset-average unbiasedness", _check_subset_average),
    ("powerball gamma=1 reduction", _check_reduction),
    ("consensus contraction", _check_consensus_contraction),
    ("analytic gradient vs finite differences", _check_gradient_vs_differences),
    ("mean-iterate drift identity", _check_mean_drift),
)


def self_check(quiet: bool = False) -> bool:
    """Run the invariant self-test battery; True iff every check passes."""
    all_passed = True
    for name, check in SELF_CHECKS:
        try:
            check()
        except Exception as exc:  # report and keep going; the CLI surfaces the verdict
            all_passed = False
            if not quiet:
                print(f"FAIL {name}: {exc!r}")
        else:
            if not quiet:
                print(f"PASS {name}")
    return all_passed
