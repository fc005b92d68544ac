"""Declarative experiment runner.

A config is a JSON document with four top-level keys: ``version``,
``system``, ``estimator`` and ``run``.  Unknown keys anywhere are rejected.
See ``README.md`` for the full schema and :func:`preset` for the built-in
configurations.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import L2Baseline
from .diagnostics import METRIC_COLUMNS, MetricRecorder, MetricSeries, sentencing_accuracy
from .errors import ConfigError, DataError, NumericalError
from .estimator import TSWLAD, TwoStepEstimator, initial_point
from .model import (
    ARProcess,
    Datum,
    FixedDesign,
    NoiseModel,
    SaturationSpec,
    SystemSpec,
    WeightPolicy,
    noise_from_dict,
    simulate_trajectory,
)
from .projection import AdmissibleSet, admissible_set_from_dict

CONFIG_VERSION = 1

_SYSTEM_KEYS = {"dimension", "A", "regressor_scale", "regressor_decay", "dataset", "theta",
                "true_noise", "saturation", "horizon"}
_ESTIMATOR_KEYS = {"algorithm", "assumed_noise", "admissible_set", "mu_bar", "mu", "weights",
                   "theta_bar0", "theta0", "P_bar0", "P0", "bound", "init_least_squares"}
_RUN_KEYS = {"seeds", "n_seeds", "base_seed", "parallelism", "out", "checkpoint_every", "label"}

ALGORITHMS = {"tswlad": TSWLAD, "l2-baseline": L2Baseline}
_ALGO_ALIASES = {"tswlad": ("tswlad",), "l2-baseline": ("l2-baseline",), "baseline": ("l2-baseline",),
                 "both": ("tswlad", "l2-baseline")}


# --------------------------------------------------------------------------
# Config


@dataclass
class ExperimentConfig:
    system: dict
    estimator: dict
    run: dict
    version: int = CONFIG_VERSION

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        extra = set(d) - {"version", "system", "estimator", "run"}
        if extra:
            raise ConfigError(f"unknown top-level config keys: {sorted(extra)}")
        if d.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {d.get('version')!r}; expected {CONFIG_VERSION}")
        for name, allowed in (("system", _SYSTEM_KEYS), ("estimator", _ESTIMATOR_KEYS), ("run", _RUN_KEYS)):
            block = d.get(name, {})
            if not isinstance(block, dict):
                raise ConfigError(f"config block {name!r} must be a mapping")
            bad = set(block) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
        cfg = cls(copy.deepcopy(d["system"]), copy.deepcopy(d.get("estimator", {})),
                  copy.deepcopy(d.get("run", {})))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = cls.from_dict(d)
        ds = cfg.system.get("dataset")
        if ds and not os.path.isabs(ds):
            cfg.system["dataset"] = str((Path(path).parent / ds).resolve())
        return cfg

    def to_dict(self) -> dict:
        return {"version": self.version, "system": self.system, "estimator": self.estimator, "run": self.run}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- derived objects
    @property
    def algorithms(self) -> tuple[str, ...]:
        algo = self.estimator.get("algorithm", "both")
        if algo not in _ALGO_ALIASES:
            raise ConfigError(f"unknown algorithm {algo!r}; choose tswlad, l2-baseline or both")
        return _ALGO_ALIASES[algo]

    @property
    def horizon(self) -> int:
        return int(self.system.get("horizon", 0))

    @property
    def seeds(self) -> list[int]:
        run = self.run
        if "seeds" in run:
            return sorted(int(s) for s in run["seeds"])
        n = int(run.get("n_seeds", 1))
        base = int(run.get("base_seed", 0))
        return list(range(base, base + n))

    def saturation(self) -> SaturationSpec:
        sat = self.system.get("saturation")
        if sat is None:
            raise ConfigError("system.saturation is required unless a dataset supplies thresholds")
        if len(sat) != 4:
            raise ConfigError("system.saturation must be [L, l, u, U]")
        return SaturationSpec(*map(float, sat))

    def true_noise(self) -> NoiseModel:
        return noise_from_dict(self.system.get("true_noise", {"kind": "gaussian", "sigma": 1.0}))

    def assumed_noise(self) -> NoiseModel:
        return noise_from_dict(self.estimator.get("assumed_noise", {"kind": "gaussian", "sigma": 1.0}))

    def dimension(self) -> int:
        if "theta" in self.system:
            return len(self.system["theta"])
        if "dimension" in self.system:
            return int(self.system["dimension"])
        if "A" in self.system:
            return len(self.system["A"])
        raise ConfigError("cannot infer the dimension; give system.dimension or system.theta")

    def admissible_set(self) -> AdmissibleSet:
        d = self.dimension()
        D = admissible_set_from_dict(self.estimator.get("admissible_set",
                                                        {"kind": "box", "radii": [10.0] * d}), d)
        if D.dim != d:
            raise ConfigError(f"admissible set has d={D.dim}, system has d={d}")
        return D

    def weight_policy(self) -> WeightPolicy:
        w = dict(self.estimator.get("weights", {"kind": "constant", "value": 1.0}))
        kind = w.pop("kind", "constant")
        if "values" in w:
            w["values"] = tuple(w["values"])
        try:
            return WeightPolicy(kind, **w)
        except TypeError as exc:
            raise ConfigError(f"bad weight policy: {exc}") from exc

    def regressors(self):
        s = self.system
        if s.get("dataset"):
            return None
        d = self.dimension()
        A = np.asarray(s.get("A", np.zeros((d, d))), dtype=float)
        if A.ndim == 1:
            A = np.diag(A)
        try:
            return ARProcess(A, s.get("regressor_scale", 1.0), s.get("regressor_decay", 0.0))
        except ValueError as exc:
            raise ConfigError(f"regressor scale/decay do not match the dimension of A {A.shape}: {exc}") from exc

    def validate(self) -> None:
        """Check every assumption-level constraint; raise ConfigError naming the one violated."""
        s, e = self.system, self.estimator
        d = self.dimension()
        if self.horizon < 0:
            raise ConfigError("system.horizon must be non-negative")
        if not s.get("dataset"):
            self.saturation()
            reg = self.regressors()
            if reg.dim != d:
                raise ConfigError(f"dimension mismatch: A is {reg.dim}x{reg.dim}, theta has d={d}")
            if "theta" not in s:
                raise ConfigError("system.theta is required for simulated systems")
        self.true_noise()
        assumed = self.assumed_noise()
        if not assumed.has_density:
            raise ConfigError("assumed noise must have a continuous known density (noise-density assumption)")
        if abs(assumed.cdf(0.0) - 0.5) > 1e-12:
            raise ConfigError("assumed noise must have median zero, F(0) = 1/2 (noise-density assumption)")
        D = self.admissible_set()
        if "theta" in s:
            theta = np.asarray(s["theta"], dtype=float)
            if theta.size != d:
                raise ConfigError(f"theta has d={theta.size}, expected {d}")
            if not D.interior_contains(theta):
                raise ConfigError("true parameter must be an interior point of the admissible set (admissible-set assumption)")
        for key in ("mu_bar", "mu"):
            val = float(e.get(key, 1.0))
            if not 0 < val < math.inf:
                raise ConfigError(f"estimator.{key} must be positive and finite")
        if e.get("bound") is not None and float(e["bound"]) < 0:
            raise ConfigError("estimator.bound must be non-negative (bound on sup |phi' x| over D)")
        self.weight_policy()
        self.algorithms
        if int(self.run.get("parallelism", 1)) < 1:
            raise ConfigError("run.parallelism must be at least 1")
        if int(self.run.get("checkpoint_every", 10)) < 1:
            raise ConfigError("run.checkpoint_every must be at least 1")

    def make_estimator(self, name: str, theta0=None) -> TwoStepEstimator:
        e = self.estimator
        kw = dict(
            mu_bar=float(e.get("mu_bar", 1.0)),
            mu=float(e.get("mu", 1.0)),
            theta_bar0=e.get("theta_bar0", theta0),
            theta0=e.get("theta0", theta0),
            P_bar0=e.get("P_bar0"),
            P0=e.get("P0"),
            weight_policy=self.weight_policy(),
            bound=e.get("bound"),
        )
        return ALGORITHMS[name](self.assumed_noise(), self.admissible_set(), **kw)


# --------------------------------------------------------------------------
# Presets

TABLE1_Q = (0.0, 0.1, 0.2, 0.3)
TABLE1_THETA = [5.0, 0.7, 2.0, -0.1, -0.6, -8.0]
TABLE1_A = [0.99, 0.5, 0.9, 0.01, 0.3, 0.7]


def table1_config(q: float = 0.0, n_seeds: int = 20, horizon: int = 10_000,
                  algorithm: str = "both") -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "version": 1,
        "system": {
            "A": TABLE1_A,
            "regressor_scale": [1.0, 5.0, 5.0, 5.0, 5.0, 5.0],
            "regressor_decay": [0.0, 0.25, 0.25, 0.25, 0.25, 0.25],
            "theta": TABLE1_THETA,
            "true_noise": {"kind": "mixture", "q": q, "sigma1": 1.0, "sigma2": math.sqrt(10.0)},
            "saturation": [0.0, 0.0, 25.0, 25.0],
            "horizon": horizon,
        },
        "estimator": {
            "algorithm": algorithm,
            "assumed_noise": {"kind": "gaussian", "sigma": 1.0},
            "admissible_set": {"kind": "box", "radii": [10.0] * 6},
            "mu_bar": 1.0,
            "mu": 1.0,
            "weights": {"kind": "constant", "value": 1.0},
        },
        "run": {"n_seeds": n_seeds, "base_seed": 0, "checkpoint_every": 10, "label": f"table1-q{q:g}"},
    })


def fig_regret_config(n_seeds: int = 1, horizon: int = 10_000) -> ExperimentConfig:
    cfg = table1_config(0.0, n_seeds=n_seeds, horizon=horizon, algorithm="tswlad")
    cfg.run["label"] = "fig-regret"
    cfg.run["checkpoint_every"] = 1
    return cfg


SENTENCING_THETA = [14.0, 5.0, 7.0, 3.0, -2.5]
SENTENCING_RANGE = (6.0, 36.0)


def sentencing_dataset(seed: int, n: int = 3000, q: float = 0.2, outlier_sigma: float = 40.0):
    """Synthetic fixed-design sentences with heavy-tailed contamination.

    Features: intercept, injury severity in [0, 1], two case-factor flags and
    a mitigating-factor count.  Sentences are clipped to a statutory range.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4747]))
    X = np.column_stack([
        np.ones(n),
        rng.uniform(0.0, 1.0, n),
        rng.integers(0, 2, n).astype(float),
        rng.integers(0, 2, n).astype(float),
        rng.poisson(1.0, n).astype(float),
    ])
    contaminated = rng.random(n) < q
    eps = np.where(contaminated, outlier_sigma, 5.0) * rng.standard_normal(n)
    lo, hi = SENTENCING_RANGE
    y = np.clip(X @ np.asarray(SENTENCING_THETA) + eps, lo, hi)
    return X, y


def write_sentencing_dataset(seed: int, path, **kw) -> None:
    X, y = sentencing_dataset(seed, **kw)
    spec = SaturationSpec.continuous(*SENTENCING_RANGE)
    emit_dataset([Datum(X[i], float(y[i]), spec) for i in range(len(y))], path)


def sentencing_config(dataset: str, n_seeds: int = 1, horizon: int | None = None,
                      theta0=None) -> ExperimentConfig:
    system = {"dataset": dataset, "theta": SENTENCING_THETA,
              "true_noise": {"kind": "gaussian", "sigma": 5.0}}
    if horizon is not None:
        system["horizon"] = horizon
    est = {
        "algorithm": "both",
        "assumed_noise": {"kind": "gaussian", "sigma": 5.0},
        "admissible_set": {"kind": "box", "center": [15.0, 0.0, 0.0, 0.0, 0.0], "radii": [15.0, 15.0, 15.0, 15.0, 15.0]},
        "mu_bar": 1000.0,
        "mu": 25.0,
        "weights": {"kind": "inverse_prediction"},
        "init_least_squares": 200,
    }
    if theta0 is not None:
        est["theta0"] = est["theta_bar0"] = list(theta0)
    return ExperimentConfig.from_dict({
        "version": 1, "system": system, "estimator": est,
        "run": {"n_seeds": n_seeds, "checkpoint_every": 10, "label": "sentencing-demo"},
    })


PRESETS = ("table1", "fig-regret", "sentencing-demo")


def preset(name: str, n_seeds: int | None = None, workdir=None) -> list[ExperimentConfig]:
    """Configs for a built-in preset (``table1`` yields one config per q)."""
    if name == "table1":
        return [table1_config(q, n_seeds=n_seeds or 20) for q in TABLE1_Q]
    if name == "fig-regret":
        return [fig_regret_config(n_seeds=n_seeds or 1)]
    if name == "sentencing-demo":
        # the fixed design has no run-time randomness, so each seed gets its own dataset
        workdir = Path(workdir or ".")
        workdir.mkdir(parents=True, exist_ok=True)
        configs = []
        for seed in range(n_seeds or 1):
            path = workdir / f"sentencing_demo_seed{seed}.csv"
            write_sentencing_dataset(seed, path)
            cfg = sentencing_config(str(path.resolve()))
            cfg.run["label"] = f"sentencing-demo-seed{seed}"
            configs.append(cfg)
        return configs
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


# --------------------------------------------------------------------------
# Datasets and CSV output


def dataset_header(d: int, with_weight: bool = False) -> list[str]:
    cols = [f"phi_{i}" for i in range(d)] + ["y", "L", "l", "u", "U"]
    return cols + ["b"] if with_weight else cols


def load_dataset(path) -> list[Datum]:
    """Read a dataset CSV with header ``phi_0..phi_{d-1}, y, L, l, u, U[, b]``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header") from None
        with_weight = header[-1:] == ["b"]
        d = len(header) - 5 - int(with_weight)
        if d < 1 or header != dataset_header(d, with_weight):
            raise DataError(f"{path}: header {header} does not match phi_0..phi_{{d-1}},y,L,l,u,U[,b]")
        data = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{line}: non-finite value")
            phi = np.array(vals[:d])
            y, L, l, u, U = vals[d:d + 5]
            b = vals[d + 5] if with_weight else None
            try:
                spec = SaturationSpec(L, l, u, U)
            except ConfigError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
            if not L <= y <= U:
                raise DataError(f"{path}:{line}: observation {y} outside [L, U] = [{L}, {U}]")
            if b is not None and not 0.0 < b <= 1.0:
                raise DataError(f"{path}:{line}: weight {b} outside (0, 1]")
            data.append(Datum(phi, y, spec, b))
    return data


def emit_dataset(data, path) -> None:
    data = list(data)
    d = data[0].phi.size if data else 1
    with_weight = any(dt.weight is not None for dt in data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset_header(d, with_weight))
        for dt in data:
            row = [*dt.phi, dt.y, *dt.spec.as_tuple()]
            if with_weight:
                row.append(dt.weight)
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def emit_csv(series: MetricSeries, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in series.rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> MetricSeries:
    series = MetricSeries()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRIC_COLUMNS:
            raise DataError(f"{path}: unexpected metric columns {header}")
        for row in reader:
            series.rows.append((int(row[0]), *map(float, row[1:])))
    return series


# --------------------------------------------------------------------------
# Running


@dataclass
class SeedResult:
    seed: int
    final_errors: dict
    final_errors_bar: dict
    series: dict
    accuracy: dict = field(default_factory=dict)


@dataclass
class RunReport:
    label: str
    seeds: list
    final_errors: dict          # algorithm -> per-seed list, seed-sorted
    aggregates: dict            # algorithm -> {median, q1, q3, mean}
    series_files: dict          # algorithm -> per-seed CSV paths (empty when not written)
    provenance: dict
    results: list = field(default_factory=list, repr=False)
    accuracy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "seeds": self.seeds,
            "final_errors": self.final_errors,
            "aggregates": self.aggregates,
            "accuracy": self.accuracy,
            "series_files": self.series_files,
            "provenance": self.provenance,
        }


def build_stream(cfg: ExperimentConfig, seed: int) -> tuple[list[Datum], np.ndarray | None]:
    """The datum stream one seed feeds to every algorithm, plus the true parameter if known."""
    theta = np.asarray(cfg.system["theta"], dtype=float) if "theta" in cfg.system else None
    if cfg.system.get("dataset"):
        data = load_dataset(cfg.system["dataset"])
        if data and data[0].phi.size != cfg.dimension():
            raise ConfigError(f"dataset has d={data[0].phi.size}, config has d={cfg.dimension()}")
        h = cfg.system.get("horizon")
        return (data if h is None else data[:int(h)]), theta
    system = SystemSpec(theta, cfg.regressors(), cfg.true_noise(), cfg.saturation())
    return simulate_trajectory(system, cfg.horizon, seed), theta


def least_squares_start(data, n: int, D: AdmissibleSet):
    """Least-squares fit on the first ``n`` unsaturated points, as an initial estimate."""
    rows = [dt for dt in data[:n] if dt.spec.lower_threshold < dt.y < dt.spec.upper_threshold]
    if len(rows) < D.dim:
        return None
    X = np.array([dt.phi for dt in rows])
    y = np.array([dt.y for dt in rows])
    theta = np.linalg.lstsq(X, y, rcond=None)[0]
    return initial_point(D, theta)


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    data, theta = build_stream(cfg, seed)
    every = int(cfg.run.get("checkpoint_every", 10))
    theta0 = None
    n_init = int(cfg.estimator.get("init_least_squares", 0) or 0)
    if n_init:
        theta0 = least_squares_start(data, n_init, cfg.admissible_set())
        data = data[n_init:]
    finals, finals_bar, series, acc = {}, {}, {}, {}
    for name in cfg.algorithms:
        est = cfg.make_estimator(name, theta0)
        ref = theta if theta is not None else np.full(cfg.dimension(), np.nan)
        P0 = est.state.step2.P
        rec = MetricRecorder(ref, P0, every=every)
        for k, datum in enumerate(data):
            pred = est.predict(datum.phi, datum.spec)
            try:
                r = est.update(datum)
            except NumericalError as exc:
                raise NumericalError(f"{name}, seed {seed}, step {k}: {exc}", exc.trace) from exc
            rec.observe(datum, pred, r.weight)
            rec.checkpoint(est)
        if rec.n:
            rec.checkpoint(est, force=True)
        finals[name] = float(np.linalg.norm(ref - est.theta))
        finals_bar[name] = float(np.linalg.norm(ref - est.theta_bar))
        series[name] = rec.series
        if rec.n and min(rec.observations) > 0:
            acc[name] = sentencing_accuracy(zip(rec.observations, rec.predictions))
    return SeedResult(seed, finals, finals_bar, series, acc)


def _run_seed_job(args):
    cfg_dict, seed = args
    return run_seed(ExperimentConfig.from_dict(cfg_dict), seed)


def _aggregate(values) -> dict:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return {}
    q1, med, q3 = np.percentile(a, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "mean": float(a.mean())}


def run_experiment(cfg: ExperimentConfig, out=None, parallelism: int | None = None) -> RunReport:
    """Run every seed of ``cfg``; write CSVs and ``report.json`` under ``out`` when given."""
    cfg.validate()
    seeds = cfg.seeds
    workers = int(parallelism or cfg.run.get("parallelism", 1))
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed_job, [(cfg.to_dict(), s) for s in seeds]))
    else:
        results = [run_seed(cfg, s) for s in seeds]
    results.sort(key=lambda r: r.seed)

    out = out if out is not None else cfg.run.get("out")
    files = {name: [] for name in cfg.algorithms}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            for name in cfg.algorithms:
                path = out / f"{name}_seed{r.seed}.csv"
                emit_csv(r.series[name], path)
                files[name].append(str(path))

    finals = {name: [r.final_errors[name] for r in results] for name in cfg.algorithms}
    accuracy = {name: [r.accuracy[name] for r in results if name in r.accuracy] for name in cfg.algorithms}
    report = RunReport(
        label=cfg.run.get("label", "experiment"),
        seeds=[r.seed for r in results],
        final_errors=finals,
        aggregates={name: _aggregate(v) for name, v in finals.items()},
        series_files=files,
        provenance={"config_sha256": cfg.digest(), "seeds": seeds, "version": __version__,
                    "labels": {"l2-baseline": "TSQN-analog (reconstruction)"}},
        results=results,
        accuracy={k: v for k, v in accuracy.items() if v},
    )
    if out is not None:
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report
