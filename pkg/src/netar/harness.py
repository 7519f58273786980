"""Config-driven Monte Carlo benchmark runner and the panel pipeline.

An experiment simulates a dynamic network together with its attribute
process, fits each configured method on the first n observations (lag
order chosen by BIC), forecasts h steps ahead under the method's network
policy, and accumulates mean squared errors per (method, n, horizon)
over B replicates.  Replicate seeds derive from the root seed as
``SeedSequence(seed, spawn_key=(n_index, replicate))``, so reports are
byte-identical independent of scheduling; per-replicate fit failures are
dropped and counted, and a failure rate above 1 percent aborts the run.

The panel pipeline ingests quarterly levels plus annual weight matrices,
models the first differences with hold-last network forecasts, and
integrates the growth forecasts back to levels.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import io as nio
from .estimate import EstimationError, fit_lnar, fit_nar, fit_var, select_order_bic
from .forecast import HoldLast, Known, PerEdgeMarkov, difference, forecast_h, integrate
from .model import InnovationSpec, LnarSpec, NarSpec, simulate_lnar, simulate_nar
from .netdyn import (
    AdjacencySeries,
    FlipNetwork,
    MarkovEdgeNetwork,
    NeighborhoodFn,
    generate_density_matched_markov,
)

__all__ = [
    "MethodSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "example1_config",
    "example2_config",
    "validate_config",
    "config_from_json",
    "config_to_json",
    "CONFIG_SCHEMA",
    "PanelDataset",
    "ingest_panel",
    "run_rolling_forecast",
    "write_experiment_reports",
]

FAILURE_ABORT_RATE = 0.01


@dataclass(frozen=True)
class MethodSpec:
    """One estimation/forecasting method in an experiment.

    ``policy`` is one of ``known``, ``holdlast``, ``markov`` for the
    network-modulated families and ``none`` for the benchmark VAR.
    ``sparsity="network"`` masks VAR coefficients whose modulation mass
    is zero over the sample.
    """

    family: str
    policy: str = "known"
    g: Optional[NeighborhoodFn] = None
    sparsity: str = "none"
    freeze_markov: bool = True

    def __post_init__(self):
        if self.family not in ("nar", "lnar", "var"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "var":
            if self.policy != "none":
                object.__setattr__(self, "policy", "none")
        elif self.policy not in ("known", "holdlast", "markov"):
            raise ValueError(f"unknown network policy {self.policy!r}")
        if self.family != "var" and self.g is None:
            raise ValueError(f"{self.family} methods need a neighborhood function")

    @property
    def label(self) -> str:
        if self.family == "var":
            return "var" if self.sparsity == "none" else "var(masked)"
        return f"{self.family}({self.policy})"


@dataclass
class ExperimentConfig:
    experiment: str
    network: Union[MarkovEdgeNetwork, FlipNetwork]
    process: Union[NarSpec, LnarSpec]
    innov: InnovationSpec
    sample_sizes: Sequence[int]
    horizons: int
    replications: int
    seed: int
    methods: Sequence[MethodSpec]
    burn_in: int = 500
    p_max: int = 3
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replicate")
        if self.horizons < 1:
            raise ValueError("need at least one horizon")
        if not self.methods:
            raise ValueError("methods list must not be empty")


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "network", "process", "sample_sizes", "horizons",
                 "replications", "seed", "methods"],
    "properties": {
        "experiment": {"type": "string"},
        "network": {"oneOf": [
            {"properties": {"kind": {"const": "markov_edges"},
                            "stay": {"type": "array"}, "enter": {"type": "array"},
                            "initial": {}}, "required": ["kind", "stay", "enter"]},
            {"properties": {"kind": {"const": "flip"},
                            "persist_prob": {"type": "number"}}, "required": ["kind"]},
            {"properties": {"kind": {"const": "density_matched"}, "d": {"type": "integer"},
                            "mean_density": {"type": "number"},
                            "persistence": {"type": "number"}},
             "required": ["kind", "d", "mean_density", "persistence"]},
        ]},
        "process": {"description": "model spec document: type nar|lnar, p, A|alpha+beta, G, innov"},
        "sample_sizes": {"type": "array", "items": {"type": "integer", "minimum": 10}},
        "horizons": {"type": "integer", "minimum": 1},
        "replications": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "burn_in": {"type": "integer", "minimum": 0},
        "p_max": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "methods": {"type": "array", "items": {
            "properties": {
                "family": {"enum": ["nar", "lnar", "var"]},
                "policy": {"enum": ["known", "holdlast", "markov", "none"]},
                "g": {"description": "neighborhood descriptor"},
                "sparsity": {"enum": ["none", "network"]},
                "freeze_markov": {"type": "boolean"},
            },
            "required": ["family"],
        }},
    },
}


def validate_config(doc: dict) -> List[str]:
    """Hand-rolled schema check; returns a list of problems (empty when valid)."""
    problems = []
    for key in CONFIG_SCHEMA["required"]:
        if key not in doc:
            problems.append(f"missing required key {key!r}")
    if problems:
        return problems
    if not isinstance(doc["experiment"], str):
        problems.append("experiment must be a string")
    net = doc["network"]
    if not isinstance(net, dict) or net.get("kind") not in ("markov_edges", "flip",
                                                            "density_matched"):
        problems.append("network.kind must be markov_edges, flip or density_matched")
    proc = doc["process"]
    if not isinstance(proc, dict) or proc.get("type") not in ("nar", "lnar"):
        problems.append("process.type must be nar or lnar")
    if not (isinstance(doc["sample_sizes"], list) and doc["sample_sizes"]
            and all(isinstance(n, int) and n >= 10 for n in doc["sample_sizes"])):
        problems.append("sample_sizes must be a nonempty list of integers >= 10")
    for key, lo in (("horizons", 1), ("replications", 1)):
        if not (isinstance(doc[key], int) and doc[key] >= lo):
            problems.append(f"{key} must be an integer >= {lo}")
    if not isinstance(doc["seed"], int):
        problems.append("seed must be an integer")
    methods = doc["methods"]
    if not (isinstance(methods, list) and methods):
        problems.append("methods must be a nonempty list")
    else:
        for i, m in enumerate(methods):
            fam = m.get("family")
            if fam not in ("nar", "lnar", "var"):
                problems.append(f"methods[{i}].family must be nar, lnar or var")
            elif fam != "var":
                if m.get("policy", "known") not in ("known", "holdlast", "markov"):
                    problems.append(f"methods[{i}].policy invalid for {fam}")
                if "g" not in m:
                    problems.append(f"methods[{i}] needs a neighborhood descriptor g")
    return problems


def config_from_json(doc: dict) -> ExperimentConfig:
    problems = validate_config(doc)
    if problems:
        raise ValueError("invalid experiment config: " + "; ".join(problems))
    spec, innov = nio.model_spec_from_json(doc["process"])
    methods = []
    for m in doc["methods"]:
        g = NeighborhoodFn.from_json(m["g"]) if "g" in m else None
        methods.append(MethodSpec(
            family=m["family"], policy=m.get("policy", "known" if m["family"] != "var" else "none"),
            g=g, sparsity=m.get("sparsity", "none"),
            freeze_markov=bool(m.get("freeze_markov", True)),
        ))
    return ExperimentConfig(
        experiment=doc["experiment"],
        network=nio.network_model_from_json(doc["network"]),
        process=spec,
        innov=innov,
        sample_sizes=list(doc["sample_sizes"]),
        horizons=int(doc["horizons"]),
        replications=int(doc["replications"]),
        seed=int(doc["seed"]),
        methods=methods,
        burn_in=int(doc.get("burn_in", 500)),
        p_max=int(doc.get("p_max", 3)),
        out_dir=doc.get("out_dir"),
    )


def config_to_json(cfg: ExperimentConfig) -> dict:
    doc = {
        "experiment": cfg.experiment,
        "network": nio.network_model_to_json(cfg.network),
        "process": nio.model_spec_to_json(cfg.process, cfg.innov),
        "sample_sizes": list(cfg.sample_sizes),
        "horizons": cfg.horizons,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "burn_in": cfg.burn_in,
        "p_max": cfg.p_max,
        "methods": [],
    }
    if cfg.out_dir:
        doc["out_dir"] = cfg.out_dir
    for m in cfg.methods:
        entry = {"family": m.family, "policy": m.policy, "sparsity": m.sparsity,
                 "freeze_markov": m.freeze_markov}
        if m.g is not None:
            entry["g"] = m.g.to_json()
        doc["methods"].append(entry)
    return doc


def _replicate_seed(root_seed: int, n_index: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(n_index, rep))
    return np.random.default_rng(ss)


def _simulate_replicate(cfg: ExperimentConfig, n: int, rng: np.random.Generator):
    total = cfg.burn_in + n + cfg.horizons
    ads = cfg.network.simulate(total, rng=rng)
    if isinstance(cfg.process, LnarSpec):
        x = simulate_lnar(cfg.process, ads, cfg.innov, n=n + cfg.horizons,
                          burn_in=cfg.burn_in, rng=rng)
    else:
        x = simulate_nar(cfg.process, ads, cfg.innov, n=n + cfg.horizons,
                         burn_in=cfg.burn_in, rng=rng)
    return x, ads.drop_first(cfg.burn_in)


def _fit_with_bic(method: MethodSpec, x_est, ads_est, p_max: int):
    if method.family == "var":
        mask = None
        if method.sparsity == "network":
            d, n = x_est.shape
            mass = np.zeros((d, d))
            for t in range(min(len(ads_est), n - 1)):
                mass += np.abs(method.g.apply(ads_est[t])) if method.g is not None \
                    else np.abs(ads_est[t])
            base = (mass > 0).astype(float)
            mask = np.concatenate([base] * p_max, axis=1)
        sel = select_order_bic(x_est, p_max=p_max, family="var", mask=mask)
        sub = None if mask is None else mask[:, : x_est.shape[0] * sel.p]
        return fit_var(x_est, sel.p, mask=sub), sel
    sel = select_order_bic(x_est, ads_est, method.g, p_max=p_max, family=method.family)
    if method.family == "nar":
        return fit_nar(x_est, ads_est, [method.g] * sel.p, sel.p), sel
    return fit_lnar(x_est, ads_est, [method.g] * sel.p, sel.p), sel


def _resolve_policy(method: MethodSpec, ads_post: AdjacencySeries, n: int, h: int):
    if method.family == "var":
        return None
    if method.policy == "known":
        future = AdjacencySeries(ads_post.mats[n - 1: n - 1 + h],
                                 t0=ads_post.t0 + n - 1)
        return Known(future)
    if method.policy == "holdlast":
        return HoldLast()
    return PerEdgeMarkov(laplace_alpha=1.0, freeze_first=method.freeze_markov)


def _run_one_replicate(cfg: ExperimentConfig, n_index: int, n: int, rep: int):
    """Simulate one path and run every method on it.

    Returns a dict mapping method label -> (d, h) forecast-error matrix,
    or None for a method whose fit failed on this path.
    """
    rng = _replicate_seed(cfg.seed, n_index, rep)
    h = cfg.horizons
    x_all, ads_post = _simulate_replicate(cfg, n, rng)
    x_est, truth = x_all[:, :n], x_all[:, n:]
    ads_est = ads_post.take_first(n - 1)
    errors: Dict[str, Optional[np.ndarray]] = {}
    for method in cfg.methods:
        try:
            fit, _ = _fit_with_bic(method, x_est, ads_est, cfg.p_max)
            policy = _resolve_policy(method, ads_post, n, h)
            fc = forecast_h(fit, x_est, ads_est, policy, h, truth=truth)
            errors[method.label] = fc.errors
        except EstimationError:
            errors[method.label] = None
    return errors


def _replicate_worker(args):
    return _run_one_replicate(*args)


@dataclass
class ExperimentReport:
    experiment: str
    horizons: int
    sample_sizes: List[int]
    method_labels: List[str]
    mse: Dict[Tuple[int, str], np.ndarray]
    se: Dict[Tuple[int, str], np.ndarray]
    failures: Dict[Tuple[int, str], int]
    replications: int
    seed: int

    def relative_mse(self) -> Dict[str, float]:
        """Each method's MSE averaged over n and h, relative to the VAR row."""
        base_label = None
        for lbl in self.method_labels:
            if lbl.startswith("var"):
                base_label = lbl
                break
        if base_label is None:
            raise ValueError("relative table needs a var method as basing point")
        out = {}
        for lbl in self.method_labels:
            ratios = []
            for n in self.sample_sizes:
                base = self.mse[(n, base_label)]
                ratios.extend((self.mse[(n, lbl)] / base).tolist())
            out[lbl] = float(np.mean(ratios))
        return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    h = cfg.horizons
    labels = [m.label for m in cfg.methods]
    if len(set(labels)) != len(labels):
        raise ValueError("method labels collide; give each method a distinct role")
    mse: Dict[Tuple[int, str], np.ndarray] = {}
    se: Dict[Tuple[int, str], np.ndarray] = {}
    failures: Dict[Tuple[int, str], int] = {}
    for n_index, n in enumerate(cfg.sample_sizes):
        per_method: Dict[str, List[np.ndarray]] = {lbl: [] for lbl in labels}
        fail_count = {lbl: 0 for lbl in labels}
        args = [(cfg, n_index, n, rep) for rep in range(cfg.replications)]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_replicate_worker, args, chunksize=8))
        else:
            results = [_run_one_replicate(*a) for a in args]
        for res in results:
            for lbl in labels:
                err = res[lbl]
                if err is None:
                    fail_count[lbl] += 1
                else:
                    per_method[lbl].append(err)
        for lbl in labels:
            failures[(n, lbl)] = fail_count[lbl]
            if fail_count[lbl] > FAILURE_ABORT_RATE * cfg.replications:
                raise RuntimeError(
                    f"method {lbl} failed on {fail_count[lbl]} of {cfg.replications} "
                    f"replicates at n={n}; aborting (threshold {FAILURE_ABORT_RATE:.0%})"
                )
            stack = np.stack(per_method[lbl])  # (B_ok, d, h)
            sq = stack ** 2
            rep_means = sq.mean(axis=1)  # per-replicate component average, (B_ok, h)
            mse[(n, lbl)] = rep_means.mean(axis=0)
            if rep_means.shape[0] > 1:
                se[(n, lbl)] = rep_means.std(axis=0, ddof=1) / np.sqrt(rep_means.shape[0])
            else:
                se[(n, lbl)] = np.full(h, np.nan)
    report = ExperimentReport(
        experiment=cfg.experiment, horizons=h, sample_sizes=list(cfg.sample_sizes),
        method_labels=labels, mse=mse, se=se, failures=failures,
        replications=cfg.replications, seed=cfg.seed,
    )
    if cfg.out_dir:
        write_experiment_reports(cfg, report)
    return report


def _table_fmt(x: float) -> str:
    return format(float(x), ".6g")


def write_experiment_reports(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    """Emit the wide MSE table, the relative table and a run summary."""
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    mse_path = os.path.join(out, f"mse_{report.experiment}.csv")
    with nio.atomic_open(mse_path) as fh:
        cols = ",".join(f"h={s}" for s in range(1, report.horizons + 1))
        fh.write(f"n,method,{cols}\n")
        for n in report.sample_sizes:
            for lbl in report.method_labels:
                row = ",".join(_table_fmt(v) for v in report.mse[(n, lbl)])
                fh.write(f"{n},{lbl},{row}\n")
    se_path = os.path.join(out, f"mse_se_{report.experiment}.csv")
    with nio.atomic_open(se_path) as fh:
        cols = ",".join(f"h={s}" for s in range(1, report.horizons + 1))
        fh.write(f"n,method,{cols}\n")
        for n in report.sample_sizes:
            for lbl in report.method_labels:
                row = ",".join(_table_fmt(v) for v in report.se[(n, lbl)])
                fh.write(f"{n},{lbl},{row}\n")
    try:
        rel = report.relative_mse()
        rel_path = os.path.join(out, f"relative_mse_{report.experiment}.csv")
        with nio.atomic_open(rel_path) as fh:
            fh.write("method,rel_mse\n")
            for lbl in report.method_labels:
                fh.write(f"{lbl},{format(rel[lbl], '.2f')}\n")
    except ValueError:
        pass
    summary_path = os.path.join(out, f"report_{report.experiment}.json")
    config_echo = config_to_json(cfg)
    config_echo.pop("out_dir", None)  # location must not break byte-identity
    with nio.atomic_open(summary_path) as fh:
        json.dump({
            "experiment": report.experiment,
            "seed": report.seed,
            "replications": report.replications,
            "sample_sizes": report.sample_sizes,
            "failures": {f"{n}/{lbl}": c for (n, lbl), c in report.failures.items()},
            "config": config_echo,
        }, fh, indent=2)
        fh.write("\n")


# --- canonical experiment configurations -------------------------------------

def example1_network() -> MarkovEdgeNetwork:
    """Four-vertex benchmark network: independent persistent edge chains."""
    stay = np.array([
        [0.95, 0.70, 0.99, 0.0],
        [0.0, 0.95, 0.70, 0.0],
        [0.99, 0.50, 0.95, 0.95],
        [0.30, 0.0, 0.0, 0.95],
    ])
    enter = np.array([
        [0.05, 0.10, 0.01, 0.0],
        [0.0, 0.05, 0.30, 0.0],
        [0.01, 0.50, 0.05, 0.05],
        [0.30, 0.0, 0.0, 0.05],
    ])
    return MarkovEdgeNetwork(stay, enter, initial="stationary")


def example1_process(g_variant: str = "transpose"):
    """Order-1 circulant benchmark process on the four-vertex network."""
    alpha = np.array([
        [0.25, 0.7, 0.0, 0.0],
        [0.0, 0.25, 0.7, 0.0],
        [0.0, 0.0, 0.25, 0.7],
        [0.7, 0.0, 0.0, 0.25],
    ])
    g = _g_variant(g_variant)
    spec = NarSpec(1, [alpha], [g])
    innov = InnovationSpec(np.array([-1.0, 4.0, -9.0, 16.0]), np.eye(4))
    return spec, innov


def _g_variant(name: str) -> NeighborhoodFn:
    if name == "identity":
        return NeighborhoodFn.identity()
    if name == "transpose":
        return NeighborhoodFn.transpose()
    raise ValueError(f"unknown modulation variant {name!r}")


def example1_config(sample_sizes=(500,), replications: int = 200, seed: int = 20240,
                    horizons: int = 4, g_variant: str = "transpose",
                    policies=("known",), include_var: bool = True,
                    include_lnar: bool = True, out_dir=None) -> ExperimentConfig:
    spec, innov = example1_process(g_variant)
    g = spec.G[0]
    methods = []
    for policy in policies:
        methods.append(MethodSpec(family="nar", policy=policy, g=g))
        if include_lnar:
            methods.append(MethodSpec(family="lnar", policy=policy, g=g))
    if include_var:
        methods.append(MethodSpec(family="var", policy="none"))
    return ExperimentConfig(
        experiment="example1", network=example1_network(), process=spec, innov=innov,
        sample_sizes=sample_sizes, horizons=horizons, replications=replications,
        seed=seed, methods=methods, burn_in=500, p_max=3, out_dir=out_dir,
    )


def example2_process(d: int):
    """High-dimensional per-component process with in-neighbor averaging."""
    r = np.arange(1, d + 1)
    alpha = (0.9 * r / d)[None, :]
    beta = (0.9 * (d - r) / d)[None, :]
    g = NeighborhoodFn.row_normalized_transpose()
    spec = LnarSpec(1, alpha, beta, [g])
    mu = r * (-1.0) ** r
    off = 0.25 * (-1.0) ** (np.arange(1, d) + 1)
    innov = InnovationSpec.banded1(mu, np.ones(d), off, scale=5.0)
    return spec, innov


def example2_config(d: int = 10, sample_sizes=(500,), replications: int = 200,
                    seed: int = 20242, horizons: int = 4, policies=("known",),
                    include_var: bool = True, out_dir=None) -> ExperimentConfig:
    """Density-matched substitute network (mean density 5/d, persistence 0.9)."""
    spec, innov = example2_process(d)
    g = spec.G[0]
    methods = [MethodSpec(family="lnar", policy=policy, g=g) for policy in policies]
    if include_var:
        methods.append(MethodSpec(family="var", policy="none", g=g, sparsity="network"))
    network = generate_density_matched_markov(d, 5.0 / d, 0.9)
    return ExperimentConfig(
        experiment=f"example2_d{d}", network=network, process=spec, innov=innov,
        sample_sizes=sample_sizes, horizons=horizons, replications=replications,
        seed=seed, methods=methods, burn_in=300, p_max=3, out_dir=out_dir,
    )


# --- panel pipeline -----------------------------------------------------------

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


def _parse_quarter(label: str) -> Tuple[int, int]:
    m = _QUARTER_RE.match(label.strip())
    if not m:
        raise ValueError(f"cannot parse quarter label {label!r} (expected YYYYQq)")
    return int(m.group(1)), int(m.group(2))


def _next_quarter(q: Tuple[int, int]) -> Tuple[int, int]:
    y, k = q
    return (y, k + 1) if k < 4 else (y + 1, 1)


@dataclass
class PanelDataset:
    """Quarterly attribute levels plus annual trade-weight networks.

    ``levels[:, t]`` belongs to ``quarters[t]``; ``mats_growth`` holds one
    normalized weight matrix per growth quarter (annual matrices repeated
    over their four quarters).  ``rows_stochastic`` records whether every
    applied modulation row sums to one (or zero for isolated entities).
    """

    labels: List[str]
    quarters: List[Tuple[int, int]]
    levels: np.ndarray
    mats_growth: AdjacencySeries
    rows_stochastic: bool

    @property
    def d(self) -> int:
        return self.levels.shape[0]

    @property
    def n_quarters(self) -> int:
        return self.levels.shape[1]


def normalize_trade_matrix(raw: np.ndarray) -> np.ndarray:
    """Weight from i to j: mutual trade of (i, j) over j's total mutual trade.

    The raw matrix holds directed flows; mutual trade symmetrizes it.
    Column sums of the result are 1, or 0 for an entity without any trade
    (1/0 is taken as 0).
    """
    raw = np.asarray(raw, dtype=float)
    if (raw < 0).any():
        raise ValueError("negative trade volumes")
    if np.abs(np.diag(raw)).max() > 0:
        raise ValueError("self-trade entries must be zero")
    mutual = raw + raw.T
    totals = mutual.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, mutual / np.where(totals > 0, totals, 1.0), 0.0)


def ingest_panel(levels_path, weights_by_year: Dict[int, str]) -> PanelDataset:
    """Load a quarterly levels CSV plus one raw trade-matrix CSV per year.

    Levels header: ``t,<label>,...`` with t like ``1980Q1`` and contiguous
    quarters.  Weight files carry a header row of entity labels and one
    labeled row per entity.  Every year touched by the level quarters must
    have a matrix; gaps are a hard error naming the missing year.
    """
    import csv as _csv

    with open(levels_path, newline="") as fh:
        r = _csv.reader(fh)
        header = next(r)
        if header[0] != "t":
            raise ValueError("levels CSV must start with a 't' column")
        labels = header[1:]
        quarters = []
        rows = []
        for row in r:
            if not row:
                continue
            quarters.append(_parse_quarter(row[0]))
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"non-numeric level cell in quarter {row[0]}") from exc
    if len(rows) < 2:
        raise ValueError("need at least two quarters of levels")
    for a, b in zip(quarters, quarters[1:]):
        if b != _next_quarter(a):
            raise ValueError(f"quarters not contiguous around {a[0]}Q{a[1]}")
    levels = np.asarray(rows, dtype=float).T
    d = len(labels)

    years_needed = sorted({y for (y, _) in quarters})
    missing = [y for y in years_needed if y not in weights_by_year]
    if missing:
        raise ValueError(f"missing trade matrix for year {missing[0]}")
    normalized = {}
    for year in years_needed:
        with open(weights_by_year[year], newline="") as fh:
            r = _csv.reader(fh)
            header = next(r)
            if header[1:] != labels:
                raise ValueError(f"weight matrix {year}: entity labels do not match levels")
            entries = []
            row_labels = []
            for row in r:
                if not row:
                    continue
                row_labels.append(row[0])
                try:
                    entries.append([float(v) for v in row[1:]])
                except ValueError as exc:
                    raise ValueError(f"non-numeric trade cell in year {year}") from exc
            if row_labels != labels:
                raise ValueError(f"weight matrix {year}: row labels do not match levels")
        normalized[year] = normalize_trade_matrix(np.asarray(entries))

    # growth quarter k spans levels k -> k+1 and uses the matrix of the
    # year of its ending quarter, annual matrices repeated quarterly
    growth_mats = np.stack([normalized[quarters[k + 1][0]]
                            for k in range(len(quarters) - 1)])
    mats = AdjacencySeries(growth_mats)
    colsums = growth_mats.sum(axis=1)
    rows_stochastic = bool(((np.abs(colsums - 1.0) < 1e-9) | (np.abs(colsums) < 1e-9)).all())
    return PanelDataset(labels=labels, quarters=quarters, levels=levels,
                        mats_growth=mats, rows_stochastic=rows_stochastic)


@dataclass
class PanelForecastResult:
    labels: List[str]
    methods: List[str]
    horizons: int
    level_forecasts: Dict[str, np.ndarray]
    level_truth: np.ndarray
    errors: Dict[str, np.ndarray]
    orders: Dict[str, int]

    def total_errors(self) -> Dict[str, Tuple[float, float]]:
        """(sum of squared errors, sum of absolute errors) per method."""
        out = {}
        for m in self.methods:
            e = self.errors[m]
            out[m] = (float((e ** 2).sum()), float(np.abs(e).sum()))
        return out


def run_rolling_forecast(panel: PanelDataset, methods=("var", "lnar", "nar"), h: int = 8,
                         p_max: int = 3, min_quarters: int = 40,
                         out_dir: Optional[str] = None) -> PanelForecastResult:
    """Difference, fit with BIC, forecast h steps with hold-last networks,
    integrate back to levels, and tabulate squared/absolute errors.

    The last h quarters are held out as truth; the estimation sample is
    everything before them.
    """
    n_q = panel.n_quarters
    if n_q - h < min_quarters:
        raise ValueError(
            f"panel too short: {n_q - h} estimation quarters, need {min_quarters}"
        )
    x = difference(panel.levels)
    n_growth = x.shape[1]
    n_est = n_growth - h
    x_est = x[:, :n_est]
    ads_est = panel.mats_growth.take_first(n_est - 1)
    origin_level = panel.levels[:, n_est]
    truth_levels = panel.levels[:, n_est + 1: n_est + 1 + h]
    g = NeighborhoodFn.transpose()

    forecasts = {}
    errors = {}
    orders = {}
    for name in methods:
        if name == "var":
            sel = select_order_bic(x_est, p_max=p_max, family="var")
            fit = fit_var(x_est, sel.p)
            fc = forecast_h(fit, x_est, None, None, h)
        elif name == "nar":
            sel = select_order_bic(x_est, ads_est, g, p_max=p_max, family="nar")
            fit = fit_nar(x_est, ads_est, [g] * sel.p, sel.p)
            fc = forecast_h(fit, x_est, ads_est, HoldLast(), h)
        elif name == "lnar":
            sel = select_order_bic(x_est, ads_est, g, p_max=p_max, family="lnar")
            fit = fit_lnar(x_est, ads_est, [g] * sel.p, sel.p)
            fc = forecast_h(fit, x_est, ads_est, HoldLast(), h)
        else:
            raise ValueError(f"unknown panel method {name!r}")
        levels_fc = integrate(origin_level, fc)
        forecasts[name] = levels_fc
        errors[name] = truth_levels - levels_fc
        orders[name] = sel.p
    result = PanelForecastResult(
        labels=panel.labels, methods=list(methods), horizons=h,
        level_forecasts=forecasts, level_truth=truth_levels, errors=errors,
        orders=orders,
    )
    if out_dir:
        write_panel_reports(result, out_dir)
    return result


def write_panel_reports(result: PanelForecastResult, out_dir) -> None:
    """Total, per-entity and per-horizon error tables (squared and absolute)."""
    os.makedirs(out_dir, exist_ok=True)
    methods = result.methods
    with nio.atomic_open(os.path.join(out_dir, "panel_total_errors.csv")) as fh:
        fh.write("metric," + ",".join(methods) + "\n")
        totals = result.total_errors()
        fh.write("squared_error," + ",".join(_table_fmt(totals[m][0]) for m in methods) + "\n")
        fh.write("absolute_error," + ",".join(_table_fmt(totals[m][1]) for m in methods) + "\n")
    with nio.atomic_open(os.path.join(out_dir, "panel_entity_errors.csv")) as fh:
        head_sq = ",".join(f"sq_{m}" for m in methods)
        head_abs = ",".join(f"abs_{m}" for m in methods)
        fh.write(f"entity,{head_sq},{head_abs}\n")
        for i, label in enumerate(result.labels):
            sq = ",".join(_table_fmt((result.errors[m][i] ** 2).sum()) for m in methods)
            ab = ",".join(_table_fmt(np.abs(result.errors[m][i]).sum()) for m in methods)
            fh.write(f"{label},{sq},{ab}\n")
    with nio.atomic_open(os.path.join(out_dir, "panel_horizon_errors.csv")) as fh:
        head_sq = ",".join(f"sq_{m}" for m in methods)
        head_abs = ",".join(f"abs_{m}" for m in methods)
        fh.write(f"h,{head_sq},{head_abs}\n")
        for s in range(result.horizons):
            sq = ",".join(_table_fmt((result.errors[m][:, s] ** 2).sum()) for m in methods)
            ab = ",".join(_table_fmt(np.abs(result.errors[m][:, s]).sum()) for m in methods)
            fh.write(f"{s + 1},{sq},{ab}\n")
