"""Monte Carlo benchmark of the detection and identification methods.

One experiment sweeps a grid of attack scenarios on a fixed network.  Every
trial simulates two consecutive snapshots (a random load change plus
measurement noise), applies a stealth attack to the second one, and runs each
requested method on the attacked and on the clean difference.  Detection
thresholds are calibrated beforehand on a shared batch of attack-free
simulations, so all methods operate at the same nominal false alarm level.

Methods
    gic        exhaustive penalized subspace selection
    omp        greedy pursuit with a calibrated stopping energy
    gmgic      prescreen, partition into auxiliary components, select per group
    oracle-gic gic on the difference with the exact load term removed
    eng        squared norm of the full measurement difference
    bdd        residual energy of the weighted least squares estimate
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from . import __version__
from .analysis import oracle_gic_select
from .attack_model import ConfigurationError, sample_attack, simulate_load_change
from .cases import ieee30
from .estimation import NoiseModel, wls_psse, corrected_psse
from .gic import (
    CandidateFamily,
    FamilyEvaluator,
    PenaltyConfig,
    gic_select,
    max_score_samples,
)
from .gmgic import gm_gic
from .grid_model import (
    GridNetwork,
    TopologyMatrix,
    build_topology,
    initial_state,
    load_case,
    measure,
)
from .omp import OmpConfig, omp_identify, single_state_energies
from .results import IdentificationResult

METHODS = ("gic", "omp", "gmgic", "oracle-gic", "eng", "bdd")


def f_score(true_support, selected_support) -> float:
    """Harmonic mean of support precision and recall; two empty sets score 1."""
    t, s = set(true_support), set(selected_support)
    tp = len(t & s)
    fp = len(s - t)
    fn = len(t - s)
    if tp == fp == fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def _as_tuple(value, kind):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(kind(v) for v in value)
    return (kind(value),)


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of one benchmark run.

    `k_a`, `attack_norm` (or `attack_norm_per_node`), and `sigma_s2` are
    sweep axes; their cartesian product forms the scenario grid.  Exactly one
    of the two norm fields must be set: `attack_norm` fixes the measurement
    bias norm, `attack_norm_per_node` scales it with the number of attacked
    states.  `ground` chooses the selector search space: "restricted" keeps
    the structurally attackable states, "all" searches every state column.
    `restricted_buses` optionally overrides the derived attackable set.
    """

    case: str | None = None
    methods: tuple[str, ...] = ("gic", "omp", "gmgic")
    k_a: tuple[int, ...] = (4,)
    attack_norm: tuple[float, ...] | None = (1.2,)
    attack_norm_per_node: tuple[float, ...] | None = None
    sigma_s2: tuple[float, ...] = (0.05,)
    sigma_e2: float = 0.01
    n_trials: int = 500
    n_null: int = 500
    alpha: float = 0.05
    k_c: int = 6
    zeta: float = 2.0
    ground: str = "restricted"
    rho_method: str = "family-max"
    seed: int = 0
    threads: int = 1
    restricted_buses: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", _as_tuple(self.methods, str))
        object.__setattr__(self, "k_a", _as_tuple(self.k_a, int))
        object.__setattr__(self, "sigma_s2", _as_tuple(self.sigma_s2, float))
        if self.attack_norm is not None:
            object.__setattr__(self, "attack_norm", _as_tuple(self.attack_norm, float))
        if self.attack_norm_per_node is not None:
            object.__setattr__(
                self, "attack_norm_per_node", _as_tuple(self.attack_norm_per_node, float)
            )
        if self.restricted_buses is not None:
            object.__setattr__(
                self, "restricted_buses", _as_tuple(self.restricted_buses, int)
            )
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods: {sorted(unknown)}")
        if (self.attack_norm is None) == (self.attack_norm_per_node is None):
            raise ConfigurationError(
                "set exactly one of attack_norm and attack_norm_per_node"
            )
        norms = self.attack_norm if self.attack_norm is not None else self.attack_norm_per_node
        if any(v <= 0 or not np.isfinite(v) for v in norms):
            raise ConfigurationError("attack norms must be positive")
        if any(k < 1 for k in self.k_a):
            raise ConfigurationError("k_a values must be at least 1")
        if any(v < 0 or not np.isfinite(v) for v in self.sigma_s2):
            raise ConfigurationError("sigma_s2 values must be nonnegative")
        if not np.isfinite(self.sigma_e2) or self.sigma_e2 <= 0:
            raise ConfigurationError("sigma_e2 must be positive")
        if self.n_trials < 1 or self.n_null < 1:
            raise ConfigurationError("n_trials and n_null must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must be in (0, 1)")
        if self.k_c < 1:
            raise ConfigurationError("k_c must be at least 1")
        if not np.isfinite(self.zeta) or self.zeta < 0:
            raise ConfigurationError("zeta must be nonnegative")
        if self.ground not in ("restricted", "all"):
            raise ConfigurationError("ground must be 'restricted' or 'all'")
        if self.rho_method not in ("bonferroni", "family-max"):
            raise ConfigurationError("rho_method must be 'bonferroni' or 'family-max'")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")

    def grid_points(self) -> tuple[tuple[int, float, float], ...]:
        """Scenario grid as (k_a, total attack norm, sigma_s2) triples."""
        points = []
        for ka in self.k_a:
            if self.attack_norm is not None:
                norms = self.attack_norm
            else:
                norms = tuple(v * ka for v in self.attack_norm_per_node)
            for norm, s2 in itertools.product(norms, self.sigma_s2):
                points.append((ka, float(norm), float(s2)))
        return tuple(points)

    @classmethod
    def from_mapping(cls, doc: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown experiment keys: {sorted(unknown)}")
        kwargs = dict(doc)
        if "attack_norm_per_node" in kwargs and "attack_norm" not in kwargs:
            kwargs["attack_norm"] = None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        doc = _load_doc(path)
        return cls.from_mapping(doc)


def _load_doc(path) -> dict:
    raw = Path(path).read_bytes()
    if str(path).endswith(".toml"):
        doc = tomllib.loads(raw.decode("utf-8"))
    else:
        doc = json.loads(raw.decode("utf-8"))
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration root must be a table")
    return doc


@dataclass(frozen=True)
class Thresholds:
    """Calibrated detection thresholds plus the settings they were drawn at.

    All entries come from the same batch of attack-free simulations, so each
    method runs at the same nominal false alarm level `alpha`.  The oracle
    threshold is calibrated on pure difference noise because the oracle
    removes the load term before selecting.
    """

    gamma_bdd: float
    gamma_eng: float
    gamma_gic: float
    gamma_omp: float
    gamma_oracle: float
    rho: float
    alpha: float
    n_null: int
    seed: int
    sigma_e2: float
    sigma_s2: float
    zeta: float
    k_c: int
    ground: str
    rho_method: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_file(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "Thresholds":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigurationError("thresholds document must be an object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown threshold keys: {sorted(unknown)}")
        missing = known - set(doc)
        if missing:
            raise ConfigurationError(f"missing threshold keys: {sorted(missing)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "Thresholds":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _ground_states(topology: TopologyMatrix, ground: str) -> tuple[int, ...]:
    if ground == "restricted":
        return tuple(topology.restricted_states)
    if ground == "all":
        return tuple(range(topology.n_states))
    raise ConfigurationError("ground must be 'restricted' or 'all'")


def calibrate_thresholds(
    network: GridNetwork, topology: TopologyMatrix, spec: ExperimentSpec
) -> Thresholds:
    """Empirical (1 - alpha) null quantiles for every detection statistic.

    Null draws pair two snapshots of the unattacked system, including the
    random load change at the largest swept sigma_s2, so the thresholds stay
    valid across the whole grid.
    """
    rng = np.random.default_rng([spec.seed, 7])
    noise = NoiseModel(spec.sigma_e2)
    sigma_s2 = max(spec.sigma_s2)
    ground = _ground_states(topology, spec.ground)
    family = CandidateFamily.enumerate_from(ground, spec.k_c)
    evaluator = FamilyEvaluator(topology.h_load, family)
    m = topology.n_measurements
    n_load = len(topology.load_rows)
    theta0 = initial_state(network)
    z0_clean = measure(topology, theta0)
    r_diag = noise.r_diagonal(m)

    n = spec.n_null
    bdd_stats = np.empty(n)
    eng_stats = np.empty(n)
    dz_loads = np.empty((n, n_load))
    for i in range(n):
        theta1 = simulate_load_change(network, theta0, sigma_s2, rng)
        z_prev = z0_clean + noise.sample_snapshot(rng, m)
        z_curr = measure(topology, theta1) + noise.sample_snapshot(rng, m)
        dz = z_curr - z_prev
        dz_loads[i] = dz[list(topology.load_rows)]
        eng_stats[i] = float(dz @ dz)
        bdd_stats[i] = wls_psse(topology.h, r_diag, z_curr).statistic

    level = 1.0 - spec.alpha
    gic_scores = max_score_samples(
        topology, dz_loads, family, spec.zeta, spec.sigma_e2, evaluator=evaluator
    )
    captures = single_state_energies(topology, dz_loads, ground)
    usable = np.isfinite(captures).all(axis=0)
    usable_caps = captures[:, usable]
    if usable_caps.shape[1] == 0:
        raise ConfigurationError("no usable state columns to calibrate on")
    gamma_omp = float(np.quantile(usable_caps.max(axis=1), level))
    if spec.rho_method == "bonferroni":
        per_col = 1.0 - spec.alpha / usable_caps.shape[1]
        rho = float(np.quantile(usable_caps, per_col, axis=0).max())
    else:
        rho = float(np.quantile(usable_caps.max(axis=1), level))
    pure = noise.sample_difference(rng, (n, n_load))
    oracle_scores = max_score_samples(
        topology, pure, family, spec.zeta, spec.sigma_e2, evaluator=evaluator
    )

    return Thresholds(
        gamma_bdd=float(np.quantile(bdd_stats, level)),
        gamma_eng=float(np.quantile(eng_stats, level)),
        gamma_gic=float(np.quantile(gic_scores, level)),
        gamma_omp=gamma_omp,
        gamma_oracle=float(np.quantile(oracle_scores, level)),
        rho=rho,
        alpha=spec.alpha,
        n_null=n,
        seed=spec.seed,
        sigma_e2=spec.sigma_e2,
        sigma_s2=sigma_s2,
        zeta=spec.zeta,
        k_c=spec.k_c,
        ground=spec.ground,
        rho_method=spec.rho_method,
    )


@dataclass(frozen=True)
class TrialRecord:
    """Per-method outcome of one simulated scenario trial.

    `detected`/`statistic_attacked` come from the attacked difference,
    `false_alarm`/`statistic_null` from the paired clean difference built
    from the same states and noise.  `eta` is the energy of the load change
    nuisance on the load rows; `runtime_ns` times the attacked call only.
    """

    method: str
    k_a: int
    attack_norm: float
    sigma_s2: float
    trial: int
    true_support: tuple[int, ...]
    selected_support: tuple[int, ...]
    detected: bool
    false_alarm: bool
    statistic_attacked: float
    statistic_null: float
    f_score: float
    mse_corrected: float
    mse_plain: float
    eta: float
    runtime_ns: int


@dataclass(frozen=True)
class _TrialData:
    z_next_null: np.ndarray
    z_next_att: np.ndarray
    dz_null: np.ndarray
    dz_att: np.ndarray
    dz_null_load: np.ndarray
    dz_att_load: np.ndarray
    load_term: np.ndarray


class _MethodRunner:
    """Shared per-experiment state: topology, thresholds, candidate family."""

    def __init__(self, network, topology, spec, thresholds):
        self.network = network
        self.topology = topology
        self.spec = spec
        self.thresholds = thresholds
        self.noise = NoiseModel(spec.sigma_e2)
        self.ground = _ground_states(topology, spec.ground)
        self.family = CandidateFamily.enumerate_from(self.ground, spec.k_c)
        # built eagerly so worker threads share one read-only evaluator
        self.evaluator = FamilyEvaluator(topology.h_load, self.family)
        self.gic_penalty = PenaltyConfig(zeta=spec.zeta, gamma_gic=thresholds.gamma_gic)
        self.oracle_penalty = PenaltyConfig(
            zeta=spec.zeta, gamma_gic=thresholds.gamma_oracle
        )
        self.group_penalty = PenaltyConfig(zeta=spec.zeta, gamma_gic=0.0)
        self.omp_config = OmpConfig(k_max=spec.k_c, gamma_omp=thresholds.gamma_omp)
        self.r_diag = self.noise.r_diagonal(topology.n_measurements)
        self.theta0 = initial_state(network)
        self.z0_clean = measure(topology, self.theta0)
        self.distances = topology.state_distances

    def identify(self, method: str, data: _TrialData, attacked: bool) -> IdentificationResult:
        dz_load = data.dz_att_load if attacked else data.dz_null_load
        if method == "gic":
            return gic_select(
                self.topology,
                dz_load,
                self.family,
                self.gic_penalty,
                self.spec.sigma_e2,
                evaluator=self.evaluator,
            )
        if method == "omp":
            return omp_identify(self.topology, dz_load, self.omp_config, self.ground)
        if method == "gmgic":
            return gm_gic(
                self.topology,
                dz_load,
                self.thresholds.rho,
                k_c=self.spec.k_c,
                penalty=self.group_penalty,
                sigma_e2=self.spec.sigma_e2,
                ground=self.ground,
                distances=self.distances,
                global_budget=self.spec.k_c,
            )
        if method == "oracle-gic":
            return oracle_gic_select(
                self.topology,
                dz_load,
                data.load_term,
                self.family,
                self.oracle_penalty,
                self.spec.sigma_e2,
                evaluator=self.evaluator,
            )
        if method == "eng":
            dz = data.dz_att if attacked else data.dz_null
            stat = float(dz @ dz)
            return IdentificationResult(
                support=(),
                values=np.zeros(0),
                detected=bool(stat > self.thresholds.gamma_eng),
                statistic=stat,
            )
        if method == "bdd":
            z = data.z_next_att if attacked else data.z_next_null
            stat = wls_psse(self.topology.h, self.r_diag, z).statistic
            return IdentificationResult(
                support=(),
                values=np.zeros(0),
                detected=bool(stat > self.thresholds.gamma_bdd),
                statistic=stat,
            )
        raise ConfigurationError(f"unknown method {method!r}")


def _run_trial(runner: _MethodRunner, gp_idx: int, point, trial: int) -> list[TrialRecord]:
    spec = runner.spec
    topo = runner.topology
    k_a, norm, s2 = point
    rng = np.random.default_rng([spec.seed, 11, gp_idx, trial])

    theta1 = simulate_load_change(runner.network, runner.theta0, s2, rng)
    m = topo.n_measurements
    e_prev = runner.noise.sample_snapshot(rng, m)
    e_next = runner.noise.sample_snapshot(rng, m)
    attack = sample_attack(topo, k_a, norm, rng)

    z_prev = runner.z0_clean + e_prev
    z_next_null = measure(topo, theta1) + e_next
    z_next_att = z_next_null + attack.a
    dz_null = z_next_null - z_prev
    dz_att = z_next_att - z_prev
    load_rows = list(topo.load_rows)
    load_term = topo.h_load @ (theta1 - runner.theta0)
    data = _TrialData(
        z_next_null=z_next_null,
        z_next_att=z_next_att,
        dz_null=dz_null,
        dz_att=dz_att,
        dz_null_load=dz_null[load_rows],
        dz_att_load=dz_att[load_rows],
        load_term=load_term,
    )
    eta = float(load_term @ load_term)

    records = []
    for method in spec.methods:
        start = time.perf_counter_ns()
        att = runner.identify(method, data, attacked=True)
        elapsed = time.perf_counter_ns() - start
        null = runner.identify(method, data, attacked=False)
        c_hat = att.state_vector(topo.n_states)
        corrected = corrected_psse(topo.h, runner.r_diag, z_next_att, c_hat)
        plain = wls_psse(topo.h, runner.r_diag, z_next_att)
        records.append(
            TrialRecord(
                method=method,
                k_a=k_a,
                attack_norm=norm,
                sigma_s2=s2,
                trial=trial,
                true_support=attack.support,
                selected_support=att.support,
                detected=att.detected,
                false_alarm=null.detected,
                statistic_attacked=att.statistic,
                statistic_null=null.statistic,
                f_score=f_score(attack.support, att.support),
                mse_corrected=float(np.mean((corrected.theta - theta1) ** 2)),
                mse_plain=float(np.mean((plain.theta - theta1) ** 2)),
                eta=eta,
                runtime_ns=int(elapsed),
            )
        )
    return records


@dataclass
class ResultTable:
    """All trial records of one experiment plus the settings that made them."""

    spec: ExperimentSpec
    thresholds: Thresholds
    records: list[TrialRecord]

    def aggregates(self) -> list[dict]:
        """Per (method, scenario) summary rows in deterministic order."""
        groups: dict[tuple, list[TrialRecord]] = {}
        for r in self.records:
            groups.setdefault((r.method, r.k_a, r.attack_norm, r.sigma_s2), []).append(r)
        rows = []
        for (method, k_a, norm, s2), recs in sorted(groups.items()):
            runtimes = np.array([r.runtime_ns for r in recs], dtype=float)
            rows.append(
                {
                    "method": method,
                    "k_a": k_a,
                    "attack_norm": norm,
                    "sigma_s2": s2,
                    "n_trials": len(recs),
                    "detection_rate": float(np.mean([r.detected for r in recs])),
                    "false_alarm_rate": float(np.mean([r.false_alarm for r in recs])),
                    "f_score_mean": float(np.mean([r.f_score for r in recs])),
                    "mse_corrected_mean": float(np.mean([r.mse_corrected for r in recs])),
                    "mse_plain_mean": float(np.mean([r.mse_plain for r in recs])),
                    "runtime_ns_mean": float(runtimes.mean()),
                    "runtime_ns_median": float(np.median(runtimes)),
                }
            )
        return rows

    def roc(
        self,
        method: str,
        k_a: int | None = None,
        attack_norm: float | None = None,
        sigma_s2: float | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Empirical operating curve from the recorded statistics.

        Sweeps a threshold over every observed statistic value and returns
        (false alarm rates, detection rates), starting from the accept-all
        point (1, 1).  Filters restrict to one scenario when given.
        """
        sel = [
            r
            for r in self.records
            if r.method == method
            and (k_a is None or r.k_a == k_a)
            and (attack_norm is None or r.attack_norm == attack_norm)
            and (sigma_s2 is None or r.sigma_s2 == sigma_s2)
        ]
        if not sel:
            raise ValueError("no records match the requested slice")
        att = np.array([r.statistic_attacked for r in sel])
        nul = np.array([r.statistic_null for r in sel])
        cuts = np.unique(np.concatenate([att, nul]))
        fa = np.concatenate([[1.0], [(nul > c).mean() for c in cuts]])
        det = np.concatenate([[1.0], [(att > c).mean() for c in cuts]])
        return fa, det


def run_experiment(
    spec: ExperimentSpec, thresholds: Thresholds | None = None
) -> ResultTable:
    """Calibrate (unless given), sweep the scenario grid, record every trial.

    Trials are driven by per-trial generators seeded from (seed, grid point,
    trial), so results do not depend on `threads` or execution order.
    """
    network = load_case(spec.case) if spec.case else ieee30()
    topology = build_topology(network, restricted_override=spec.restricted_buses)
    if thresholds is None:
        thresholds = calibrate_thresholds(network, topology, spec)
    else:
        _check_thresholds(spec, thresholds)
    runner = _MethodRunner(network, topology, spec, thresholds)
    tasks = [
        (gp_idx, point, trial)
        for gp_idx, point in enumerate(spec.grid_points())
        for trial in range(spec.n_trials)
    ]
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            chunks = list(pool.map(lambda args: _run_trial(runner, *args), tasks))
    else:
        chunks = [_run_trial(runner, *args) for args in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    return ResultTable(spec=spec, thresholds=thresholds, records=records)


def _check_thresholds(spec: ExperimentSpec, thresholds: Thresholds) -> None:
    # mismatches here change what the calibrated statistics mean
    for name in ("sigma_e2", "zeta", "k_c", "ground"):
        if getattr(spec, name) != getattr(thresholds, name):
            raise ConfigurationError(
                f"thresholds were calibrated with {name}="
                f"{getattr(thresholds, name)!r}, experiment uses {getattr(spec, name)!r}"
            )


def _spec_doc(spec: ExperimentSpec) -> dict:
    doc = asdict(spec)
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
    return doc


def emit_results(table: ResultTable, out_dir) -> dict[str, Path]:
    """Write aggregates.csv and results.json under `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agg_path = out / "aggregates.csv"
    rows = table.aggregates()
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    doc = {
        "version": __version__,
        "spec": _spec_doc(table.spec),
        "thresholds": asdict(table.thresholds),
        "records": [asdict(r) for r in table.records],
    }
    res_path = out / "results.json"
    res_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return {"aggregates": agg_path, "results": res_path}


def load_results(path) -> ResultTable:
    """Rebuild a ResultTable from a results.json written by `emit_results`."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = ExperimentSpec.from_mapping(doc["spec"])
    thresholds = Thresholds.from_json(json.dumps(doc["thresholds"]))
    records = [
        TrialRecord(
            **{
                **rec,
                "true_support": tuple(rec["true_support"]),
                "selected_support": tuple(rec["selected_support"]),
            }
        )
        for rec in doc["records"]
    ]
    return ResultTable(spec=spec, thresholds=thresholds, records=records)
