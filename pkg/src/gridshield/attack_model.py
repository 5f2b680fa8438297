"""Unobservable attack construction, load dynamics, and stream monitoring.

An attack adds H c to one snapshot, with the state bias c confined to the
restricted columns so that no injection outside the load set is touched and
the residual test stays blind to it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .estimation import NoiseModel, PsseResult, bdd_test, corrected_psse, wls_psse
from .grid_model import GridNetwork, TopologyMatrix, dc_power_flow, reduced_laplacian
from .results import IdentificationResult


class ConfigurationError(Exception):
    """Bad scenario or experiment configuration value."""


@dataclass(frozen=True)
class AttackSpec:
    """One sampled attack: state bias support/values and the measurement bias."""

    support: tuple[int, ...]
    values: np.ndarray
    c: np.ndarray
    a: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.a))


def sample_attack(
    topology: TopologyMatrix,
    k_a: int,
    attack_norm: float,
    rng: np.random.Generator,
) -> AttackSpec:
    """Draw a uniformly supported attack on the restricted states.

    The support is a uniform size-`k_a` subset of the restricted columns,
    values are uniform on [-1, 1] and rescaled so the measurement bias H c has
    norm `attack_norm` exactly.
    """
    ground = list(topology.restricted_states)
    if not 1 <= k_a <= len(ground):
        raise ConfigurationError(
            f"k_a must be between 1 and {len(ground)}, got {k_a}"
        )
    if not np.isfinite(attack_norm) or attack_norm <= 0:
        raise ConfigurationError("attack_norm must be positive")
    support = tuple(sorted(rng.choice(ground, size=k_a, replace=False).tolist()))
    h_sub = topology.h[:, list(support)]
    while True:
        values = rng.uniform(-1.0, 1.0, size=k_a)
        raw = float(np.linalg.norm(h_sub @ values))
        if raw > 1e-12:
            break
    values = values * (attack_norm / raw)
    c = np.zeros(topology.n_states)
    c[list(support)] = values
    return AttackSpec(support=support, values=values, c=c, a=topology.h @ c)


def simulate_load_change(
    network: GridNetwork,
    theta: np.ndarray,
    sigma_s2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Advance the state one tick by scaling each load injection.

    Every load bus injection is multiplied by an independent N(1, sigma_s2)
    factor; other injections are held and the slack absorbs the imbalance.
    """
    if sigma_s2 < 0:
        raise ConfigurationError("sigma_s2 must be nonnegative")
    p = reduced_laplacian(network) @ np.asarray(theta, dtype=float)
    state_buses = [b for b in network.buses if b.bus_class != "slack"]
    scale = np.ones(len(state_buses))
    load_mask = np.array([b.bus_class == "load" for b in state_buses])
    scale[load_mask] = rng.normal(1.0, np.sqrt(sigma_s2), size=int(load_mask.sum()))
    return dc_power_flow(network, p * scale)


def difference_measurements(z_prev: np.ndarray, z_curr: np.ndarray) -> np.ndarray:
    z_prev = np.asarray(z_prev, dtype=float)
    z_curr = np.asarray(z_curr, dtype=float)
    if z_prev.shape != z_curr.shape:
        raise ValueError("snapshot shapes differ")
    return z_curr - z_prev


def load_component(topology: TopologyMatrix, dz: np.ndarray) -> np.ndarray:
    """Restrict a difference vector to the load-injection rows."""
    return np.asarray(dz, dtype=float)[topology.load_rows]


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one simulated attack scenario.

    `attack_norm` fixes the measurement-bias norm directly; alternatively
    `attack_norm_per_node` scales it with the number of attacked states.
    Exactly one of the two must be set.
    """

    k_a: int = 4
    attack_norm: float | None = 1.2
    attack_norm_per_node: float | None = None
    sigma_s2: float = 0.05
    sigma_e2: float = 0.01

    def __post_init__(self):
        if (self.attack_norm is None) == (self.attack_norm_per_node is None):
            raise ConfigurationError(
                "exactly one of attack_norm / attack_norm_per_node must be set"
            )
        if self.k_a < 1:
            raise ConfigurationError("k_a must be at least 1")
        if self.sigma_s2 < 0:
            raise ConfigurationError("sigma_s2 must be nonnegative")
        if self.sigma_e2 <= 0:
            raise ConfigurationError("sigma_e2 must be positive")

    @property
    def effective_norm(self) -> float:
        if self.attack_norm is not None:
            return self.attack_norm
        return self.attack_norm_per_node * self.k_a

    @classmethod
    def from_mapping(cls, doc: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = dict(doc)
        # an explicit per-node norm replaces the default total norm
        if "attack_norm_per_node" in kwargs and "attack_norm" not in kwargs:
            kwargs["attack_norm"] = None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        text = open(path, "rb").read()
        if str(path).endswith(".toml"):
            doc = tomllib.loads(text.decode("utf-8"))
        else:
            doc = json.loads(text.decode("utf-8"))
        if not isinstance(doc, dict):
            raise ConfigurationError("scenario config must be a table of keys")
        return cls.from_mapping(doc)


Identifier = Callable[[np.ndarray], IdentificationResult]


@dataclass(frozen=True)
class AdaptiveStepResult:
    detected: bool
    support: tuple[int, ...]
    values: np.ndarray
    estimate: PsseResult
    z_accepted: np.ndarray
    bdd_statistic: float


class AdaptiveMonitor:
    """Streaming correction loop around an identification method.

    The monitor keeps the last accepted snapshot as its reference.  Each step
    differences the incoming snapshot against it, identifies any bias on the
    load rows, and either accepts the snapshot unchanged or replaces it with
    the re-estimated measurement after subtracting the identified bias.  The
    first snapshot is trusted by construction; an attack there is outside the
    model.
    """

    def __init__(
        self,
        topology: TopologyMatrix,
        noise: NoiseModel,
        identifier: Identifier,
        z_initial: np.ndarray,
        gamma_bdd: float = float("inf"),
    ):
        z_initial = np.asarray(z_initial, dtype=float)
        if z_initial.shape != (topology.n_measurements,):
            raise ValueError(
                f"expected {topology.n_measurements} measurements, got {z_initial.shape}"
            )
        self._topology = topology
        self._noise = noise
        self._identifier = identifier
        self._gamma_bdd = gamma_bdd
        self._z_ref = z_initial

    @property
    def reference(self) -> np.ndarray:
        return self._z_ref.copy()

    def step(self, z_next: np.ndarray) -> AdaptiveStepResult:
        topo = self._topology
        z_next = np.asarray(z_next, dtype=float)
        r_diag = self._noise.r_diagonal(topo.n_measurements)
        bdd_stat, _ = bdd_test(topo.h, r_diag, z_next, self._gamma_bdd)
        dz_load = load_component(topo, difference_measurements(self._z_ref, z_next))
        result = self._identifier(dz_load)
        if result.detected:
            c_hat = result.state_vector(topo.n_states)
            est = corrected_psse(topo.h, r_diag, z_next, c_hat)
            z_accepted = topo.h @ est.theta
        else:
            est = wls_psse(topo.h, r_diag, z_next)
            z_accepted = z_next
        self._z_ref = z_accepted
        return AdaptiveStepResult(
            detected=result.detected,
            support=result.support,
            values=result.values,
            estimate=est,
            z_accepted=z_accepted,
            bdd_statistic=bdd_stat,
        )
