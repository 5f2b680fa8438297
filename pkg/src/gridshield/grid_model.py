"""Grid description, DC power flow, and measurement matrix construction.

The measurement model is the linearized (DC) one: bus injections and branch
flows are linear in the voltage phase angles, with the slack angle fixed at
zero and the slack column removed from the measurement matrix.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

BUS_CLASSES = ("slack", "generator", "load", "zero_load")


class GridModelError(Exception):
    """Base error for grid construction problems."""


class CaseParseError(GridModelError):
    """Malformed case text. Carries the offending line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class StructuralError(GridModelError):
    """Network fails a structural requirement (references, slack, connectivity)."""


@dataclass(frozen=True)
class Bus:
    bus_id: int
    bus_class: str
    base_load: float  # MW


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    susceptance: float  # p.u.


@dataclass(frozen=True)
class GridNetwork:
    """Validated bus/branch description of one interconnected network."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float

    def __post_init__(self):
        ids = [b.bus_id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate bus ids")
        for b in self.buses:
            if b.bus_class not in BUS_CLASSES:
                raise StructuralError(f"bus {b.bus_id}: unknown class {b.bus_class!r}")
        slacks = [b.bus_id for b in self.buses if b.bus_class == "slack"]
        if len(slacks) != 1:
            raise StructuralError(f"expected exactly one slack bus, got {slacks}")
        if self.base_mva <= 0:
            raise StructuralError("base_mva must be positive")
        known = set(ids)
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise StructuralError(
                    f"branch {br.from_bus}-{br.to_bus} references an unknown bus"
                )
            if br.from_bus == br.to_bus:
                raise StructuralError(f"branch {br.from_bus}-{br.to_bus} is a self loop")
            if not np.isfinite(br.susceptance) or br.susceptance <= 0:
                raise StructuralError(
                    f"branch {br.from_bus}-{br.to_bus}: susceptance must be positive"
                )
        if len(self.buses) > 1 and not self._connected():
            raise StructuralError("network graph is not connected")

    def _connected(self) -> bool:
        adj = self.adjacency
        seen = {self.buses[0].bus_id}
        queue = deque(seen)
        while queue:
            n = queue.popleft()
            for k in adj[n]:
                if k not in seen:
                    seen.add(k)
                    queue.append(k)
        return len(seen) == len(self.buses)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """bus id -> position in `buses`."""
        return {b.bus_id: i for i, b in enumerate(self.buses)}

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        """bus id -> ids of physical neighbors."""
        adj: dict[int, list[int]] = {b.bus_id: [] for b in self.buses}
        for br in self.branches:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
        return {k: tuple(v) for k, v in adj.items()}

    @cached_property
    def slack_bus(self) -> int:
        return next(b.bus_id for b in self.buses if b.bus_class == "slack")

    @cached_property
    def load_buses(self) -> tuple[int, ...]:
        return tuple(b.bus_id for b in self.buses if b.bus_class == "load")


# row_map entries: ("injection", bus_id) or ("flow", from_bus, to_bus)
RowKey = tuple


@dataclass(frozen=True)
class TopologyMatrix:
    """Dense measurement matrix with its row/column bookkeeping.

    Rows cover every bus injection (in bus order) followed by every branch
    flow in the branch's stated orientation.  Columns are the phase angles of
    all non-slack buses.  `load_rows` indexes the injection rows of load-class
    buses; `restricted_states` lists the columns on which an injected bias
    stays confined to those rows.
    """

    network: GridNetwork
    h: np.ndarray
    row_map: tuple[RowKey, ...]
    col_map: tuple[int, ...]
    load_rows: np.ndarray
    restricted_states: tuple[int, ...]

    @cached_property
    def col_index(self) -> dict[int, int]:
        """bus id -> state column."""
        return {bus: j for j, bus in enumerate(self.col_map)}

    @cached_property
    def h_load(self) -> np.ndarray:
        """Rows of `h` restricted to load-bus injections."""
        return self.h[self.load_rows]

    @cached_property
    def state_distances(self) -> np.ndarray:
        """Geodesic distance between state columns, measured on the full graph."""
        dist = geodesic_distances(self.network)
        idx = [self.network.bus_index[bus] for bus in self.col_map]
        return dist[np.ix_(idx, idx)]

    @property
    def n_measurements(self) -> int:
        return self.h.shape[0]

    @property
    def n_states(self) -> int:
        return self.h.shape[1]


def build_topology(
    network: GridNetwork, restricted_override: list[int] | None = None
) -> TopologyMatrix:
    """Assemble the DC measurement matrix for every injection and flow.

    `restricted_override` replaces the automatically derived restricted state
    set with explicit bus ids (each must be a non-slack bus).
    """
    n_bus = len(network.buses)
    state_buses = [b for b in network.buses if b.bus_class != "slack"]
    col_map = tuple(b.bus_id for b in state_buses)
    col_of = {bus: j for j, bus in enumerate(col_map)}

    m = n_bus + len(network.branches)
    h = np.zeros((m, len(col_map)))
    row_map: list[RowKey] = []

    row_of_bus = {b.bus_id: i for i, b in enumerate(network.buses)}
    for i, b in enumerate(network.buses):
        row_map.append(("injection", b.bus_id))
    for br in network.branches:
        i = row_of_bus[br.from_bus]
        k = row_of_bus[br.to_bus]
        if br.from_bus in col_of:
            h[i, col_of[br.from_bus]] += br.susceptance
            h[k, col_of[br.from_bus]] -= br.susceptance
        if br.to_bus in col_of:
            h[i, col_of[br.to_bus]] -= br.susceptance
            h[k, col_of[br.to_bus]] += br.susceptance

    for idx, br in enumerate(network.branches):
        row_map.append(("flow", br.from_bus, br.to_bus))
        row = n_bus + idx
        if br.from_bus in col_of:
            h[row, col_of[br.from_bus]] += br.susceptance
        if br.to_bus in col_of:
            h[row, col_of[br.to_bus]] -= br.susceptance

    load_rows = np.array(
        [row_of_bus[b.bus_id] for b in network.buses if b.bus_class == "load"],
        dtype=int,
    )

    if restricted_override is not None:
        for bus in restricted_override:
            if bus not in col_of:
                raise StructuralError(f"restricted override bus {bus} is not a state bus")
        restricted = tuple(col_of[bus] for bus in restricted_override)
    else:
        restricted = tuple(
            col_of[b.bus_id] for b in state_buses if _only_load_neighborhood(network, b)
        )

    return TopologyMatrix(
        network=network,
        h=h,
        row_map=tuple(row_map),
        col_map=col_map,
        load_rows=load_rows,
        restricted_states=restricted,
    )


def _only_load_neighborhood(network: GridNetwork, bus: Bus) -> bool:
    # A state column stays confined to load-injection rows exactly when the
    # bus and its entire physical neighborhood are load-class.
    if bus.bus_class != "load":
        return False
    classes = {b.bus_id: b.bus_class for b in network.buses}
    return all(classes[k] == "load" for k in network.adjacency[bus.bus_id])


def measure(topology: TopologyMatrix, theta: np.ndarray) -> np.ndarray:
    """Noiseless measurement vector for state `theta`."""
    return topology.h @ np.asarray(theta, dtype=float)


def reduced_laplacian(network: GridNetwork) -> np.ndarray:
    """Weighted nodal susceptance matrix with the slack row/column removed."""
    state = [b.bus_id for b in network.buses if b.bus_class != "slack"]
    col_of = {bus: j for j, bus in enumerate(state)}
    n = len(state)
    lap = np.zeros((n, n))
    for br in network.branches:
        f, t, b = br.from_bus, br.to_bus, br.susceptance
        if f in col_of:
            lap[col_of[f], col_of[f]] += b
        if t in col_of:
            lap[col_of[t], col_of[t]] += b
        if f in col_of and t in col_of:
            lap[col_of[f], col_of[t]] -= b
            lap[col_of[t], col_of[f]] -= b
    return lap


def dc_power_flow(network: GridNetwork, injections: np.ndarray) -> np.ndarray:
    """Solve for non-slack phase angles given per-unit injections.

    `injections` is ordered like the state columns (all non-slack buses in bus
    order).  The slack bus absorbs the residual power balance.
    """
    p = np.asarray(injections, dtype=float)
    lap = reduced_laplacian(network)
    if p.shape != (lap.shape[0],):
        raise ValueError(f"expected {lap.shape[0]} injections, got {p.shape}")
    try:
        return np.linalg.solve(lap, p)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - blocked by validation
        raise StructuralError("singular susceptance matrix") from exc


def base_injections(network: GridNetwork) -> np.ndarray:
    """Per-unit injections at non-slack buses for the stored operating point.

    Dispatch data is not part of the network description, so the slack bus
    supplies all generation and every other bus injects minus its base load.
    """
    return np.array(
        [
            -b.base_load / network.base_mva
            for b in network.buses
            if b.bus_class != "slack"
        ]
    )


def initial_state(network: GridNetwork) -> np.ndarray:
    """Phase angles of the stored operating point."""
    return dc_power_flow(network, base_injections(network))


def geodesic_distances(network: GridNetwork) -> np.ndarray:
    """All-pairs hop distances on the physical graph, indexed by bus position."""
    n = len(network.buses)
    idx = network.bus_index
    adj = network.adjacency
    dist = np.full((n, n), -1, dtype=int)
    for start in network.buses:
        s = idx[start.bus_id]
        dist[s, s] = 0
        queue = deque([start.bus_id])
        while queue:
            u = queue.popleft()
            du = dist[s, idx[u]]
            for v in adj[u]:
                if dist[s, idx[v]] < 0:
                    dist[s, idx[v]] = du + 1
                    queue.append(v)
    return dist


# ---------------------------------------------------------------------------
# Case file parsing


def parse_case_file(text: str) -> GridNetwork:
    """Parse a grid description from JSON or MATPOWER-style text."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json_case(text)
    return _parse_matpower_case(text)


def load_case(path) -> GridNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case_file(fh.read())


def _parse_json_case(text: str) -> GridNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    try:
        buses = tuple(
            Bus(int(b["id"]), str(b["class"]), float(b.get("load_mw", 0.0)))
            for b in doc["buses"]
        )
        branches = tuple(
            Branch(int(br["from"]), int(br["to"]), float(br["b"]))
            for br in doc["branches"]
        )
        base = float(doc["base_mva"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"missing or malformed field: {exc}") from exc
    return GridNetwork(buses=buses, branches=branches, base_mva=base)


_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[")
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[]+);")


def _parse_matpower_case(text: str) -> GridNetwork:
    matrices: dict[str, list[list[float]]] = {}
    scalars: dict[str, str] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if current is None:
            m = _MATRIX_RE.search(line)
            if m:
                current = m.group(1)
                matrices[current] = []
                line = line[m.end():].strip()
                if not line:
                    continue
            else:
                s = _SCALAR_RE.search(line)
                if s:
                    scalars[s.group(1)] = s.group(2).strip()
                continue
        # inside a matrix block (possibly with data on the opening line)
        closed = False
        if "]" in line:
            line, _, _ = line.partition("]")
            closed = True
        for chunk in line.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                matrices[current].append([float(tok) for tok in chunk.split()])
            except ValueError:
                raise CaseParseError(f"bad numeric row in mpc.{current}: {chunk!r}", line_no)
        if closed:
            current = None
    if current is not None:
        raise CaseParseError(f"matrix mpc.{current} is never closed")

    if "baseMVA" not in scalars:
        raise CaseParseError("missing mpc.baseMVA")
    try:
        base = float(scalars["baseMVA"])
    except ValueError:
        raise CaseParseError(f"bad mpc.baseMVA value {scalars['baseMVA']!r}")
    for required in ("bus", "branch"):
        if required not in matrices or not matrices[required]:
            raise CaseParseError(f"missing mpc.{required} matrix")

    gen_buses = {int(row[0]) for row in matrices.get("gen", [])}
    buses = []
    for row in matrices["bus"]:
        if len(row) < 3:
            raise CaseParseError(f"bus row too short: {row}")
        bus_id, bus_type, pd = int(row[0]), int(row[1]), float(row[2])
        if bus_type == 3:
            cls = "slack"
        elif bus_id in gen_buses:
            cls = "generator"
        elif pd != 0.0:
            cls = "load"
        else:
            cls = "zero_load"
        buses.append(Bus(bus_id, cls, pd))

    branches = []
    for row in matrices["branch"]:
        if len(row) < 4:
            raise CaseParseError(f"branch row too short: {row}")
        x = float(row[3])
        if x <= 0:
            raise StructuralError(
                f"branch {int(row[0])}-{int(row[1])}: reactance must be positive"
            )
        branches.append(Branch(int(row[0]), int(row[1]), 1.0 / x))

    return GridNetwork(buses=tuple(buses), branches=tuple(branches), base_mva=base)


def network_to_json(network: GridNetwork) -> str:
    """Serialize a network to the native JSON grid format."""
    doc = {
        "base_mva": network.base_mva,
        "buses": [
            {"id": b.bus_id, "class": b.bus_class, "load_mw": b.base_load}
            for b in network.buses
        ],
        "branches": [
            {"from": br.from_bus, "to": br.to_bus, "b": br.susceptance}
            for br in network.branches
        ],
    }
    return json.dumps(doc, indent=2)
