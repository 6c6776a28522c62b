"""Shared domain types: parameters, coupling graphs, polaritonic qubits, schedules.

Node labels are 1-based everywhere a user sees them (constructors, files,
records). Arrays are 0-based; use ``CouplingGraph.index`` to convert.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

INPUT_NORM_TOL = 1e-9
DRIFT_TOL = 1e-10


class InvalidParameterError(ValueError):
    pass


class InvalidTopologyError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


class UnsupportedClosedFormError(ValueError):
    """Closed-form polariton energies need resonance (delta == 0)."""


# ---------------------------------------------------------------------------
# physical parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JCHParams:
    """Jaynes-Cummings-Hubbard parameter bundle (all rates in the same units).

    ``delta`` is derived from ``omega_0 - omega_d`` and cannot be set
    independently.
    """

    omega_d: float
    omega_0: float
    g: float
    A: float
    kappa: float = 0.0
    gamma: float = 0.0
    n_max: int = 2

    def __post_init__(self):
        if not self.g > 0:
            raise InvalidParameterError(f"g must be > 0, got {self.g}")
        # A = 0 is allowed as the decoupled-cavity limit used by the validation checks.
        if self.A < 0:
            raise InvalidParameterError(f"A must be >= 0, got {self.A}")
        if self.n_max < 1:
            raise InvalidParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.kappa < 0 or self.gamma < 0:
            raise InvalidParameterError("kappa and gamma must be non-negative")

    @property
    def delta(self) -> float:
        return self.omega_0 - self.omega_d

    @classmethod
    def resonant(cls, g_over_A: float = 100.0, A: float = 1.0, omega_d_over_g: float = 1e4,
                 g_over_loss: float | None = None, n_max: int = 2) -> "JCHParams":
        """Parameter set on resonance, scaled from the hopping rate ``A``."""
        g = g_over_A * A
        loss = 0.0 if g_over_loss is None else g / g_over_loss
        omega_d = omega_d_over_g * g
        return cls(omega_d=omega_d, omega_0=omega_d, g=g, A=A, kappa=loss, gamma=loss, n_max=n_max)

    def with_(self, **changes) -> "JCHParams":
        data = {k: getattr(self, k) for k in ("omega_d", "omega_0", "g", "A", "kappa", "gamma", "n_max")}
        data.update(changes)
        return JCHParams(**data)

    def polariton_decay_rate(self) -> float:
        """Decay rate of a first-manifold polariton: half photon, half atom."""
        return 0.5 * (self.kappa + self.gamma)


# ---------------------------------------------------------------------------
# coupling graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingGraph:
    """Undirected weighted coupling topology with sender and receiver.

    ``edges`` holds 1-based ``(i, j, weight)`` triples with ``i < j``,
    sorted. Use :func:`build_chain` / :func:`build_graph` to construct.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    sender: int
    receiver: int
    connected: bool = field(default=True, compare=False)

    def index(self, node: int) -> int:
        if not 1 <= node <= self.n:
            raise InvalidTopologyError(f"node {node} out of range 1..{self.n}")
        return node - 1

    @property
    def s(self) -> int:
        return self.sender - 1

    @property
    def r(self) -> int:
        return self.receiver - 1

    def adjacency(self) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            H[i - 1, j - 1] = w
            H[j - 1, i - 1] = w
        return H

    def max_weight(self) -> float:
        return max((w for _, _, w in self.edges), default=0.0)

    def min_weight(self) -> float:
        return min((w for _, _, w in self.edges), default=0.0)

    def components(self) -> list[set[int]]:
        """Connected components as sets of 1-based node labels."""
        parent = list(range(self.n + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j, _ in self.edges:
            parent[find(i)] = find(j)
        groups: dict[int, set[int]] = {}
        for v in range(1, self.n + 1):
            groups.setdefault(find(v), set()).add(v)
        return sorted(groups.values(), key=min)

    def is_connected_pair(self, a: int | None = None, b: int | None = None) -> bool:
        a = self.sender if a is None else a
        b = self.receiver if b is None else b
        return any(a in c and b in c for c in self.components())

    def chain_weight(self) -> float | None:
        """Uniform hopping if this is the path 1-2-...-N with equal weights, else None."""
        if self.n == 1:
            return 1.0
        expected = [(k, k + 1) for k in range(1, self.n)]
        if [(i, j) for i, j, _ in self.edges] != expected:
            return None
        ws = {w for _, _, w in self.edges}
        return ws.pop() if len(ws) == 1 else None

    def is_path(self) -> bool:
        if self.n == 1:
            return True
        return [(i, j) for i, j, _ in self.edges] == [(k, k + 1) for k in range(1, self.n)]

    def with_endpoints(self, sender: int, receiver: int) -> "CouplingGraph":
        return build_graph(self.n, self.edges, sender, receiver)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "N": self.n,
            "edges": [[i, j, w] for i, j, w in self.edges],
            "sender": self.sender,
            "receiver": self.receiver,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingGraph":
        unknown = set(data) - {"N", "edges", "sender", "receiver"}
        if unknown:
            raise InvalidTopologyError(f"unknown topology keys: {sorted(unknown)}")
        try:
            n, edges, s, r = data["N"], data["edges"], data["sender"], data["receiver"]
        except KeyError as exc:
            raise InvalidTopologyError(f"topology missing key {exc}") from None
        return build_graph(n, [tuple(e) for e in edges], s, r)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CouplingGraph":
        return cls.from_dict(json.loads(text))


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def build_chain(n: int, J: float = 1.0) -> CouplingGraph:
    """Uniform open chain 1-2-...-n, sender 1, receiver n."""
    if not _is_int(n) or n < 1:
        raise InvalidParameterError(f"chain length must be a positive integer, got {n!r}")
    if not J > 0:
        raise InvalidParameterError(f"hopping must be positive, got {J!r}")
    edges = tuple((k, k + 1, float(J)) for k in range(1, n))
    return CouplingGraph(n=int(n), edges=edges, sender=1, receiver=int(n), connected=True)


def build_graph(n: int, edges: Iterable[Sequence], sender: int, receiver: int) -> CouplingGraph:
    """Validate an arbitrary topology.

    Raises InvalidTopologyError on self-loops, duplicates, non-positive
    weights or out-of-range nodes. A disconnected sender/receiver pair is
    *not* an error; it is reported through ``graph.connected``.
    """
    if not _is_int(n) or n < 1:
        raise InvalidTopologyError(f"N must be a positive integer, got {n!r}")
    for node in (sender, receiver):
        if not _is_int(node) or not 1 <= node <= n:
            raise InvalidTopologyError(f"sender/receiver {node!r} out of range 1..{n}")
    if n > 1 and sender == receiver:
        raise InvalidTopologyError("sender and receiver must differ when N > 1")
    seen: set[tuple[int, int]] = set()
    clean = []
    for e in edges:
        if len(e) != 3:
            raise InvalidTopologyError(f"edge must be (i, j, weight), got {e!r}")
        i, j, w = e
        if not (_is_int(i) and _is_int(j)) or not (1 <= i <= n and 1 <= j <= n):
            raise InvalidTopologyError(f"edge {e!r} has out-of-range node")
        if i == j:
            raise InvalidTopologyError(f"self-loop at node {i}")
        w = float(w)
        if not w > 0 or not math.isfinite(w):
            raise InvalidTopologyError(f"edge {e!r} has non-positive weight")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InvalidTopologyError(f"duplicate edge {key}")
        seen.add(key)
        clean.append((int(key[0]), int(key[1]), w))
    clean.sort()
    g = CouplingGraph(n=int(n), edges=tuple(clean), sender=int(sender), receiver=int(receiver))
    object.__setattr__(g, "connected", g.is_connected_pair())
    return g


def build_star(leaves: int, J: float = 1.0, sender: int = 2, receiver: int = 3) -> CouplingGraph:
    """Star with centre 1 and leaves 2..leaves+1."""
    return build_graph(leaves + 1, [(1, k, J) for k in range(2, leaves + 2)], sender, receiver)


def build_ring(n: int, J: float = 1.0, sender: int = 1, receiver: int | None = None) -> CouplingGraph:
    edges = [(k, k + 1, J) for k in range(1, n)] + [(1, n, J)]
    return build_graph(n, edges, sender, receiver if receiver is not None else n // 2 + 1)


def build_y_graph(stem: int, arm: int, J: float = 1.0) -> tuple[CouplingGraph, dict[str, list[int]]]:
    """Y-shaped graph: fork node 1, a stem and two mirror-image arms.

    Returns the graph (sender at the fork, receiver at the first node of arm
    A) together with the node labels of each branch.
    """
    if stem < 0 or arm < 1:
        raise InvalidParameterError("need stem >= 0 and arm >= 1")
    n = 1 + stem + 2 * arm
    branches = {
        "stem": list(range(2, 2 + stem)),
        "arm_a": list(range(2 + stem, 2 + stem + arm)),
        "arm_b": list(range(2 + stem + arm, n + 1)),
    }
    edges = []
    for nodes in branches.values():
        prev = 1
        for v in nodes:
            edges.append((prev, v, J))
            prev = v
    return build_graph(n, edges, 1, branches["arm_a"][0]), branches


# ---------------------------------------------------------------------------
# qubits and states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolaritonQubit:
    """alpha on |1+> (rail I), beta on |1-> (rail II)."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > INPUT_NORM_TOL:
            raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])

    def fidelity(self, other: "PolaritonQubit | np.ndarray") -> float:
        v = other.vector() if isinstance(other, PolaritonQubit) else np.asarray(other, dtype=complex)
        return float(abs(np.vdot(self.vector(), v)) ** 2 / np.vdot(v, v).real)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "PolaritonQubit":
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        return cls(v[0], v[1])


@dataclass(frozen=True)
class SingleExcitationState:
    """Site amplitudes of one excitation; squared norm may be < 1."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        if self.norm_sq() > 1.0 + DRIFT_TOL:
            raise NormalizationError(f"squared norm {self.norm_sq()!r} exceeds 1")

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __len__(self):
        return len(self.amplitudes)

    @classmethod
    def localized(cls, n: int, site: int) -> "SingleExcitationState":
        """Unit amplitude on 0-based ``site``."""
        a = np.zeros(n, dtype=complex)
        a[site] = 1.0
        return cls(a)


@dataclass(frozen=True)
class DualRailState:
    """alpha |0>_I |f>_II + beta |f>_I |0>_II with one shared spatial vector f."""

    qubit: PolaritonQubit
    spatial: SingleExcitationState

    def with_spatial(self, amplitudes: np.ndarray) -> "DualRailState":
        return DualRailState(self.qubit, SingleExcitationState(amplitudes))


def encode_polariton_qubit(alpha: complex, beta: complex, graph: CouplingGraph) -> DualRailState:
    """Place the qubit on the sender cavity as alpha|1+> + beta|1->."""
    return DualRailState(PolaritonQubit(alpha, beta), SingleExcitationState.localized(graph.n, graph.s))


_SQRT_HALF = 1.0 / math.sqrt(2.0)


def bare_to_polariton(a: complex, b: complex) -> tuple[complex, complex]:
    """Coefficients of a|e,0> + b|g,1> in the (|1+>, |1->) basis.

    With |1+-> = (|g,1> +- |e,0>)/sqrt2 this is ((a+b)/sqrt2, (b-a)/sqrt2).
    """
    a, b = complex(a), complex(b)
    _check_pair_norm(a, b)
    return (a + b) * _SQRT_HALF, (b - a) * _SQRT_HALF


def polariton_to_bare(alpha: complex, beta: complex) -> tuple[complex, complex]:
    """Inverse of :func:`bare_to_polariton`: returns (a, b) on (|e,0>, |g,1>)."""
    alpha, beta = complex(alpha), complex(beta)
    _check_pair_norm(alpha, beta)
    return (alpha - beta) * _SQRT_HALF, (alpha + beta) * _SQRT_HALF


def _check_pair_norm(x: complex, y: complex) -> None:
    norm = abs(x) ** 2 + abs(y) ** 2
    if abs(norm - 1.0) > INPUT_NORM_TOL:
        raise NormalizationError(f"input norm {norm!r}, expected 1")


GROUND = "ground"


def polariton_energy(n: int, sign: Union[int, str], params: JCHParams) -> float:
    """Closed-form energy n*omega_d +- g*sqrt(n) of the |n+-> polariton.

    For n == 0 this returns 0.0; use :func:`polariton_energy_marked` to get
    the ground-state marker as well.
    """
    return polariton_energy_marked(n, sign, params)[0]


def polariton_energy_marked(n: int, sign: Union[int, str], params: JCHParams) -> tuple[float, str | None]:
    """Energy plus a marker (``GROUND`` for n == 0, else None)."""
    s = _sign(sign)
    if n < 0:
        raise InvalidParameterError("polariton number must be >= 0")
    if params.delta != 0:
        raise UnsupportedClosedFormError(
            f"closed form needs delta = 0 (got {params.delta}); diagonalize the JCH matrix instead")
    if n == 0:
        return 0.0, GROUND
    return n * params.omega_d + s * params.g * math.sqrt(n), None


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise InvalidParameterError(f"sign must be + or -, got {sign!r}")


# ---------------------------------------------------------------------------
# measurement schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SnapshotList:
    times: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if any(t < 0 for t in ts):
            raise InvalidParameterError("snapshot times must be >= 0")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidParameterError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", ts)

    @property
    def max_rounds(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Regular:
    t0: float
    tau: float
    max_rounds: int = 100_000

    def __post_init__(self):
        if self.t0 < 0 or not self.tau > 0 or self.max_rounds < 1:
            raise InvalidParameterError("Regular schedule needs t0 >= 0, tau > 0, max_rounds >= 1")

    def time(self, k: int) -> float:
        return self.t0 + k * self.tau

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(self.time(k) for k in range(self.max_rounds))


@dataclass(frozen=True)
class GreedyOptimized:
    window: float
    grid_step: float
    max_rounds: int = 10_000

    def __post_init__(self):
        if not self.window > 0 or not self.grid_step > 0 or self.max_rounds < 1:
            raise InvalidParameterError("GreedyOptimized needs window > 0, grid_step > 0, max_rounds >= 1")
        if self.grid_step > self.window:
            raise InvalidParameterError("grid_step must not exceed window")


@dataclass(frozen=True)
class Continuous:
    rate: float
    duration: float
    dt: float

    def __post_init__(self):
        if not self.rate > 0 or not self.duration > 0 or not self.dt > 0:
            raise InvalidParameterError("Continuous schedule needs rate, duration, dt > 0")


MeasurementSchedule = Union[SnapshotList, Regular, GreedyOptimized, Continuous]


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Round:
    time: float
    p_cond: float
    p_abs: float
    cumulative: float
    remaining: float = float("nan")  # squared norm left on the unheralded branch
    decayed: float = 0.0  # weight lost to decay so far (lossy runs)


@dataclass
class TransferRecord:
    """Outcome of a protocol run along the not-yet-heralded branch.

    ``rounds[k].cumulative`` is the total heralding probability after
    round k. For lossless runs it equals 1 - prod(1 - p_cond).
    """

    rounds: list[Round]
    conditional_fidelity: float
    elapsed: float
    converged: bool
    target: float
    remaining_norm: float = 0.0
    decayed: float = 0.0
    ceiling: float = 1.0
    diagnostic: str = ""
    heralded_certain: bool = False
    density: np.ndarray | None = None
    density_times: np.ndarray | None = None

    @property
    def success(self) -> float:
        return self.rounds[-1].cumulative if self.rounds else 0.0

    def cumulative(self) -> np.ndarray:
        return np.array([r.cumulative for r in self.rounds])

    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.rounds])

    def to_dict(self) -> dict:
        out = {
            "rounds": [[r.time, r.p_cond, r.p_abs, r.cumulative, r.remaining, r.decayed] for r in self.rounds],
            "round_fields": ["time", "p_cond", "p_abs", "cumulative", "remaining", "decayed"],
            "conditional_fidelity": self.conditional_fidelity,
            "elapsed": self.elapsed,
            "converged": self.converged,
            "target": self.target,
            "success": self.success,
            "remaining_norm": self.remaining_norm,
            "decayed": self.decayed,
            "ceiling": self.ceiling,
            "heralded_certain": self.heralded_certain,
            "diagnostic": self.diagnostic,
        }
        return out
