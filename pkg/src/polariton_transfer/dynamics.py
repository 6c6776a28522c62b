"""Single-excitation hopping dynamics on coupling graphs.

Each polariton species hops with the weighted adjacency matrix of the graph,
so one N x N real symmetric problem describes both rails.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .core import CouplingGraph, InvalidParameterError, SingleExcitationState


class NumericalError(RuntimeError):
    pass


class StepSizeError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class HeuristicEstimateWarning(UserWarning):
    """Arrival time on a non-chain graph is only a heuristic."""


def hamiltonian_matrix(graph: CouplingGraph) -> np.ndarray:
    return graph.adjacency()


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns.

    Each eigenvector's first component above 1e-12 in magnitude is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def propagator(self, t: float) -> np.ndarray:
        V = self.eigenvectors
        return (V * np.exp(-1j * self.eigenvalues * t)) @ V.T

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "eigenvectors": self.eigenvectors.tolist()}


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size and col[idx[0]] < 0:
            V[:, k] = -col
    return V


@lru_cache(maxsize=256)
def _decompose_cached(graph: CouplingGraph) -> SpectralDecomposition:
    H = hamiltonian_matrix(graph)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(H)
        raise NumericalError(f"eigendecomposition failed (condition number {cond:.3e}): {exc}") from exc
    V = _fix_signs(V)
    w.setflags(write=False)
    V.setflags(write=False)
    return SpectralDecomposition(w, V)


def spectral_decompose(graph: CouplingGraph) -> SpectralDecomposition:
    """Eigendecomposition of the hopping matrix (cached; results are read-only)."""
    return _decompose_cached(graph)


def transition_amplitude(graph: CouplingGraph, source: int, target: int, t):
    """<target| exp(-iHt) |source> for 1-based nodes; ``t`` may be an array."""
    dec = spectral_decompose(graph)
    i, j = graph.index(source), graph.index(target)
    weights = dec.eigenvectors[j, :] * dec.eigenvectors[i, :]
    t_arr = np.asarray(t, dtype=float)
    out = np.exp(-1j * np.multiply.outer(t_arr, dec.eigenvalues)) @ weights
    return complex(out) if t_arr.ndim == 0 else out


def _as_vector(state, n: int) -> np.ndarray:
    a = state.amplitudes if isinstance(state, SingleExcitationState) else np.asarray(state, dtype=complex)
    if a.shape != (n,):
        raise DimensionMismatchError(f"state has shape {a.shape}, graph has {n} sites")
    return a


def evolve_vector(psi: np.ndarray, graph: CouplingGraph, t: float) -> np.ndarray:
    dec = spectral_decompose(graph)
    V = dec.eigenvectors
    return V @ (np.exp(-1j * dec.eigenvalues * t) * (V.T @ psi))


def evolve(state: SingleExcitationState, graph: CouplingGraph, t: float) -> SingleExcitationState:
    psi = _as_vector(state, graph.n)
    return SingleExcitationState(evolve_vector(psi, graph, t))


@dataclass(frozen=True)
class DecayProfile:
    """Per-site rates d_k >= 0 entering as -(i/2) sum_k d_k |k><k|."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(d) for d in self.rates)
        if any(d < 0 or not math.isfinite(d) for d in rates):
            raise InvalidParameterError("decay rates must be finite and >= 0")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def uniform(cls, n: int, rate: float) -> "DecayProfile":
        return cls((rate,) * n)

    @classmethod
    def at_site(cls, n: int, site: int, rate: float) -> "DecayProfile":
        """Rate on one 0-based site, zero elsewhere."""
        rates = [0.0] * n
        rates[site] = rate
        return cls(tuple(rates))

    def is_zero(self) -> bool:
        return not any(self.rates)


def effective_hamiltonian(graph: CouplingGraph, decay: DecayProfile) -> np.ndarray:
    if len(decay.rates) != graph.n:
        raise DimensionMismatchError("decay profile length does not match graph")
    return hamiltonian_matrix(graph) - 0.5j * np.diag(decay.rates)


_MAX_HALVINGS = 30


def nonhermitian_step(graph: CouplingGraph, decay: DecayProfile, dt: float) -> tuple[np.ndarray, float]:
    """Single-step propagator exp(-i H_eff dt), halving dt until it is contractive.

    Returns ``(U, dt_used)``; apply U ``round(dt / dt_used)`` times to cover dt.
    """
    H_eff = effective_hamiltonian(graph, decay)
    h = dt
    for _ in range(_MAX_HALVINGS):
        U = scipy.linalg.expm(-1j * H_eff * h)
        if np.linalg.norm(U, 2) <= 1.0 + 1e-10:
            return U, h
        h *= 0.5
    raise StepSizeError(f"no contractive step found starting from dt={dt}")


def evolve_nonhermitian(state, graph: CouplingGraph, decay: DecayProfile, t: float, dt: float
                        ) -> SingleExcitationState:
    """Propagate under H - (i/2) diag(decay) for time t in steps of at most dt."""
    if not dt > 0:
        raise InvalidParameterError("dt must be > 0")
    if t < 0:
        raise InvalidParameterError("t must be >= 0")
    psi = _as_vector(state, graph.n).astype(complex)
    return SingleExcitationState(_propagate_nonhermitian(psi, graph, decay, t, dt))


def _propagate_nonhermitian(psi: np.ndarray, graph: CouplingGraph, decay: DecayProfile,
                            t: float, dt: float) -> np.ndarray:
    if t == 0:
        return psi.copy()
    if decay.is_zero():
        return evolve_vector(psi, graph, t)
    steps = max(1, math.ceil(t / dt - 1e-12))
    h = t / steps
    U, h_used = nonhermitian_step(graph, decay, h)
    reps = steps * int(round(h / h_used))
    norm0 = float(np.vdot(psi, psi).real)
    out = psi
    for _ in range(reps):
        nxt = U @ out
        norm1 = float(np.vdot(nxt, nxt).real)
        if norm1 > norm0 + 1e-10:
            raise StepSizeError(f"squared norm grew from {norm0} to {norm1}; reduce dt")
        out, norm0 = nxt, norm1
    return out


def chain_amplitude_oracle(n: int, J: float, j: int, t):
    """Closed-form f_{1j}(t) on a uniform open chain (sine-mode expansion)."""
    k = np.arange(1, n + 1)
    theta = k * np.pi / (n + 1)
    weights = (2.0 / (n + 1)) * np.sin(theta) * np.sin(theta * j)
    energies = 2.0 * J * np.cos(theta)
    t_arr = np.asarray(t, dtype=float)
    out = np.exp(-1j * np.multiply.outer(t_arr, energies)) @ weights
    return complex(out) if t_arr.ndim == 0 else out


def arrival_time_estimate(graph: CouplingGraph, J: float | None = None) -> float:
    """Earliest useful measurement time, (N - 1) / (2J) on a uniform chain.

    This is a lower-bound heuristic (ballistic front at the maximal group
    velocity 2J); e.g. the N = 2 peak is at pi/2, not 0.5. On other graphs
    N / (2 J_min) is returned with a :class:`HeuristicEstimateWarning`.
    """
    if graph.n == 1:
        return 0.0
    chain_J = graph.chain_weight()
    if chain_J is not None:
        J = chain_J if J is None else J
        return (graph.n - 1) / (2.0 * J)
    warnings.warn("arrival time on a non-chain graph is a heuristic", HeuristicEstimateWarning, stacklevel=2)
    return graph.n / (2.0 * graph.min_weight())


def eigenspaces(dec: SpectralDecomposition, tol: float = 1e-9) -> list[np.ndarray]:
    """Eigenvector blocks grouped by (numerically) equal eigenvalue."""
    w, V = dec.eigenvalues, dec.eigenvectors
    scale = max(1.0, float(np.max(np.abs(w)))) if len(w) else 1.0
    blocks, start = [], 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol * scale:
            blocks.append(V[:, start:k])
            start = k
    return blocks
