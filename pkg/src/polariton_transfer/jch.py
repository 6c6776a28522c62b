"""Exact Jaynes-Cummings-Hubbard dynamics on small arrays.

Used to check the effective polariton-hopping model: interconversion
leakage between the + and - manifolds, photon blockade, and the effective
hopping rate of each species.

Dynamics run in the frame rotating at ``omega_d`` times the total excitation
number. That operator commutes with H, so populations and overlaps are
unchanged while the huge ``omega_d`` phase drops out of time stepping.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .core import CouplingGraph, InvalidParameterError, JCHParams, PolaritonQubit, build_chain
from .dynamics import evolve_vector, spectral_decompose

MAX_SITES = 4
MAX_CUTOFF = 4


class CapacityError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


class CutoffWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# basis and matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FockAtomBasis:
    """Product configurations ((n_1, e_1), ..., (n_N, e_N)), e_k in {0, 1}."""

    n_sites: int
    n_max: int
    sector: int | None
    configs: tuple[tuple[tuple[int, int], ...], ...]
    index: dict = field(compare=False, hash=False, repr=False, default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def excitations(self, k: int) -> int:
        return sum(n + e for n, e in self.configs[k])


def _full_dim(n_sites: int, n_max: int) -> int:
    return (2 * (n_max + 1)) ** n_sites


def enumerate_basis(n_sites: int, n_max: int, sector: int | None = None) -> FockAtomBasis:
    """All configurations with n_k <= n_max, optionally at fixed total excitation."""
    if n_sites < 1 or n_max < 1:
        raise InvalidParameterError("need n_sites >= 1 and n_max >= 1")
    if n_sites > MAX_SITES or n_max > MAX_CUTOFF:
        raise CapacityError(
            f"exact method limited to N <= {MAX_SITES}, n_max <= {MAX_CUTOFF}; "
            f"requested N={n_sites}, n_max={n_max} (full dimension {_full_dim(n_sites, n_max)})")
    site_states = [(n, e) for n in range(n_max + 1) for e in (0, 1)]
    configs = []
    for cfg in itertools.product(site_states, repeat=n_sites):
        if sector is None or sum(n + e for n, e in cfg) == sector:
            configs.append(cfg)
    configs.sort()
    basis = FockAtomBasis(n_sites, n_max, sector, tuple(configs))
    basis.index.update({cfg: k for k, cfg in enumerate(configs)})
    return basis


@dataclass
class JCHMatrix:
    matrix: np.ndarray
    basis: FockAtomBasis
    params: JCHParams
    graph: CouplingGraph
    frame_omega: float = 0.0
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig

    def eigenvalues(self) -> np.ndarray:
        return self.eig()[0]


def build_jch(params: JCHParams, graph: CouplingGraph, basis: FockAtomBasis,
              frame_omega: float = 0.0) -> JCHMatrix:
    """H_free + H_int + H_hop over ``basis``.

    Edge weights of ``graph`` multiply the hopping ``params.A``.
    ``frame_omega`` subtracts frame_omega * (total excitations) from the
    diagonal (exact, since excitation number is conserved).
    """
    if basis.n_sites != graph.n:
        raise InvalidParameterError("basis and graph disagree on the number of sites")
    if basis.n_max > params.n_max:
        raise InvalidParameterError("basis cutoff exceeds params.n_max")
    D = basis.dim
    H = np.zeros((D, D))
    idx = basis.index
    for k, cfg in enumerate(basis.configs):
        H[k, k] = sum(params.omega_d * n + params.omega_0 * e for n, e in cfg) \
            - frame_omega * sum(n + e for n, e in cfg)
        # atom-photon coupling: |g, n> <-> |e, n-1> with sqrt(n)
        for site, (n, e) in enumerate(cfg):
            if e == 0 and n >= 1:
                other = cfg[:site] + ((n - 1, 1),) + cfg[site + 1:]
                j = idx.get(other)
                if j is not None:
                    H[k, j] = H[j, k] = params.g * math.sqrt(n)
        # photon hopping a_i^dag a_j + h.c.
        for i, j_site, w in graph.edges:
            a, b = i - 1, j_site - 1
            for src, dst in ((a, b), (b, a)):
                n_src, e_src = cfg[src]
                n_dst, e_dst = cfg[dst]
                if n_src >= 1 and n_dst < basis.n_max:
                    new = list(cfg)
                    new[src] = (n_src - 1, e_src)
                    new[dst] = (n_dst + 1, e_dst)
                    j = idx.get(tuple(new))
                    if j is not None:
                        H[j, k] += params.A * w * math.sqrt(n_src) * math.sqrt(n_dst + 1)
    return JCHMatrix(H, basis, params, graph, frame_omega)


def exact_evolve(state: np.ndarray, H: JCHMatrix, t) -> np.ndarray:
    """exp(-iHt) state; ``t`` may be an array, giving one row per time."""
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (H.dim,):
        raise InvalidParameterError(f"state dimension {psi.shape} != {H.dim}")
    E, V = H.eig()
    c = V.conj().T @ psi
    t_arr = np.asarray(t, dtype=float)
    out = (np.exp(-1j * np.multiply.outer(t_arr, E)) * c) @ V.T
    _check_cutoff(out, H.basis)
    return out


def _check_cutoff(psi: np.ndarray, basis: FockAtomBasis, tol: float = 1e-6) -> None:
    if basis.sector is not None and basis.n_max >= basis.sector:
        return  # sector already forbids n_k > n_max; no truncation
    edge = [k for k, cfg in enumerate(basis.configs) if any(n == basis.n_max for n, _ in cfg)]
    if edge:
        weight = float(np.max(np.sum(np.abs(np.atleast_2d(psi)[:, edge]) ** 2, axis=1)))
        if weight > tol:
            warnings.warn(f"population {weight:.2e} at the photon cutoff n_max={basis.n_max}",
                          CutoffWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# polariton states
# ---------------------------------------------------------------------------


def _ground(n_sites: int) -> list[tuple[int, int]]:
    return [(0, 0)] * n_sites


def polariton_vector(basis: FockAtomBasis, occupations: dict[int, int]) -> np.ndarray:
    """Product of first-manifold polaritons |1 sign>_site on the listed 0-based sites.

    ``occupations`` maps site -> +1 or -1; other sites are |g,0>.
    """
    psi = np.zeros(basis.dim, dtype=complex)
    sites = sorted(occupations)
    # each |1 +-> = (|g,1> +- |e,0>)/sqrt2
    for choice in itertools.product((0, 1), repeat=len(sites)):
        cfg = _ground(basis.n_sites)
        amp = 1.0
        for site, ch in zip(sites, choice):
            if ch == 0:
                cfg[site] = (1, 0)
            else:
                cfg[site] = (0, 1)
                amp *= occupations[site]
        psi[basis.index[tuple(cfg)]] += amp / math.sqrt(2) ** len(sites)
    return psi


def manifold_vectors(basis: FockAtomBasis, sign: int) -> np.ndarray:
    """Rows |1 sign>_k for k = 0..N-1 (single-excitation sector)."""
    return np.array([polariton_vector(basis, {k: sign}) for k in range(basis.n_sites)])


def _time_grid(t_max: float, fast_rate: float, per_period: int = 40, minimum: int = 2001) -> np.ndarray:
    if t_max <= 0:
        return np.array([0.0])
    n = max(minimum, int(math.ceil(t_max * fast_rate * per_period / (2 * math.pi))) + 1)
    return np.linspace(0.0, t_max, n)


def _require_resonance(params: JCHParams) -> None:
    if params.delta != 0:
        raise InvalidParameterError("this check assumes resonance (delta = 0)")


def _sector_hamiltonian(params: JCHParams, graph: CouplingGraph, sector: int, n_max: int | None = None
                        ) -> JCHMatrix:
    n_max = sector if n_max is None else n_max
    basis = enumerate_basis(graph.n, n_max, sector)
    return build_jch(params.with_(n_max=max(params.n_max, n_max)), graph, basis, frame_omega=params.omega_d)


# ---------------------------------------------------------------------------
# validation experiments
# ---------------------------------------------------------------------------


def interconversion_leakage(params: JCHParams, graph: CouplingGraph, t_max: float) -> float:
    """Max over time of the + manifold population, starting from |1->_sender."""
    _require_resonance(params)
    if graph.n > 3:
        raise CapacityError("leakage check is limited to N <= 3")
    if params.A == 0 or not graph.edges:
        return 0.0  # no hopping: each cavity's |1+-> is an exact eigenstate
    H = _sector_hamiltonian(params, graph, 1)
    psi0 = polariton_vector(H.basis, {graph.s: -1})
    ts = _time_grid(t_max, 2 * params.g + 4 * params.A * graph.max_weight())
    psi_t = exact_evolve(psi0, H, ts)
    plus = manifold_vectors(H.basis, +1)
    pop = np.sum(np.abs(psi_t @ plus.conj().T) ** 2, axis=1)
    return float(np.max(pop))


@dataclass(frozen=True)
class Calibration:
    J_plus: float
    J_minus: float
    A: float

    @property
    def ratio(self) -> float:
        return 0.5 * (self.J_plus + self.J_minus) / self.A

    @property
    def asymmetry(self) -> float:
        return abs(self.J_plus - self.J_minus) / self.J_plus


def _fit_hopping(ts: np.ndarray, pop: np.ndarray, guess: float) -> float:
    if np.max(pop) < 0.5:
        raise CalibrationError(f"no full transfer oscillation (max population {np.max(pop):.3g})")

    def model(t, J, a, b):
        return a * np.sin(J * t) ** 2 + b

    try:
        popt, _ = curve_fit(model, ts, pop, p0=(guess, 1.0, 0.0), maxfev=20000)
    except RuntimeError as exc:
        raise CalibrationError(f"oscillation fit failed: {exc}") from exc
    J = abs(popt[0])
    if not math.isfinite(J) or J <= 0:
        raise CalibrationError("oscillation fit returned a non-positive frequency")
    return J


def calibrate_J_eff(params: JCHParams, periods: float = 3.0) -> Calibration:
    """Effective per-species hopping from exact two-cavity dynamics.

    Starting from |1 sign>_1 |g,0>_2, the same-species population of cavity 2
    is fitted to a sin^2(J t) + b; J is half the angular frequency of the
    full transfer oscillation.
    """
    _require_resonance(params)
    if params.A <= 0:
        raise CalibrationError("no hopping: nothing to calibrate")
    graph = build_chain(2, 1.0)
    H = _sector_hamiltonian(params, graph, 1)
    guess = params.A / 2
    t_max = periods * math.pi / guess
    ts = _time_grid(t_max, 2 * params.g + 4 * params.A, per_period=12)
    rates = {}
    for sign in (+1, -1):
        psi_t = exact_evolve(polariton_vector(H.basis, {0: sign}), H, ts)
        target = polariton_vector(H.basis, {1: sign})
        pop = np.abs(psi_t @ target.conj()) ** 2
        rates[sign] = _fit_hopping(ts, pop, guess)
    return Calibration(rates[+1], rates[-1], params.A)


@dataclass(frozen=True)
class BlockadeResult:
    max_double: float
    max_photon_pair: float
    cutoff_shift: float
    by_cutoff: dict


def _double_occupancy(basis: FockAtomBasis) -> tuple[np.ndarray, np.ndarray]:
    double = np.array([any(n + e >= 2 for n, e in cfg) for cfg in basis.configs])
    photons = np.array([any(n >= 2 for n, _ in cfg) for cfg in basis.configs])
    return double, photons


def blockade_check(params: JCHParams, graph: CouplingGraph, sites: tuple[int, int] = (1, 2),
                   t_max: float = 10.0, sign: int = -1, cutoffs: tuple[int, ...] = (2, 3)) -> BlockadeResult:
    """Largest probability of a doubly excited cavity, from |1 sign>|1 sign> on ``sites``.

    ``max_double`` counts configurations where some cavity holds two or more
    excitations (photons plus atom); ``max_photon_pair`` only those where a
    cavity holds two or more photons. Evaluated at each cutoff in
    ``cutoffs``; the relative shift between the first two is reported.
    """
    if graph.n not in (2, 3):
        raise CapacityError("blockade check supports N in {2, 3}")
    if min(cutoffs) < 2:
        raise InvalidParameterError("blockade check needs n_max >= 2")
    a, b = (graph.index(s) for s in sites)
    if a == b:
        raise InvalidParameterError("initial excitations must sit on distinct sites")
    by_cutoff = {}
    for n_max in cutoffs:
        if params.A == 0 or not graph.edges:
            by_cutoff[n_max] = (0.0, 0.0)  # no transport, each cavity keeps one excitation
            continue
        H = _sector_hamiltonian(params, graph, 2, n_max=n_max)
        psi0 = polariton_vector(H.basis, {a: sign, b: sign})
        ts = _time_grid(t_max, 4 * params.g + 4 * params.A * graph.max_weight())
        probs = np.abs(exact_evolve(psi0, H, ts)) ** 2
        double, photons = _double_occupancy(H.basis)
        by_cutoff[n_max] = (float(np.max(probs[:, double].sum(axis=1))),
                            float(np.max(probs[:, photons].sum(axis=1))))
    first, second = (by_cutoff[c][0] for c in cutoffs[:2]) if len(cutoffs) > 1 else (by_cutoff[cutoffs[0]][0],) * 2
    shift = abs(second - first) / first if first > 0 else abs(second - first)
    if shift > 0.1:
        warnings.warn(f"blockade result shifts by {shift:.1%} between cutoffs {cutoffs[:2]}",
                      CutoffWarning, stacklevel=2)
    d, p = by_cutoff[cutoffs[0]]
    return BlockadeResult(d, p, shift, by_cutoff)


def effective_vs_exact_overlap(params: JCHParams, graph: CouplingGraph, qubit: PolaritonQubit, t_max: float,
                               J_eff: float | None = None, return_curve: bool = False):
    """Worst fidelity between exact JCH and effective hopping dynamics for t <= t_max.

    The exact state is moved to the interaction picture of H_free + H_int by
    undoing the +-g phases of the single-site polaritons. The effective model
    hops both species with ``J_eff`` times the edge weights (calibrated when
    not given).
    """
    _require_resonance(params)
    if graph.n > 3:
        raise CapacityError("overlap check is limited to N <= 3")
    if J_eff is None:
        J_eff = calibrate_J_eff(params).ratio * params.A if params.A > 0 else 0.0
    H = _sector_hamiltonian(params, graph, 1)
    basis = H.basis
    plus = manifold_vectors(basis, +1)
    minus = manifold_vectors(basis, -1)
    psi0 = qubit.alpha * plus[graph.s] + qubit.beta * minus[graph.s]
    ts = _time_grid(t_max, 2 * params.g + 4 * params.A * graph.max_weight())
    exact = exact_evolve(psi0, H, ts)
    # interaction picture: |1+-> components pick up exp(+-i g t)
    c_plus = (exact @ plus.conj().T) * np.exp(1j * params.g * ts)[:, None]
    c_minus = (exact @ minus.conj().T) * np.exp(-1j * params.g * ts)[:, None]
    scaled = _scaled_graph(graph, J_eff)
    f0 = np.zeros(graph.n, dtype=complex)
    f0[graph.s] = 1.0
    if scaled is None:
        f_t = np.tile(f0, (len(ts), 1))
    else:
        dec = spectral_decompose(scaled)
        V = dec.eigenvectors
        f_t = (np.exp(-1j * np.multiply.outer(ts, dec.eigenvalues)) * (V.T @ f0)) @ V.T
    amp = np.sum(np.conj(qubit.alpha * f_t) * c_plus + np.conj(qubit.beta * f_t) * c_minus, axis=1)
    fid = np.abs(amp) ** 2
    if return_curve:
        return float(np.min(fid)), ts, fid
    return float(np.min(fid))


def _scaled_graph(graph: CouplingGraph, J: float) -> CouplingGraph | None:
    from .core import build_graph
    if J <= 0 or not graph.edges:
        return None
    return build_graph(graph.n, [(i, j, w * J) for i, j, w in graph.edges], graph.sender, graph.receiver)


def single_site_spectrum(params: JCHParams, n: int) -> np.ndarray:
    """Exact eigenvalues of one cavity in the n-excitation sector."""
    basis = enumerate_basis(1, max(n, 1), n)
    return build_jch(params.with_(n_max=max(params.n_max, n)), build_chain(1), basis).eigenvalues()
