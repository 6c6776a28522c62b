"""Sweeps and fits: time to reach a fidelity, scaling law, convergence rate."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    CouplingGraph,
    GreedyOptimized,
    InvalidParameterError,
    PolaritonQubit,
    Regular,
    TransferRecord,
    build_chain,
)
from .dynamics import arrival_time_estimate
from .protocol import dark_weight, run_protocol

# XY-normalization hopping per unit of simulation hopping:
# H = A sum(sx sx + sy sy) has single-excitation matrix element 2A
XY_MATRIX_ELEMENT = 2.0


class UnreachableFidelityError(RuntimeError):
    pass


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulePolicy:
    """Recipe turning a graph into a measurement schedule.

    ``regular``: first measurement at the arrival estimate (unless ``t0``
    is set), then every ``tau_scale * N**(1/3) / J`` (or ``tau`` if given).
    ``greedy``: greedy snapshots looking ``window`` ahead; the default window
    is one round trip, max(N - 1, pi) / J.
    """

    name: str
    kind: str = "regular"
    tau_scale: float = 0.35
    tau: float | None = None
    t0: float | None = None
    window: float | None = None
    grid_step: float = 0.01
    max_rounds: int = 200_000

    def __post_init__(self):
        if self.kind not in ("regular", "greedy"):
            raise InvalidParameterError(f"unknown policy kind {self.kind!r}")

    def schedule(self, graph: CouplingGraph):
        J = graph.chain_weight() or graph.max_weight() or 1.0
        if self.kind == "regular":
            t0 = self.t0 if self.t0 is not None else arrival_time_estimate(graph)
            tau = self.tau if self.tau is not None else self.tau_scale * graph.n ** (1 / 3) / J
            return Regular(t0, tau, self.max_rounds)
        window = self.window if self.window is not None else max(graph.n - 1, math.pi) / J
        return GreedyOptimized(window, self.grid_step / J, min(self.max_rounds, 100_000))


REGULAR = SchedulePolicy("regular")
GREEDY = SchedulePolicy("greedy", kind="greedy")
POLICIES = {p.name: p for p in (REGULAR, GREEDY)}


def policy_from_name(name: str) -> SchedulePolicy:
    try:
        return POLICIES[name]
    except KeyError:
        raise InvalidParameterError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None


def run_policy(graph: CouplingGraph, policy: SchedulePolicy, F: float,
               qubit: PolaritonQubit | None = None) -> TransferRecord:
    qubit = qubit or PolaritonQubit(1.0, 0.0)
    return run_protocol(graph, qubit, policy.schedule(graph), F)


def time_to_fidelity(graph: CouplingGraph, policy: SchedulePolicy, F: float) -> float:
    """Elapsed time of the round at which cumulative success first reaches F."""
    if not 0 < F < 1:
        raise InvalidParameterError("F must lie in (0, 1)")
    ceiling = dark_weight(graph) if graph.connected else 0.0
    if ceiling < F:
        raise UnreachableFidelityError(f"success ceiling {ceiling:.6g} is below F={F}")
    rec = run_policy(graph, policy, F)
    if not rec.converged:
        raise UnreachableFidelityError(
            f"schedule exhausted after {len(rec.rounds)} rounds at success {rec.success:.6g} < {F}")
    return rec.elapsed


# ---------------------------------------------------------------------------
# scaling law
# ---------------------------------------------------------------------------


@dataclass
class ScalingFit:
    """t * A = c * N**p * |ln(1 - F)| fitted in the log domain.

    ``c`` uses A = J / ``j_eff_over_A`` (the calibrated cavity convention).
    ``c_hopping`` takes A equal to the simulated hopping J and ``c_xy``
    the XY-chain normalization with matrix element 2A.
    """

    c: float
    p: float
    residual: float
    points: list[tuple[int, float, float, float]]
    j_eff_over_A: float = 1.0
    c_hopping: float = float("nan")
    c_xy: float = float("nan")
    unit_convention: str = "A = J / j_eff_over_A"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["points"] = [list(pt) for pt in self.points]
        return d


def fit_scaling(points, j_eff_over_A: float = 1.0) -> ScalingFit:
    """Least-squares fit of log(t A / |ln(1-F)|) = log c + p log N.

    ``points`` are (N, F, t, J) with t in the same time units as 1/J.
    """
    pts = [(int(N), float(F), float(t), float(J)) for N, F, t, J in points]
    if len({N for N, *_ in pts}) < 5:
        raise FitError("need at least 5 distinct N values")
    N = np.array([p[0] for p in pts], dtype=float)
    F = np.array([p[1] for p in pts])
    t = np.array([p[2] for p in pts])
    J = np.array([p[3] for p in pts])
    if np.any(t <= 0) or np.any((F <= 0) | (F >= 1)):
        raise FitError("times must be positive and F in (0, 1)")
    base = np.log(t) + np.log(J) - np.log(np.abs(np.log1p(-F)))  # t measured in 1/J
    X = np.column_stack([np.ones_like(N), np.log(N)])
    if np.linalg.matrix_rank(X) < 2:
        raise FitError("degenerate design matrix")
    beta, *_ = np.linalg.lstsq(X, base, rcond=None)
    resid = float(np.linalg.norm(base - X @ beta))
    c_hop = float(np.exp(beta[0]))
    return ScalingFit(
        c=c_hop / j_eff_over_A,
        p=float(beta[1]),
        residual=resid,
        points=pts,
        j_eff_over_A=j_eff_over_A,
        c_hopping=c_hop,
        c_xy=c_hop / XY_MATRIX_ELEMENT,
    )


# ---------------------------------------------------------------------------
# convergence of the success probability
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceFit:
    rate: float  # -d ln(1 - P_k) / dk
    r2: float
    tail_start: int
    n_points: int
    trivially_converged: bool = False
    flagged: str = ""


def first_arrival_round(record: TransferRecord) -> int:
    """Index of the first local maximum of the per-round detection probability."""
    p = np.array([r.p_abs for r in record.rounds])
    nz = np.flatnonzero(p > 1e-12)
    if nz.size == 0:
        return 0
    k = int(nz[0])
    while k + 1 < len(p) and p[k + 1] >= p[k]:
        k += 1
    return k


def fit_convergence(record: TransferRecord, tail_start: int | None = None) -> ConvergenceFit:
    """Geometric decay rate of 1 - P_k over the rounds after the first arrival."""
    P = record.cumulative()
    if len(P) and 1.0 - P[-1] <= 1e-12 and len(P) < 10:
        return ConvergenceFit(math.inf, 1.0, 0, len(P), trivially_converged=True)
    if len(P) < 10:
        raise FitError(f"need at least 10 rounds, got {len(P)}")
    start = first_arrival_round(record) + 1 if tail_start is None else tail_start
    k = np.arange(len(P))[start:]
    fail = 1.0 - P[start:]
    keep = fail > 1e-15
    k, fail = k[keep], fail[keep]
    if len(k) < 3:
        raise FitError("too few unconverged rounds in the tail")
    y = np.log(fail)
    slope, icpt = np.polyfit(k, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * k + icpt)) ** 2))
    if ss_tot <= 1e-30 or abs(slope) < 1e-12:
        return ConvergenceFit(0.0, float("nan"), start, len(k), flagged="no decay: receiver never populated")
    return ConvergenceFit(float(-slope), 1.0 - ss_res / ss_tot, start, len(k))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    N: int
    policy: str
    t: float
    rounds: int
    P_final: float
    status: str = "ok"
    J: float = 1.0
    F: float = field(default=float("nan"))

    def as_dict(self) -> dict:
        return asdict(self)


SWEEP_COLUMNS = ["N", "policy", "F", "J", "t", "rounds", "P_final", "status"]


def _sweep_row(args) -> SweepRow:
    N, F, policy, J = args
    try:
        graph = build_chain(N, J)
        rec = run_policy(graph, policy, F)
        status = "ok" if rec.converged else "not_converged"
        return SweepRow(N, policy.name, rec.elapsed, len(rec.rounds), rec.success, status, J, F)
    except Exception as exc:  # one bad row must not abort the sweep
        msg = f"failed: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        return SweepRow(N, policy.name, float("nan"), 0, float("nan"), msg, J, F)


def sweep(N_range, F: float, policies, J: float = 1.0, workers: int = 1) -> list[SweepRow]:
    """One row per (N, policy) in input order; failures are marked, not raised."""
    jobs = [(int(N), F, p, J) for N in N_range for p in policies]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]


def scaling_points(rows, policy: str | None = None):
    return [(r.N, r.F, r.t, r.J) for r in rows if r.status == "ok" and (policy is None or r.policy == policy)]


def tune_regular_tau(graph: CouplingGraph, F: float, taus) -> tuple[float, float]:
    """Regular interval (from ``taus``) that reaches F soonest: (tau, time)."""
    best = (math.nan, math.inf)
    for tau in taus:
        pol = SchedulePolicy("regular", tau=float(tau), max_rounds=20_000)
        rec = run_policy(graph, pol, F)
        if rec.converged and rec.elapsed < best[1]:
            best = (float(tau), rec.elapsed)
    return best
