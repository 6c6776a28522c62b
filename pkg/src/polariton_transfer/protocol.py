"""Heralded dual-rail transfer: encode, evolve, interrogate the receiver.

Runs are tracked along the not-yet-heralded branch. Every round reports the
probability that the receiver fires, and the spatial vector is kept
sub-normalized so absolute probabilities can be read off directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .core import (
    DRIFT_TOL,
    Continuous,
    CouplingGraph,
    DualRailState,
    GreedyOptimized,
    InvalidParameterError,
    JCHParams,
    MeasurementSchedule,
    PolaritonQubit,
    Regular,
    Round,
    SingleExcitationState,
    SnapshotList,
    TransferRecord,
    encode_polariton_qubit,
)
from .dynamics import (
    DecayProfile,
    StepSizeError,
    eigenspaces,
    evolve_vector,
    nonhermitian_step,
    spectral_decompose,
)

EXHAUSTED_NORM = 1e-24


class ProtocolExhaustedError(RuntimeError):
    """No excitation left to measure."""


@dataclass
class MeasurementOutcome:
    round_index: int
    time: float
    p_cond: float
    p_abs: float
    heralded: bool
    state: DualRailState
    received: np.ndarray | None = None
    fidelity: float = float("nan")


def received_qubit(state: DualRailState, site: int) -> np.ndarray:
    """Rail amplitudes at 0-based ``site`` after a successful projection.

    Rail I carries alpha * f_site and rail II beta * f_site.
    """
    f = state.spatial.amplitudes[site]
    return np.array([state.qubit.alpha * f, state.qubit.beta * f])


def measure_receiver(state: DualRailState, graph: CouplingGraph, rng: np.random.Generator | None = None,
                     round_index: int = 0, time: float = 0.0) -> MeasurementOutcome:
    """Project the receiver cavity onto {occupied, empty}.

    With ``rng`` the outcome is sampled. Without it the failure branch is
    returned unless success is certain (p_cond >= 1 - 1e-12).
    """
    psi = state.spatial.amplitudes
    norm = float(np.vdot(psi, psi).real)
    if norm <= EXHAUSTED_NORM:
        raise ProtocolExhaustedError("state has zero norm; nothing left to herald")
    r = graph.r
    f = psi[r]
    p_abs = float(abs(f) ** 2)
    p_cond = min(p_abs / norm, 1.0)
    if rng is not None:
        success = bool(rng.random() < p_cond)
    else:
        success = p_cond >= 1.0 - 1e-12
    if success:
        rec = received_qubit(state, r)
        return MeasurementOutcome(round_index, time, p_cond, p_abs, True, state, rec, state.qubit.fidelity(rec))
    after = psi.copy()
    after[r] = 0.0
    return MeasurementOutcome(round_index, time, p_cond, p_abs, False, state.with_spatial(after))


def dark_weight(graph: CouplingGraph, s: int | None = None, r: int | None = None) -> float:
    """Largest cumulative success any schedule at ``r`` can reach from ``s``.

    Squared norm of the projection of e_s onto the Krylov space generated by
    H from e_r, evaluated through the eigenprojectors of H.
    """
    s = graph.s if s is None else graph.index(s)
    r = graph.r if r is None else graph.index(r)
    if s == r:
        return 1.0
    total = 0.0
    for block in eigenspaces(spectral_decompose(graph)):
        a = block[s, :]
        b = block[r, :]
        nb = float(b @ b)
        if nb > 1e-14:
            total += float(a @ b) ** 2 / nb
    return min(total, 1.0)


# ---------------------------------------------------------------------------
# schedule execution
# ---------------------------------------------------------------------------


def _unreachable_record(graph: CouplingGraph, target: float) -> TransferRecord:
    return TransferRecord(
        rounds=[], conditional_fidelity=float("nan"), elapsed=0.0, converged=False, target=target,
        remaining_norm=1.0, ceiling=0.0,
        diagnostic=f"receiver {graph.receiver} is not connected to sender {graph.sender}; success ceiling 0",
    )


def _check_target(target_F: float) -> None:
    if not 0.0 < target_F < 1.0:
        raise InvalidParameterError(f"target_F must lie in (0, 1), got {target_F}")


class _Runner:
    """Eigenbasis state of one run; shared by the schedule drivers."""

    def __init__(self, graph: CouplingGraph, qubit: PolaritonQubit):
        self.graph = graph
        self.qubit = qubit
        dec = spectral_decompose(graph)
        self.w = np.ascontiguousarray(dec.eigenvalues, dtype=np.float64)
        self.V = np.ascontiguousarray(dec.eigenvectors, dtype=np.float64)
        self.vr = np.ascontiguousarray(self.V[graph.r, :])
        self.c = self.V[graph.s, :].astype(np.complex128)
        self.t = 0.0
        self.rounds: list[Round] = []
        self.cumulative = 0.0
        self.min_fidelity = float("nan")

    @property
    def remaining(self) -> float:
        return float(np.vdot(self.c, self.c).real)

    def advance(self, dts: np.ndarray, target: float) -> int:
        f, p_cond, cum, left, c, done = kernels.measure_rounds(
            self.V, self.w, self.c, self.graph.r, np.ascontiguousarray(dts, dtype=np.float64),
            float(target), self.cumulative)
        self.c = np.asarray(c)
        times = self.t + np.cumsum(dts[:done])
        for k in range(done):
            pa = float(f[k].real ** 2 + f[k].imag ** 2)
            self.rounds.append(Round(float(times[k]), float(p_cond[k]), pa, float(cum[k]), float(left[k])))
            if pa > 0:
                fid = self.qubit.fidelity(np.array([self.qubit.alpha * f[k], self.qubit.beta * f[k]]))
                self.min_fidelity = fid if math.isnan(self.min_fidelity) else min(self.min_fidelity, fid)
        if done:
            self.t = float(times[done - 1])
            self.cumulative = float(cum[done - 1])
        return done

    def profile(self, window: float, step: float) -> np.ndarray:
        m = max(1, int(math.floor(window / step + 1e-9)))
        return kernels.receiver_profile(self.vr, self.c, self.w, float(step), m)

    def receiver_prob(self, dt: float) -> float:
        f = self.vr @ (self.c * np.exp(-1j * self.w * dt))
        return float(f.real ** 2 + f.imag ** 2)

    def record(self, target: float, ceiling: float) -> TransferRecord:
        rem = self.remaining
        return TransferRecord(
            rounds=self.rounds,
            conditional_fidelity=self.min_fidelity,
            elapsed=self.t,
            converged=self.cumulative >= target,
            target=target,
            remaining_norm=rem,
            ceiling=ceiling,
            heralded_certain=rem <= EXHAUSTED_NORM,
        )


def _greedy_next(runner: _Runner, window: float, step: float) -> float:
    """Delay in (0, window] maximizing the receiver probability, grid then Brent."""
    prof = runner.profile(window, step)
    i = int(np.argmax(prof))
    t_grid = step * (i + 1)
    lo = max(t_grid - step, 1e-9 * step)
    hi = t_grid + step if i + 1 < len(prof) else t_grid
    if hi > lo:
        res = minimize_scalar(lambda d: -runner.receiver_prob(d), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if res.success and -res.fun >= prof[i]:
            return float(res.x)
    return t_grid


def run_protocol(graph: CouplingGraph, qubit: PolaritonQubit, schedule: MeasurementSchedule,
                 target_F: float = 0.99) -> TransferRecord:
    """Evolve and interrogate the receiver at the scheduled times.

    Stops once cumulative success reaches ``target_F``, the state is
    exhausted, or the schedule runs out. A disconnected sender/receiver pair
    gives an empty record with ceiling 0 rather than an exception.
    """
    _check_target(target_F)
    if isinstance(schedule, Continuous):
        return run_continuous(graph, qubit, schedule.rate, schedule.duration, schedule.dt, target_F)
    if not graph.connected:
        return _unreachable_record(graph, target_F)
    runner = _Runner(graph, qubit)
    ceiling = dark_weight(graph)
    if isinstance(schedule, SnapshotList):
        times = np.array(schedule.times)
        runner.advance(np.diff(times, prepend=0.0), target_F)
    elif isinstance(schedule, Regular):
        _run_regular(runner, schedule, target_F)
    elif isinstance(schedule, GreedyOptimized):
        for _ in range(schedule.max_rounds):
            if runner.cumulative >= target_F or runner.remaining <= EXHAUSTED_NORM:
                break
            dt = _greedy_next(runner, schedule.window, schedule.grid_step)
            runner.advance(np.array([dt]), target_F)
    else:
        raise InvalidParameterError(f"unsupported schedule {schedule!r}")
    return runner.record(target_F, ceiling)


def _run_regular(runner: _Runner, schedule: Regular, target_F: float, chunk: int = 4096) -> None:
    done = 0
    while done < schedule.max_rounds:
        n = min(chunk, schedule.max_rounds - done)
        dts = np.full(n, schedule.tau)
        if done == 0:
            dts[0] = schedule.t0
        got = runner.advance(dts, target_F)
        done += got
        if got < n:
            break


def optimize_schedule(graph: CouplingGraph, max_rounds: int, window: float, grid_step: float,
                      target_F: float | None = None) -> SnapshotList:
    """Greedy snapshot times: each one maximizes the next-round success probability.

    The search looks ``window`` ahead of the previous time on a grid of
    ``grid_step`` and polishes the best grid point with a bounded scalar
    search. Deterministic for fixed inputs.
    """
    GreedyOptimized(window, grid_step, max_rounds)  # validates
    if not graph.connected:
        return SnapshotList(())
    runner = _Runner(graph, PolaritonQubit(1.0, 0.0))
    target = 2.0 if target_F is None else target_F
    for _ in range(max_rounds):
        if runner.cumulative >= target or runner.remaining <= EXHAUSTED_NORM:
            break
        dt = _greedy_next(runner, window, grid_step)
        runner.advance(np.array([dt]), target)
    return SnapshotList(tuple(r.time for r in runner.rounds))


def sample_trajectory(graph: CouplingGraph, qubit: PolaritonQubit, times, rng: np.random.Generator
                      ) -> MeasurementOutcome | None:
    """One stochastic run over snapshot ``times``; the heralding outcome or None."""
    state = encode_polariton_qubit(qubit.alpha, qubit.beta, graph)
    t_prev = 0.0
    for k, t in enumerate(times):
        psi = evolve_vector(state.spatial.amplitudes, graph, t - t_prev)
        state = state.with_spatial(psi)
        t_prev = t
        if state.spatial.norm_sq() <= EXHAUSTED_NORM:
            return None
        out = measure_receiver(state, graph, rng=rng, round_index=k, time=t)
        if out.heralded:
            return out
        state = out.state
    return None


# ---------------------------------------------------------------------------
# continuous detection and loss
# ---------------------------------------------------------------------------


def run_continuous(graph: CouplingGraph, qubit: PolaritonQubit, rate: float, duration: float, dt: float,
                   target_F: float = 0.99) -> TransferRecord:
    """Continuous monitoring of the receiver at detection rate ``rate``.

    The no-click branch evolves under H - (i/2) rate |r><r|. Each step is
    reported as one round; ``record.density`` is the detection-time density
    rate * |f_r(t)|^2 sampled at ``record.density_times``.
    """
    Continuous(rate, duration, dt)
    _check_target(target_F)
    j_max = graph.max_weight()
    limit = 0.1 * min(1.0 / rate, 1.0 / j_max if j_max > 0 else math.inf)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} too coarse; need dt <= {limit:.6g}")
    if not graph.connected:
        return _unreachable_record(graph, target_F)
    steps = max(1, math.ceil(duration / dt - 1e-9))
    h = duration / steps
    decay = DecayProfile.at_site(graph.n, graph.r, rate)
    U, h_used = nonhermitian_step(graph, decay, h)
    sub = int(round(h / h_used))
    psi = np.zeros(graph.n, dtype=complex)
    psi[graph.s] = 1.0
    rounds = []
    dens = np.empty(steps + 1)
    dens[0] = rate * abs(psi[graph.r]) ** 2
    norm_prev = 1.0
    min_fid = float("nan")
    for k in range(1, steps + 1):
        for _ in range(sub):
            psi = U @ psi
        norm = float(np.vdot(psi, psi).real)
        if norm > norm_prev + DRIFT_TOL:
            raise StepSizeError("norm increased during continuous detection")
        p_abs = max(norm_prev - norm, 0.0)
        p_cond = p_abs / norm_prev if norm_prev > 0 else 0.0
        rounds.append(Round(k * h, p_cond, p_abs, 1.0 - norm, norm))
        f = psi[graph.r]
        dens[k] = rate * abs(f) ** 2
        if abs(f) > 0:
            fid = qubit.fidelity(np.array([qubit.alpha * f, qubit.beta * f]))
            min_fid = fid if math.isnan(min_fid) else min(min_fid, fid)
        norm_prev = norm
    return TransferRecord(
        rounds=rounds, conditional_fidelity=min_fid, elapsed=steps * h,
        converged=(1.0 - norm_prev) >= target_F, target=target_F, remaining_norm=norm_prev,
        ceiling=dark_weight(graph), density=dens, density_times=h * np.arange(steps + 1),
    )


@dataclass
class LossyResult:
    record: TransferRecord
    efficiency: float
    decay_rate: float
    completion_time: float
    lossless_success: float = field(default=float("nan"))


def schedule_times(graph: CouplingGraph, schedule: MeasurementSchedule, target_F: float | None = None):
    """Explicit measurement times for a discrete schedule (greedy is pre-optimized)."""
    if isinstance(schedule, SnapshotList):
        return np.array(schedule.times)
    if isinstance(schedule, Regular):
        return schedule.t0 + schedule.tau * np.arange(schedule.max_rounds)
    if isinstance(schedule, GreedyOptimized):
        opt = optimize_schedule(graph, schedule.max_rounds, schedule.window, schedule.grid_step, target_F)
        return np.array(opt.times)
    raise InvalidParameterError(f"no discrete times for {schedule!r}")


def lossy_run(graph: CouplingGraph, qubit: PolaritonQubit, schedule: MeasurementSchedule,
              params: JCHParams, target_F: float = 0.99) -> LossyResult:
    """Projective protocol with uniform polariton decay (kappa + gamma) / 2 per site.

    Loss is no-jump damping of the amplitude vector. The run ends when
    1 - prod(1 - p_cond) reaches ``target_F`` (the point where the lossless
    protocol would also stop), on exhaustion, or when the schedule ends.
    ``efficiency`` is the absolute heralding probability actually collected.
    """
    _check_target(target_F)
    gamma_p = params.polariton_decay_rate()
    if not graph.connected:
        rec = _unreachable_record(graph, target_F)
        return LossyResult(rec, 0.0, gamma_p, 0.0, 0.0)
    times = schedule_times(graph, schedule, target_F)
    decay = DecayProfile.uniform(graph.n, gamma_p)
    psi = np.zeros(graph.n, dtype=complex)
    psi[graph.s] = 1.0
    cache: dict[float, np.ndarray] = {}
    rounds: list[Round] = []
    success = decayed = 0.0
    fail_prod = 1.0
    t_prev = 0.0
    min_fid = float("nan")
    for t in times:
        delta = float(t - t_prev)
        if delta > 0:
            if decay.is_zero():
                nxt = evolve_vector(psi, graph, delta)
            else:
                key = round(delta, 15)
                if key not in cache:
                    U, h = nonhermitian_step(graph, decay, delta)
                    cache[key] = np.linalg.matrix_power(U, int(round(delta / h)))
                nxt = cache[key] @ psi
            n0 = float(np.vdot(psi, psi).real)
            n1 = float(np.vdot(nxt, nxt).real)
            decayed += max(n0 - n1, 0.0)
            psi = nxt
        t_prev = float(t)
        norm = float(np.vdot(psi, psi).real)
        if norm <= EXHAUSTED_NORM:
            break
        f = psi[graph.r]
        p_abs = float(abs(f) ** 2)
        p_cond = min(p_abs / norm, 1.0)
        success += p_abs
        fail_prod *= 1.0 - p_cond
        if p_abs > 0:
            fid = qubit.fidelity(np.array([qubit.alpha * f, qubit.beta * f]))
            min_fid = fid if math.isnan(min_fid) else min(min_fid, fid)
        psi[graph.r] = 0.0
        rounds.append(Round(float(t), p_cond, p_abs, success, float(np.vdot(psi, psi).real), decayed))
        if 1.0 - fail_prod >= target_F:
            break
    rem = float(np.vdot(psi, psi).real)
    rec = TransferRecord(
        rounds=rounds, conditional_fidelity=min_fid, elapsed=t_prev, converged=1.0 - fail_prod >= target_F,
        target=target_F, remaining_norm=rem, decayed=decayed, ceiling=dark_weight(graph),
        heralded_certain=rem <= EXHAUSTED_NORM,
    )
    return LossyResult(rec, success, gamma_p, t_prev, 1.0 - fail_prod)
