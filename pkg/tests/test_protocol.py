import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton_transfer.core import (
    Continuous,
    GreedyOptimized,
    InvalidParameterError,
    JCHParams,
    PolaritonQubit,
    Regular,
    SnapshotList,
    build_chain,
    build_graph,
    build_ring,
    build_star,
    build_y_graph,
    encode_polariton_qubit,
)
from polariton_transfer.dynamics import StepSizeError, spectral_decompose
from polariton_transfer.protocol import (
    ProtocolExhaustedError,
    dark_weight,
    lossy_run,
    measure_receiver,
    optimize_schedule,
    run_continuous,
    run_protocol,
    sample_trajectory,
)

R2 = math.sqrt(2)


class TwoRailTensor:
    """Debug model: full amplitude table over (rail I, rail II) occupations.

    Index 0 is the empty rail and 1..N the excited site, so the single
    excitation of the qubit lives in row 0 or column 0.
    """

    def __init__(self, graph, qubit):
        self.graph = graph
        n = graph.n
        self.psi = np.zeros((n + 1, n + 1), dtype=complex)
        s = graph.s + 1
        self.psi[s, 0] = qubit.alpha
        self.psi[0, s] = qubit.beta

    def evolve(self, t):
        U = np.eye(self.graph.n + 1, dtype=complex)
        U[1:, 1:] = spectral_decompose(self.graph).propagator(t)
        self.psi = U @ self.psi @ U.T

    def measure(self):
        """Return (p_cond, received qubit vector) and keep the failure branch."""
        r = self.graph.r + 1
        norm = np.sum(np.abs(self.psi) ** 2)
        received = np.array([self.psi[r, 0], self.psi[0, r]])
        p = float(np.sum(np.abs(received) ** 2) / norm)
        self.psi[r, 0] = self.psi[0, r] = 0.0
        return p, received


@st.composite
def runs(draw):
    n = draw(st.integers(2, 12))
    times = np.cumsum(draw(st.lists(st.floats(0.05, 4.0), min_size=1, max_size=25)))
    v = np.array(draw(st.lists(st.floats(-1, 1), min_size=4, max_size=4)))
    if np.linalg.norm(v) < 1e-3:
        v = np.array([1.0, 0, 0, 0])
    v /= np.linalg.norm(v)
    return build_chain(n, draw(st.floats(0.3, 2.0))), PolaritonQubit(complex(v[0], v[1]), complex(v[2], v[3])), times


class TestMeasurement:
    def test_localized_at_receiver(self):
        g = build_chain(3)
        st_ = encode_polariton_qubit(0.6, 0.8j, g).with_spatial(np.array([0, 0, 1.0]))
        out = measure_receiver(st_, g)
        assert out.heralded and out.p_cond == 1.0 and out.fidelity == pytest.approx(1.0)

    def test_null_measurement_leaves_state(self):
        g = build_chain(3)
        st_ = encode_polariton_qubit(1, 0, g)
        out = measure_receiver(st_, g)
        assert not out.heralded and out.p_cond == 0.0
        assert np.array_equal(out.state.spatial.amplitudes, st_.spatial.amplitudes)

    def test_three_site_perfect_round(self):
        g = build_chain(3)
        rec = run_protocol(g, PolaritonQubit(1, 0), SnapshotList((math.pi / R2,)))
        assert rec.rounds[0].p_cond == pytest.approx(1.0, abs=1e-12)

    def test_exhausted_state(self):
        g = build_chain(2)
        st_ = encode_polariton_qubit(1, 0, g).with_spatial(np.zeros(2))
        with pytest.raises(ProtocolExhaustedError):
            measure_receiver(st_, g)

    def test_sampling_with_rng(self):
        g = build_chain(2)
        st_ = encode_polariton_qubit(1, 0, g).with_spatial(np.array([1, 1]) / 2)
        hits = sum(measure_receiver(st_, g, rng=np.random.default_rng(i)).heralded for i in range(400))
        assert 150 < hits < 250  # p_cond = 1/2


class TestProtocolRuns:
    def test_two_site_single_round(self):
        rec = run_protocol(build_chain(2), PolaritonQubit(1, 0), SnapshotList((math.pi / 2,)))
        assert len(rec.rounds) == 1 and rec.success == pytest.approx(1, abs=1e-12)
        assert rec.elapsed == pytest.approx(math.pi / 2) and rec.heralded_certain

    def test_measure_at_zero(self):
        rec = run_protocol(build_chain(2), PolaritonQubit(1, 0), SnapshotList((0.0,)))
        assert rec.rounds[0].p_abs == 0 and not rec.converged

    def test_target_validation(self):
        with pytest.raises(InvalidParameterError):
            run_protocol(build_chain(2), PolaritonQubit(1, 0), SnapshotList((1.0,)), target_F=1.0)

    def test_disconnected_gives_zero_ceiling(self):
        g = build_graph(4, [(1, 2, 1.0), (3, 4, 1.0)], 1, 4)
        rec = run_protocol(g, PolaritonQubit(1, 0), Regular(1.0, 1.0, 10))
        assert rec.ceiling == 0 and rec.rounds == [] and "not connected" in rec.diagnostic

    @settings(max_examples=60, deadline=None)
    @given(runs())
    def test_matches_two_rail_tensor(self, case):
        g, q, times = case
        rec = run_protocol(g, q, SnapshotList(tuple(times)), target_F=0.999999999)
        tensor = TwoRailTensor(g, q)
        t_prev = 0.0
        for rnd in rec.rounds:
            tensor.evolve(rnd.time - t_prev)
            t_prev = rnd.time
            p, received = tensor.measure()
            assert rnd.p_cond == pytest.approx(p, abs=1e-10)
            assert rnd.remaining == pytest.approx(np.sum(np.abs(tensor.psi) ** 2), abs=1e-10)
            if np.sum(np.abs(received) ** 2) > 1e-20:
                assert q.fidelity(received) == pytest.approx(1.0, abs=1e-10)
        if rec.rounds[-1].p_abs > 1e-20:
            assert rec.conditional_fidelity == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(runs())
    def test_norm_accounting(self, case):
        g, q, times = case
        rec = run_protocol(g, q, SnapshotList(tuple(times)), target_F=0.999999999)
        for rnd in rec.rounds:
            assert rnd.cumulative + rnd.remaining == pytest.approx(1.0, abs=1e-12)

    def test_sampled_trajectories_herald_perfectly(self):
        rng = np.random.default_rng(7)
        g = build_chain(6)
        times = np.cumsum(np.full(60, 1.3))
        for _ in range(50):
            q = PolaritonQubit.random(rng)
            out = sample_trajectory(g, q, times, rng)
            if out is not None:
                assert out.fidelity == pytest.approx(1.0, abs=1e-10)

    def test_regular_reaches_reference_time_scale(self):
        # t_ref = 0.33 / A * N^(5/3) ln(100) with J = A / 2
        g = build_chain(20, 1.0)
        rec = run_protocol(g, PolaritonQubit(1, 0), Regular((20 - 1) / 2, 0.35 * 20 ** (1 / 3)), 0.99)
        t_A = rec.elapsed / 0.5
        t_ref = 0.33 * 20 ** (5 / 3) * math.log(100)
        assert rec.converged and 0.5 < t_A / t_ref < 2.0


class TestGreedy:
    def test_first_time_two_sites(self):
        s = optimize_schedule(build_chain(2), 1, 3.0, 0.01)
        assert s.times[0] == pytest.approx(math.pi / 2, abs=1e-7)

    def test_first_time_three_sites(self):
        s = optimize_schedule(build_chain(3), 1, 4.0, 0.01)
        assert s.times[0] == pytest.approx(math.pi / R2, abs=1e-7)

    @pytest.mark.parametrize("k", [5, 20, 40])
    def test_dominates_default_regular(self, k):
        g = build_chain(20)
        q = PolaritonQubit(1, 0)
        reg = run_protocol(g, q, Regular(9.5, 0.35 * 20 ** (1 / 3), k), 0.999999)
        gre = run_protocol(g, q, GreedyOptimized(19.0, 0.01, k), 0.999999)
        assert gre.success >= reg.success

    def test_deterministic(self):
        g = build_chain(7)
        assert optimize_schedule(g, 12, 6.0, 0.01) == optimize_schedule(g, 12, 6.0, 0.01)


class TestDarkWeight:
    @staticmethod
    def krylov_oracle(g):
        """Gram-Schmidt on e_r, H e_r, H^2 e_r, ... then project e_s."""
        H = g.adjacency()
        v = np.zeros(g.n)
        v[g.r] = 1.0
        basis = []
        for _ in range(g.n):
            u = v.copy()
            for _ in range(2):
                for b in basis:
                    u -= (b @ u) * b
            nrm = np.linalg.norm(u)
            if nrm > 1e-10 * max(1.0, np.linalg.norm(v)):
                basis.append(u / nrm)
            v = H @ v
            v /= np.linalg.norm(v) or 1.0
        es = np.zeros(g.n)
        es[g.s] = 1.0
        return float(sum((b @ es) ** 2 for b in basis))

    @pytest.mark.parametrize("n", [2, 3, 8, 17, 40])
    def test_chains_reach_everything(self, n):
        # the Krylov space of a path endpoint is the whole chain
        g = build_chain(n)
        for r in (1, n):
            for s in range(1, n + 1):
                assert dark_weight(g, s, r) == pytest.approx(1.0, abs=1e-10)

    def test_same_node(self):
        assert dark_weight(build_chain(4), 2, 2) == 1.0

    @pytest.mark.parametrize("make", [lambda: build_y_graph(2, 2)[0], lambda: build_y_graph(0, 3)[0],
                                      lambda: build_star(4), lambda: build_ring(6, receiver=4),
                                      lambda: build_ring(5, receiver=2)])
    def test_against_krylov_oracle(self, make):
        g = make()
        assert dark_weight(g) == pytest.approx(self.krylov_oracle(g), abs=1e-10)

    def test_y_graph_value(self):
        g = build_y_graph(2, 2)[0]
        assert dark_weight(g) == pytest.approx(0.75, abs=1e-12)  # exact rational 3/4 by symbolic Krylov


class TestContinuous:
    def test_no_measurement_limit(self):
        rec = run_continuous(build_chain(4), PolaritonQubit(1, 0), 1e-8, 10.0, 0.01)
        assert rec.success < 1e-6

    def test_two_site_detection(self):
        rec = run_continuous(build_chain(2), PolaritonQubit(1, 0), 1.0, 30.0, 0.01)
        assert rec.success > 0.99
        assert rec.conditional_fidelity == pytest.approx(1.0, abs=1e-12)

    def test_density_integrates_to_success(self):
        rec = run_continuous(build_chain(3), PolaritonQubit(1, 0), 2.0, 15.0, 0.005)
        integral = np.trapezoid(rec.density, rec.density_times)
        assert integral == pytest.approx(rec.success, abs=1e-4)

    def test_step_size_guard(self):
        with pytest.raises(StepSizeError):
            run_continuous(build_chain(3), PolaritonQubit(1, 0), 5.0, 10.0, 0.1)

    def test_zeno_scan(self):
        # recorded scan at T = 20/J: 0.5 -> 0.717, 1 -> 0.874, 2 -> 0.929, 20 -> 0.457
        g = build_chain(10)
        q = PolaritonQubit(1, 0)
        moderate = run_continuous(g, q, 1.0, 20.0, 0.005).success
        strong = run_continuous(g, q, 20.0, 20.0, 0.005).success
        assert moderate > strong + 0.3

    def test_dispatch_through_run_protocol(self):
        rec = run_protocol(build_chain(2), PolaritonQubit(1, 0), Continuous(1.0, 5.0, 0.01))
        assert len(rec.rounds) == 500


class TestLossy:
    def test_lossless_matches_run_protocol(self):
        g = build_chain(5)
        q = PolaritonQubit(0.6, 0.8)
        sched = SnapshotList(tuple(np.cumsum(np.full(30, 1.7))))
        lossless = JCHParams.resonant(g_over_A=100)
        res = lossy_run(g, q, sched, lossless, 0.99)
        ref = run_protocol(g, q, sched, 0.99)
        assert np.allclose(res.record.cumulative(), ref.cumulative(), atol=1e-12)

    def test_single_site_survival(self):
        # N = 2 with J tiny: the excitation sits on site 1 and only decays
        p = JCHParams.resonant(g_over_A=100, g_over_loss=1000)
        g = build_chain(2, 1e-12)
        res = lossy_run(g, PolaritonQubit(1, 0), SnapshotList((3.0,)), p, 0.5)
        assert res.record.remaining_norm == pytest.approx(math.exp(-p.polariton_decay_rate() * 3.0), rel=1e-12)

    def test_norm_accounting_with_decay(self):
        p = JCHParams.resonant(g_over_A=100, g_over_loss=100)
        res = lossy_run(build_chain(6), PolaritonQubit(1, 0), Regular(2.5, 1.2, 200), p, 0.999)
        for rnd in res.record.rounds:
            assert rnd.cumulative + rnd.remaining + rnd.decayed == pytest.approx(1.0, abs=1e-12)
