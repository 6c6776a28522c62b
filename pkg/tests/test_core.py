import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton_transfer.core import (
    GROUND,
    Continuous,
    CouplingGraph,
    GreedyOptimized,
    InvalidParameterError,
    InvalidTopologyError,
    JCHParams,
    NormalizationError,
    PolaritonQubit,
    Regular,
    SingleExcitationState,
    SnapshotList,
    UnsupportedClosedFormError,
    bare_to_polariton,
    build_chain,
    build_graph,
    build_ring,
    build_star,
    build_y_graph,
    encode_polariton_qubit,
    polariton_energy,
    polariton_energy_marked,
    polariton_to_bare,
)

S = 1 / math.sqrt(2)


class TestParams:
    def test_delta_is_derived(self):
        p = JCHParams(10.0, 10.5, 1.0, 0.01)
        assert p.delta == pytest.approx(0.5)

    @pytest.mark.parametrize("kw", [dict(g=0.0), dict(A=-1.0), dict(n_max=0), dict(kappa=-0.1)])
    def test_rejects_bad_values(self, kw):
        base = dict(omega_d=1e4, omega_0=1e4, g=1.0, A=0.01)
        base.update(kw)
        with pytest.raises(InvalidParameterError):
            JCHParams(**base)

    def test_resonant_regime(self):
        p = JCHParams.resonant(g_over_A=100, g_over_loss=1000)
        assert p.g == 100 and p.delta == 0 and p.kappa == pytest.approx(0.1)
        assert p.polariton_decay_rate() == pytest.approx(0.1)


class TestGraphs:
    def test_chain_two(self):
        g = build_chain(2, 1.0)
        assert (g.n, g.edges, g.sender, g.receiver) == (2, ((1, 2, 1.0),), 1, 2)

    def test_chain_single_node(self):
        g = build_chain(1)
        assert g.edges == () and g.sender == g.receiver == 1

    def test_chain_weights(self):
        g = build_chain(5, 0.5)
        assert len(g.edges) == 4 and all(w == 0.5 for *_, w in g.edges)

    def test_star_connected(self):
        g = build_star(4)
        assert g.connected and (g.sender, g.receiver) == (2, 3)
        assert {(i, j) for i, j, _ in g.edges} == {(1, 2), (1, 3), (1, 4), (1, 5)}

    def test_disconnected_flag(self):
        g = build_graph(4, [(1, 2, 1.0), (3, 4, 1.0)], 1, 3)
        assert not g.connected

    def test_ring(self):
        g = build_ring(6, receiver=4)
        assert g.connected and len(g.edges) == 6

    @pytest.mark.parametrize("edges", [[(1, 1, 1.0)], [(1, 2, 1.0), (2, 1, 1.0)], [(1, 5, 1.0)], [(1, 2, -1.0)],
                                       [(1, 2, 0.0)], [(1, 2)]])
    def test_invalid_topology(self, edges):
        with pytest.raises(InvalidTopologyError):
            build_graph(3, edges, 1, 3)

    def test_bad_endpoints(self):
        with pytest.raises(InvalidTopologyError):
            build_graph(3, [(1, 2, 1.0)], 1, 4)
        with pytest.raises(InvalidTopologyError):
            build_graph(3, [(1, 2, 1.0)], 2, 2)

    def test_from_dict_is_strict(self):
        with pytest.raises(InvalidTopologyError):
            CouplingGraph.from_dict({"N": 2, "edges": [[1, 2, 1]], "sender": 1, "receiver": 2, "extra": 0})
        with pytest.raises(InvalidTopologyError):
            CouplingGraph.from_dict({"N": 2, "edges": [[1, 2, 1]], "sender": 1})

    def test_y_graph_layout(self):
        g, br = build_y_graph(2, 2)
        assert g.n == 7 and g.sender == 1 and g.receiver == br["arm_a"][0]
        assert not g.is_path() and g.chain_weight() is None

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 9).flatmap(lambda n: st.tuples(
        st.just(n),
        st.sets(st.tuples(st.integers(1, n), st.integers(1, n)).filter(lambda e: e[0] != e[1])
                .map(lambda e: (min(e), max(e))), max_size=12),
        st.floats(0.1, 5.0))))
    def test_json_round_trip(self, case):
        n, pairs, w = case
        g = build_graph(n, [(i, j, w) for i, j in pairs], 1, n)
        back = CouplingGraph.from_json(g.to_json())
        assert back == g and back.connected == g.connected


class TestQubits:
    def test_normalization_enforced(self):
        with pytest.raises(NormalizationError):
            PolaritonQubit(1.0, 0.1)

    def test_encode_puts_excitation_on_sender(self):
        g = build_chain(4)
        st_ = encode_polariton_qubit(S, 1j * S, g)
        assert np.array_equal(st_.spatial.amplitudes, [1, 0, 0, 0])
        assert st_.qubit.beta == pytest.approx(1j * S)

    def test_subnormalized_state_allowed(self):
        assert SingleExcitationState(np.array([0.5, 0.5])).norm_sq() == pytest.approx(0.5)
        with pytest.raises(NormalizationError):
            SingleExcitationState(np.array([1.0, 0.1]))

    @pytest.mark.parametrize("ab, expected", [((1, 0), (S, -S)), ((0, 1), (S, S)), ((S, S), (1, 0))])
    def test_bare_to_polariton(self, ab, expected):
        assert np.allclose(bare_to_polariton(*ab), expected, atol=1e-15)

    def test_bare_to_polariton_matches_matrix(self):
        # rows: <1+|, <1-| in the (|e,0>, |g,1>) basis
        M = np.array([[S, S], [-S, S]])
        v = np.array([0.6, 0.8j])
        assert np.allclose(bare_to_polariton(*v), M @ v)

    @settings(max_examples=100)
    @given(st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
    def test_conversion_is_unitary_and_invertible(self, phi, theta, chi):
        a = math.cos(theta / 2) * complex(math.cos(chi), math.sin(chi))
        b = math.sin(theta / 2) * complex(math.cos(phi), math.sin(phi))
        al, be = bare_to_polariton(a, b)
        assert abs(al) ** 2 + abs(be) ** 2 == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(polariton_to_bare(al, be), (a, b), atol=1e-12)

    def test_conversion_rejects_unnormalized(self):
        with pytest.raises(NormalizationError):
            bare_to_polariton(1.0, 1.0)


class TestEnergies:
    def test_values(self):
        p = JCHParams(1e4, 1e4, 1.0, 0.01)
        assert polariton_energy(1, "+", p) == 1e4 + 1
        assert polariton_energy(1, "-", p) == 1e4 - 1
        assert polariton_energy(4, +1, JCHParams(0.0, 0.0, 1.0, 0.01)) == 2.0

    def test_ground_marker(self):
        assert polariton_energy_marked(0, "+", JCHParams(1.0, 1.0, 1.0, 0.1)) == (0.0, GROUND)

    def test_detuned_is_unsupported(self):
        with pytest.raises(UnsupportedClosedFormError):
            polariton_energy(1, "+", JCHParams(1.0, 1.1, 1.0, 0.1))

    @given(st.integers(1, 50), st.floats(0.01, 100), st.floats(0, 1e4))
    def test_splitting(self, n, g, wd):
        p = JCHParams(wd, wd, g, 0.0)
        split = polariton_energy(n, "+", p) - polariton_energy(n, "-", p)
        assert split == pytest.approx(2 * g * math.sqrt(n), rel=1e-9, abs=1e-9)


class TestSchedules:
    def test_snapshot_validation(self):
        with pytest.raises(InvalidParameterError):
            SnapshotList((1.0, 1.0))
        with pytest.raises(InvalidParameterError):
            SnapshotList((-1.0,))
        assert SnapshotList([0, 1]).max_rounds == 2

    def test_regular_times(self):
        assert Regular(1.0, 0.5, 3).times == (1.0, 1.5, 2.0)
        with pytest.raises(InvalidParameterError):
            Regular(0.0, 0.0)

    def test_other_schedules(self):
        with pytest.raises(InvalidParameterError):
            GreedyOptimized(1.0, 2.0)
        with pytest.raises(InvalidParameterError):
            Continuous(0.0, 1.0, 0.1)
