import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardballs.errors import InvalidPair, NotConnected
from hardballs.symbolic import (
    SymbolicSequence,
    collision_graph,
    component_profile,
    essential_indices,
    random_connected_sequence,
)


def nx_profile(N, entries):
    g = nx.Graph()
    g.add_nodes_from(range(N))
    out = [N]
    for i, j in entries:
        g.add_edge(i, j)
        out.append(nx.number_connected_components(g))
    return tuple(out)


@st.composite
def sequences(draw, max_n=7, max_len=15):
    N = draw(st.integers(2, max_n))
    pair = st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)).filter(lambda p: p[0] != p[1])
    return N, draw(st.lists(pair, max_size=max_len))


class TestParsing:
    def test_one_based_literal(self):
        seq = SymbolicSequence.parse("(1,2);(1,3);(2,3)")
        assert seq.entries == ((0, 1), (0, 2), (1, 2))
        assert seq.to_literal() == "(1,2);(1,3);(2,3)"

    def test_whitespace_and_order(self):
        assert SymbolicSequence.parse(" ( 2 , 1 ) ; (3,1) ").entries == ((0, 1), (0, 2))

    def test_empty(self):
        assert len(SymbolicSequence.parse("")) == 0

    @pytest.mark.parametrize("text", ["(1,1)", "(0,2)", "(1;2)", "1,2", "(1,2);"])
    def test_rejects(self, text):
        with pytest.raises(InvalidPair):
            SymbolicSequence.parse(text)

    def test_validate_range(self):
        with pytest.raises(InvalidPair):
            SymbolicSequence.parse("(1,4)").validate(3)

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            SymbolicSequence(((0, 1), (1, 2)), (1.0, 1.0))

    @given(sequences())
    def test_round_trip(self, case):
        _, entries = case
        seq = SymbolicSequence(tuple(entries))
        assert SymbolicSequence.parse(seq.to_literal()) == seq


class TestGraph:
    def test_worked_example(self):
        seq = SymbolicSequence.parse("(1,2);(1,3);(2,3)")
        assert component_profile(3, seq) == (3, 2, 1, 1)
        ess = essential_indices(3, seq)
        assert ess.indices == (0, 1)
        assert 2 not in ess

    def test_disconnected(self):
        seq = SymbolicSequence.parse("(1,2);(3,4)")
        with pytest.raises(NotConnected) as info:
            essential_indices(4, seq)
        assert info.value.components == 2
        graph = collision_graph(4, seq)
        assert graph.components() == [{0, 1}, {2, 3}]
        assert not graph.connected

    def test_prefix_graph(self):
        seq = SymbolicSequence.parse("(1,2);(2,3)")
        assert collision_graph(3, seq, 1).n_components == 2
        with pytest.raises(ValueError):
            collision_graph(3, seq, 3)

    @given(sequences())
    def test_profile_matches_networkx(self, case):
        N, entries = case
        assert component_profile(N, entries) == nx_profile(N, entries)

    @given(sequences())
    def test_essential_edges_form_spanning_forest(self, case):
        N, entries = case
        profile = nx_profile(N, entries)
        if profile[-1] != 1:
            with pytest.raises(NotConnected):
                essential_indices(N, entries)
            return
        ess = essential_indices(N, entries)
        assert len(ess.indices) == N - 1
        tree = nx.Graph([entries[k] for k in ess.indices])
        assert nx.is_tree(tree) and tree.number_of_nodes() == N


def test_random_connected_sequence():
    rng = np.random.default_rng(1)
    for _ in range(50):
        seq = random_connected_sequence(5, 8, rng)
        assert len(seq) == 8
        assert nx_profile(5, seq.entries)[-1] == 1
