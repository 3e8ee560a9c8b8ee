import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from efnet.graph import Network


# five-person example network: states S, I, S, I, R
FIVE_EDGES = [(0, 2), (1, 3), (0, 4), (3, 4), (0, 1), (2, 3)]
FIVE_STATES = np.array([1, 2, 1, 2, 3], dtype=np.int8)


@pytest.fixture
def five_node():
    return Network.from_edges(5, FIVE_EDGES), FIVE_STATES.copy()


@st.composite
def small_graphs(draw, max_nodes=12, min_nodes=3):
    """Arbitrary simple graphs, possibly irregular and disconnected."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = list(itertools.combinations(range(n), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Network.from_edges(n, [e for e, keep in zip(pairs, mask) if keep])


@st.composite
def graphs_with_states(draw, max_nodes=12):
    net = draw(small_graphs(max_nodes=max_nodes))
    states = draw(st.lists(st.integers(1, 3), min_size=net.n_nodes, max_size=net.n_nodes))
    return net, np.array(states, dtype=np.int8)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
