from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from ftdist.graph import Edge, Graph  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def path_graph(n: int, length: int = 1) -> Graph:
    return Graph(n, tuple(Edge(i, i, i + 1, length) for i in range(n - 1)))


def cycle_graph(n: int, length: int = 1) -> Graph:
    return Graph(n, tuple(Edge(i, i, (i + 1) % n, length) for i in range(n)))


def complete_graph(n: int, length: int = 1) -> Graph:
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return Graph(n, tuple(Edge(i, u, v, length) for i, (u, v) in enumerate(pairs)))


def two_triangles() -> Graph:
    """Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3 (edge id 6)."""
    pairs = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    return Graph(6, tuple(Edge(i, u, v, 1) for i, (u, v) in enumerate(pairs)))


def random_graph(rng: random.Random, n: int, m: int, max_length: int = 8, connected: bool = False) -> Graph:
    pairs = []
    if connected:
        pairs = [(rng.randrange(v), v) for v in range(1, n)]
    while len(pairs) < m and n > 1:
        pairs.append(tuple(rng.sample(range(n), 2)))
    rng.shuffle(pairs)
    return Graph(n, tuple(Edge(i, u, v, rng.randint(1, max_length)) for i, (u, v) in enumerate(pairs)))


@st.composite
def graphs(draw, n_max: int = 8, m_max: int = 14, max_length: int = 8, connected: bool = False, n_min: int = 1):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    m = draw(st.integers(n - 1 if connected else 0, max(n - 1, m_max))) if n > 1 else 0
    return random_graph(random.Random(seed), n, m, max_length, connected)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)


# one line per acceptance criterion, printed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
