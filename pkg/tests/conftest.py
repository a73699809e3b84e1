"""Shared fixtures: the 2-node chain workhorse and random instance factories."""

from __future__ import annotations

import numpy as np
import pytest

from buffernet import (
    BufferNetwork,
    Graph,
    MarkovChain,
    ParamBounds,
    TuningParams,
    build_graph,
)


def e1_graph(w: float = 1.0) -> Graph:
    return build_graph(2, [(1, 2, w)], [1], [2])


@pytest.fixture
def e1_net() -> BufferNetwork:
    return BufferNetwork.single(e1_graph())


@pytest.fixture
def e1_params() -> TuningParams:
    return TuningParams({2: 1.0}, {(1, 2): 1.0})


@pytest.fixture
def e1_bounds() -> ParamBounds:
    return ParamBounds.uniform(e1_graph(), 2.0, 2.0)


@pytest.fixture
def e2_net() -> BufferNetwork:
    """Two-mode chain: mode 1 has unit weight, mode 2 runs 30% hotter."""
    return BufferNetwork(
        (e1_graph(1.0), e1_graph(1.3)),
        MarkovChain([[-1.0, 1.0], [1.0, -1.0]]),
    )


def random_layered_graph(
    rng: np.random.Generator,
    n_min: int = 3,
    n_max: int = 6,
    extra_edge_prob: float = 0.35,
) -> Graph:
    """Random DAG buffer network: node 1 is the origin, node n the destination,
    every interior node forwards to at least one higher-numbered node (so all
    mass drains and the assembled system is stable for any positive params)."""
    n = int(rng.integers(n_min, n_max + 1))
    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()

    def add(i: int, j: int) -> None:
        if (i, j) not in seen and j != 1 and i != n:
            seen.add((i, j))
            edges.append((i, j, float(rng.uniform(0.5, 2.0))))

    for i in range(1, n):
        target = int(rng.integers(i + 1, n + 1))
        add(i, target)
    for i in range(2, n):  # interior nodes need inflow
        if not any(e[1] == i for e in edges):
            add(int(rng.integers(1, i)), i)
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            if rng.uniform() < extra_edge_prob:
                add(i, j)
    return build_graph(n, edges, [1], [n])


def reweighted(g: Graph, rng: np.random.Generator, lo: float = 0.85, hi: float = 1.18) -> Graph:
    edges = [(e.tail, e.head, e.weight * float(rng.uniform(lo, hi))) for e in g.edges]
    return build_graph(g.n, edges, sorted(g.origins), sorted(g.destinations))


def random_single_mode_net(rng: np.random.Generator, alpha_choices=(0.0, 0.3)) -> tuple[BufferNetwork, TuningParams]:
    g = random_layered_graph(rng)
    net = BufferNetwork.single(g, alpha=float(rng.choice(alpha_choices)))
    params = TuningParams(
        {i: float(rng.uniform(0.5, 2.0)) for i in g.destinations_sorted},
        {e.key: float(rng.uniform(0.5, 2.0)) for e in g.edges},
    )
    return net, params


def random_two_mode_net(rng: np.random.Generator, **kwargs) -> tuple[BufferNetwork, TuningParams]:
    """Two modes with mildly different weights and O(1) switching rates."""
    g1 = random_layered_graph(rng, **kwargs)
    g2 = reweighted(g1, rng)
    a, b = rng.uniform(0.8, 2.0, size=2)
    net = BufferNetwork((g1, g2), MarkovChain([[-a, a], [b, -b]]))
    params = TuningParams(
        {i: float(rng.uniform(0.7, 1.8)) for i in g1.destinations_sorted},
        {e.key: float(rng.uniform(0.7, 1.8)) for e in g1.edges},
    )
    return net, params


def fork_graph() -> Graph:
    """Node 1 fans out to two destinations: the smallest net where per-node
    sharing of the flow multipliers actually binds."""
    return build_graph(3, [(1, 2, 1.0), (1, 3, 1.5)], [1], [2, 3])
