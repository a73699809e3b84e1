"""Buffer-network model and assembly of the switched positive linear system.

A buffer network is a weighted directed graph whose nodes exchange a
conserved quantity along edges at state-proportional rates.  Origins (no
in-edges) receive the exogenous input, destinations (no out-edges) drain at
tunable rates ``beta_i``, and each edge carries flow ``delta_e * w_e * x``
out of its tail node.  Mode switching is governed by a continuous-time
Markov chain; each mode may reweight the edges but the topology, origins,
destinations and the tunable parameters are mode-independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

GENERATOR_ROW_SUM_TOL = 1e-12


class NetworkError(ValueError):
    """Base class for structural problems in a buffer-network description."""


class OriginHasInflow(NetworkError):
    pass


class DestinationHasOutflow(NetworkError):
    pass


class NonpositiveWeight(NetworkError):
    pass


class DuplicateEdge(NetworkError):
    pass


class SelfLoopEdge(NetworkError):
    pass


class UnmarkedOrigin(NetworkError):
    """A node without in-edges that is not listed as an origin."""


class UnmarkedDestination(NetworkError):
    """A node without out-edges that is not listed as a destination."""


class RowSumNonzero(NetworkError):
    def __init__(self, i: int, value: float):
        super().__init__(f"generator row {i} sums to {value!r}, expected 0")
        self.row = i
        self.value = value


class NegativeRate(NetworkError):
    def __init__(self, i: int, j: int, value: float):
        super().__init__(f"generator rate ({i},{j}) is negative: {value!r}")
        self.indices = (i, j)
        self.value = value


class ParamOutOfBounds(ValueError):
    """Tuning parameter outside its interval 0 < value <= upper bound."""


class NonpositiveElasticity(ValueError):
    pass


EdgeKey = tuple[int, int]


def edge_name(key: EdgeKey) -> str:
    return f"{key[0]}->{key[1]}"


@dataclass(frozen=True)
class Edge:
    """Directed edge with a fixed positive weight; nodes are 1-based ids."""

    tail: int
    head: int
    weight: float

    @property
    def key(self) -> EdgeKey:
        return (self.tail, self.head)


@dataclass(frozen=True)
class Graph:
    """Validated weighted directed graph with origin and destination sets."""

    n: int
    edges: tuple[Edge, ...]
    origins: frozenset[int]
    destinations: frozenset[int]

    def __post_init__(self) -> None:
        _validate_graph(self)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def origins_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.origins))

    @cached_property
    def destinations_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.destinations))

    @cached_property
    def out_edges(self) -> dict[int, tuple[int, ...]]:
        """Node -> indices into ``edges`` of its outgoing edges."""
        out: dict[int, list[int]] = {i: [] for i in range(1, self.n + 1)}
        for idx, e in enumerate(self.edges):
            out[e.tail].append(idx)
        return {i: tuple(v) for i, v in out.items()}

    @cached_property
    def in_edges(self) -> dict[int, tuple[int, ...]]:
        inn: dict[int, list[int]] = {i: [] for i in range(1, self.n + 1)}
        for idx, e in enumerate(self.edges):
            inn[e.head].append(idx)
        return {i: tuple(v) for i, v in inn.items()}


def _validate_graph(g: Graph) -> None:
    nodes = range(1, g.n + 1)
    if g.n < 2:
        raise NetworkError(f"need at least 2 nodes, got {g.n}")
    for node_set, what in ((g.origins, "origin"), (g.destinations, "destination")):
        for i in node_set:
            if not 1 <= i <= g.n:
                raise NetworkError(f"{what} {i} is not a node in 1..{g.n}")
    if not g.origins:
        raise NetworkError("origin set is empty")
    if not g.destinations:
        raise NetworkError("destination set is empty")
    overlap = g.origins & g.destinations
    if overlap:
        raise NetworkError(f"nodes {sorted(overlap)} appear as both origin and destination")

    seen: set[EdgeKey] = set()
    for e in g.edges:
        if not (1 <= e.tail <= g.n and 1 <= e.head <= g.n):
            raise NetworkError(f"edge {edge_name(e.key)} references a node outside 1..{g.n}")
        if e.tail == e.head:
            raise SelfLoopEdge(f"edge {edge_name(e.key)} is a self-loop")
        if e.key in seen:
            raise DuplicateEdge(f"edge {edge_name(e.key)} appears more than once")
        seen.add(e.key)
        if not e.weight > 0:
            raise NonpositiveWeight(f"edge {edge_name(e.key)} has weight {e.weight!r}; weights must be > 0")
        if e.head in g.origins:
            raise OriginHasInflow(f"origin {e.head} has inflow from edge {edge_name(e.key)}")
        if e.tail in g.destinations:
            raise DestinationHasOutflow(f"destination {e.tail} has outflow on edge {edge_name(e.key)}")

    in_deg = {i: 0 for i in nodes}
    out_deg = {i: 0 for i in nodes}
    for e in g.edges:
        out_deg[e.tail] += 1
        in_deg[e.head] += 1
    for i in nodes:
        if in_deg[i] == 0 and i not in g.origins:
            raise UnmarkedOrigin(f"node {i} has no in-edges but is not listed as an origin")
        if out_deg[i] == 0 and i not in g.destinations:
            raise UnmarkedDestination(f"node {i} has no out-edges but is not listed as a destination")


def build_graph(
    n: int,
    edges: Iterable[tuple[int, int, float] | Edge],
    origins: Iterable[int],
    destinations: Iterable[int],
) -> Graph:
    """Build and validate a buffer-network graph.

    ``edges`` is an ordered sequence of ``(tail, head, weight)`` triples with
    1-based node ids.  Raises a specific :class:`NetworkError` subclass naming
    the offending node or edge when a structural rule is violated.
    """
    edge_objs = tuple(e if isinstance(e, Edge) else Edge(int(e[0]), int(e[1]), float(e[2])) for e in edges)
    return Graph(int(n), edge_objs, frozenset(int(i) for i in origins), frozenset(int(i) for i in destinations))


def adjacency(g: Graph) -> np.ndarray:
    """Adjacency matrix with entry (i, j) = weight of edge j -> i.

    Column j collects the outgoing weights of node j, so column sums are the
    total outflow weight per node.
    """
    a = np.zeros((g.n, g.n))
    for e in g.edges:
        a[e.head - 1, e.tail - 1] = e.weight
    return a


def metzler_check(mat: np.ndarray) -> bool:
    """True iff all off-diagonal entries are nonnegative."""
    mat = np.asarray(mat, dtype=float)
    off = mat.copy()
    np.fill_diagonal(off, 0.0)
    return bool(np.all(off >= 0))


def validate_generator(pi: np.ndarray, tol: float = GENERATOR_ROW_SUM_TOL) -> None:
    """Check a transition-rate matrix: off-diagonals >= 0, zero row sums.

    Raises :class:`NegativeRate` or :class:`RowSumNonzero` naming the entry.
    A zero off-diagonal rate is accepted with a warning (the theory assumes
    strictly positive rates; sparse chains are common in practice).
    """
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise NetworkError(f"generator must be square, got shape {pi.shape}")
    n = pi.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and pi[i, j] < 0:
                raise NegativeRate(i, j, float(pi[i, j]))
        s = float(pi[i].sum())
        if abs(s) > tol:
            raise RowSumNonzero(i, s)
    if n > 1:
        off = pi[~np.eye(n, dtype=bool)]
        if np.any(off == 0):
            warnings.warn("generator has zero off-diagonal rates; the chain may be reducible", stacklevel=2)


@dataclass(frozen=True)
class MarkovChain:
    """Continuous-time Markov chain given by its generator matrix."""

    Pi: np.ndarray

    def __post_init__(self) -> None:
        pi = np.array(self.Pi, dtype=float)
        validate_generator(pi)
        pi.flags.writeable = False
        object.__setattr__(self, "Pi", pi)

    @property
    def N(self) -> int:
        return self.Pi.shape[0]

    @classmethod
    def single_mode(cls) -> "MarkovChain":
        return cls(np.zeros((1, 1)))


@dataclass(frozen=True)
class ParamBounds:
    """Upper bounds ``beta_bar`` (per destination) and ``delta_bar`` (per edge)."""

    beta_bar: Mapping[int, float]
    delta_bar: Mapping[EdgeKey, float]

    def __post_init__(self) -> None:
        for i, b in self.beta_bar.items():
            if not b > 0:
                raise ParamOutOfBounds(f"beta_bar[{i}] must be positive, got {b!r}")
        for key, d in self.delta_bar.items():
            if not d > 0:
                raise ParamOutOfBounds(f"delta_bar[{edge_name(key)}] must be positive, got {d!r}")
        object.__setattr__(self, "beta_bar", dict(self.beta_bar))
        object.__setattr__(self, "delta_bar", dict(self.delta_bar))

    @classmethod
    def uniform(cls, graph: Graph, beta_bar: float, delta_bar: float) -> "ParamBounds":
        return cls(
            {i: beta_bar for i in graph.destinations_sorted},
            {e.key: delta_bar for e in graph.edges},
        )


@dataclass(frozen=True)
class TuningParams:
    """Decay rates ``beta`` on destinations and flow multipliers ``delta`` on edges.

    All values must be strictly positive and, when bounds are attached, no
    larger than their upper bounds.
    """

    beta: Mapping[int, float]
    delta: Mapping[EdgeKey, float]
    bounds: ParamBounds | None = None

    def __post_init__(self) -> None:
        for i, b in self.beta.items():
            if not b > 0:
                raise ParamOutOfBounds(f"beta[{i}] must be positive, got {b!r}")
        for key, d in self.delta.items():
            if not d > 0:
                raise ParamOutOfBounds(f"delta[{edge_name(key)}] must be positive, got {d!r}")
        if self.bounds is not None:
            for i, b in self.beta.items():
                bar = self.bounds.beta_bar.get(i)
                if bar is not None and b > bar:
                    raise ParamOutOfBounds(f"beta[{i}] = {b!r} exceeds bound {bar!r}")
            for key, d in self.delta.items():
                bar = self.bounds.delta_bar.get(key)
                if bar is not None and d > bar:
                    raise ParamOutOfBounds(f"delta[{edge_name(key)}] = {d!r} exceeds bound {bar!r}")
        object.__setattr__(self, "beta", dict(self.beta))
        object.__setattr__(self, "delta", dict(self.delta))

    @classmethod
    def uniform(cls, graph: Graph, beta: float, delta: float, bounds: ParamBounds | None = None) -> "TuningParams":
        return cls(
            {i: beta for i in graph.destinations_sorted},
            {e.key: delta for e in graph.edges},
            bounds,
        )


@dataclass(frozen=True)
class ModeSystem:
    """System matrices of one mode: Metzler ``A``, input ``Gin`` (n x s),
    output ``Gout`` (r x n) with r = n + m, plus the edge-output weight."""

    A: np.ndarray
    Gin: np.ndarray
    Gout: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        for name in ("A", "Gin", "Gout"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not metzler_check(self.A):
            raise NetworkError("assembled A is not Metzler")
        if np.any(self.Gin < 0) or np.any(self.Gout < 0):
            raise NetworkError("input/output matrices must be entrywise nonnegative")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def s(self) -> int:
        return self.Gin.shape[1]

    @property
    def r(self) -> int:
        return self.Gout.shape[0]


@dataclass(frozen=True)
class BufferNetwork:
    """Markov switching buffer network: one graph per mode plus the chain.

    Per-mode graphs share the node set, the edge list (same pairs in the same
    order; weights may differ per mode) and the origin/destination sets, so
    the tuning variables are mode-independent.  Each mode still gets its own
    input/output matrices when systems are assembled.
    """

    graphs: tuple[Graph, ...]
    chain: MarkovChain
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if len(self.graphs) != self.chain.N:
            raise NetworkError(f"{len(self.graphs)} graphs for {self.chain.N} modes")
        if self.alpha < 0:
            raise NetworkError(f"alpha must be nonnegative, got {self.alpha!r}")
        g0 = self.graphs[0]
        for k, g in enumerate(self.graphs[1:], start=1):
            if g.n != g0.n:
                raise NetworkError(f"mode {k} has {g.n} nodes, mode 0 has {g0.n}")
            if g.origins != g0.origins or g.destinations != g0.destinations:
                raise NetworkError(f"mode {k} has different origin/destination sets")
            if tuple(e.key for e in g.edges) != tuple(e.key for e in g0.edges):
                raise NetworkError(f"mode {k} has a different edge list")

    @classmethod
    def single(cls, graph: Graph, alpha: float = 0.0) -> "BufferNetwork":
        return cls((graph,), MarkovChain.single_mode(), alpha)

    @property
    def N(self) -> int:
        return self.chain.N

    @property
    def n(self) -> int:
        return self.graphs[0].n

    @property
    def m(self) -> int:
        return self.graphs[0].m

    @property
    def s(self) -> int:
        return len(self.graphs[0].origins)

    @property
    def r(self) -> int:
        return self.n + self.m

    @property
    def origins_sorted(self) -> tuple[int, ...]:
        return self.graphs[0].origins_sorted

    @property
    def destinations_sorted(self) -> tuple[int, ...]:
        return self.graphs[0].destinations_sorted

    @property
    def edge_keys(self) -> tuple[EdgeKey, ...]:
        return tuple(e.key for e in self.graphs[0].edges)


def _check_params_cover(net: BufferNetwork, p: TuningParams) -> None:
    missing_b = [i for i in net.destinations_sorted if i not in p.beta]
    if missing_b:
        raise ParamOutOfBounds(f"beta missing for destinations {missing_b}")
    missing_d = [edge_name(k) for k in net.edge_keys if k not in p.delta]
    if missing_d:
        raise ParamOutOfBounds(f"delta missing for edges {missing_d}")


def assemble_system(net: BufferNetwork, p: TuningParams, mode: int) -> ModeSystem:
    """Assemble the state/input/output matrices of one mode.

    ``A = Ao - Ad`` where the off-diagonal part carries edge inflow rates
    ``delta_e * w_e`` and the diagonal part the per-node total outflow plus
    the destination decay.  Column sums of A vanish except on destination
    columns, where they equal ``-beta_i`` (conservation).
    """
    if not 0 <= mode < net.N:
        raise NetworkError(f"mode {mode} out of range for {net.N} modes")
    _check_params_cover(net, p)
    g = net.graphs[mode]
    n = g.n
    ao, ad = decompose_a(net, p, mode)
    a = ao - ad

    s = len(g.origins)
    gin = np.zeros((n, s))
    for c, o in enumerate(g.origins_sorted):
        gin[o - 1, c] = 1.0

    gout = np.zeros((n + g.m, n))
    gout[:n, :] = np.eye(n)
    for ell, e in enumerate(g.edges):
        gout[n + ell, e.tail - 1] = net.alpha * p.delta[e.key] * e.weight

    return ModeSystem(a, gin, gout, net.alpha)


def decompose_a(net: BufferNetwork, p: TuningParams, mode: int) -> tuple[np.ndarray, np.ndarray]:
    """Split A into nonnegative ``(Ao, Ad)`` with ``A = Ao - Ad``.

    ``Ao`` holds the off-diagonal inflow rates and ``Ad`` is diagonal with
    the outflow column sums plus destination decay; every nonzero entry is a
    single monomial in (beta, delta).
    """
    if not 0 <= mode < net.N:
        raise NetworkError(f"mode {mode} out of range for {net.N} modes")
    _check_params_cover(net, p)
    g = net.graphs[mode]
    ao = np.zeros((g.n, g.n))
    diag = np.zeros(g.n)
    for e in g.edges:
        rate = p.delta[e.key] * e.weight
        ao[e.head - 1, e.tail - 1] += rate
        diag[e.tail - 1] += rate
    for d in g.destinations_sorted:
        diag[d - 1] += p.beta[d]
    return ao, np.diag(diag)


@dataclass(frozen=True)
class CarSharingPricing:
    """Dynamic pricing rule that realizes the linear flow law.

    With base price ``p_hat = p_bar + u_bar / elasticity`` and the pricing
    rule ``price(x) = p_hat - w * x``, the affine demand model reduces to the
    flow ``u = elasticity * w * x``.
    """

    u_bar: float
    p_bar: float
    elasticity: float
    w: float
    p_hat: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_hat", self.p_bar + self.u_bar / self.elasticity)

    def price(self, x: float) -> float:
        return self.p_hat - self.w * x

    def demand(self, price: float) -> float:
        return self.u_bar - self.elasticity * (price - self.p_bar)

    def flow(self, x: float) -> float:
        return self.elasticity * self.w * x


def carsharing_params(u_bar: float, p_bar: float, elasticity: float, w: float) -> CarSharingPricing:
    """Derive the station-pricing parameters for a single edge.

    Returns the pricing rule whose induced demand at buffer level x equals
    ``elasticity * w * x``, i.e. the edge flow law of the network model.
    """
    if not elasticity > 0:
        raise NonpositiveElasticity(f"price elasticity must be positive, got {elasticity!r}")
    for name, v in (("u_bar", u_bar), ("p_bar", p_bar), ("w", w)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v!r}")
    return CarSharingPricing(u_bar, p_bar, elasticity, w)
