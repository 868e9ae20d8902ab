"""Evolving simple undirected graph with preferential-attachment rewiring.

The node count N and edge count E are conserved: every event deletes one
uniformly chosen edge and inserts a new one whose endpoints are drawn with
probability proportional to degree plus an attraction offset alpha.  Small
alpha concentrates edges on high-degree nodes; large alpha makes the choice
effectively uniform.  Events arrive as a Poisson process with rate d_rate
per unit time, so uniform edge removal touches a degree-c node at rate
d_rate * c / E, matching the degree-distribution dynamics integrated in
:mod:`netopinion.degree_master`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REWIRED = "rewired"
RESTORED = "restored"

UNIFORM_RANDOM = "uniform_random"
UNIFORM_DEGREE = "uniform_degree"


class ConstructionError(ValueError):
    """Requested initial graph cannot be built."""


@dataclass(frozen=True)
class RewireParams:
    """Rewiring process parameters.

    alpha:  attraction coefficient added to every degree when selecting
            endpoints; must be positive.
    d_rate: expected number of rewiring events per unit time; positive.
    """

    alpha: float
    d_rate: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.d_rate > 0:
            raise ValueError(f"d_rate must be positive, got {self.d_rate}")


@dataclass(frozen=True)
class EvolveSummary:
    """Event counts from one evolve_network call."""

    n_events: int
    n_restored: int


class Network:
    """Simple undirected graph over nodes 0..n_nodes-1.

    Maintains adjacency sets, a degree list, and an indexable edge list so
    that uniform edge removal and stub sampling are O(1).  Mutation happens
    only through the rewiring operations below; a `version` counter lets
    callers cache derived arrays.  Degree 0 is allowed, and E = 0 is
    tolerated for degenerate single-agent control setups, although the
    rewiring operations require E >= 1.
    """

    __slots__ = ("n_nodes", "adjacency", "degrees", "edge_list", "_edge_pos",
                 "degree_total", "version", "_cache_version", "_ui", "_vi",
                 "_deg_arr")

    def __init__(self, n_nodes: int, edges=()):
        if n_nodes < 1:
            raise ValueError("need at least one node")
        self.n_nodes = n_nodes
        self.adjacency = [set() for _ in range(n_nodes)]
        self.degrees = [0] * n_nodes
        self.edge_list: list[tuple[int, int]] = []
        self._edge_pos: dict[tuple[int, int], int] = {}
        self.degree_total = 0
        self.version = 0
        self._cache_version = -1
        self._ui = self._vi = self._deg_arr = None
        for i, j in edges:
            self.insert_edge(int(i), int(j))

    @property
    def n_edges(self) -> int:
        return len(self.edge_list)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def insert_edge(self, i: int, j: int) -> None:
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
            raise ValueError(f"edge ({i},{j}) out of range")
        if i > j:
            i, j = j, i
        if (i, j) in self._edge_pos:
            raise ValueError(f"duplicate edge ({i},{j})")
        self._edge_pos[(i, j)] = len(self.edge_list)
        self.edge_list.append((i, j))
        self.adjacency[i].add(j)
        self.adjacency[j].add(i)
        self.degrees[i] += 1
        self.degrees[j] += 1
        self.degree_total += 2
        self.version += 1

    def pop_edge_at(self, k: int) -> tuple[int, int]:
        """Remove and return the edge stored at index k (swap with last)."""
        edge = self.edge_list[k]
        last = self.edge_list[-1]
        self.edge_list[k] = last
        self._edge_pos[last] = k
        self.edge_list.pop()
        del self._edge_pos[edge]
        i, j = edge
        self.adjacency[i].discard(j)
        self.adjacency[j].discard(i)
        self.degrees[i] -= 1
        self.degrees[j] -= 1
        self.degree_total -= 2
        self.version += 1
        return edge

    def copy(self) -> "Network":
        dup = Network(self.n_nodes)
        for i, j in self.edge_list:
            dup.insert_edge(i, j)
        return dup

    def _refresh_cache(self) -> None:
        if self.edge_list:
            arr = np.asarray(self.edge_list, dtype=np.int64)
            self._ui, self._vi = arr[:, 0].copy(), arr[:, 1].copy()
        else:
            self._ui = np.zeros(0, dtype=np.int64)
            self._vi = np.zeros(0, dtype=np.int64)
        self._deg_arr = np.asarray(self.degrees, dtype=np.int64)
        self._cache_version = self.version

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays (one row per edge); do not mutate."""
        if self._cache_version != self.version:
            self._refresh_cache()
        return self._ui, self._vi

    def degree_array(self) -> np.ndarray:
        """Degrees as an int array aligned with node ids; do not mutate."""
        if self._cache_version != self.version:
            self._refresh_cache()
        return self._deg_arr

    def check(self) -> None:
        """Validate structural invariants; raises ValueError on violation."""
        if sum(self.degrees) != 2 * self.n_edges:
            raise ValueError("degree sum != 2E")
        if self.degree_total != 2 * self.n_edges:
            raise ValueError("degree_total out of sync")
        seen = set()
        for i, j in self.edge_list:
            if i == j:
                raise ValueError("self-loop present")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError("duplicate edge present")
            seen.add(key)
        for i in range(self.n_nodes):
            if len(self.adjacency[i]) != self.degrees[i]:
                raise ValueError(f"adjacency/degree mismatch at node {i}")
        incident = [0] * self.n_nodes
        for i, j in self.edge_list:
            incident[i] += 1
            incident[j] += 1
        if incident != self.degrees:
            raise ValueError("edge list inconsistent with degrees")

    def snapshot(self, time: float, opinions=None) -> dict:
        """JSON-ready snapshot: node degrees, sorted edges, optional opinions."""
        nodes = []
        for i in range(self.n_nodes):
            entry = {"id": i, "degree": self.degrees[i]}
            if opinions is not None:
                entry["opinion"] = float(opinions[i])
            nodes.append(entry)
        edges = sorted((min(i, j), max(i, j)) for i, j in self.edge_list)
        return {"time": float(time), "nodes": nodes,
                "edges": [[i, j] for i, j in edges]}


class _DirectDraws:
    """Scalar draw adapter over a numpy Generator."""

    __slots__ = ("rng",)

    def __init__(self, rng):
        self.rng = rng

    def uniform(self) -> float:
        return float(self.rng.random())

    def integer(self, mod: int) -> int:
        return int(self.rng.integers(mod))


class _BufferedDraws:
    """Draws served from vectorized Generator refills.

    Used by evolve_network to amortize per-call Generator overhead over
    many rewiring events.  Refill boundaries are deterministic, so a fixed
    seed still yields a bit-exact trajectory.
    """

    __slots__ = ("rng", "size", "_u", "_iu", "_int_buf", "_int_pos")

    def __init__(self, rng, size: int = 8192):
        self.rng = rng
        self.size = size
        self._u = rng.random(size).tolist()
        self._iu = 0
        self._int_buf: dict[int, list] = {}
        self._int_pos: dict[int, int] = {}

    def uniform(self) -> float:
        i = self._iu
        if i == self.size:
            self._u = self.rng.random(self.size).tolist()
            i = 0
        self._iu = i + 1
        return self._u[i]

    def integer(self, mod: int) -> int:
        i = self._int_pos.get(mod, self.size)
        if i == self.size:
            self._int_buf[mod] = self.rng.integers(0, mod, size=self.size).tolist()
            i = 0
        self._int_pos[mod] = i + 1
        return self._int_buf[mod][i]


def preferential_probabilities(degrees, alpha: float) -> np.ndarray:
    """Selection probabilities (c_i + alpha) normalized over all nodes."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    deg = np.asarray(degrees, dtype=float)
    weights = deg + alpha
    return weights / weights.sum()


def attachment_probabilities(net: Network, alpha: float) -> np.ndarray:
    """Per-node selection probabilities (c_i + alpha) / (2E + N*alpha)."""
    return preferential_probabilities(net.degree_array(), alpha)


def _sample_preferential(net: Network, alpha: float, draws) -> int:
    """Draw one node with probability (c_i + alpha) / (sum_j c_j + N*alpha).

    Exact O(1) mixture: with probability S/(S + N*alpha) pick a uniform
    edge stub (degree-proportional), otherwise a uniform node (the alpha
    floor).  S is the current degree total, which may be 2E - 2 while an
    edge is detached mid-rewire.
    """
    total = net.degree_total
    n_alpha = net.n_nodes * alpha
    if draws.uniform() * (total + n_alpha) < total:
        stub = draws.integer(2 * len(net.edge_list))
        edge = net.edge_list[stub >> 1]
        return edge[stub & 1]
    return draws.integer(net.n_nodes)


def sample_node_preferential(net: Network, alpha: float, rng) -> int:
    """Sample a node id preferentially by degree with offset alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return _sample_preferential(net, alpha, _DirectDraws(rng))


def _rewire_once(net: Network, alpha: float, draws, max_resamples: int) -> str:
    """One removal/reattachment event; returns REWIRED or RESTORED."""
    k = draws.integer(len(net.edge_list))
    u, v = net.pop_edge_at(k)
    first = _sample_preferential(net, alpha, draws)
    adj_first = net.adjacency[first]
    for _ in range(max_resamples):
        second = _sample_preferential(net, alpha, draws)
        if second != first and second not in adj_first:
            net.insert_edge(first, second)
            return REWIRED
    net.insert_edge(u, v)
    return RESTORED


def rewire_step(net: Network, alpha: float, rng, max_resamples=None) -> str:
    """Delete a uniform edge, then insert one between two preferentially
    sampled distinct, non-adjacent nodes.

    Endpoint probabilities use the post-removal degrees.  The second
    endpoint is resampled until valid; if no valid partner is found within
    max_resamples draws (default 100*N) the removed edge is restored and
    RESTORED is returned.  E is conserved either way.
    """
    if net.n_edges < 1:
        raise ValueError("rewire_step requires at least one edge")
    if net.n_nodes < 2:
        raise ValueError("rewire_step requires at least two nodes")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    cap = max_resamples if max_resamples is not None else 100 * net.n_nodes
    return _rewire_once(net, alpha, _DirectDraws(rng), cap)


def evolve_network(net: Network, params: RewireParams, dt: float, rng) -> EvolveSummary:
    """Apply K ~ Poisson(d_rate * dt) rewiring events to net in place.

    Draws are buffered internally (deterministic for a fixed seed).  The
    summary reports how many events ran and how many fell back to
    restoring the removed edge.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    n_events = int(rng.poisson(params.d_rate * dt))
    if n_events == 0:
        return EvolveSummary(0, 0)
    if net.n_edges < 1 or net.n_nodes < 2:
        raise ValueError("evolving requires at least two nodes and one edge")
    draws = _BufferedDraws(rng) if n_events > 16 else _DirectDraws(rng)
    cap = 100 * net.n_nodes
    alpha = params.alpha
    n_restored = 0
    for _ in range(n_events):
        if _rewire_once(net, alpha, draws, cap) == RESTORED:
            n_restored += 1
    return EvolveSummary(n_events, n_restored)


def _edge_count(n: int, gamma: float) -> int:
    e_real = n * gamma / 2.0
    e_int = int(round(e_real))
    if abs(e_real - e_int) > 1e-9 or e_int < 1:
        raise ConstructionError(
            f"n*gamma/2 = {e_real} is not a positive integer")
    max_edges = n * (n - 1) // 2
    if e_int > max_edges:
        raise ConstructionError(
            f"E = {e_int} exceeds the {max_edges} simple pairs of {n} nodes")
    return e_int


def _uniform_random_edges(n: int, n_edges: int, rng) -> list[tuple[int, int]]:
    max_edges = n * (n - 1) // 2
    if n_edges > max_edges // 2:
        # dense: permute the full pair list
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        order = rng.permutation(len(pairs))
        return [pairs[i] for i in order[:n_edges]]
    chosen = set()
    out = []
    while len(out) < n_edges:
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if i == j:
            continue
        key = (i, j) if i < j else (j, i)
        if key not in chosen:
            chosen.add(key)
            out.append(key)
    return out


def _regular_pairing(n: int, deg: int, rng, max_restarts: int = 500):
    """Random stub pairing with per-pair rejection of loops and duplicates.

    Deadlocks (remaining stubs admit no valid pair) trigger a full restart;
    a handful of restarts suffice even at deg = 0.3*n.
    """
    for _ in range(max_restarts):
        stubs = [i for i in range(n) for _ in range(deg)]
        adj = [set() for _ in range(n)]
        edges = []
        pos = len(stubs)
        fails = 0
        ok = True
        while pos > 0:
            i = int(rng.integers(pos))
            j = int(rng.integers(pos - 1))
            if j >= i:
                j += 1
            a, b = stubs[i], stubs[j]
            if a != b and b not in adj[a]:
                adj[a].add(b)
                adj[b].add(a)
                edges.append((a, b))
                hi, lo = (i, j) if i > j else (j, i)
                stubs[hi] = stubs[pos - 1]
                stubs[lo] = stubs[pos - 2]
                pos -= 2
                fails = 0
            else:
                fails += 1
                if fails > 500:
                    remaining = set(stubs[:pos])
                    if not any(x != y and y not in adj[x]
                               for x in remaining for y in remaining):
                        ok = False
                        break
                    fails = 0
        if ok and pos == 0:
            return edges
    raise ConstructionError(
        f"regular pairing failed after {max_restarts} restarts "
        f"(n={n}, degree={deg})")


def init_network(n: int, gamma: float, mode: str, rng) -> Network:
    """Build the initial graph with mean degree gamma = 2E/n.

    uniform_random: E distinct edges drawn uniformly among all simple pairs.
    uniform_degree: every node gets degree exactly gamma (gamma integral,
    n*gamma even), via randomized stub pairing.
    """
    if n < 2:
        raise ConstructionError("need at least two nodes")
    n_edges = _edge_count(n, gamma)
    if mode == UNIFORM_RANDOM:
        edges = _uniform_random_edges(n, n_edges, rng)
    elif mode == UNIFORM_DEGREE:
        deg = int(round(gamma))
        if abs(gamma - deg) > 1e-9:
            raise ConstructionError(
                f"uniform_degree needs an integer gamma, got {gamma}")
        if (n * deg) % 2 != 0:
            raise ConstructionError(f"n*gamma = {n * deg} must be even")
        if deg > n - 1:
            raise ConstructionError(f"gamma = {deg} exceeds n-1 = {n - 1}")
        edges = _regular_pairing(n, deg, rng)
    else:
        raise ConstructionError(f"unknown init mode {mode!r}")
    return Network(n, edges)
