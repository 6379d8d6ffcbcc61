"""
Directed communication graphs, reduced-graph families and feasibility checks.

Agents are labelled 1..n. Adjacency matrices built here follow the
"row receives from column" convention: H[a, b] = 1 when the agent in
position b sends to the agent in position a, and the diagonal is 1.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from exceptions import EnumerationBudgetExceeded, InvalidGraph, ParseError, PreconditionError
from utils import enumeration_budget

# Configure logging
logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

UNIQUE_COMPONENT = "the crash condition requires the surviving agents to form one weakly connected component"


@dataclass(frozen=True)
class DirectedGraph:
    """Simple digraph on an explicit label set; edges are (sender, receiver)."""

    vertices: Tuple[int, ...]
    edges: FrozenSet[Edge]

    def __post_init__(self):
        if not self.vertices:
            raise InvalidGraph("graph has no vertices")
        if tuple(sorted(set(self.vertices))) != tuple(self.vertices):
            raise InvalidGraph("vertex labels must be sorted and distinct")
        labels = set(self.vertices)
        for j, i in self.edges:
            if j == i:
                raise InvalidGraph(f"self-loop at {i}")
            if j not in labels or i not in labels:
                raise InvalidGraph(f"edge ({j}, {i}) leaves the vertex set")

    # Constructors
    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> "DirectedGraph":
        if n < 1:
            raise InvalidGraph(f"n must be >= 1, got {n}")
        return cls(tuple(range(1, n + 1)), frozenset((int(j), int(i)) for j, i in edges))

    @classmethod
    def complete(cls, n: int) -> "DirectedGraph":
        return cls.from_edges(n, ((j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j))

    @classmethod
    def undirected(cls, n: int, pairs: Iterable[Edge]) -> "DirectedGraph":
        edges = set()
        for a, b in pairs:
            edges.add((a, b))
            edges.add((b, a))
        return cls.from_edges(n, edges)

    @classmethod
    def cycle(cls, n: int, bidirectional: bool = False) -> "DirectedGraph":
        pairs = [(k, k % n + 1) for k in range(1, n + 1)] if n > 1 else []
        return cls.undirected(n, pairs) if bidirectional else cls.from_edges(n, pairs)

    @classmethod
    def path(cls, n: int) -> "DirectedGraph":
        return cls.from_edges(n, ((k, k + 1) for k in range(1, n)))

    @classmethod
    def star(cls, n: int, center: int = 1) -> "DirectedGraph":
        """Undirected star; the center is adjacent to every other agent."""
        return cls.undirected(n, ((center, k) for k in range(1, n + 1) if k != center))

    @classmethod
    def random(cls, n: int, p: float, seed: int) -> "DirectedGraph":
        """Each ordered pair becomes an edge with probability p (seeded)."""
        rng = np.random.default_rng(seed)
        draws = rng.random((n, n))
        return cls.from_edges(n, (
            (j, i) for j in range(1, n + 1) for i in range(1, n + 1)
            if i != j and draws[j - 1, i - 1] < p
        ))

    # Structure
    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def _in(self) -> Dict[int, Tuple[int, ...]]:
        table = {v: [] for v in self.vertices}
        for j, i in self.edges:
            table[i].append(j)
        return {v: tuple(sorted(s)) for v, s in table.items()}

    @cached_property
    def _out(self) -> Dict[int, Tuple[int, ...]]:
        table = {v: [] for v in self.vertices}
        for j, i in self.edges:
            table[j].append(i)
        return {v: tuple(sorted(s)) for v, s in table.items()}

    def in_neighbors(self, i: int) -> Tuple[int, ...]:
        return self._in[i]

    def out_neighbors(self, j: int) -> Tuple[int, ...]:
        return self._out[j]

    def in_degree(self, i: int) -> int:
        return len(self._in[i])

    def out_degree(self, j: int) -> int:
        return len(self._out[j])

    @property
    def max_in_degree(self) -> int:
        return max(self.in_degree(v) for v in self.vertices)

    @property
    def min_in_degree(self) -> int:
        return min(self.in_degree(v) for v in self.vertices)

    def is_undirected(self) -> bool:
        return all((i, j) in self.edges for j, i in self.edges)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def position(self, agent: int) -> int:
        return self.vertices.index(agent)

    # Derived graphs
    def induced(self, keep: Iterable[int]) -> "DirectedGraph":
        kept = tuple(sorted(set(keep)))
        labels = set(kept)
        return DirectedGraph(kept, frozenset(e for e in self.edges if e[0] in labels and e[1] in labels))

    def remove_vertices(self, faulty: Iterable[int]) -> "DirectedGraph":
        gone = set(faulty)
        return self.induced(v for v in self.vertices if v not in gone)

    def remove_edges(self, removed: Iterable[Edge]) -> "DirectedGraph":
        return DirectedGraph(self.vertices, self.edges - frozenset(removed))

    def without_incident(self, crashed: Iterable[int]) -> "DirectedGraph":
        """Same vertex set, every edge touching a crashed vertex dropped."""
        gone = set(crashed)
        return DirectedGraph(self.vertices, frozenset(e for e in self.edges if e[0] not in gone and e[1] not in gone))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    def adjacency(self, order: Optional[Sequence[int]] = None) -> np.ndarray:
        """0/1 matrix with unit diagonal; H[a, b] = 1 iff order[b] -> order[a]."""
        order = list(order) if order is not None else list(self.vertices)
        index = {v: k for k, v in enumerate(order)}
        matrix = np.eye(len(order))
        for j, i in self.edges:
            if j in index and i in index:
                matrix[index[i], index[j]] = 1.0
        return matrix

    def to_edge_list_text(self) -> str:
        lines = [f"n {self.n}"]
        lines.extend(f"{j} {i}" for j, i in self.sorted_edges())
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FaultSetSpec:
    """Fault budget f and the (simulated) faulty set F."""

    f: int
    faulty: FrozenSet[int] = frozenset()

    def validate(self, graph: DirectedGraph) -> None:
        if self.f < 0:
            raise PreconditionError(f"fault budget must be >= 0, got {self.f}")
        if len(self.faulty) > self.f:
            raise PreconditionError(f"|F| = {len(self.faulty)} exceeds f = {self.f}")
        stray = set(self.faulty) - set(graph.vertices)
        if stray:
            raise PreconditionError(f"faulty agents {sorted(stray)} are not vertices")
        if len(self.faulty) >= graph.n:
            raise PreconditionError("no non-faulty agents left")

    @property
    def phi(self) -> int:
        return len(self.faulty)

    def nonfaulty(self, graph: DirectedGraph) -> Tuple[int, ...]:
        return tuple(v for v in graph.vertices if v not in self.faulty)

    def phi_of(self, graph: DirectedGraph, agent: int) -> int:
        """Number of faulty in-neighbours of an agent."""
        return sum(1 for j in graph.in_neighbors(agent) if j in self.faulty)


@dataclass(frozen=True)
class ReducedMember:
    """One reduced graph with the choices that produced it."""

    graph: DirectedGraph
    faulty: Tuple[int, ...]
    removed: Tuple[Edge, ...]


@dataclass
class ReducedGraphFamily:
    mode: str
    f: int
    members: List[ReducedMember]
    tau: int
    tau_exact: bool
    maximal_only: bool
    min_source_size: Optional[int] = None

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[ReducedMember]:
        return iter(self.members)

    def graphs(self) -> List[DirectedGraph]:
        return [m.graph for m in self.members]


@dataclass
class FeasibilityReport:
    mode: str
    f: int
    holds: bool
    gamma: Optional[int]
    tau: Optional[int] = None
    tau_exact: bool = True
    witness: Optional[Dict] = None
    checked: int = 0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "f": self.f,
            "holds": self.holds,
            "gamma": self.gamma,
            "tau": self.tau,
            "tau_exact": self.tau_exact,
            "witness": self.witness,
            "checked": self.checked,
            "notes": list(self.notes),
        }


# Source components
def source_component(graph: DirectedGraph) -> FrozenSet[int]:
    """
    Vertices that reach every other vertex.

    Such a set, when non-empty, is the unique strongly connected component
    with no incoming edges in the condensation.
    """
    nxg = graph.to_networkx()
    condensed = nx.condensation(nxg)
    roots = [c for c in condensed.nodes if condensed.in_degree(c) == 0]
    if len(roots) != 1:
        return frozenset()
    return frozenset(condensed.nodes[roots[0]]["members"])


def _fault_sets(vertices: Sequence[int], f: int) -> Iterator[Tuple[int, ...]]:
    for size in range(0, f + 1):
        yield from itertools.combinations(vertices, size)


def _removal_options(in_nbrs: Tuple[int, ...], f: int, maximal_only: bool) -> List[Tuple[int, ...]]:
    top = min(f, len(in_nbrs))
    sizes = [top] if maximal_only else range(0, top + 1)
    return [combo for size in sizes for combo in itertools.combinations(in_nbrs, size)]


def byzantine_family_size(graph: DirectedGraph, faulty: Iterable[int], f: int, maximal_only: bool = False) -> int:
    """Number of Byzantine reduced graphs for one F, without building them."""
    base = graph.remove_vertices(faulty)
    total = 1
    for v in base.vertices:
        d = base.in_degree(v)
        top = min(f, d)
        total *= math.comb(d, top) if maximal_only else sum(math.comb(d, k) for k in range(top + 1))
    return total


def enumerate_reduced_byzantine(
    graph: DirectedGraph,
    faulty: Iterable[int],
    f: int,
    maximal_only: bool = False,
    budget: Optional[int] = None,
) -> ReducedGraphFamily:
    """
    All reduced graphs of G for one faulty set F.

    F is removed with its edges, then every remaining agent drops up to f
    of its remaining incoming edges (exactly min(f, in-degree) with
    maximal_only). Members come out in lexicographic order of the
    per-vertex removal choices.
    """
    faulty = tuple(sorted(set(faulty)))
    if len(faulty) > f:
        raise PreconditionError(f"|F| = {len(faulty)} exceeds f = {f}")
    if len(faulty) >= graph.n:
        raise PreconditionError("reduced graph would have no vertices")
    cap = enumeration_budget(budget)
    count = byzantine_family_size(graph, faulty, f, maximal_only)
    if count > cap:
        raise EnumerationBudgetExceeded(count, cap, "Byzantine reduced graphs")

    base = graph.remove_vertices(faulty)
    options = [
        [tuple((j, v) for j in combo) for combo in _removal_options(base.in_neighbors(v), f, maximal_only)]
        for v in base.vertices
    ]
    members = []
    for choice in itertools.product(*options):
        removed = tuple(e for part in choice for e in part)
        members.append(ReducedMember(base.remove_edges(removed), faulty, removed))

    if maximal_only:
        full = byzantine_family_size(graph, faulty, f, maximal_only=False)
        tau, tau_exact = (full, True) if full <= cap else (count, False)
    else:
        tau, tau_exact = count, True
    sizes = [len(source_component(m.graph)) for m in members]
    logger.debug(f"Byzantine family F={list(faulty)} f={f}: {len(members)} members, tau={tau}")
    return ReducedGraphFamily("byzantine", f, members, tau, tau_exact, maximal_only, min(sizes) if sizes else None)


def enumerate_reduced_crash(graph: DirectedGraph, f: int, budget: Optional[int] = None) -> ReducedGraphFamily:
    """One member per F' with |F'| <= f: every edge incident to F' removed."""
    if f < 0:
        raise PreconditionError(f"fault budget must be >= 0, got {f}")
    cap = enumeration_budget(budget)
    count = sum(math.comb(graph.n, k) for k in range(0, min(f, graph.n) + 1))
    if count > cap:
        raise EnumerationBudgetExceeded(count, cap, "crash reduced graphs")
    members = []
    for crashed in _fault_sets(graph.vertices, min(f, graph.n)):
        reduced = graph.without_incident(crashed)
        removed = tuple(sorted(graph.edges - reduced.edges))
        members.append(ReducedMember(reduced, crashed, removed))
    return ReducedGraphFamily("crash", f, members, len(members), True, True)


def check_assumption_byzantine(graph: DirectedGraph, f: int, budget: Optional[int] = None) -> FeasibilityReport:
    """
    Every Byzantine reduced graph, over every F with |F| <= f, has a source.

    Only maximal removals are enumerated: a subgraph's source component is
    contained in the source component of any supergraph on the same
    vertices, so the minimum is attained there.
    """
    if f < 0:
        raise PreconditionError(f"fault budget must be >= 0, got {f}")
    if f >= graph.n:
        raise PreconditionError(f"f = {f} leaves no non-faulty agents in a {graph.n}-agent graph")
    cap = enumeration_budget(budget)
    report = FeasibilityReport("byzantine", f, holds=True, gamma=None)
    planned = sum(byzantine_family_size(graph, F, f, maximal_only=True) for F in _fault_sets(graph.vertices, f))
    if planned > cap:
        raise EnumerationBudgetExceeded(planned, cap, "Byzantine reduced graphs")

    if graph.min_in_degree < 2 * f + 1:
        report.notes.append(f"minimum in-degree {graph.min_in_degree} is below 2f+1 = {2 * f + 1}")

    gamma = None
    total_tau = 0
    tau_exact = True
    for F in _fault_sets(graph.vertices, f):
        family = enumerate_reduced_byzantine(graph, F, f, maximal_only=True, budget=cap)
        total_tau += family.tau
        tau_exact = tau_exact and family.tau_exact
        for member in family:
            report.checked += 1
            size = len(source_component(member.graph))
            if size == 0:
                report.holds = False
                report.witness = {
                    "faulty": list(member.faulty),
                    "removed_edges": [list(e) for e in member.removed],
                    "reason": "reduced graph has no source component",
                }
                logger.info(f"Byzantine condition fails for f={f}: witness {report.witness}")
                report.tau, report.tau_exact = total_tau, tau_exact
                return report
            gamma = size if gamma is None else min(gamma, size)
    report.gamma = gamma
    report.tau, report.tau_exact = total_tau, tau_exact
    logger.info(f"Byzantine condition holds for f={f}: gamma={gamma}, tau={total_tau}")
    return report


def check_assumption_crash(graph: DirectedGraph, f: int, budget: Optional[int] = None) -> FeasibilityReport:
    """
    For every F' with |F'| <= f the agents outside F' stay weakly connected
    as the only non-trivial component and their induced subgraph has a source.
    """
    if f < 0:
        raise PreconditionError(f"fault budget must be >= 0, got {f}")
    if f >= graph.n:
        raise PreconditionError(f"f = {f} leaves no non-faulty agents in a {graph.n}-agent graph")
    family = enumerate_reduced_crash(graph, f, budget)
    report = FeasibilityReport("crash", f, holds=True, gamma=None, tau=family.tau)
    gamma = None
    for member in family:
        report.checked += 1
        rest = [v for v in graph.vertices if v not in member.faulty]
        induced = member.graph.induced(rest)
        reason = None
        if len(rest) == 1:
            size = 1
        else:
            components = [c for c in nx.weakly_connected_components(member.graph.to_networkx()) if len(c) > 1]
            if len(components) != 1:
                reason = f"{len(components)} non-trivial weakly connected components; {UNIQUE_COMPONENT}"
            elif set(components[0]) != set(rest):
                cut = sorted(set(rest) - set(components[0]))
                reason = f"agents {cut} are cut off from the surviving component; {UNIQUE_COMPONENT}"
            size = len(source_component(induced)) if reason is None else 0
            if reason is None and size == 0:
                reason = "surviving component has no source"
        if reason is not None:
            report.holds = False
            report.witness = {
                "faulty": list(member.faulty),
                "removed_edges": [list(e) for e in member.removed],
                "reason": reason,
            }
            logger.info(f"Crash condition fails for f={f}: witness {report.witness}")
            return report
        gamma = size if gamma is None else min(gamma, size)
    report.gamma = gamma
    logger.info(f"Crash condition holds for f={f}: gamma={gamma}")
    return report


# Graph files
def parse_edge_list(text: str, path: Optional[str] = None) -> DirectedGraph:
    """
    Parse the edge-list format: a header line ``n <count>`` followed by one
    ``sender receiver`` pair per line. ``#`` starts a comment.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise ParseError("expected header 'n <count>'", path, lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise ParseError(f"bad vertex count {parts[1]!r}", path, lineno)
            if n < 1:
                raise ParseError("vertex count must be >= 1", path, lineno)
            continue
        if len(parts) != 2:
            raise ParseError(f"expected 'sender receiver', got {line!r}", path, lineno)
        try:
            j, i = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer label in {line!r}", path, lineno)
        if not (1 <= j <= n and 1 <= i <= n):
            raise ParseError(f"label out of range 1..{n} in {line!r}", path, lineno)
        if j == i:
            raise ParseError(f"self-loop at {i}", path, lineno)
        edges.append((j, i))
    if n is None:
        raise ParseError("missing header 'n <count>'", path, None)
    return DirectedGraph.from_edges(n, edges)


def load_graph(path: Union[str, Path]) -> DirectedGraph:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_edge_list(handle.read(), str(path))
