"""Directed circuit graph, node features, and register fan-in structures.

The graph has one node per mapped cell (ports and constants included) and an
edge (i, j) whenever cell i's output net feeds a data input pin of cell j.
Each node carries a feature vector: one-hot cell kind (15) plus in-degree and
out-degree, 17 entries total.

A register's *path structure* is its depth-limited backward fan-in cone,
found by level-by-level backward breadth-first search. The search keeps each
node at its minimum depth, runs at most ``walk_length`` levels, and stops
early once a level's expansion reaches the root again or any other register;
the level that triggered the stop is kept in full, register included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jsonio import SchemaError, check_schema
from .netlist import KIND_COUNT, CellKind, Netlist

FEATURE_DIM = KIND_COUNT + 2


@dataclass(frozen=True)
class PathStructure:
    """Backward fan-in cone of one register.

    ``levels[0]`` holds only the root; ``levels[k]`` the nodes first reached
    after k backward steps. ``induced_edges`` are all graph edges with both
    endpoints inside the cone, not just the BFS tree.
    """

    root: int
    levels: tuple[tuple[int, ...], ...]
    induced_nodes: tuple[int, ...]
    induced_edges: tuple[tuple[int, int], ...]
    terminated_early: bool

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


class CircuitGraph:
    """Immutable directed graph over mapped cells.

    Predecessor/successor lists are sorted and deduplicated: parallel pin
    connections between the same pair of cells collapse to one edge.
    """

    def __init__(self, kinds, preds, succs, register_ids):
        self.kinds: tuple[CellKind, ...] = tuple(kinds)
        self.preds: tuple[tuple[int, ...], ...] = tuple(tuple(p) for p in preds)
        self.succs: tuple[tuple[int, ...], ...] = tuple(tuple(s) for s in succs)
        self.register_ids: tuple[int, ...] = tuple(register_ids)
        self._register_set = frozenset(register_ids)
        self.features = _feature_matrix(self.kinds, self.preds, self.succs)

    @property
    def n(self) -> int:
        return len(self.kinds)

    @property
    def num_edges(self) -> int:
        return sum(len(p) for p in self.preds)

    def is_register(self, node: int) -> bool:
        return node in self._register_set

    def edges(self):
        for dst in range(self.n):
            for src in self.preds[dst]:
                yield (src, dst)


def _feature_matrix(kinds, preds, succs) -> np.ndarray:
    n = len(kinds)
    feats = np.zeros((n, FEATURE_DIM), dtype=np.float64)
    for i, kind in enumerate(kinds):
        feats[i, int(kind)] = 1.0
        feats[i, KIND_COUNT] = len(preds[i])
        feats[i, KIND_COUNT + 1] = len(succs[i])
    return feats


def build_graph(netlist: Netlist) -> CircuitGraph:
    """Model a mapped netlist as a directed graph with node features."""
    n = len(netlist.cells)
    driver_of = {}
    for cell in netlist.cells:
        if cell.output is not None:
            driver_of[cell.output] = cell.id
    preds = [set() for _ in range(n)]
    succs = [set() for _ in range(n)]
    for cell in netlist.cells:
        for net in cell.inputs:
            src = driver_of.get(net)
            if src is not None:
                preds[cell.id].add(src)
                succs[src].add(cell.id)
    registers = [c.id for c in netlist.cells if c.kind.is_register]
    return CircuitGraph(
        [c.kind for c in netlist.cells],
        [sorted(p) for p in preds],
        [sorted(s) for s in succs],
        registers,
    )


def node_feature(graph: CircuitGraph, node: int) -> np.ndarray:
    """The stored 17-entry feature row of one node (treat as read-only)."""
    if not 0 <= node < graph.n:
        raise KeyError(f"unknown node id {node}")
    return graph.features[node]


def extract_path_structure(graph: CircuitGraph, start: int, walk_length: int = 6) -> PathStructure:
    """Backward BFS fan-in cone of ``start``, at most ``walk_length`` levels.

    The stop rule is checked against every predecessor encountered while
    expanding a level (even ones already in the cone): reaching the start
    node or any register finishes that level and then halts the search.
    """
    if not 0 <= start < graph.n:
        raise KeyError(f"unknown node id {start}")
    if not graph.is_register(start):
        raise ValueError(f"node {start} ({graph.kinds[start].name}) is not a register")
    if walk_length < 1:
        raise ValueError(f"walk_length must be >= 1, got {walk_length}")

    levels: list[tuple[int, ...]] = [(start,)]
    visited = {start}
    terminated = False
    for _ in range(walk_length):
        frontier: list[int] = []
        stop = False
        for node in levels[-1]:
            for pre in graph.preds[node]:
                if pre == start or graph.is_register(pre):
                    stop = True
                if pre not in visited:
                    visited.add(pre)
                    frontier.append(pre)
        if frontier:
            levels.append(tuple(sorted(frontier)))
        if stop:
            terminated = True
            break
        if not frontier:
            break

    induced = tuple(sorted(visited))
    edges = []
    for dst in induced:
        for src in graph.preds[dst]:
            if src in visited:
                edges.append((src, dst))
    return PathStructure(start, tuple(levels), induced, tuple(edges), terminated)


def extract_all(graph: CircuitGraph, walk_length: int = 6) -> dict[int, PathStructure]:
    """One path structure per register, keyed by register id in id order."""
    return {
        reg: extract_path_structure(graph, reg, walk_length)
        for reg in graph.register_ids
    }


GRAPH_SCHEMA = "statereg.graph/1"


def graph_to_json(graph: CircuitGraph) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "nodes": [
            {"id": i, "kind": graph.kinds[i].name, "feature": graph.features[i].tolist()}
            for i in range(graph.n)
        ],
        "edges": [[src, dst] for (src, dst) in graph.edges()],
    }


def graph_from_json(doc: dict) -> CircuitGraph:
    check_schema(doc, GRAPH_SCHEMA)
    try:
        kinds = [CellKind[node["kind"]] for node in doc["nodes"]]
        n = len(kinds)
        preds = [set() for _ in range(n)]
        succs = [set() for _ in range(n)]
        for src, dst in doc["edges"]:
            preds[int(dst)].add(int(src))
            succs[int(src)].add(int(dst))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"malformed graph document: {exc}") from exc
    registers = [i for i, k in enumerate(kinds) if k.is_register]
    graph = CircuitGraph(kinds, [sorted(p) for p in preds], [sorted(s) for s in succs], registers)
    for i, node in enumerate(doc["nodes"]):
        if not np.array_equal(np.asarray(node["feature"], dtype=np.float64), graph.features[i]):
            raise SchemaError(f"stored feature of node {i} disagrees with graph structure")
    return graph


def path_to_json(ps: PathStructure) -> dict:
    return {
        "root": ps.root,
        "levels": [list(level) for level in ps.levels],
        "terminated_early": ps.terminated_early,
    }


def path_from_json(doc: dict, graph: CircuitGraph) -> PathStructure:
    """Rebuild a path structure from its dump plus the graph it came from."""
    try:
        root = int(doc["root"])
        levels = tuple(tuple(int(x) for x in level) for level in doc["levels"])
        terminated = bool(doc["terminated_early"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed path structure document: {exc}") from exc
    nodes = sorted({node for level in levels for node in level})
    node_set = set(nodes)
    edges = []
    for dst in nodes:
        for src in graph.preds[dst]:
            if src in node_set:
                edges.append((src, dst))
    return PathStructure(root, levels, tuple(nodes), tuple(edges), terminated)
