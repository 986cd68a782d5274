"""Shared test utilities: independent oracles and random input builders."""

from __future__ import annotations

import numpy as np

from statereg.graph import CircuitGraph, PathStructure
from statereg.model import (
    GateModel,
    PreparedStructure,
    _init_layers,
    decoder_dims,
    encoder_dims,
    prepare_structure,
)
from statereg.netlist import CellKind


def random_dag(rng: np.random.Generator, max_nodes: int = 200,
               fanin_max: int = 4, register_prob: float = 0.15) -> CircuitGraph:
    """Random DAG with edges from lower to higher node ids, fan-in capped,
    and a random register subset (at least one register)."""
    n = int(rng.integers(2, max_nodes + 1))
    is_reg = rng.random(n) < register_prob
    if not is_reg.any():
        is_reg[int(rng.integers(n))] = True
    preds = [[] for _ in range(n)]
    succs = [[] for _ in range(n)]
    for j in range(1, n):
        k = int(rng.integers(0, min(j, fanin_max) + 1))
        if k:
            for i in sorted(int(x) for x in rng.choice(j, size=k, replace=False)):
                preds[j].append(i)
                succs[i].append(j)
    kinds = [CellKind.DFF if r else CellKind.AND for r in is_reg]
    registers = [i for i in range(n) if is_reg[i]]
    return CircuitGraph(kinds, preds, [sorted(s) for s in succs], registers)


def oracle_cone(graph: CircuitGraph, start: int, walk_length: int):
    """Brute-force reference for path extraction: recursive enumeration of
    all reverse paths up to the depth limit to get per-node minimum depths,
    then the stop level derived from them. Independent of the frontier-based
    implementation under test.

    Returns (node set, terminated_early).
    """
    mindepth = {start: 0}

    def dfs(node: int, depth: int) -> None:
        if depth > walk_length:
            return
        known = mindepth.get(node)
        if known is not None and known <= depth:
            return
        mindepth[node] = depth
        for pre in graph.preds[node]:
            dfs(pre, depth + 1)

    for pre in graph.preds[start]:
        dfs(pre, 1)

    triggers = [
        mindepth[node] + 1
        for node in mindepth
        if mindepth[node] <= walk_length - 1
        and any(p == start or graph.is_register(p) for p in graph.preds[node])
    ]
    if triggers:
        stop_depth = min(triggers)
        terminated = True
    else:
        stop_depth = walk_length
        terminated = False
    nodes = {node for node, d in mindepth.items() if d <= stop_depth}
    return nodes, terminated


def chain_graph(length: int, register_tail: bool = True) -> CircuitGraph:
    """0 -> 1 -> ... -> length-1, with the last node a register."""
    preds = [[] if i == 0 else [i - 1] for i in range(length)]
    succs = [[i + 1] if i < length - 1 else [] for i in range(length)]
    kinds = [CellKind.AND] * length
    registers = []
    if register_tail:
        kinds[-1] = CellKind.DFF
        registers = [length - 1]
    return CircuitGraph(kinds, preds, succs, registers)


def make_structure(n: int, edges, root: int, feature_dim: int,
                   rng: np.random.Generator) -> PreparedStructure:
    """Prepared structure over nodes 0..n-1 with random features."""
    ps = PathStructure(
        root=root,
        levels=((root,),),
        induced_nodes=tuple(range(n)),
        induced_edges=tuple(edges),
        terminated_early=False,
    )
    features = rng.uniform(-1.0, 2.0, size=(n, feature_dim))
    return prepare_structure(ps, features)


def random_structure(rng: np.random.Generator, n_nodes: int,
                     feature_dim: int) -> PreparedStructure:
    edges = []
    for j in range(1, n_nodes):
        for i in range(j):
            if rng.random() < 0.5:
                edges.append((i, j))
    return make_structure(n_nodes, edges, n_nodes - 1, feature_dim, rng)


def small_model(rng: np.random.Generator, feature_dim: int, hidden_dim: int,
                heads: int) -> GateModel:
    """Full 3+3-layer architecture at reduced widths (encoder output stays 1)."""
    return GateModel(
        encoder=_init_layers(rng, encoder_dims(feature_dim, hidden_dim), heads),
        decoder=_init_layers(rng, decoder_dims(feature_dim, hidden_dim), heads),
        heads=heads,
        feature_dim=feature_dim,
        hidden_dim=hidden_dim,
    )


def fd_gradcheck(model: GateModel, prep: PreparedStructure,
                 structure_loss_weight: float = 0.0,
                 step: float = 1e-5, rtol: float = 1e-4, atol: float = 1e-8):
    """Compare analytic gradients against central finite differences of the
    loss for every parameter entry. Returns (bad entry count, total entries).
    """
    from statereg.model import _loss_tensor, loss_and_gradients, run_forward
    from statereg import autodiff as ad

    def eval_loss() -> float:
        with ad.no_grad():
            fwd = run_forward(model, prep)
            return float(_loss_tensor(fwd, prep, structure_loss_weight).data)

    _, grads = loss_and_gradients(model, prep, structure_loss_weight)
    bad = 0
    total = 0
    for param, grad in zip(model.parameters(), grads):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            plus = eval_loss()
            flat[k] = orig - step
            minus = eval_loss()
            flat[k] = orig
            numeric = (plus - minus) / (2.0 * step)
            diff = abs(numeric - gflat[k])
            tol = max(atol, rtol * max(abs(numeric), abs(gflat[k])))
            total += 1
            if diff > tol:
                bad += 1
    return bad, total
