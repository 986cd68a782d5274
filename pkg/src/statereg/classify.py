"""Threshold clustering of register embeddings into STATE/DATA labels.

Registers are grouped by feature-difference value: repeatedly pick a random
starting register from the candidate pool, absorb every candidate whose
embedding differs by less than t1, and remove the group from the pool. Small
groups (size below t2) are labeled STATE, large ones DATA: datapath words
come in multi-bit groups while FSM state registers have near-unique fan-in
structure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping

import numpy as np

DEFAULT_T1 = 1e-3
DEFAULT_T2 = 4


class Label(str, enum.Enum):
    STATE = "STATE"
    DATA = "DATA"


def fdv(a, b) -> float:
    """Feature difference value: absolute difference of scalar embeddings
    (L1 distance if vectors are supplied)."""
    return float(np.sum(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


@dataclass(frozen=True)
class ClusterGroup:
    srn: Hashable                 # the starting register the group grew from
    members: tuple[Hashable, ...]


@dataclass
class ClusterSet:
    groups: list[ClusterGroup]


@dataclass
class Classification:
    labels: dict[Hashable, Label]
    # register -> (group index, group size)
    groups: dict[Hashable, tuple[int, int]]


def cluster(embeddings: Mapping[Hashable, float], t1: float = DEFAULT_T1, seed: int = 0,
            _pick: Callable[[list], int] | None = None) -> ClusterSet:
    """Partition registers into groups of mutually similar embeddings.

    Iterates while more than one candidate remains: a starting register is
    drawn uniformly at random (seeded), and every candidate strictly within
    t1 of it joins its group. A final leftover candidate becomes a singleton
    group. ``_pick`` (a callable mapping the remaining candidate list to an
    index) substitutes the random draw in tests.
    """
    if t1 <= 0:
        raise ValueError(f"t1 must be positive, got {t1}")
    rng = np.random.default_rng(seed)
    pick = _pick if _pick is not None else (lambda remaining: int(rng.integers(len(remaining))))

    remaining = sorted(embeddings)
    groups: list[ClusterGroup] = []
    while len(remaining) > 1:
        srn = remaining[pick(remaining)]
        srn_value = embeddings[srn]
        members = tuple(
            name for name in remaining
            if name == srn or fdv(srn_value, embeddings[name]) < t1
        )
        groups.append(ClusterGroup(srn, members))
        member_set = set(members)
        remaining = [name for name in remaining if name not in member_set]
    if remaining:
        groups.append(ClusterGroup(remaining[0], (remaining[0],)))
    return ClusterSet(groups)


def label_groups(clusters: ClusterSet, t2: int = DEFAULT_T2) -> Classification:
    """Label every group: size strictly below t2 means STATE, else DATA."""
    labels: dict[Hashable, Label] = {}
    provenance: dict[Hashable, tuple[int, int]] = {}
    for index, group in enumerate(clusters.groups):
        label = Label.STATE if len(group.members) < t2 else Label.DATA
        for member in group.members:
            labels[member] = label
            provenance[member] = (index, len(group.members))
    return Classification(labels, provenance)


def classify(embeddings: Mapping[Hashable, float], t1: float = DEFAULT_T1,
             t2: int = DEFAULT_T2, seed: int = 0) -> Classification:
    """Cluster embeddings and label the groups."""
    return label_groups(cluster(embeddings, t1, seed), t2)


LABELS_SCHEMA = "statereg.labels/1"


def classification_to_json(design: str, cls: Classification,
                           embeddings: Mapping[Hashable, float],
                           t1: float, t2: int, seed: int,
                           order: list[Hashable]) -> dict:
    """Classification output document; ``order`` fixes the register row order."""
    return {
        "schema": LABELS_SCHEMA,
        "design": design,
        "seed": seed,
        "t1": t1,
        "t2": t2,
        "registers": [
            {
                "name": name,
                "label": cls.labels[name].value,
                "group": cls.groups[name][0],
                "group_size": cls.groups[name][1],
                "embedding": float(embeddings[name]),
            }
            for name in order
        ],
    }
