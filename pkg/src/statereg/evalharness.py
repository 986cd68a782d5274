"""Ground truth, confusion metrics, leave-one-out cross-validation, and
extraction-work bounds.

STATE is the positive class throughout. Ratios with a zero denominator are
reported as undefined (None in Python, the string "undefined" in CSV/JSON),
never silently coerced to 0 or 1.
"""

from __future__ import annotations

import hashlib
import multiprocessing
from dataclasses import dataclass, replace
from typing import Iterable, Mapping


from .classify import Label, classify
from .graph import CircuitGraph, build_graph, extract_all
from .jsonio import SchemaError, check_schema
from .model import PreparedStructure, TrainConfig, embed_register, prepare_structure, train
from .netlist import Netlist


@dataclass
class GroundTruth:
    """Reference labels for every register of one design."""

    design: str
    labels: dict[str, Label]

    @classmethod
    def from_state_names(cls, design: str, state_names: Iterable[str],
                         all_names: Iterable[str]) -> "GroundTruth":
        all_names = list(all_names)
        state = set(state_names)
        unknown = state - set(all_names)
        if unknown:
            raise ValueError(f"state registers not present in design: {sorted(unknown)}")
        return cls(design, {
            name: (Label.STATE if name in state else Label.DATA) for name in all_names
        })

    @property
    def state_names(self) -> list[str]:
        return sorted(name for name, label in self.labels.items() if label is Label.STATE)


TRUTH_SCHEMA = "statereg.truth/1"


def truth_to_json(design: str, state_names: Iterable[str]) -> dict:
    return {"schema": TRUTH_SCHEMA, "design": design, "state_registers": sorted(state_names)}


def truth_from_json(doc: dict) -> tuple[str, list[str]]:
    """Returns (design, state register names). Unlisted registers are DATA;
    the full register universe comes from the prediction side."""
    check_schema(doc, TRUTH_SCHEMA)
    try:
        return doc["design"], [str(n) for n in doc["state_registers"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed ground-truth document: {exc}") from exc


@dataclass
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(predicted: Mapping[str, Label], truth: GroundTruth) -> ConfusionCounts:
    """Tally prediction against truth with STATE as the positive class."""
    pred_names = set(predicted)
    truth_names = set(truth.labels)
    if pred_names != truth_names:
        only_pred = sorted(pred_names - truth_names)
        only_truth = sorted(truth_names - pred_names)
        raise ValueError(
            f"register name sets differ; only in prediction: {only_pred}, "
            f"only in truth: {only_truth}"
        )
    counts = ConfusionCounts()
    for name, pred in predicted.items():
        actual = truth.labels[name]
        if actual is Label.STATE:
            if pred is Label.STATE:
                counts.tp += 1
            else:
                counts.fn += 1
        else:
            if pred is Label.STATE:
                counts.fp += 1
            else:
                counts.tn += 1
    return counts


@dataclass
class MetricsReport:
    """Recall, precision, accuracy in [0, 1]; None marks an undefined ratio."""

    recall: float | None
    precision: float | None
    accuracy: float | None


def _ratio(num: int, denom: int) -> float | None:
    return num / denom if denom else None


def metrics(c: ConfusionCounts) -> MetricsReport:
    return MetricsReport(
        recall=_ratio(c.tp, c.tp + c.fn),
        precision=_ratio(c.tp, c.tp + c.fp),
        accuracy=_ratio(c.tp + c.tn, c.total),
    )


def format_metric(value: float | None) -> str:
    return "undefined" if value is None else f"{100.0 * value:.2f}%"


# --------------------------------------------------------------------------
# Extraction-work upper bounds (fan-in assumed <= 4)

def mf_bounds(graph: CircuitGraph, walk_length: int,
              feature_dim: int = 17, output_dim: int = 64) -> tuple[int, int]:
    """Closed-form work bounds for extraction (MF1) and the network (MF2)
    over all registers of the graph, assuming fan-in at most 4."""
    r = len(graph.register_ids)
    s = sum(4 ** i for i in range(1, walk_length))
    mf1 = s * r
    mf2 = (s * feature_dim * output_dim + s * output_dim) * r
    return mf1, mf2


# --------------------------------------------------------------------------
# Design bundles and leave-one-out cross-validation

@dataclass
class DesignBundle:
    """One design prepared for training/evaluation: a structure per register
    (aligned with register_names) plus its ground truth."""

    name: str
    register_names: list[str]
    examples: list[PreparedStructure]
    truth: GroundTruth


def design_bundle(design: str, netlist: Netlist, state_names: Iterable[str],
                  walk_length: int = 6) -> DesignBundle:
    """Build a bundle straight from a mapped netlist."""
    graph = build_graph(netlist)
    structures = extract_all(graph, walk_length)
    names = [netlist.cells[reg].name for reg in structures]
    examples = [
        prepare_structure(ps, graph.features, source=f"{design}/{netlist.cells[reg].name}")
        for reg, ps in structures.items()
    ]
    truth = GroundTruth.from_state_names(design, state_names, names)
    return DesignBundle(design, names, examples, truth)


def structure_key(prep: PreparedStructure, rounds: int = 6) -> str:
    """Permutation-invariant fingerprint of a prepared structure (features,
    edge relation, root), via iterated neighborhood hashing. Used to collapse
    isomorphic structures when assembling training corpora."""
    n = prep.n
    labels = [hashlib.sha256(prep.features[i].tobytes()).digest() for i in range(n)]
    incoming: list[list[int]] = [[] for _ in range(n)]
    outgoing: list[list[int]] = [[] for _ in range(n)]
    for s, d in zip(prep.src.tolist(), prep.dst.tolist()):
        if s != d:
            incoming[d].append(s)
            outgoing[s].append(d)
    for _ in range(rounds):
        labels = [
            hashlib.sha256(
                labels[i]
                + b"|in|" + b"".join(sorted(labels[j] for j in incoming[i]))
                + b"|out|" + b"".join(sorted(labels[j] for j in outgoing[i]))
            ).digest()
            for i in range(n)
        ]
    digest = hashlib.sha256(
        labels[prep.root_index] + b"|all|" + b"".join(sorted(labels))
        + f"|{len(prep.src)}".encode()
    )
    return digest.hexdigest()


def dedup_corpus(examples: Iterable[PreparedStructure]) -> list[PreparedStructure]:
    """Keep the first representative of each isomorphism fingerprint, in
    input order."""
    seen: set[str] = set()
    unique: list[PreparedStructure] = []
    for prep in examples:
        key = structure_key(prep)
        if key not in seen:
            seen.add(key)
            unique.append(prep)
    return unique


@dataclass
class FoldReport:
    design: str
    counts: ConfusionCounts
    report: MetricsReport


@dataclass
class LoocvResult:
    folds: list[FoldReport]
    macro: MetricsReport


def fold_seed(base_seed: int, fold_index: int) -> int:
    return base_seed * 9973 + fold_index


def _run_fold(designs: list[DesignBundle], held_index: int, config: TrainConfig,
              t1: float, t2: int, dedup: bool) -> FoldReport:
    held = designs[held_index]
    corpus: list[PreparedStructure] = []
    for j, design in enumerate(designs):
        if j != held_index:
            corpus.extend(design.examples)
    held_ids = {id(ex) for ex in held.examples}
    assert held_ids.isdisjoint(id(ex) for ex in corpus), "held-out design leaked into training"
    if dedup:
        corpus = dedup_corpus(corpus)
    cfg = replace(config, seed=fold_seed(config.seed, held_index))
    result = train(corpus, cfg)
    embeddings = {
        name: embed_register(result.model, ex)
        for name, ex in zip(held.register_names, held.examples)
    }
    cls = classify(embeddings, t1, t2, seed=cfg.seed)
    counts = confusion(cls.labels, held.truth)
    return FoldReport(held.name, counts, metrics(counts))


def _fold_worker(args) -> FoldReport:
    return _run_fold(*args)


def macro_average(reports: Iterable[MetricsReport]) -> MetricsReport:
    """Arithmetic mean of the defined per-design values, metric by metric."""
    reports = list(reports)

    def avg(values: list[float]) -> float | None:
        return sum(values) / len(values) if values else None

    return MetricsReport(
        recall=avg([r.recall for r in reports if r.recall is not None]),
        precision=avg([r.precision for r in reports if r.precision is not None]),
        accuracy=avg([r.accuracy for r in reports if r.accuracy is not None]),
    )


def loocv(designs: list[DesignBundle], config: TrainConfig,
          t1: float = 1e-3, t2: int = 4, dedup: bool = True,
          jobs: int = 1) -> LoocvResult:
    """Leave-one-out cross-validation: for every design, train on all the
    others and evaluate the held-out one. Folds are independent and may run
    in parallel; each is deterministic from the fold-mixed seed, so results
    do not depend on ``jobs``."""
    if len(designs) < 2:
        raise ValueError(f"leave-one-out needs at least 2 designs, got {len(designs)}")
    tasks = [(designs, i, config, t1, t2, dedup) for i in range(len(designs))]
    if jobs > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            folds = pool.map(_fold_worker, tasks)
    else:
        folds = [_fold_worker(t) for t in tasks]
    macro = macro_average(f.report for f in folds)
    return LoocvResult(folds, macro)


# --------------------------------------------------------------------------
# Report serialization

METRICS_SCHEMA = "statereg.metrics/1"


def _metric_json(value: float | None):
    return "undefined" if value is None else value


def metrics_rows(result: LoocvResult) -> list[dict]:
    rows = [
        {
            "design": f.design,
            "recall": _metric_json(f.report.recall),
            "precision": _metric_json(f.report.precision),
            "accuracy": _metric_json(f.report.accuracy),
            "tp": f.counts.tp,
            "tn": f.counts.tn,
            "fp": f.counts.fp,
            "fn": f.counts.fn,
        }
        for f in result.folds
    ]
    rows.append({
        "design": "average",
        "recall": _metric_json(result.macro.recall),
        "precision": _metric_json(result.macro.precision),
        "accuracy": _metric_json(result.macro.accuracy),
        "tp": "", "tn": "", "fp": "", "fn": "",
    })
    return rows


def metrics_to_json(rows: list[dict]) -> dict:
    return {"schema": METRICS_SCHEMA, "rows": rows}


def metrics_to_csv(rows: list[dict]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["design", "recall", "precision", "accuracy", "tp", "tn", "fp", "fn"]
    )
    writer.writeheader()

    def fmt(v):
        return format_metric(v) if isinstance(v, float) else v

    for row in rows:
        writer.writerow({k: fmt(v) for k, v in row.items()})
    return buf.getvalue()
