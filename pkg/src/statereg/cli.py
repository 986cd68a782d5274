"""Command-line pipeline: gen, map, extract, train, classify, eval, loocv.

Every stage reads and writes versioned JSON artifacts so the pipeline can be
run, inspected, and diffed one step at a time. All outputs are byte-stable
for identical inputs and seeds.

Exit codes: 0 success, 1 usage error, 2 input/data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .classify import (
    DEFAULT_T1,
    DEFAULT_T2,
    Label,
    classification_to_json,
    classify,
)
from .graph import (
    GRAPH_SCHEMA,
    build_graph,
    extract_all,
    graph_from_json,
    graph_to_json,
    path_from_json,
    path_to_json,
)
from .jsonio import SchemaError, check_schema, read_json, write_json
from .evalharness import (
    METRICS_SCHEMA,
    GroundTruth,
    confusion,
    dedup_corpus,
    design_bundle,
    format_metric,
    loocv,
    metrics,
    metrics_rows,
    metrics_to_csv,
    metrics_to_json,
    truth_from_json,
    truth_to_json,
)
from .model import (
    CHECKPOINT_SCHEMA,
    CheckpointError,
    NumericalError,
    TrainConfig,
    embed_register,
    load_checkpoint,
    prepare_structure,
    save_model,
    train,
)
from .netlist import (
    NETLIST_SCHEMA,
    NetlistError,
    default_tech_library,
    load_tech_library,
    map_to_independent,
    netlist_from_json,
    netlist_to_json,
    parse_netlist,
)
from .synth import SynthSpec, generate_synthetic

PATHS_SCHEMA = "statereg.paths/1"

_SCHEMAS = (NETLIST_SCHEMA, GRAPH_SCHEMA, PATHS_SCHEMA, CHECKPOINT_SCHEMA,
            "statereg.labels/1", "statereg.truth/1", METRICS_SCHEMA)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


@dataclass
class PipelineConfig:
    """Defaults for every stage; all values are flag-overridable."""

    tech_library: str | None = None   # None selects the bundled generic library
    walk_length: int = 6
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    gradient_clip: float = 5.0
    heads: int = 4
    structure_loss_weight: float = 0.0
    t1: float = DEFAULT_T1
    t2: int = DEFAULT_T2
    seed: int = 0
    out: str | None = None


_CONFIG_FIELDS = {f.name: f.type for f in fields(PipelineConfig)}


class _ArgParser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the CLI contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        import json

        data = json.loads(text)
    unknown = set(data) - set(_CONFIG_FIELDS)
    if unknown:
        raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def _resolve(args, config_file: dict, name: str):
    """Flag value if given, else config-file value, else built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config_file:
        return config_file[name]
    return getattr(PipelineConfig(), name)


def _train_config(args, cfg_file: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=_resolve(args, cfg_file, "learning_rate"),
        weight_decay=_resolve(args, cfg_file, "weight_decay"),
        epochs=_resolve(args, cfg_file, "epochs"),
        gradient_clip=_resolve(args, cfg_file, "gradient_clip"),
        seed=_resolve(args, cfg_file, "seed"),
        heads=_resolve(args, cfg_file, "heads"),
        structure_loss_weight=_resolve(args, cfg_file, "structure_loss_weight"),
    )


def _library(args, cfg_file: dict):
    path = _resolve(args, cfg_file, "tech_library")
    return load_tech_library(path) if path else default_tech_library()


def _out_dir(args, cfg_file: dict) -> Path:
    out = _resolve(args, cfg_file, "out")
    path = Path(out) if out else Path(".")
    path.mkdir(parents=True, exist_ok=True)
    return path


# --------------------------------------------------------------------------
# Subcommands

def _cmd_gen(args, cfg_file) -> int:
    spec = SynthSpec(
        seed=_resolve(args, cfg_file, "seed"),
        fsm_states=args.fsm,
        data_regs=args.data,
        datapath_width=args.width,
        comb_depth=args.depth,
        fanin_max=args.fanin,
    )
    text, truth = generate_synthetic(spec)
    out = _out_dir(args, cfg_file)
    (out / "netlist.v").write_text(text)
    write_json(out / "truth.json", truth_to_json(truth.design, truth.state_names))
    print(f"wrote {out / 'netlist.v'} and {out / 'truth.json'} ({truth.design})")
    return EXIT_OK


def _cmd_map(args, cfg_file) -> int:
    lib = _library(args, cfg_file)
    raw = parse_netlist(Path(args.netlist).read_text())
    netlist = map_to_independent(raw, lib)
    out = _out_dir(args, cfg_file)
    write_json(out / "mapped.json", netlist_to_json(netlist))
    print(f"wrote {out / 'mapped.json'}: {len(netlist.cells)} cells, {len(netlist.nets)} nets")
    return EXIT_OK


def _cmd_extract(args, cfg_file) -> int:
    doc = read_json(args.mapped)
    netlist = netlist_from_json(doc)
    walk_length = _resolve(args, cfg_file, "walk_length")
    graph = build_graph(netlist)
    structures = extract_all(graph, walk_length)
    out = _out_dir(args, cfg_file)
    paths_doc = {
        "schema": PATHS_SCHEMA,
        "design": netlist.name,
        "walk_length": walk_length,
        "graph": graph_to_json(graph),
        "registers": [
            {"name": netlist.cells[reg].name, **path_to_json(ps)}
            for reg, ps in structures.items()
        ],
    }
    write_json(out / "paths.json", paths_doc)
    print(f"wrote {out / 'paths.json'}: {len(structures)} path structures")
    return EXIT_OK


def _load_paths(path):
    """Returns (design, register names, prepared structures) from a paths
    artifact."""
    doc = read_json(path)
    check_schema(doc, PATHS_SCHEMA)
    graph = graph_from_json(doc["graph"])
    design = doc["design"]
    names, preps = [], []
    for entry in doc["registers"]:
        ps = path_from_json(entry, graph)
        names.append(entry["name"])
        preps.append(prepare_structure(ps, graph.features, source=f"{design}/{entry['name']}"))
    return design, names, preps


def _cmd_train(args, cfg_file) -> int:
    corpus = []
    for path in args.paths:
        _, _, preps = _load_paths(path)
        corpus.extend(preps)
    if args.no_dedup:
        unique = corpus
    else:
        unique = dedup_corpus(corpus)
    config = _train_config(args, cfg_file)
    result = train(unique, config)
    out = _out_dir(args, cfg_file)
    save_model(result.model, out / "model.ckpt", extra_meta={"seed": config.seed})
    loss_csv = "epoch,mean_loss\n" + "".join(
        f"{epoch},{loss!r}\n" for epoch, loss in enumerate(result.epoch_losses)
    )
    (out / "loss.csv").write_text(loss_csv)
    print(
        f"wrote {out / 'model.ckpt'}: trained on {len(unique)} structures "
        f"({len(corpus)} before dedup), {config.epochs} epochs, "
        f"final loss {result.epoch_losses[-1]:.6f}"
    )
    return EXIT_OK


def _cmd_classify(args, cfg_file) -> int:
    model, _ = load_checkpoint(args.model)
    design, names, preps = _load_paths(args.paths)
    for prep in preps:
        if prep.features.shape[1] != model.feature_dim:
            raise SchemaError(
                f"feature width {prep.features.shape[1]} does not match "
                f"checkpoint feature_dim {model.feature_dim}"
            )
    t1 = _resolve(args, cfg_file, "t1")
    t2 = _resolve(args, cfg_file, "t2")
    seed = _resolve(args, cfg_file, "seed")
    embeddings = {name: embed_register(model, prep) for name, prep in zip(names, preps)}
    cls = classify(embeddings, t1, t2, seed)
    out = _out_dir(args, cfg_file)
    write_json(out / "labels.json",
               classification_to_json(design, cls, embeddings, t1, t2, seed, names))
    n_state = sum(1 for v in cls.labels.values() if v.value == "STATE")
    print(f"wrote {out / 'labels.json'}: {n_state} STATE / {len(names) - n_state} DATA")
    return EXIT_OK


def _cmd_eval(args, cfg_file) -> int:
    labels_doc = read_json(args.labels)
    check_schema(labels_doc, "statereg.labels/1")
    predicted = {r["name"]: Label(r["label"]) for r in labels_doc["registers"]}
    design, state_names = truth_from_json(read_json(args.truth))
    truth = GroundTruth.from_state_names(design, state_names, predicted.keys())
    counts = confusion(predicted, truth)
    report = metrics(counts)
    row = (
        f"{design}: recall={format_metric(report.recall)} "
        f"precision={format_metric(report.precision)} "
        f"accuracy={format_metric(report.accuracy)} "
        f"(tp={counts.tp} tn={counts.tn} fp={counts.fp} fn={counts.fn})"
    )
    print(row)
    out = _resolve(args, cfg_file, "out")
    if out:
        out_dir = _out_dir(args, cfg_file)
        doc = {
            "schema": METRICS_SCHEMA,
            "rows": [{
                "design": design,
                "recall": "undefined" if report.recall is None else report.recall,
                "precision": "undefined" if report.precision is None else report.precision,
                "accuracy": "undefined" if report.accuracy is None else report.accuracy,
                "tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn,
            }],
        }
        write_json(out_dir / "metrics.json", doc)
        (out_dir / "metrics.csv").write_text(metrics_to_csv(doc["rows"]))
    return EXIT_OK


def _cmd_loocv(args, cfg_file) -> int:
    corpus_dir = Path(args.corpus)
    design_dirs = sorted(d for d in corpus_dir.iterdir() if d.is_dir())
    if len(design_dirs) < 2:
        raise SchemaError(
            f"{corpus_dir}: need at least 2 design subdirectories "
            f"(each with netlist.v and truth.json), found {len(design_dirs)}"
        )
    lib = _library(args, cfg_file)
    walk_length = _resolve(args, cfg_file, "walk_length")
    bundles = []
    for d in design_dirs:
        netlist = map_to_independent(parse_netlist((d / "netlist.v").read_text()), lib)
        design, state_names = truth_from_json(read_json(d / "truth.json"))
        bundles.append(design_bundle(design, netlist, state_names, walk_length))
    config = _train_config(args, cfg_file)
    result = loocv(
        bundles, config,
        t1=_resolve(args, cfg_file, "t1"),
        t2=_resolve(args, cfg_file, "t2"),
        dedup=not args.no_dedup,
        jobs=args.jobs,
    )
    rows = metrics_rows(result)
    for row in rows:
        print(
            f"{row['design']}: recall={_fmt_cell(row['recall'])} "
            f"precision={_fmt_cell(row['precision'])} accuracy={_fmt_cell(row['accuracy'])}"
        )
    out = _resolve(args, cfg_file, "out")
    if out:
        out_dir = _out_dir(args, cfg_file)
        write_json(out_dir / "metrics.json", metrics_to_json(rows))
        (out_dir / "metrics.csv").write_text(metrics_to_csv(rows))
    return EXIT_OK


def _fmt_cell(value) -> str:
    return format_metric(value) if isinstance(value, float) else str(value)


# --------------------------------------------------------------------------

def build_parser() -> _ArgParser:
    parser = _ArgParser(
        prog="statereg",
        description="Classify FSM state vs. data registers in a gate-level netlist.",
    )
    schemas = "\n".join(_SCHEMAS)
    parser.add_argument(
        "--version", action="version",
        version=f"statereg {__version__}\nartifact schemas:\n{schemas}",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base RNG seed (default 0)")
    common.add_argument("--out", default=None, help="output directory (default .)")
    common.add_argument("--config", default=None,
                        help="TOML or JSON config file mirroring the pipeline defaults")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic benchmark")
    p.add_argument("--fsm", type=int, default=4, help="FSM state register count")
    p.add_argument("--data", type=int, default=16, help="datapath register count")
    p.add_argument("--width", type=int, default=8, help="datapath word width")
    p.add_argument("--depth", type=int, default=3, help="combinational tree depth")
    p.add_argument("--fanin", type=int, default=4, help="maximum gate fan-in")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("map", parents=[common],
                       help="parse structural Verilog and map onto the generic cell set")
    p.add_argument("netlist", help="input .v file")
    p.add_argument("--library", dest="tech_library", default=None,
                   help="technology library JSON (default: bundled generic library)")
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("extract", parents=[common],
                       help="build the circuit graph and extract register path structures")
    p.add_argument("mapped", help="mapped.json from 'map'")
    p.add_argument("--depth", dest="walk_length", type=int, default=None,
                   help="backward search depth (default 6)")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", parents=[common],
                       help="train the attention auto-encoder on path structures")
    p.add_argument("paths", nargs="+", help="paths.json artifacts from 'extract'")
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--clip", dest="gradient_clip", type=float, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--structure-loss", dest="structure_loss_weight", type=float, default=None,
                   help="weight of the optional edge-reconstruction loss term (default 0)")
    p.add_argument("--no-dedup", action="store_true",
                   help="train on every structure instead of one per isomorphism class")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", parents=[common],
                       help="embed registers and cluster them into STATE/DATA labels")
    p.add_argument("model", help="model.ckpt from 'train'")
    p.add_argument("paths", help="paths.json for the design to classify")
    p.add_argument("--t1", type=float, default=None,
                   help="clustering feature-difference threshold (default 1e-3)")
    p.add_argument("--t2", type=int, default=None,
                   help="group-size threshold separating STATE from DATA (default 4)")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval", parents=[common], help="score labels against ground truth")
    p.add_argument("labels", help="labels.json from 'classify'")
    p.add_argument("truth", help="truth.json ground-truth file")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loocv", parents=[common],
                       help="leave-one-out cross-validation over a corpus directory")
    p.add_argument("corpus", help="directory of design subdirectories (netlist.v + truth.json)")
    p.add_argument("--library", dest="tech_library", default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--clip", dest="gradient_clip", type=float, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--structure-loss", dest="structure_loss_weight", type=float, default=None)
    p.add_argument("--depth", dest="walk_length", type=int, default=None)
    p.add_argument("--t1", type=float, default=None)
    p.add_argument("--t2", type=int, default=None)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel folds (deterministic)")
    p.set_defaults(func=_cmd_loocv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg_file = _load_config_file(args.config) if args.config else {}
        return args.func(args, cfg_file)
    except NumericalError as exc:
        print(f"statereg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NetlistError, SchemaError, CheckpointError, FileNotFoundError,
            NotADirectoryError, ValueError) as exc:
        print(f"statereg: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
