"""Command line pipeline: simulate -> tokenize -> train -> eval -> analyze.

Every subcommand writes ``manifest.json`` next to its outputs. Exit codes:
0 success, 2 usage error, 3 missing input file, 4 schema violation,
5 task/label mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .analysis import (
    AccuracyRow,
    extract_embeddings,
    heatmap_render,
    misclassification_blocks,
    prediction_matrix,
    project_2d,
    spectral_cluster,
    write_report,
)
from .baselines import RecurrentClassifier, RecurrentConfig
from .model import (
    TASKS,
    EncoderModel,
    LabelError,
    ModelConfig,
    TrainConfig,
    build_dataset,
    classification_accuracy,
    dataset_split,
    eval_masks,
    mlm_accuracy,
    train,
)
from .nn.checkpoint import CheckpointError, load_checkpoint
from .sim import PRESETS, SimConfig, export_dataset, run_simulation
from .traj import SchemaError, TokenizeConfig, Vocabulary, ingest_csv, read_token_file, tokenize_corpus
from .traj.io import read_json, write_json, write_token_file

log = logging.getLogger("stare")

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA, EXIT_LABELS = 0, 2, 3, 4, 5
MODELS = ("stare", "lstm", "bilstm")
ANALYSES = ("matrix", "blocks", "spectral", "projection", "heatmap")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    inputs: dict[str, str]
    outputs: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    version: str = __version__

    @property
    def config_hash(self) -> str:
        return config_hash({"command": self.command, "config": self.config, "seed": self.seed})

    def write(self, out_dir: Path) -> Path:
        doc = asdict(self)
        doc["config_hash"] = self.config_hash
        doc["output_sha256"] = {k: file_digest(p) for k, p in self.outputs.items() if Path(p).is_file()}
        path = out_dir / "manifest.json"
        write_json(doc, path)
        return path


# -- helpers ------------------------------------------------------------------

def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(EXIT_MISSING, f"{what} not found: {path}")
    return path


def _load_json(path: Path, what: str) -> dict:
    _require(path, what)
    try:
        doc = read_json(path)
    except json.JSONDecodeError as e:
        raise CliError(EXIT_SCHEMA, f"{what} {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise CliError(EXIT_SCHEMA, f"{what} {path} must hold a JSON object")
    return doc


def _schema(fn, *args):
    try:
        return fn(*args)
    except (TypeError, ValueError, KeyError) as e:
        raise CliError(EXIT_SCHEMA, str(e)) from None


def _load_tokens(data_dir: Path) -> tuple[Vocabulary, list]:
    _require(data_dir, "token directory")
    vocab = _schema(Vocabulary.from_dict, _load_json(data_dir / "vocab.json", "vocabulary"))
    tok_path = _require(data_dir / "tokens.jsonl", "token file")
    try:
        seqs = read_token_file(tok_path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CliError(EXIT_SCHEMA, f"malformed token file {tok_path}: {e}") from None
    bad = [s for s in seqs if len(s.tokens) != vocab.seq_len]
    if bad:
        raise CliError(EXIT_SCHEMA, f"{len(bad)} sequence(s) do not match vocabulary length {vocab.seq_len}")
    return vocab, seqs


def _dataset(seqs, task: str):
    try:
        return build_dataset(seqs, task)
    except LabelError as e:
        raise CliError(EXIT_LABELS, str(e)) from None


def _load_model(path: Path):
    _require(path, "checkpoint")
    try:
        arrays, meta = load_checkpoint(path)
    except (CheckpointError, ValueError, OSError) as e:
        raise CliError(EXIT_SCHEMA, f"cannot read checkpoint {path}: {e}") from None
    kind = meta.get("model_type")
    if kind == "stare":
        model = EncoderModel(_schema(ModelConfig.from_dict, meta["config"]))
    elif kind in ("lstm", "bilstm"):
        model = RecurrentClassifier(_schema(RecurrentConfig.from_dict, meta["config"]))
    else:
        raise CliError(EXIT_SCHEMA, f"checkpoint {path} has unknown model type {kind!r}")
    _schema(model.load_arrays, arrays)
    return model, meta


def _split_fields(doc: dict, *classes) -> list[dict]:
    """Partition a flat config dict among dataclasses by field name."""
    from dataclasses import fields

    out = [{} for _ in classes]
    for key, value in doc.items():
        for i, cls in enumerate(classes):
            if key in {f.name for f in fields(cls)}:
                out[i][key] = value
                break
        else:
            raise CliError(EXIT_SCHEMA, f"unknown training config field {key!r}")
    return out


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> RunManifest:
    t0 = time.perf_counter()
    cfg = PRESETS[args.preset]
    if args.config:
        overrides = _load_json(Path(args.config), "simulation config")
        cfg = _schema(SimConfig.from_dict, {**cfg.to_dict(), **overrides})
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.out)
    sim = run_simulation(cfg)
    t1 = time.perf_counter()
    paths = export_dataset(sim, out)
    write_json(cfg.to_dict(), out / "sim_config.json")
    inputs = {"config": args.config} if args.config else {}
    return RunManifest("simulate", cfg.to_dict(), cfg.seed, inputs,
                       {k: str(v) for k, v in paths.items()} | {"sim_config": str(out / "sim_config.json")},
                       {"simulate_s": t1 - t0, "export_s": time.perf_counter() - t1})


def cmd_tokenize(args) -> RunManifest:
    t0 = time.perf_counter()
    csv_path = _require(Path(args.input), "trajectory CSV")
    cfg = TokenizeConfig()
    if args.config:
        cfg = _schema(lambda d: TokenizeConfig(**d), _load_json(Path(args.config), "tokenize config"))
    labels = None
    inputs = {"csv": str(csv_path)}
    if args.labels:
        raw = _load_json(Path(args.labels), "label file")
        labels = {str(k): int(v) for k, v in raw.items()}
        inputs["labels"] = args.labels
    try:
        trajs = ingest_csv(csv_path)
    except SchemaError as e:
        raise CliError(EXIT_SCHEMA, str(e)) from None
    vocab, seqs = tokenize_corpus(trajs, cfg, labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.json")
    write_token_file(seqs, out / "tokens.jsonl")
    write_json(cfg.to_dict(), out / "tokenize_config.json")
    seed = args.seed if args.seed is not None else 0
    return RunManifest("tokenize", cfg.to_dict(), seed, inputs,
                       {"vocab": str(out / "vocab.json"), "tokens": str(out / "tokens.jsonl"),
                        "tokenize_config": str(out / "tokenize_config.json")},
                       {"tokenize_s": time.perf_counter() - t0})


def _build_model(kind: str, task: str, vocab: Vocabulary, n_classes: int, overrides: dict, seed: int):
    if kind == "stare":
        cfg = _schema(lambda: ModelConfig(vocab_size=vocab.size, max_len=vocab.seq_len,
                                          n_classes=n_classes, seed=seed, **overrides))
        return EncoderModel(cfg)
    if task == "mlm":
        raise CliError(EXIT_LABELS, f"{kind} models support classification tasks only")
    cfg = _schema(lambda: RecurrentConfig(vocab_size=vocab.size, n_classes=n_classes,
                                          bidirectional=kind == "bilstm", seed=seed, **overrides))
    return RecurrentClassifier(cfg)


def cmd_train(args) -> RunManifest:
    t0 = time.perf_counter()
    data_dir = Path(args.data)
    vocab, seqs = _load_tokens(data_dir)
    dataset = _dataset(seqs, args.task)
    doc = _load_json(Path(args.config), "training config") if args.config else {}
    model_cls = ModelConfig if args.model == "stare" else RecurrentConfig
    model_kw, train_kw = _split_fields(doc, model_cls, TrainConfig)
    for reserved in ("vocab_size", "max_len", "n_classes", "seed", "bidirectional"):
        if reserved in model_kw:
            raise CliError(EXIT_SCHEMA, f"{reserved!r} is derived from the data or flags, not configurable")
    for flag in ("epochs", "lr", "batch_size", "patience"):
        if getattr(args, flag) is not None:
            train_kw[flag] = getattr(args, flag)
    seed = args.seed if args.seed is not None else int(train_kw.pop("seed", 0))
    tcfg = _schema(lambda: TrainConfig(**{**train_kw, "seed": seed}))
    model = _build_model(args.model, args.task, vocab, dataset.n_classes, model_kw, seed)
    try:
        result = train(model, dataset, args.task, tcfg, vocab=vocab)
    except LabelError as e:
        raise CliError(EXIT_LABELS, str(e)) from None
    t1 = time.perf_counter()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"task": args.task, "train_config": tcfg.to_dict(),
            "classes": dataset.classes, "best_epoch": result.best_epoch, "best_test_acc": result.best_test_acc}
    model.save(out / "model.npz", meta)
    result.write_log_csv(out / "metrics.csv")
    full_cfg = {"model_type": model.model_type, "task": args.task, "model": model.config.to_dict(),
                "train": tcfg.to_dict()}
    write_json(full_cfg, out / "train_config.json")
    write_json({"train": result.train_idx.tolist(), "test": result.test_idx.tolist()}, out / "split.json")
    return RunManifest("train", full_cfg, seed, {"data": str(data_dir)} | ({"config": args.config} if args.config else {}),
                       {"checkpoint": str(out / "model.npz"), "metrics": str(out / "metrics.csv"),
                        "train_config": str(out / "train_config.json"), "split": str(out / "split.json")},
                       {"train_s": t1 - t0, "epochs_run": float(len(result.log) - 1)})


def _held_out(model, meta: dict, vocab, seqs):
    task = meta.get("task")
    if task not in TASKS:
        raise CliError(EXIT_SCHEMA, f"checkpoint records unknown task {task!r}")
    dataset = _dataset(seqs, task)
    if task != "mlm" and dataset.classes != meta.get("classes"):
        raise CliError(EXIT_LABELS, "token file labels do not match the classes the model was trained on")
    tcfg = _schema(TrainConfig.from_dict, meta["train_config"])
    _, test_idx = dataset_split(dataset, task, tcfg)
    return task, dataset, dataset.subset(test_idx), tcfg


def cmd_eval(args) -> RunManifest:
    t0 = time.perf_counter()
    model, meta = _load_model(Path(args.checkpoint))
    vocab, seqs = _load_tokens(Path(args.data))
    task, _, test, tcfg = _held_out(model, meta, vocab, seqs)
    if task == "mlm":
        batch = eval_masks(test.tokens, vocab, model.config.mask_fraction, tcfg.seed)
        acc, n = mlm_accuracy(model, batch), batch.n_masked
    else:
        acc, n = classification_accuracy(model, test), len(test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report([AccuracyRow(model.model_type, task, acc, n)], out / "report.csv")
    print(f"{model.model_type} {task} accuracy {acc:.4f} on {n} held-out item(s)")
    return RunManifest("eval", {"task": task, "model_type": model.model_type}, tcfg.seed,
                       {"checkpoint": args.checkpoint, "data": args.data},
                       {"report": str(out / "report.csv")}, {"eval_s": time.perf_counter() - t0})


def cmd_analyze(args) -> RunManifest:
    t0 = time.perf_counter()
    model, meta = _load_model(Path(args.checkpoint))
    vocab, seqs = _load_tokens(Path(args.data))
    task, dataset, test, tcfg = _held_out(model, meta, vocab, seqs)
    wanted = args.analyses.split(",")
    unknown = set(wanted) - set(ANALYSES)
    if unknown:
        raise CliError(EXIT_USAGE, f"unknown analyses {sorted(unknown)}; choose from {ANALYSES}")
    kind = "location" if task == "mlm" else task
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}
    P = None
    if {"matrix", "blocks", "spectral", "heatmap"} & set(wanted):
        P = _schema(prediction_matrix, model, test, kind, vocab, args.min_count, tcfg.seed)
        P.write_csv(out / "matrix.csv")
        outputs["matrix"] = str(out / "matrix.csv")
    if "heatmap" in wanted:
        heatmap_render(P.values, out / "heatmap.png", vmin=0.0, vmax=1.0)
        outputs["heatmap"] = str(out / "heatmap.png")
    if "blocks" in wanted:
        blocks = misclassification_blocks(P, args.threshold)
        write_json({"threshold": args.threshold, "blocks": blocks}, out / "blocks.json")
        outputs["blocks"] = str(out / "blocks.json")
    if "spectral" in wanted:
        k = min(args.k, len(P))
        clusters = _schema(spectral_cluster, P, k, tcfg.seed)
        write_json(clusters.to_dict(), out / "clusters.json")
        outputs["clusters"] = str(out / "clusters.json")
    if "projection" in wanted:
        if not isinstance(model, EncoderModel):
            raise CliError(EXIT_LABELS, "projections need encoder embeddings")
        xy = project_2d(extract_embeddings(model, dataset), args.projection, tcfg.seed)
        with open(out / "projection.csv", "w") as fh:
            fh.write("agent_id,window,x,y\n")
            for a, m, (x, y) in zip(dataset.agent_ids, dataset.windows, xy):
                fh.write(f"{a},{m},{x!r},{y!r}\n")
        outputs["projection"] = str(out / "projection.csv")
    cfg = {"task": task, "analyses": wanted, "threshold": args.threshold, "k": args.k,
           "min_count": args.min_count, "projection": args.projection}
    return RunManifest("analyze", cfg, tcfg.seed, {"checkpoint": args.checkpoint, "data": args.data},
                       outputs, {"analyze_s": time.perf_counter() - t0})


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stare", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate agents and write trajectories")
    p.add_argument("--preset", choices=sorted(PRESETS), default="S")
    p.add_argument("--config", help="JSON with simulation config overrides")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("tokenize", help="turn a trajectory CSV into token sequences")
    p.add_argument("--input", required=True, help="trajectory CSV (agent_id, lat, lon, timestamp)")
    p.add_argument("--labels", help="JSON mapping agent_id to subpopulation")
    p.add_argument("--config", help="JSON tokenize config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("train", help="train a model on a token directory")
    p.add_argument("--data", required=True, help="directory with vocab.json and tokens.jsonl")
    p.add_argument("--task", choices=TASKS, default="subpop")
    p.add_argument("--model", choices=MODELS, default="stare")
    p.add_argument("--config", help="JSON with model and training fields")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on its held-out split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("analyze", help="prediction matrices, blocks, clusters and projections")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--analyses", default="matrix,blocks,spectral,projection,heatmap")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--min-count", dest="min_count", type=int, default=20)
    p.add_argument("--projection", choices=("pca", "tsne"), default="pca")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = args.fn(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest.write(out)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
