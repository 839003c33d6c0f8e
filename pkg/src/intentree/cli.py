"""Command-line entry point.

Subcommands: build-tree, segment, annotate, evaluate-annotation,
make-dataset, evaluate-generation, kappa, and pipeline (which chains the
stages over one config file). Diagnostics go to stderr; data goes to files
or stdout. Exit codes: 0 success, 1 validation/data error, 2 backend/IO
error. Every run emits one manifest: next to the primary output when one
exists, otherwise as a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

import yaml

from . import __version__
from .annotator import annotate_corpus
from .corpus import read_corpus, write_corpus
from .datagen import (
    SplitSpec,
    TrainingConfig,
    build_pairs,
    coarse_variant,
    export_dataset,
    split_dialogs,
)
from .errors import BackendError, ToolkitError, ValidationError
from .llm import make_backend
from .metrics import (
    consistency_report,
    evaluate_generation,
    filter_single_edu,
    fleiss_kappa,
    majority_vote,
)
from .segmenter import make_restorer, segment_corpus
from .taxonomy import load_frequencies, load_taxonomy
from .tree import load_tree, save_tree, validate_tree
from .treebuild import BuildParams, LlmSplitOracle, ScriptedSplitOracle, build_tree

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BACKEND = 2


class _Parser(argparse.ArgumentParser):
    """Argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Manifest:
    """One manifest per command execution, chaining inputs to outputs by hash."""

    def __init__(self, command: str, parameters: dict):
        self.data = {
            "command": command,
            "parameters": {
                k: str(v)
                for k, v in parameters.items()
                if v is not None and k not in ("func", "command")
            },
            "inputs": {},
            "outputs": {},
            "started_at": time.time(),
            "tool_version": __version__,
        }

    def add_input(self, path) -> None:
        if path and Path(path).is_file():
            self.data["inputs"][str(path)] = _sha256(Path(path))

    def add_output(self, path) -> None:
        if path and Path(path).is_file():
            self.data["outputs"][str(path)] = _sha256(Path(path))

    def write(self, anchor: Optional[Path]) -> None:
        self.data["finished_at"] = time.time()
        if anchor is not None:
            target = anchor.with_name(anchor.name + ".manifest.json")
            target.write_text(
                json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        else:
            print(json.dumps({"manifest": self.data}, sort_keys=True), file=sys.stderr)


def _emit_report(report: dict, out: Optional[str], fmt: str, render_text) -> Optional[Path]:
    """Write a report as JSON or text to a file or stdout; returns the path."""
    if fmt == "json":
        payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        payload = render_text(report)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(payload, encoding="utf-8")
        return path
    sys.stdout.write(payload)
    return None


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_build_tree(args) -> int:
    manifest = Manifest("build-tree", vars(args))
    for p in (args.taxonomy, args.frequencies):
        manifest.add_input(p)
    taxonomy = load_taxonomy(args.taxonomy)
    if args.frequencies:
        freqs = load_frequencies(args.frequencies)
        taxonomy = type(taxonomy)(
            intents=taxonomy.intents, frequencies=freqs, name=taxonomy.name
        )
    params = BuildParams(
        max_candidates=args.max_candidates,
        max_depth=args.max_depth,
        max_backtracks=args.max_backtracks,
        balance_weight=args.balance_weight,
    )
    if args.oracle.startswith("scripted:"):
        oracle = ScriptedSplitOracle.load(args.oracle.split(":", 1)[1])
        manifest.add_input(args.oracle.split(":", 1)[1])
    elif args.oracle == "llm":
        backend = make_backend(
            "http", endpoint=args.endpoint, timeout=args.timeout, audit=args.audit
        )
        oracle = LlmSplitOracle(backend=backend, model_id=args.model)
    else:
        raise ValidationError(f"unknown oracle {args.oracle!r}; use scripted:<file> or llm")

    tree = build_tree(taxonomy, oracle, params)
    save_tree(tree, args.out)
    manifest.add_output(args.out)
    manifest.write(Path(args.out))
    validation = validate_tree(tree, taxonomy)
    print(
        f"built tree: {validation.leaf_count} leaves, depth "
        f"{validation.min_depth}..{validation.max_depth}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_segment(args) -> int:
    manifest = Manifest("segment", vars(args))
    manifest.add_input(args.infile)
    dialogs = read_corpus(args.infile)
    restorer = make_restorer(args.restorer, endpoint=args.endpoint)
    dialogs, report = segment_corpus(dialogs, restorer)
    write_corpus(dialogs, args.out)
    report_path = Path(args.out).with_suffix(".report.json")
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    manifest.add_output(args.out)
    manifest.add_output(report_path)
    manifest.write(Path(args.out))
    print(
        f"segmented {report.teacher_turns} teacher turns into {report.total_edus} EDUs "
        f"({report.single_edu_turns} single-EDU turns)",
        file=sys.stderr,
    )
    if report.errors:
        print(f"{len(report.errors)} turns failed; see report", file=sys.stderr)
    return EXIT_OK


def _cmd_annotate(args) -> int:
    manifest = Manifest("annotate", vars(args))
    for p in (args.infile, args.tree, args.mock_script):
        manifest.add_input(p)
    dialogs = read_corpus(args.infile)
    tree = load_tree(args.tree)
    backend = make_backend(
        args.backend,
        endpoint=args.endpoint,
        model=args.model,
        timeout=args.timeout,
        retry_cap=args.retry_cap,
        backoff_base=args.backoff_base,
        mock_script=args.mock_script,
        audit=args.audit,
    )
    dialogs, report = annotate_corpus(
        dialogs,
        tree,
        backend,
        context_window=args.context_window,
        retries=args.retries,
        model_id=args.model,
        max_inflight=args.max_inflight,
    )
    write_corpus(dialogs, args.out)
    report_path = Path(args.out).with_suffix(".report.json")
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    manifest.add_output(args.out)
    manifest.add_output(report_path)
    manifest.write(Path(args.out))
    print(
        f"annotated {report.annotated} EDUs, {report.failed} failures",
        file=sys.stderr,
    )
    if report.failed and report.annotated == 0:
        raise BackendError("annotation failed for every EDU")
    return EXIT_OK


def _single_edu_keys(dialogs) -> set:
    keys = set()
    for dialog in dialogs:
        for turn_index, turn in dialog.teacher_turns():
            if turn.edus is not None and len(turn.edus) == 1:
                keys.add((dialog.id, turn_index))
    return keys


def _cmd_evaluate_annotation(args) -> int:
    manifest = Manifest("evaluate-annotation", vars(args))
    manifest.add_input(args.gold)
    manifest.add_input(args.pred)
    gold_dialogs = read_corpus(args.gold)
    pred_dialogs = read_corpus(args.pred)

    gold_labels = {}
    for dialog in gold_dialogs:
        for turn_index, turn in dialog.teacher_turns():
            for edu in turn.edus or []:
                if edu.inherited_label:
                    gold_labels[edu.ref] = (edu.inherited_label, (dialog.id, turn_index))

    items = []
    skipped = 0
    for dialog in pred_dialogs:
        for turn_index, turn in dialog.teacher_turns():
            for edu in turn.edus or []:
                if edu.fine_intent is None:
                    skipped += 1
                    continue
                if edu.ref not in gold_labels:
                    skipped += 1
                    continue
                gold_label, turn_key = gold_labels[edu.ref]
                items.append((turn_key, (gold_label, edu.fine_intent)))

    if args.single_edu_only:
        keys = _single_edu_keys(gold_dialogs)
        pairs = filter_single_edu(items, keys)
    else:
        pairs = [labels for _, labels in items]
    if not pairs:
        raise ValidationError("no scorable (gold, predicted) pairs found")
    report = consistency_report(pairs)

    def render_text(data: dict) -> str:
        lines = [
            f"items scored: {data['n_items']} (skipped {skipped})",
            f"P_w={data['weighted_precision']:.4f} R_w={data['weighted_recall']:.4f} "
            f"F1_w={data['weighted_f1']:.4f} F1={data['macro_f1']:.4f}",
        ]
        for label, scores in data["per_class"].items():
            lines.append(
                f"  {label:8s} P={scores['precision']:.4f} "
                f"R={scores['recall']:.4f} F1={scores['f1']:.4f}"
            )
        return "\n".join(lines) + "\n"

    out_path = _emit_report(report.to_dict(), args.out, args.format, render_text)
    manifest.add_output(out_path)
    manifest.write(out_path)
    return EXIT_OK


def _cmd_make_dataset(args) -> int:
    manifest = Manifest("make-dataset", vars(args))
    manifest.add_input(args.infile)
    dialogs = read_corpus(args.infile)

    if args.split_sizes:
        sizes = [int(x) for x in args.split_sizes.split(",")]
        if len(sizes) != 3:
            raise ValidationError("--split-sizes needs three comma-separated integers")
        spec = SplitSpec(train=sizes[0], validation=sizes[1], test=sizes[2], seed=args.split_seed)
        split_dialogs(dialogs, spec)

    records_by_split: dict[str, list] = {"train": [], "validation": [], "test": []}
    unassigned = []
    for dialog in dialogs:
        records = build_pairs(dialog)
        if args.intents == "coarse":
            records = coarse_variant(records)
        if dialog.split in records_by_split:
            records_by_split[dialog.split].extend(records)
        else:
            unassigned.extend(records)
    if unassigned:
        records_by_split["unassigned"] = unassigned

    config = TrainingConfig()
    dataset_manifest = export_dataset(records_by_split, config, args.out)
    for name in dataset_manifest["files"]:
        manifest.add_output(Path(args.out) / name)
    manifest.add_output(Path(args.out) / "manifest.json")
    manifest.write(Path(args.out) / "dataset")
    total = sum(len(v) for v in records_by_split.values())
    print(f"exported {total} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def _read_text_column(path: str, preferred: tuple[str, ...]) -> list[str]:
    """One text per line: either plain text or JSONL with a known field."""
    texts = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
                for key in preferred:
                    if key in raw:
                        texts.append(str(raw[key]))
                        break
                else:
                    raise ValidationError(
                        f"{path}:{line_no}: no text field among {preferred}"
                    )
            else:
                texts.append(line)
    return texts


def _cmd_evaluate_generation(args) -> int:
    manifest = Manifest("evaluate-generation", vars(args))
    manifest.add_input(args.hyp)
    manifest.add_input(args.ref)
    hypotheses = _read_text_column(args.hyp, ("hypothesis", "target", "text"))
    references = _read_text_column(args.ref, ("target", "reference", "text"))
    scores = evaluate_generation(hypotheses, references)

    def render_text(data: dict) -> str:
        return (
            f"pairs: {data['n_pairs']}\n"
            f"chrF++    {data['chrf_pp']:8.2f}\n"
            f"SacreBLEU {data['sacre_bleu']:8.2f}\n"
            f"ROUGE-1   {data['rouge1']:8.2f}\n"
            f"ROUGE-2   {data['rouge2']:8.2f}\n"
            f"ROUGE-L   {data['rougeL']:8.2f}\n"
        )

    out_path = _emit_report(scores.to_dict(), args.out, args.format, render_text)
    manifest.add_output(out_path)
    manifest.write(out_path)
    return EXIT_OK


def _cmd_kappa(args) -> int:
    manifest = Manifest("kappa", vars(args))
    manifest.add_input(args.ratings)
    with open(args.ratings, encoding="utf-8") as fh:
        raw = json.load(fh)

    report: dict = {}
    if isinstance(raw, dict) and "votes" in raw:
        votes = raw["votes"]
        choices = sorted({c for item in votes for c in item})
        matrix = [[item.count(c) for c in choices] for item in votes]
        report["kappa"] = fleiss_kappa(matrix).to_dict()
        report["majority_vote"] = majority_vote(votes).to_dict()
    else:
        matrix = raw["counts"] if isinstance(raw, dict) else raw
        report["kappa"] = fleiss_kappa(matrix).to_dict()

    def render_text(data: dict) -> str:
        k = data["kappa"]
        lines = [
            f"kappa={k['kappa']:.4f} over {k['n_items']} items, "
            f"{k['n_raters']} raters, {k['n_categories']} categories"
        ]
        if "majority_vote" in data:
            mv = data["majority_vote"]
            lines.append(
                f"majority vote: preference rate {mv['preference_rate']:.1%}, "
                f"{mv['ties']} ties"
            )
        return "\n".join(lines) + "\n"

    out_path = _emit_report(report, args.out, args.format, render_text)
    manifest.add_output(out_path)
    manifest.write(out_path)
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = yaml.safe_load(fh)
    if not isinstance(config, dict):
        raise ValidationError(f"{args.config}: pipeline config must be a mapping")
    for key in ("corpus", "taxonomy", "tree", "backend", "out_dir"):
        if key not in config:
            raise ValidationError(f"{args.config}: missing required key {key!r}")

    base = Path(args.config).parent
    # inputs resolve against the config file; out_dir against the working dir
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    def resolve(path) -> str:
        p = Path(path)
        return str(p if p.is_absolute() else base / p)

    taxonomy = load_taxonomy(resolve(config["taxonomy"]))
    tree = load_tree(resolve(config["tree"]))
    tree_check = validate_tree(tree, taxonomy)
    if not tree_check.valid:
        raise ValidationError(f"tree/taxonomy mismatch: {tree_check.issues}")

    backend_cfg = config["backend"]
    backend_args = ["--backend", backend_cfg.get("kind", "mock")]
    if backend_cfg.get("kind") == "mock":
        backend_args += ["--mock-script", resolve(backend_cfg["rules_file"])]
    else:
        backend_args += ["--endpoint", backend_cfg["endpoint"]]
        if "model" in backend_cfg:
            backend_args += ["--model", backend_cfg["model"]]

    segmented = out_dir / "segmented.jsonl"
    annotated = out_dir / "annotated.jsonl"
    consistency = out_dir / "consistency.json"
    dataset_dir = out_dir / "dataset"

    stages = [
        [
            "segment",
            "--in", resolve(config["corpus"]),
            "--out", str(segmented),
            "--restorer", config.get("restorer", "fallback"),
        ],
        [
            "annotate",
            "--in", str(segmented),
            "--tree", resolve(config["tree"]),
            "--out", str(annotated),
        ]
        + backend_args,
        [
            "evaluate-annotation",
            "--gold", str(annotated),
            "--pred", str(annotated),
            "--out", str(consistency),
            "--format", "json",
        ],
        [
            "make-dataset",
            "--in", str(annotated),
            "--out", str(dataset_dir),
            "--split-seed", str(config.get("split", {}).get("seed", 0)),
            "--intents", config.get("intents", "fine"),
        ],
    ]
    split_cfg = config.get("split")
    if split_cfg:
        stages[-1] += [
            "--split-sizes",
            f"{split_cfg['train']},{split_cfg['validation']},{split_cfg['test']}",
        ]
    if "evaluate_generation" in config:
        eg = config["evaluate_generation"]
        stages.append(
            [
                "evaluate-generation",
                "--hyp", resolve(eg["hyp"]),
                "--ref", resolve(eg["ref"]),
                "--out", str(out_dir / "generation.json"),
                "--format", "json",
            ]
        )

    for stage in stages:
        print(f"pipeline stage: {' '.join(stage)}", file=sys.stderr)
        code = main(stage)
        if code != EXIT_OK:
            print(f"pipeline halted at stage {stage[0]} (exit {code})", file=sys.stderr)
            return code
    print(f"pipeline complete: artifacts in {out_dir}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_backend_flags(parser) -> None:
    parser.add_argument("--backend", choices=("http", "mock"), default="http")
    parser.add_argument("--endpoint", help="full chat-completions URL")
    parser.add_argument("--model", default="default")
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument("--retry-cap", type=int, default=5)
    parser.add_argument("--backoff-base", type=float, default=1.0)
    parser.add_argument("--mock-script", help="YAML script for the mock backend")
    parser.add_argument("--audit", help="append request/response JSONL audit log here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intentree", description=__doc__)
    parser.add_argument("--version", action="version", version=f"intentree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-tree", help="construct the annotation decision tree")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--frequencies")
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", default="llm", help="'llm' or 'scripted:<file>'")
    p.add_argument("--max-candidates", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-backtracks", type=int, default=50)
    p.add_argument("--balance-weight", type=float, default=0.5)
    p.add_argument("--endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--audit")
    p.set_defaults(func=_cmd_build_tree)

    p = sub.add_parser("segment", help="split teacher utterances into EDUs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--restorer", choices=("external", "fallback"), default="fallback")
    p.add_argument("--endpoint", help="punctuation-restoration service URL")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("annotate", help="assign fine intents to teacher EDUs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--context-window", type=int, default=5)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--max-inflight", type=int, default=1)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser(
        "evaluate-annotation", help="consistency of fine intents vs coarse labels"
    )
    p.add_argument("--gold", required=True, help="segmented corpus with coarse labels")
    p.add_argument("--pred", required=True, help="annotated corpus with fine intents")
    p.add_argument("--single-edu-only", action="store_true")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=_cmd_evaluate_annotation)

    p = sub.add_parser("make-dataset", help="export intent-conditioned prompt/target pairs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--split-sizes", help="train,validation,test dialog counts")
    p.add_argument("--granularity", choices=("edu",), default="edu")
    p.add_argument("--intents", choices=("fine", "coarse"), default="fine")
    p.set_defaults(func=_cmd_make_dataset)

    p = sub.add_parser("evaluate-generation", help="chrF++/BLEU/ROUGE of hypotheses")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=_cmd_evaluate_generation)

    p = sub.add_parser("kappa", help="inter-annotator agreement statistics")
    p.add_argument("--ratings", required=True, help="JSON counts matrix or votes file")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=_cmd_kappa)

    p = sub.add_parser("pipeline", help="run segment -> annotate -> evaluate -> export")
    p.add_argument("--config", required=True, help="pipeline YAML config")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
