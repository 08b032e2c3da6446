"""Single executable for the corpus pipeline and the evaluation harness.

Subcommands: profile, stratify, transform, pack, eval, report. Config
precedence is flags > config file > environment > defaults; every resolved
value is echoed into the run manifest. Exit codes: 0 success, 1 usage
error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, bpe, harness, pipeline, syntax, transforms
from .backends import BackendError, resolve_backend
from .corpus import CorpusFormatError, read_corpus, write_corpus

log = logging.getLogger("codecorpus")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

DEFAULTS = {
    "token_budget": 200_000_000,
    "sequence_length": 2048,
    "shots": 3,
    "seed": 0,
    "workers": 1,
    "max_new_tokens": 16,
    "max_in_flight": 1,
    "shallow_max": 7,
    "middle_max": 11,
    "deep_max": 20,
}

ENV_KEYS = {"backend": "BACKEND_URL", "backend_auth": "BACKEND_AUTH"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise CorpusFormatError(f"config file not found: {p}")
    if p.suffix == ".toml":
        return tomllib.loads(p.read_text(encoding="utf-8"))
    return json.loads(p.read_text(encoding="utf-8"))


def _resolve(args: argparse.Namespace, keys: list[str]) -> dict:
    """Merge flag, config-file, environment, and default values per key."""
    cfg = _load_config_file(getattr(args, "config", None))
    resolved = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = cfg.get(key)
        if value is None and key in ENV_KEYS:
            value = os.environ.get(ENV_KEYS[key])
        if value is None:
            value = DEFAULTS.get(key)
        resolved[key] = value
    return resolved


def _write_manifest(path: Path, command: str, config: dict, extra: dict) -> None:
    payload = {
        "command": command,
        "config": config,
        "package_version": __version__,
        "python": platform.python_version(),
    }
    payload.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _bins(config: dict) -> syntax.DepthBins:
    return syntax.DepthBins(shallow_max=config["shallow_max"],
                            middle_max=config["middle_max"],
                            deep_max=config["deep_max"])


def cmd_profile(args: argparse.Namespace) -> int:
    config = _resolve(args, ["input", "output", "workers"])
    docs, _ = read_corpus(config["input"])
    profile = pipeline.depth_profile(docs, workers=config["workers"])
    out = Path(config["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(profile.to_json() + "\n", encoding="utf-8")
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "profile",
                    config, {"parsed": profile.parsed, "failed": profile.failed})
    if args.table:
        print(f"{'depth':>6} {'count':>8}")
        for d in sorted(profile.histogram):
            print(f"{d:>6} {profile.histogram[d]:>8}")
    log.info("profiled %d documents (%d parse failures)",
             profile.parsed + profile.failed, profile.failed)
    return EXIT_OK


def cmd_stratify(args: argparse.Namespace) -> int:
    config = _resolve(args, ["input", "output_dir", "workers",
                             "shallow_max", "middle_max", "deep_max"])
    docs, fmt = read_corpus(config["input"])
    result = pipeline.stratify_by_depth(docs, bins=_bins(config),
                                        workers=config["workers"])
    outdir = Path(config["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    counts = {}
    for depth_bin, members in result.bins.items():
        name = depth_bin.value
        target = outdir / name if fmt == "dir" else outdir / f"{name}.jsonl"
        write_corpus(members, target, fmt)
        counts[name] = len(members)
    _write_manifest(outdir / "manifest.json", "stratify", config, {
        "counts": counts,
        "overflow": [d.id for d in result.overflow],
        "parse_failures": result.failures,
    })
    log.info("stratified %d documents: %s (+%d overflow, %d failures)",
             len(docs), counts, len(result.overflow), len(result.failures))
    return EXIT_OK


def cmd_transform(args: argparse.Namespace) -> int:
    config = _resolve(args, ["input", "output", "mode", "seed", "workers"])
    docs, fmt = read_corpus(config["input"])
    spec = transforms.TransformSpec(mode=transforms.TransformMode(config["mode"]),
                                    seed=config["seed"])
    out_docs, status = pipeline.transform_corpus(docs, spec,
                                                 workers=config["workers"])
    outpath = Path(config["output"])
    write_corpus(out_docs, outpath, fmt)
    manifest_path = (outpath / "manifest.json" if fmt == "dir"
                     else outpath.with_suffix(outpath.suffix + ".manifest.json"))
    failures = sorted(i for i, s in status.items() if s != "ok")
    _write_manifest(manifest_path, "transform", config, {
        "transform": spec.to_json(),
        "documents": len(out_docs),
        "parse_status": {i: status[i] for i in sorted(status)},
        "parse_failures": failures,
    })
    log.info("transformed %d documents with %s (%d parse failures)",
             len(out_docs), spec.mode.value, len(failures))
    return EXIT_OK


def cmd_pack(args: argparse.Namespace) -> int:
    config = _resolve(args, ["input", "vocab", "merges", "output_dir",
                             "sequence_length", "token_budget", "seed", "workers"])
    if config["token_budget"] <= 0:
        raise CorpusFormatError("token budget must be positive")
    docs, _ = read_corpus(config["input"])
    vocab = bpe.load_vocabulary(config["vocab"], config["merges"])
    sampled, stats = pipeline.sample_documents(docs, config["token_budget"],
                                               config["seed"], vocab)
    dataset = pipeline.pack(sampled, vocab, config["sequence_length"],
                            source=str(config["input"]),
                            workers=config["workers"],
                            vocab_paths=(str(config["vocab"]), str(config["merges"])))
    dataset.manifest.seed = config["seed"]
    dataset.manifest.token_budget = config["token_budget"]
    dataset.manifest.budget_exhausted = stats.exhausted
    outdir = Path(config["output_dir"])
    dataset.save(outdir)
    _write_manifest(outdir / "run_manifest.json", "pack", config, {
        "documents_used": dataset.manifest.documents_used,
        "sequences_emitted": dataset.manifest.sequences_emitted,
        "tokens_emitted": dataset.manifest.tokens_emitted,
        "budget_exhausted": stats.exhausted,
    })
    if stats.exhausted:
        log.warning("corpus exhausted below the %d-token budget (%d tokens)",
                    config["token_budget"], stats.tokens_counted)
    log.info("packed %d documents into %d sequences of length %d",
             dataset.manifest.documents_used, dataset.manifest.sequences_emitted,
             config["sequence_length"])
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve(args, ["dataset", "task", "backend", "backend_auth",
                             "shots_path", "output_dir", "shots", "seed",
                             "max_new_tokens", "max_in_flight"])
    if not config["backend"]:
        raise CorpusFormatError("no backend configured (flag, config, or BACKEND_URL)")
    loader = (harness.load_fld_jsonl if config["task"] == "fld"
              else harness.load_babi_jsonl)
    instances = loader(config["dataset"])
    shots = loader(config["shots_path"]) if config["shots_path"] else None
    try:
        backend = resolve_backend(config["backend"], seed=config["seed"],
                                  auth=config["backend_auth"])
    except ValueError as exc:
        raise CorpusFormatError(str(exc)) from exc
    report = harness.run_eval(backend, instances, config["task"],
                              k=config["shots"], seed=config["seed"],
                              max_new_tokens=config["max_new_tokens"],
                              max_in_flight=config["max_in_flight"], shots=shots)
    outdir = Path(config["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (outdir / "report.txt").write_text(
        harness.format_report_table(report) + "\n", encoding="utf-8")
    _write_manifest(outdir / "manifest.json", "eval", config, {
        "n": report.n, "accuracy": report.accuracy,
        "standard_error": report.standard_error, "degraded": report.degraded,
    })
    print(harness.format_report_table(report))
    if report.records and all(r.error is not None for r in report.records):
        log.error("backend never returned a completion; see %s", outdir)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report_a = harness.EvalReport.from_dict(
        json.loads(Path(args.a).read_text(encoding="utf-8")))
    report_b = harness.EvalReport.from_dict(
        json.loads(Path(args.b).read_text(encoding="utf-8")))
    try:
        delta = harness.compare_reports(report_a, report_b)
    except ValueError as exc:
        raise CorpusFormatError(str(exc)) from exc
    line = (f"{delta.task}: {delta.accuracy_a:.3f} vs {delta.accuracy_b:.3f}  "
            f"delta {delta.delta:+.3f}±{delta.pooled_standard_error:.3f}  "
            f"(n={delta.n})")
    print(line)
    if args.output:
        Path(args.output).write_text(
            json.dumps(delta.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="codecorpus",
                     description="Build, ablate, and analyze code pretraining "
                                 "corpora; run few-shot logical-inference evals.")
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="syntax-depth histogram of a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="profile JSON path")
    p.add_argument("--workers", type=int)
    p.add_argument("--table", action="store_true", help="print histogram table")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("stratify", help="split a corpus into depth bins")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--shallow-max", type=int)
    p.add_argument("--middle-max", type=int)
    p.add_argument("--deep-max", type=int)
    p.set_defaults(fn=cmd_stratify)

    p = sub.add_parser("transform", help="apply a code ablation to a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=[m.value for m in transforms.TransformMode])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("pack", help="sample and pack a corpus into token shards")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True, help="vocab.json path")
    p.add_argument("--merges", required=True, help="merges.txt path")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--sequence-length", type=int)
    p.add_argument("--token-budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(fn=cmd_pack)

    p = sub.add_parser("eval", help="run a few-shot evaluation")
    p.add_argument("--dataset", required=True, help="instance JSONL path")
    p.add_argument("--task", choices=["fld", "babi"], required=True)
    p.add_argument("--backend", help="endpoint URL or mock:<name>")
    p.add_argument("--backend-auth", help="Authorization header value")
    p.add_argument("--shots-path", help="separate exemplar JSONL")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--shots", type=int, help="number of exemplars (k)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--max-in-flight", type=int)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="compare two evaluation reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except BackendError as exc:
        log.error("backend error: %s", exc)
        return EXIT_BACKEND
    except (CorpusFormatError, bpe.VocabularyError, syntax.ParseError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
