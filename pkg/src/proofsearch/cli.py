"""Command line surface: dataset generation, verifier training data,
proof search, and evaluation.

Settings merge in order: built-in defaults, then a --config file (JSON or
TOML), then PROOFSEARCH_* environment variables, then explicit flags.
Machine-readable output goes to files or stdout; human-readable summaries
go to stderr.

Exit codes: 0 success, 1 usage, 2 data error, 3 bridge error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from .dsl import normalize_sentence, serialize_proof
from .errors import (
    BridgeError,
    ConfigError,
    DataError,
    ProofSearchError,
    UsageError,
)
from .evaluation import (
    AnswerClassifier,
    ExampleScores,
    InstanceOutcome,
    breakdown_by_depth,
    score_example,
    token_f1,
)
from .negatives import (
    DEFAULT_FLAVORS,
    Perturbation,
    extract_positives,
    make_negatives,
    write_labeled_steps,
)
from .bm25 import Bm25Index
from .report import (
    build_report,
    format_breakdown_table,
    format_metrics_table,
    render_figures,
    write_breakdown_csv,
    write_report_json,
)
from .search import JsonlTracer, ScoreMix, SearchConfig, run_greedy, run_search
from .sources import (
    ExactProver,
    ExactVerifier,
    ExternalProver,
    ExternalVerifier,
    HttpTransport,
    NoisyProver,
    OracleProver,
    OracleVerifier,
    StdioTransport,
    StepScorer,
    StepSource,
    Transport,
)
from .synth import (
    Answer,
    DatasetConfig,
    TaskInstance,
    WorldConfig,
    generate_dataset,
    instance_seed,
    negate,
    read_dataset,
    write_dataset,
)

ENV_PREFIX = "PROOFSEARCH_"


@dataclass(frozen=True)
class ArgSpec:
    flags: tuple[str, ...]
    dest: str
    kind: str  # int | float | str | flag
    default: Any
    help: str
    required: bool = False
    choices: tuple[str, ...] | None = None


COMMON_SPECS = (
    ArgSpec(("--config",), "config", "str", None, "JSON or TOML settings file"),
)

COMMAND_SPECS: dict[str, tuple[ArgSpec, ...]] = {
    "gen-data": (
        ArgSpec(("--output", "-o"), "output", "str", None, "where to write the dataset JSONL", required=True),
        ArgSpec(("--n",), "n", "int", 100, "number of instances"),
        ArgSpec(("--entities",), "entities", "int", 10, "entities in the world"),
        ArgSpec(("--attributes",), "attributes", "int", 8, "attribute vocabulary size"),
        ArgSpec(("--rules",), "rules", "int", 30, "rules in the world"),
        ArgSpec(("--depths",), "depths", "str", "0,1,2,3", "comma-separated proof depths to cycle through"),
        ArgSpec(("--distractors",), "distractors", "int", 22, "distractor sentences per instance"),
        ArgSpec(("--context-size",), "context_size", "int", None, "pad every context to exactly this many sentences"),
        ArgSpec(("--answers",), "answers", "str", "1:1:1", "proved:disproved:unknown ratio"),
        ArgSpec(("--seed",), "seed", "int", None, "random seed", required=True),
    ),
    "gen-negatives": (
        ArgSpec(("--dataset",), "dataset", "str", None, "instance JSONL with gold proofs", required=True),
        ArgSpec(("--output", "-o"), "output", "str", None, "where to write labeled steps JSONL", required=True),
        ArgSpec(("--flavors",), "flavors", "str", "removed,swapped,negated", "comma-separated perturbation flavors"),
        ArgSpec(("--corpus-wide",), "corpus_wide", "flag", False, "retrieve distractors from all contexts, not just the instance's"),
        ArgSpec(("--seed",), "seed", "int", None, "random seed", required=True),
    ),
    "search": (
        ArgSpec(("--dataset",), "dataset", "str", None, "instance JSONL to prove", required=True),
        ArgSpec(("--output", "-o"), "output", "str", None, "where to write prediction JSONL", required=True),
        ArgSpec(("--prover",), "prover", "str", "exact", "candidate step source", choices=("exact", "noisy", "oracle", "external")),
        ArgSpec(("--verifier",), "verifier", "str", "exact", "step validity scorer", choices=("exact", "oracle", "external")),
        ArgSpec(("--drop",), "drop", "float", 0.3, "noisy prover: chance of dropping a candidate"),
        ArgSpec(("--inject",), "inject", "float", 0.3, "noisy prover: chance of injecting a bad step"),
        ArgSpec(("--bridge-command",), "bridge_command", "str", None, "external sources: subprocess speaking the wire protocol"),
        ArgSpec(("--bridge-url",), "bridge_url", "str", None, "external sources: HTTP endpoint"),
        ArgSpec(("--bridge-timeout",), "bridge_timeout", "float", 30.0, "external sources: per-call timeout in seconds"),
        ArgSpec(("--no-search",), "no_search", "flag", False, "greedy decoding only, skip the search loop"),
        ArgSpec(("--score-mix",), "score_mix", "str", "average", "how prover and verifier scores combine", choices=("average", "prover-only", "verifier-only")),
        ArgSpec(("--num-candidates",), "num_candidates", "int", 10, "candidates requested per prover call"),
        ArgSpec(("--max-iterations",), "max_iterations", "int", 50, "search iteration budget"),
        ArgSpec(("--patience",), "patience", "int", 5, "stop after this many iterations without progress"),
        ArgSpec(("--trace",), "trace", "str", None, "write per-iteration JSONL trace here"),
        ArgSpec(("--jobs",), "jobs", "int", 1, "instances searched in parallel"),
        ArgSpec(("--seed",), "seed", "int", None, "random seed", required=True),
    ),
    "eval": (
        ArgSpec(("--predictions",), "predictions", "str", None, "prediction JSONL from the search command", required=True),
        ArgSpec(("--dataset",), "dataset", "str", None, "gold instance JSONL", required=True),
        ArgSpec(("--outdir",), "outdir", "str", None, "directory for report.json, breakdown.csv, and figures", required=True),
        ArgSpec(("--no-figures",), "no_figures", "flag", False, "skip rendering charts"),
        ArgSpec(("--fit-classifier",), "fit_classifier", "flag", False, "fit answer weights on this run instead of the reference weights"),
        ArgSpec(("--similarity-threshold",), "similarity_threshold", "float", 0.55, "intermediate match threshold"),
    ),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proofsearch",
        description="Prove hypotheses from supporting facts by searching over verified steps.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for command, specs in COMMAND_SPECS.items():
        sub = subparsers.add_parser(command, help=specs[0].help and f"{command} options")
        for spec in COMMON_SPECS + specs:
            kwargs: dict[str, Any] = {
                "dest": spec.dest,
                "help": spec.help,
                "default": argparse.SUPPRESS,
            }
            if spec.kind == "flag":
                kwargs["action"] = "store_true"
            else:
                kwargs["type"] = {"int": int, "float": float, "str": str}[spec.kind]
                if spec.choices:
                    kwargs["choices"] = spec.choices
            sub.add_argument(*spec.flags, **kwargs)
    return parser


def _load_config_file(path: str) -> dict[str, Any]:
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(text.decode())
        except Exception as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    try:
        loaded = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold an object")
    return loaded


def _coerce(spec: ArgSpec, raw: Any, origin: str) -> Any:
    try:
        if spec.kind == "flag":
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        value = {"int": int, "float": float, "str": str}[spec.kind](raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{origin}: bad value for {spec.dest}: {exc}") from exc
    if spec.choices and value not in spec.choices:
        raise UsageError(f"{origin}: {spec.dest} must be one of {', '.join(spec.choices)}")
    return value


def _merge_settings(
    command: str, provided: dict[str, Any], environ: dict[str, str]
) -> dict[str, Any]:
    specs = {spec.dest: spec for spec in COMMAND_SPECS[command]}
    merged = {dest: spec.default for dest, spec in specs.items()}

    config_path = provided.get("config") or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        for key, raw in _load_config_file(str(config_path)).items():
            if key not in specs:
                raise ConfigError(f"unknown config key for {command}: {key!r}")
            merged[key] = _coerce(specs[key], raw, f"config {config_path}")

    for dest, spec in specs.items():
        raw = environ.get(ENV_PREFIX + dest.upper())
        if raw is not None:
            merged[dest] = _coerce(spec, raw, "environment")

    for dest, value in provided.items():
        if dest != "config":
            merged[dest] = value

    for dest, spec in specs.items():
        if spec.required and merged[dest] is None:
            raise UsageError(f"{command}: --{dest.replace('_', '-')} is required")
    return merged


def _parse_depths(raw: str) -> tuple[int, ...]:
    try:
        depths = tuple(int(part) for part in raw.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --depths value {raw!r}: {exc}") from exc
    if not depths or any(not 0 <= d <= 3 for d in depths):
        raise UsageError("--depths must list depths within 0..3")
    return depths


def _parse_answer_ratio(raw: str) -> tuple[int, int, int]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise UsageError("--answers must look like proved:disproved:unknown, e.g. 1:1:1")
    try:
        ratio = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad --answers value {raw!r}: {exc}") from exc
    if any(r < 0 for r in ratio) or sum(ratio) == 0:
        raise UsageError("--answers needs non-negative weights, not all zero")
    return ratio  # type: ignore[return-value]


FLAVOR_NAMES = {
    "removed": Perturbation.PREMISE_REMOVED,
    "swapped": Perturbation.PREMISE_SWAPPED,
    "copied": Perturbation.PREMISE_COPIED,
    "negated": Perturbation.CONCLUSION_NEGATED,
}


def _parse_flavors(raw: str) -> dict[Perturbation, int]:
    weights: dict[Perturbation, int] = {}
    for name in raw.split(","):
        name = name.strip()
        if name not in FLAVOR_NAMES:
            raise UsageError(
                f"unknown flavor {name!r}; pick from {', '.join(sorted(FLAVOR_NAMES))}"
            )
        weights[FLAVOR_NAMES[name]] = weights.get(FLAVOR_NAMES[name], 0) + 1
    return weights


# --- subcommands ---------------------------------------------------------------


def cmd_gen_data(opts: dict[str, Any]) -> int:
    config = DatasetConfig(
        size=opts["n"],
        depths=_parse_depths(opts["depths"]),
        answer_ratio=_parse_answer_ratio(opts["answers"]),
        n_distractors=opts["distractors"],
        context_size=opts["context_size"],
        world=WorldConfig(
            n_entities=opts["entities"],
            n_attributes=opts["attributes"],
            n_rules=opts["rules"],
            seed=opts["seed"],
        ),
        seed=opts["seed"],
    )
    instances = generate_dataset(config)
    with open(opts["output"], "w") as fp:
        write_dataset(instances, fp)
    print(f"wrote {len(instances)} instances to {opts['output']}", file=sys.stderr)
    return 0


def cmd_gen_negatives(opts: dict[str, Any]) -> int:
    with open(opts["dataset"]) as fp:
        instances = read_dataset(fp)
    flavors = _parse_flavors(opts["flavors"]) if opts["flavors"] else dict(DEFAULT_FLAVORS)
    corpus_index = None
    if opts["corpus_wide"]:
        seen: dict[str, None] = {}
        for instance in instances:
            for sentence in instance.context:
                seen.setdefault(normalize_sentence(sentence), None)
        corpus_index = Bm25Index(list(seen))
    rng = random.Random(opts["seed"])
    positives = negatives = 0
    with open(opts["output"], "w") as fp:
        for instance in instances:
            gold = instance.gold_tree()
            if gold is None:
                continue
            context = [normalize_sentence(s) for s in instance.context]
            index = corpus_index if corpus_index is not None else Bm25Index(context)
            for step in extract_positives(gold, source_id=instance.id):
                requested = {
                    flavor: count
                    for flavor, count in flavors.items()
                    if flavor is not Perturbation.PREMISE_REMOVED or len(step.premises) > 1
                }
                produced = make_negatives(step, context, index, rng, requested)
                positives += write_labeled_steps([step], fp)
                negatives += write_labeled_steps(produced, fp)
    print(
        f"wrote {positives} positives and {negatives} negatives to {opts['output']}",
        file=sys.stderr,
    )
    return 0


def _gold_tree_for_side(instance: TaskInstance, side: str):
    if instance.answer is Answer.PROVED and side == "h":
        return instance.gold_tree()
    if instance.answer is Answer.DISPROVED and side == "neg":
        return instance.gold_tree()
    return None


def _make_sources(
    opts: dict[str, Any], transport: Transport | None
) -> Callable[[TaskInstance, str, int], tuple[StepSource, StepScorer]]:
    def build(instance: TaskInstance, side: str, index: int) -> tuple[StepSource, StepScorer]:
        gold = _gold_tree_for_side(instance, side)
        stream = 2 * index + (0 if side == "h" else 1)

        kind = opts["prover"]
        if kind == "exact":
            prover: StepSource = ExactProver()
        elif kind == "noisy":
            prover = NoisyProver(
                ExactProver(),
                drop=opts["drop"],
                inject=opts["inject"],
                seed=instance_seed(opts["seed"], stream),
            )
        elif kind == "oracle":
            prover = OracleProver(gold, ExactProver()) if gold else ExactProver()
        else:
            assert transport is not None
            prover = ExternalProver(transport)

        kind = opts["verifier"]
        if kind == "exact":
            verifier: StepScorer = ExactVerifier()
        elif kind == "oracle":
            verifier = OracleVerifier(gold, ExactVerifier()) if gold else ExactVerifier()
        else:
            assert transport is not None
            verifier = ExternalVerifier(transport)
        return prover, verifier

    return build


def _search_record(
    instance: TaskInstance,
    index: int,
    opts: dict[str, Any],
    config: SearchConfig,
    build: Callable[[TaskInstance, str, int], tuple[StepSource, StepScorer]],
    trace_sink: list[dict] | None,
) -> dict[str, Any]:
    record: dict[str, Any] = {"id": instance.id}
    for side, prefix in (("h", ""), ("neg", "neg_")):
        hypothesis = instance.hypothesis if side == "h" else negate(instance.hypothesis)
        prover, verifier = build(instance, side, index)
        tracer = None
        if trace_sink is not None:
            def tracer(event: dict, _side=side) -> None:
                trace_sink.append({"id": instance.id, "side": _side, **event})

        if opts["no_search"]:
            result = run_greedy(prover, verifier, hypothesis, instance.context, config, tracer)
        else:
            rng = random.Random(instance_seed(opts["seed"], 2 * index + (side == "neg")))
            result = run_search(
                prover, verifier, hypothesis, instance.context, config, rng, tracer
            )
        record[prefix + "proof"] = (
            serialize_proof(result.proof.canonical().proof) if result.proof else None
        )
        record[prefix + "proof_score"] = result.proof_score
        record[prefix + "iterations"] = result.iterations
        record[prefix + "stop_reason"] = result.stop_reason
        record[prefix + "failure"] = result.failure
    return record


def cmd_search(opts: dict[str, Any]) -> int:
    with open(opts["dataset"]) as fp:
        instances = read_dataset(fp)

    external = "external" in (opts["prover"], opts["verifier"])
    transport: Transport | None = None
    if external:
        if bool(opts["bridge_command"]) == bool(opts["bridge_url"]):
            raise UsageError(
                "external sources need exactly one of --bridge-command or --bridge-url"
            )
        if opts["bridge_command"]:
            command = shlex.split(opts["bridge_command"])
            transport = StdioTransport(command, timeout=opts["bridge_timeout"])
        else:
            transport = HttpTransport(opts["bridge_url"], timeout=opts["bridge_timeout"])

    jobs = opts["jobs"]
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if external and jobs > 1:
        print("external sources share one connection; forcing --jobs 1", file=sys.stderr)
        jobs = 1

    config = SearchConfig(
        num_candidates=opts["num_candidates"],
        max_iterations=opts["max_iterations"],
        score_mix=ScoreMix(opts["score_mix"].replace("-", "_")),
        no_update_patience=opts["patience"],
    )
    build = _make_sources(opts, transport)
    want_trace = opts["trace"] is not None
    sinks: list[list[dict] | None] = [[] if want_trace else None for _ in instances]

    def work(pair: tuple[int, TaskInstance]) -> dict[str, Any]:
        index, instance = pair
        return _search_record(instance, index, opts, config, build, sinks[index])

    try:
        if jobs == 1:
            records = [work(pair) for pair in enumerate(instances)]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(work, enumerate(instances)))
    finally:
        if transport is not None:
            transport.close()

    with open(opts["output"], "w") as fp:
        for record in records:
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")
    if want_trace:
        with open(opts["trace"], "w") as fp:
            tracer = JsonlTracer(fp)
            for sink in sinks:
                for event in sink or ():
                    tracer(event)

    failures = [
        record["id"]
        for record in records
        if record["failure"] or record["neg_failure"]
    ]
    print(
        f"searched {len(records)} instances, {len(failures)} with failures"
        + (f": {', '.join(failures[:10])}" if failures else ""),
        file=sys.stderr,
    )
    return 0


def _record_scores(instance_id: str, record: dict[str, Any]) -> tuple[float, float]:
    try:
        return float(record["proof_score"]), float(record["neg_proof_score"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"prediction for {instance_id} is missing scores: {exc}") from exc


def _predicted_tree(instance: TaskInstance, record: dict[str, Any], side: str):
    key = "proof" if side == "h" else "neg_proof"
    text = record.get(key)
    if not text:
        return None
    hypothesis = instance.hypothesis if side == "h" else negate(instance.hypothesis)
    from .tree import ProofTree

    return ProofTree.from_text(text, hypothesis, instance.context)


def cmd_eval(opts: dict[str, Any]) -> int:
    with open(opts["dataset"]) as fp:
        instances = read_dataset(fp)
    records: dict[str, dict] = {}
    with open(opts["predictions"]) as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{opts['predictions']}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "id" not in record:
                raise DataError(f"{opts['predictions']}:{line_no}: not a prediction record")
            records[record["id"]] = record

    missing = [instance.id for instance in instances if instance.id not in records]
    for instance_id in missing:
        print(f"warning: no prediction for {instance_id}", file=sys.stderr)

    classifier = AnswerClassifier.reference()
    if opts["fit_classifier"]:
        pairs, answers = [], []
        for instance in instances:
            record = records.get(instance.id)
            if record is None:
                continue
            pairs.append(_record_scores(instance.id, record))
            answers.append(instance.answer)
        if pairs:
            classifier = AnswerClassifier.fit_least_squares(pairs, answers)

    def similarity_fn(a: str, b: str) -> float:
        return token_f1(a, b)

    outcomes = []
    score_pairs = []
    for instance in instances:
        record = records.get(instance.id)
        predicted_answer = None
        scores: ExampleScores | None = None
        if record is not None:
            score_h, score_neg = _record_scores(instance.id, record)
            predicted_answer = classifier.classify(score_h, score_neg)
            score_pairs.append((score_h, score_neg, instance.answer))
        if instance.answer is not Answer.UNKNOWN:
            gold_side = "h" if instance.answer is Answer.PROVED else "neg"
            gold = instance.gold_tree()
            predicted = _predicted_tree(instance, record, gold_side) if record else None
            if predicted is None:
                scores = ExampleScores.empty_prediction()
            else:
                scores = score_example(
                    predicted,
                    gold,
                    similarity=similarity_fn,
                    threshold=opts["similarity_threshold"],
                )
        outcomes.append(
            InstanceOutcome(instance.id, instance.depth, instance.answer, predicted_answer, scores)
        )

    breakdown = breakdown_by_depth(outcomes)
    report = build_report(outcomes, breakdown)
    outdir = Path(opts["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    write_report_json(outdir / "report.json", report)
    write_breakdown_csv(outdir / "breakdown.csv", breakdown)
    if not opts["no_figures"]:
        render_figures(outdir, report["metrics"], breakdown, score_pairs)

    if report["metrics"]:
        print(format_metrics_table(report["metrics"]), file=sys.stderr)
    print(format_breakdown_table(breakdown), file=sys.stderr)
    print(f"report written to {outdir}", file=sys.stderr)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "gen-negatives": cmd_gen_negatives,
    "search": cmd_search,
    "eval": cmd_eval,
}


def main(argv: Sequence[str] | None = None, environ: dict[str, str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    environ = dict(environ if environ is not None else os.environ)
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    command = getattr(namespace, "command", None)
    if command is None:
        parser.print_usage(sys.stderr)
        return 1
    provided = {k: v for k, v in vars(namespace).items() if k != "command"}
    try:
        opts = _merge_settings(command, provided, environ)
        return COMMANDS[command](opts)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 3
    except (ProofSearchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
