"""Command-line interface.

Subcommands: ``compile`` (formula or template to DFA), ``monitor`` (one
rollout against one task spec), ``evaluate`` (a manifest of rollout/spec
pairs to a full report), ``generate`` (scripted scenarios or the bundled
corpus), ``validate`` (non-fatal rollout/spec cross-checks).

Exit codes: 0 on success, 1 on any error, and 2 for a clean monitor run that
found violations, so pipelines can gate on safety without parsing JSON. Logs
go to stderr; data goes to files, or to stdout only with ``--stdout``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

from . import __version__
from .automata import compile_formula, dfa_to_json, to_dot
from .errors import SafetraceError
from .formulas import parse
from .metrics import (
    aggregate,
    evaluate_rollout,
    export_plot_data,
    export_report_csv,
    export_report_json,
    monitor_report_document,
)
from .properties import TEMPLATE_IDS, instantiate, load_task_spec
from .rollouts import (
    SCENARIOS,
    ScenarioParams,
    build_corpus,
    generate_scenario,
    load_rollout,
    scenario_spec_document,
    serialize_rollout,
    validate_rollout,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2


def _log(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _read_text(path: str) -> str:
    return Path(path).read_text()


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safetrace",
        description="Compile, monitor, and score temporal safety properties over rollout traces.",
    )
    parser.add_argument("--version", action="version", version=f"safetrace {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="store_true", help="verbose logging to stderr (default: off)"
    )
    common.add_argument(
        "-q", "--quiet", action="store_true", help="suppress stderr logging (default: off)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compile = sub.add_parser(
        "compile", help="compile a formula or bound template into a DFA", parents=[common]
    )
    group = p_compile.add_mutually_exclusive_group(required=True)
    group.add_argument("--formula", help="formula in concrete syntax, e.g. 'G !collision'")
    group.add_argument(
        "--template", choices=list(TEMPLATE_IDS), help="property template to instantiate"
    )
    p_compile.add_argument(
        "--bind",
        action="append",
        default=[],
        metavar="SLOT=PROP",
        help="slot binding for --template; repeatable (default: none)",
    )
    p_compile.add_argument("--out", help="output file path (default: stdout summary only)")
    p_compile.add_argument(
        "--format",
        choices=["json", "dot"],
        default="json",
        help="output format (default: json)",
    )
    p_compile.add_argument(
        "--stdout", action="store_true", help="write the artifact to stdout (default: off)"
    )

    p_monitor = sub.add_parser(
        "monitor", help="monitor one rollout against one task spec", parents=[common]
    )
    p_monitor.add_argument("rollout", help="rollout JSON file")
    p_monitor.add_argument("task_spec", help="task spec JSON/YAML file")
    p_monitor.add_argument("--out", help="write the monitor report JSON here (default: none)")
    p_monitor.add_argument(
        "--stdout", action="store_true", help="write the report to stdout (default: off)"
    )
    _add_strictness_flags(p_monitor)

    p_evaluate = sub.add_parser(
        "evaluate", help="evaluate a manifest of rollout/spec pairs into a report", parents=[common]
    )
    p_evaluate.add_argument(
        "manifest",
        nargs="?",
        help="manifest JSON listing rollout/task_spec path pairs",
    )
    p_evaluate.add_argument(
        "--jsonl",
        help="alternative input: JSONL stream of rollout objects (requires --task-spec)",
    )
    p_evaluate.add_argument(
        "--task-spec", help="task spec applied to every --jsonl rollout (default: none)"
    )
    p_evaluate.add_argument("--out", required=True, help="output directory for the report")
    p_evaluate.add_argument(
        "--format",
        choices=["all", "json", "csv"],
        default="all",
        help="which report artifacts to write (default: all)",
    )
    p_evaluate.add_argument(
        "--workers",
        type=int,
        default=0,
        help="worker processes; 0 means sequential (default: 0)",
    )
    p_evaluate.add_argument(
        "--denominator",
        choices=["rollout", "task"],
        default="rollout",
        help="per-template/category denominators (default: rollout)",
    )
    _add_strictness_flags(p_evaluate)

    p_generate = sub.add_parser(
        "generate", help="generate a scripted scenario rollout or the bundled corpus", parents=[common]
    )
    p_generate.add_argument(
        "scenario",
        nargs="?",
        choices=sorted(SCENARIOS),
        help="scenario to generate (omit with --corpus)",
    )
    p_generate.add_argument("--length", type=int, default=None, help="trace length (default: scenario default)")
    p_generate.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    p_generate.add_argument(
        "--flip-rate",
        type=float,
        default=0.05,
        help="per-step flip probability for random_walk and noise (default: 0.05)",
    )
    p_generate.add_argument("--out", help="rollout output file (default: stdout)")
    p_generate.add_argument(
        "--spec-out", help="also write the matching task spec here (default: none)"
    )
    p_generate.add_argument(
        "--corpus",
        action="store_true",
        help="write the bundled 200-rollout corpus instead (default: off)",
    )
    p_generate.add_argument(
        "--out-dir", help="output directory for --corpus (default: none)"
    )

    p_validate = sub.add_parser(
        "validate", help="cross-check a rollout against a task spec (warnings only)", parents=[common]
    )
    p_validate.add_argument("rollout", help="rollout JSON file")
    p_validate.add_argument("task_spec", help="task spec JSON/YAML file")

    return parser


def _add_strictness_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--strict-end-of-trace",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="count unmet end-of-trace obligations as violations (default: on)",
    )


def _cmd_compile(args) -> int:
    if args.template is not None:
        bindings = {}
        for item in args.bind:
            slot, sep, prop = item.partition("=")
            if not sep or not slot or not prop:
                raise SafetraceError(f"--bind expects SLOT=PROP, got {item!r}")
            bindings[slot] = prop
        instance = instantiate(args.template, bindings)
        dfa = instance.dfa
    else:
        if args.bind:
            raise SafetraceError("--bind is only meaningful with --template")
        dfa = compile_formula(parse(args.formula))
    artifact = (
        json.dumps(dfa_to_json(dfa), sort_keys=True, indent=2) + "\n"
        if args.format == "json"
        else to_dot(dfa)
    )
    if args.out:
        _write_text(Path(args.out), artifact)
    if args.stdout:
        sys.stdout.write(artifact)
    permanence = {label.value: 0 for label in set(dfa.permanence)}
    for label in dfa.permanence:
        permanence[label.value] += 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(permanence.items()))
    _log(args, f"states: {dfa.num_states} ({summary}); props: {', '.join(dfa.props) or '-'}")
    return EXIT_OK


def _cmd_monitor(args) -> int:
    record = load_rollout(_read_text(args.rollout))
    spec = load_task_spec(_read_text(args.task_spec))
    evaluation = evaluate_rollout(record, spec, strict_end=args.strict_end_of_trace)
    document = monitor_report_document(evaluation)
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    if args.stdout:
        sys.stdout.write(text)
    violations = [i for i in document["instances"] if i["violated"]]
    for inst in violations:
        _log(
            args,
            f"violation: {inst['property_id']} ({inst['category']}) "
            f"kind={inst['violation_kind']} timestep={inst['violation_timestep']} "
            f"exposure={inst['exposure']:.4f}",
        )
    _log(
        args,
        f"rollout {record.rollout_id}: {len(violations)} of {len(document['instances'])} "
        f"instances violated",
    )
    return EXIT_VIOLATIONS if violations else EXIT_OK


@lru_cache(maxsize=None)
def _cached_spec(path: str):
    return load_task_spec(Path(path).read_text())


def _evaluate_pair(job: tuple[str, str, bool]):
    rollout_path, spec_path, strict_end = job
    try:
        record = load_rollout(Path(rollout_path).read_text())
        spec = _cached_spec(spec_path)
        return evaluate_rollout(record, spec, strict_end=strict_end)
    except SafetraceError as exc:
        raise SafetraceError(f"{rollout_path}: {exc}") from exc


def _cmd_evaluate(args) -> int:
    strict = args.strict_end_of_trace
    if args.jsonl:
        if args.manifest:
            raise SafetraceError("give either a manifest or --jsonl, not both")
        if not args.task_spec:
            raise SafetraceError("--jsonl requires --task-spec")
        spec = load_task_spec(_read_text(args.task_spec))
        evaluations = []
        with open(args.jsonl) as stream:
            for line_no, line in enumerate(stream, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = load_rollout(line)
                    evaluations.append(evaluate_rollout(record, spec, strict_end=strict))
                except SafetraceError as exc:
                    raise SafetraceError(f"line {line_no}: {exc}") from exc
    else:
        if not args.manifest:
            raise SafetraceError("a manifest path (or --jsonl) is required")
        manifest_path = Path(args.manifest)
        manifest = json.loads(manifest_path.read_text())
        pairs = manifest.get("pairs")
        if not isinstance(pairs, list) or not pairs:
            raise SafetraceError("manifest must contain a nonempty 'pairs' list")
        base = manifest_path.parent
        jobs = []
        for entry in pairs:
            try:
                jobs.append(
                    (str(base / entry["rollout"]), str(base / entry["task_spec"]), strict)
                )
            except (TypeError, KeyError) as exc:
                raise SafetraceError(f"bad manifest entry {entry!r}") from exc
        if args.workers and args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                evaluations = list(pool.map(_evaluate_pair, jobs, chunksize=16))
        else:
            evaluations = [_evaluate_pair(job) for job in jobs]

    report = aggregate(evaluations, denominator=args.denominator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format in ("all", "json"):
        _write_text(out / "report.json", export_report_json(report))
    if args.format in ("all", "csv"):
        for name, content in export_report_csv(report).items():
            _write_text(out / name, content)
        for name, content in export_plot_data(evaluations).items():
            _write_text(out / name, content)
    _log(
        args,
        f"evaluated {report.n_rollouts} rollouts: success "
        f"{float(report.task_success_rate):.4f}, violation "
        f"{float(report.overall_violation_rate):.4f} -> {out}",
    )
    return EXIT_OK


def _cmd_generate(args) -> int:
    if args.corpus:
        if not args.out_dir:
            raise SafetraceError("--corpus requires --out-dir")
        manifest = build_corpus(args.out_dir)
        _log(args, f"corpus written; manifest at {manifest}")
        return EXIT_OK
    if not args.scenario:
        raise SafetraceError("a scenario name (or --corpus) is required")
    info = SCENARIOS[args.scenario]
    length = args.length if args.length is not None else info.default_length
    record = generate_scenario(
        ScenarioParams(
            scenario_id=args.scenario,
            length=length,
            seed=args.seed,
            flip_rate=args.flip_rate,
        )
    )
    text = serialize_rollout(record)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.spec_out:
        _write_text(
            Path(args.spec_out),
            json.dumps(scenario_spec_document(args.scenario), sort_keys=True, indent=2) + "\n",
        )
    _log(args, f"generated {record.rollout_id} (length {length})")
    return EXIT_OK


def _cmd_validate(args) -> int:
    record = load_rollout(_read_text(args.rollout))
    spec = load_task_spec(_read_text(args.task_spec))
    diagnostics = validate_rollout(record, spec)
    for diagnostic in diagnostics:
        print(f"warning [{diagnostic.code}]: {diagnostic.message}", file=sys.stderr)
    _log(args, f"{len(diagnostics)} warning(s)")
    return EXIT_OK


_COMMANDS = {
    "compile": _cmd_compile,
    "monitor": _cmd_monitor,
    "evaluate": _cmd_evaluate,
    "generate": _cmd_generate,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SafetraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
