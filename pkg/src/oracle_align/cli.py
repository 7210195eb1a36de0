"""Command line entry point: ``oracle-align <subcommand> CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .alignment import AlignmentFormatError, Role, parse_alignment
from .config import ConfigError, ExperimentConfig, config_overrides, load_config
from .ontology import OntologyParseError, load_ontology
from .oracle import OracleError
from .pipeline import RunOutcome, replay_specs, run_experiment, run_suite, run_sweep
from .prompts import PromptError, PromptTemplateId, SystemPromptId, render

log = logging.getLogger("oracle_align")

EXIT_OK, EXIT_TASK_FAILED, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("config", type=Path, help="experiment config (YAML)")
    p.add_argument("--task", action="append", help="restrict to this task (repeatable)")
    p.add_argument("--oracle", action="append", help="restrict to this named oracle configuration (repeatable)")
    p.add_argument("--template", choices=[t.value for t in PromptTemplateId])
    p.add_argument("--system-prompt", choices=[s.value for s in SystemPromptId])
    p.add_argument("--error-rate", type=float, help="simulated oracle error rate in [0, 1]")
    p.add_argument("--seed", type=int, help="simulated oracle seed")
    p.add_argument("--output-dir", type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oracle-align", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("validate", help="check a config and every file it names"))
    p = sub.add_parser("run", help="run one task (or the selected tasks) without statistics")
    _common(p)
    p.add_argument("--parallel-tasks", type=int, default=1)
    p = sub.add_parser("suite", help="run tasks and compare configurations with paired tests")
    _common(p)
    p.add_argument("--parallel-tasks", type=int, default=1)
    p = sub.add_parser("sweep", help="simulated oracles over an error-rate by seed grid")
    _common(p)
    p.add_argument("--rates", type=float, nargs="+", help="error rates (default from config)")
    p.add_argument("--seeds", type=int, nargs="+", help="seeds (default from config)")
    p.add_argument("--parallel-tasks", type=int, default=1)
    p = sub.add_parser("replay", help="re-evaluate from the verdict logs of an earlier run")
    _common(p)
    p.add_argument("--from", dest="recorded", type=Path, required=True, metavar="RUN_DIR",
                   help="output directory of the recorded run")
    p = sub.add_parser("render", help="print prompts for the ask set without calling any oracle")
    _common(p)
    p.add_argument("--limit", type=int, help="render at most this many mappings per task")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = config_overrides(args.template, args.system_prompt, args.error_rate, args.seed)
    config = load_config(args.config, overrides)
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    return config


def _report(outcome: RunOutcome) -> int:
    for r in outcome.results:
        m, b = r.merged, r.base
        print(f"{r.spec.task_name}\t{r.spec.oracle.identity}\tbase F={b.f_score:.3f}\tmerged F={m.f_score:.3f}")
    for f in outcome.failures:
        print(f"{f['task']}\t{f['oracle']}\tFAILED: {f['error']}", file=sys.stderr)
    if outcome.suite is not None:
        for e in outcome.suite["comparisons"]:
            w = e.get("wilcoxon") or {}
            extra = f"wilcoxon p_less={w['p_less']:.3f}" if w else e.get("note", "")
            print(f"{e['comparison']}\tn={e['n']}\t{extra}")
    return EXIT_TASK_FAILED if outcome.failures else EXIT_OK


def cmd_validate(args) -> int:
    config = _load(args)
    specs = config.specs(args.oracle, args.task)
    problems = []
    for spec in specs:
        try:
            spec.validate()
        except ConfigError as exc:
            problems.append(str(exc))
    checked = set()
    for spec in specs:
        for path, role in ((spec.base_alignment, Role.SYSTEM_OUTPUT), (spec.ask_alignment, Role.ASK_SET),
                           (spec.reference_alignment, Role.REFERENCE)):
            if path in checked or not Path(path).is_file():
                continue
            checked.add(path)
            try:
                parse_alignment(path, role=role)
            except AlignmentFormatError as exc:
                problems.append(str(exc))
    for problem in dict.fromkeys(problems):
        print(problem, file=sys.stderr)
    if problems:
        return EXIT_CONFIG
    print(f"ok: {len(config.tasks)} task(s), {len(config.oracles)} oracle configuration(s), "
          f"config hash {config.config_hash[:12]}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load(args)
    if not args.task and len(config.tasks) > 1:
        raise ConfigError(f"run takes one task; pass --task (known: {config.task_names()})")
    return _report(run_experiment(config, args.oracle, args.task, args.parallel_tasks))


def cmd_suite(args) -> int:
    config = _load(args)
    outcome = run_suite(config.specs(args.oracle, args.task), config.comparisons, config.output_dir,
                        args.parallel_tasks, config.config_hash)
    return _report(outcome)


def cmd_sweep(args) -> int:
    config = _load(args)
    first = next(iter(config.oracles.values()))
    base = first if first.kind == "simulated" else None
    oracles = config.sweep_oracles(args.rates, args.seeds, base)
    specs = config.specs(list(config.oracles)[:1], args.task)
    outcome = run_sweep(specs, oracles, config.output_dir, args.parallel_tasks, config.config_hash)
    return _report(outcome)


def cmd_replay(args) -> int:
    config = _load(args)
    out = args.output_dir or (args.recorded / "replay")
    specs = replay_specs(config.specs(args.oracle, args.task), args.recorded, out)
    outcome = run_suite(specs, config.comparisons, out, config_hash=config.config_hash)
    return _report(outcome)


def cmd_render(args) -> int:
    config = _load(args)
    cache = {}

    def onto(path, lexical):
        if path not in cache:
            cache[path] = load_ontology(path, lexical)
        return cache[path]

    seen = set()
    for spec in config.specs(args.oracle, args.task):
        if spec.task_name in seen:
            continue
        seen.add(spec.task_name)
        if spec.source_onto is None or spec.target_onto is None:
            raise ConfigError(f"task {spec.task_name!r}: rendering needs source_onto and target_onto")
        ask = parse_alignment(spec.ask_alignment, role=Role.ASK_SET)
        if not spec.include_subsumption:
            ask = ask.equivalences()
        source, target = onto(spec.source_onto, spec.lexical), onto(spec.target_onto, spec.lexical)
        for m in ask.sorted()[: args.limit]:
            p = render(spec.template, m, source, target, spec.system_prompt, spec.system_texts)
            print(f"### {spec.task_name}\t{m.source}\t{m.target}\t{m.relation.symbol}\t{spec.template.value}")
            if p.system_text:
                print(f"[system]\n{p.system_text}\n[user]")
            print(p.user_text)
            print()
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "suite": cmd_suite,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
    "render": cmd_render,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, AlignmentFormatError, OntologyParseError, PromptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_TASK_FAILED


if __name__ == "__main__":
    sys.exit(main())
