"""Command-line entry point.

Subcommands: ingest, synth, simulate, analyze, report. Exit status is 0 on
success, 1 on usage or validation errors, 2 on provider or system errors.
Every run that writes outputs also writes a run manifest beside them.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import platform
import sys
from pathlib import Path

import numpy
import scipy

from . import __version__
from .agents.providers import ProviderConfig, ProviderError
from .agents.simulate import run_agent_cohort, write_traces
from .analytics import AnalyticsError, compute_tables
from .cohort_io import CohortValidationError, ingest_with_diagnostics, read_task_key, write_cohort
from .config import ConfigError, config_digest, file_digest, load_config
from .models import Cohort, Treatment, default_task_key
from .protocol import SessionError, replay_cohort
from .report import emit_report
from .synthlab import SynthConfig, generate_cohort

log = logging.getLogger("lostatsea")

EXIT_OK, EXIT_INVALID, EXIT_SYSTEM = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _load_cohort(path: str, key, drop_invalid: bool = False) -> Cohort:
    with open(path, "rb") as fh:
        cohort, issues = ingest_with_diagnostics(fh, key=key)
    if issues:
        if not drop_invalid:
            raise CohortValidationError(issues)
        for issue in issues:
            log.warning("dropped: %s", issue)
    return cohort


def _complete(cohort: Cohort, seed: int, key) -> Cohort:
    if all(g.is_complete for g in cohort.groups):
        return cohort
    return replay_cohort(cohort, seed, key)


def _key(args, config):
    if getattr(args, "key", None):
        return read_task_key(args.key)
    return default_task_key(config["max_items"])


def _provider_config(config: dict) -> ProviderConfig:
    return ProviderConfig(
        provider=config["provider"],
        model=config["model"],
        endpoint=config["endpoint"],
        temperature=config["temperature"],
        max_tokens=config["max_tokens"],
        timeout=config["timeout"],
        parallelism=config["parallelism"],
        max_attempts=config["max_attempts"],
        backoff=config["backoff"],
        api_key_env=config["api_key_env"],
        reask_limit=config["reask_limit"],
    )


def _write_manifest(path: Path, argv, args, config, inputs, cohorts: dict, started: str, extra=None) -> None:
    digests = {p: file_digest(p) for p in inputs}
    manifest = {
        "command": ["lostatsea", *argv],
        "subcommand": args.command,
        "config": config,
        "config_digest": config_digest(config, digests),
        "inputs": digests,
        "seeds": [config["seed"]],
        "cohort_ids": {name: list(c.group_ids) for name, c in cohorts.items()},
        "provider_models": sorted(
            {str(c.metadata["provider_model"]) for c in cohorts.values() if "provider_model" in c.metadata}
        ),
        "versions": {
            "lostatsea": __version__,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "started": started,
        "finished": _now(),
    }
    manifest.update(extra or {})
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_path(out: str) -> Path:
    p = Path(out)
    return p / "run_manifest.json" if p.is_dir() else p.with_name(p.name + ".manifest.json")


# --- subcommands -------------------------------------------------------------------


def cmd_ingest(args, config, argv, started) -> int:
    key = _key(args, config)
    with open(args.inp, "rb") as fh:
        cohort, issues = ingest_with_diagnostics(fh, key=key if args.key else None)
    for issue in issues:
        print(f"invalid: {issue}", file=sys.stderr)
    if issues and not args.drop_invalid:
        return EXIT_INVALID
    if args.replay:
        cohort = replay_cohort(cohort, config["seed"], key)
    print(f"{len(cohort)} valid group(s), {len({i.group_id for i in issues})} rejected")
    if args.out:
        write_cohort(cohort, args.out)
        _write_manifest(_manifest_path(args.out), argv, args, config, [args.inp], {"cohort": cohort}, started)
    return EXIT_OK


def cmd_synth(args, config, argv, started) -> int:
    cfg = SynthConfig(
        n_groups=args.n_groups,
        max_items=config["max_items"],
        nomination_base=args.nomination_base,
        male_nomination_shift=args.male_nomination_shift,
        score_gender_shift=args.score_gender_shift,
        noise_spread=args.noise_spread,
        seed=config["seed"],
        treatment=Treatment(args.treatment),
    )
    cohort = generate_cohort(cfg, _key(args, config))
    write_cohort(cohort, args.out)
    _write_manifest(_manifest_path(args.out), argv, args, config, [], {"synthetic": cohort}, started)
    print(f"wrote {len(cohort)} synthetic group(s) to {args.out}")
    return EXIT_OK


def cmd_simulate(args, config, argv, started) -> int:
    key = _key(args, config)
    human = _load_cohort(args.cohort, key if args.key else None)
    result = run_agent_cohort(
        human,
        Treatment(args.treatment),
        _provider_config(config),
        config["seed"],
        key=key,
        force_synthetic=args.force_synthetic,
    )
    write_cohort(result.cohort, args.out)
    if args.trace:
        write_traces(result.stage_events(), args.trace)
    for f in result.failures:
        print(f"excluded group {f.group_id}: {f.message}", file=sys.stderr)
    _write_manifest(
        _manifest_path(args.out), argv, args, config, [args.cohort],
        {"human": human, "simulated": result.cohort}, started,
        {"treatment": args.treatment, "excluded_groups": [f.group_id for f in result.failures]},
    )
    print(f"simulated {len(result.cohort)} group(s), {len(result.failures)} excluded")
    return EXIT_SYSTEM if result.failures else EXIT_OK


def cmd_analyze(args, config, argv, started) -> int:
    key = _key(args, config)
    human = _complete(_load_cohort(args.human, key if args.key else None), config["seed"], key)
    sims = [_complete(_load_cohort(p, key if args.key else None), config["seed"], key) for p in args.sim]
    tables = compute_tables(human, sims, config["alignment_baseline"])
    cohorts = {"human": human, **{f"sim{i}": s for i, s in enumerate(sims)}}
    report_manifest = {
        "cohorts": {
            name: {"population": c.population.value, "groups": len(c), "group_ids": list(c.group_ids),
                   "provider_model": c.metadata.get("provider_model"), "seed": c.metadata.get("seed")}
            for name, c in cohorts.items()
        },
        "inputs": {p: file_digest(p) for p in [args.human, *args.sim]},
        "seed": config["seed"],
        "alignment_baseline": config["alignment_baseline"],
    }
    out = Path(args.out)
    emit_report(tables, out, report_manifest, args.format)
    _write_manifest(out / "run_manifest.json", argv, args, config, [args.human, *args.sim], cohorts, started)
    print(f"report written to {out}")
    return EXIT_OK


def _markdown_table(path: Path) -> str:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return ""
    lines = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * len(rows[0])]
    lines += ["| " + " | ".join(r) + " |" for r in rows[1:]]
    return "\n".join(lines)


def cmd_report(args, config, argv, started) -> int:
    src = Path(args.inp)
    csvs = sorted(src.glob("*.csv"))
    if not csvs:
        print(f"no CSV tables found in {src}", file=sys.stderr)
        return EXIT_INVALID
    text = "\n\n".join(f"## {p.stem}\n\n{_markdown_table(p)}" for p in csvs) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _write_manifest(_manifest_path(args.out), argv, args, config, [str(p) for p in csvs], {}, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lostatsea", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="YAML file of key: value settings")
        p.add_argument("--seed", type=int)
        p.add_argument("--key", help="task key JSON document")
        p.add_argument("--max-items", dest="max_items", type=int)

    p = sub.add_parser("ingest", help="validate a cohort file")
    common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--validate", action="store_true", help="validate only (the default when --out is absent)")
    p.add_argument("--drop-invalid", action="store_true", help="exclude invalid groups instead of failing")
    p.add_argument("--replay", action="store_true", help="re-derive elections and gaps from stored responses")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    common(p)
    p.add_argument("--n-groups", type=int, required=True)
    p.add_argument("--treatment", choices=["identified", "pseudonymous"], default="identified")
    p.add_argument("--nomination-base", type=float, default=5.5)
    p.add_argument("--male-nomination-shift", type=float, default=0.0)
    p.add_argument("--score-gender-shift", type=float, default=0.0)
    p.add_argument("--noise-spread", type=float, default=2.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run matched agent groups")
    common(p)
    p.add_argument("--cohort", required=True)
    p.add_argument("--treatment", required=True, choices=[t.value for t in Treatment])
    p.add_argument("--provider", choices=["stub", "openai"])
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--api-key-env", dest="api_key_env", help="NAME of the environment variable holding the key")
    p.add_argument("--temperature", type=float)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--max-attempts", dest="max_attempts", type=int)
    p.add_argument("--reask-limit", dest="reask_limit", type=int)
    p.add_argument("--force-synthetic", action="store_true")
    p.add_argument("--trace", help="write per-stage agent events as JSON Lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="compute report tables")
    common(p)
    p.add_argument("--human", required=True)
    p.add_argument("--sim", action="append", default=[])
    p.add_argument("--alignment-baseline", dest="alignment_baseline", type=float)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render report CSVs as markdown")
    common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


_CONFIG_FLAGS = (
    "seed", "max_items", "provider", "model", "endpoint", "api_key_env", "temperature",
    "parallelism", "max_attempts", "reask_limit", "alignment_baseline",
)


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = _now()
    try:
        flags = {k: getattr(args, k) for k in _CONFIG_FLAGS if hasattr(args, k)}
        config = load_config(args.config, flags=flags)
        return args.func(args, config, argv, started)
    except (ConfigError, CohortValidationError, AnalyticsError, SessionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ProviderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYSTEM


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
