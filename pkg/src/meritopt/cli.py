"""Command-line front end: campaign setup, execution, resumption, reports."""

from __future__ import annotations

import argparse
import os
import sys

from .active_loop import CONFIG_FILE, Campaign, resume_campaign, run_campaign
from .config import CampaignConfig, read_file, to_text, with_overrides
from .errors import ConfigError, MeritoptError
from .reporting import REPORT_DIR, write_amse, write_reports

_DEFAULT_CONFIG = "meritopt.config"
_DEFAULT_OUTPUT = "campaign"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meritopt",
        description="Surrogate-assisted design optimization campaigns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(cmd, config=False, seed=False, output=False, mode=False,
                   evaluator=False, trials=False):
        if config:
            cmd.add_argument("--config", help="path to a key = value config file")
        if seed:
            cmd.add_argument("--seed", type=int, help="campaign root seed")
        if output:
            cmd.add_argument(
                "--output-dir", default=_DEFAULT_OUTPUT,
                help=f"campaign directory (default: {_DEFAULT_OUTPUT})",
            )
        if mode:
            cmd.add_argument("--mode", choices=("mlga", "automlga"),
                             help="skip tuning (mlga) or tune first (automlga)")
        if evaluator:
            cmd.add_argument(
                "--evaluator", choices=("virtual", "external"),
                help="virtual engine, or the external command from the config",
            )
        if trials:
            cmd.add_argument(
                "--trials", type=int, default=0,
                help="run/inspect N campaigns in trial-NNN subdirectories",
            )

    init = sub.add_parser("init", help="write a default config file")
    add_common(init, config=True, seed=True, mode=True)

    run = sub.add_parser("run", help="run a campaign to completion")
    add_common(run, config=True, seed=True, output=True, mode=True,
               evaluator=True, trials=True)

    resume = sub.add_parser("resume", help="continue a halted campaign")
    add_common(resume, output=True, trials=True)

    tune = sub.add_parser("tune", help="initial sample and tuning only")
    add_common(tune, config=True, seed=True, output=True, mode=True, evaluator=True)

    report = sub.add_parser("report", help="regenerate reports from a campaign")
    add_common(report, output=True, trials=True)
    return parser


def _resolve_config(args) -> CampaignConfig:
    config = read_file(args.config) if args.config else CampaignConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    evaluator = getattr(args, "evaluator", None)
    if evaluator == "virtual":
        overrides["evaluator_command"] = ""
    elif evaluator == "external" and not config.evaluator_command:
        raise ConfigError(
            "--evaluator external requires evaluator.command in the config"
        )
    return with_overrides(config, **overrides) if overrides else config


def _progress(state):
    eps = f" epsilon {state.epsilon_history[-1]:.3e}" if state.epsilon_history else ""
    print(
        f"iteration {state.iteration}: {state.dataset_size} samples, "
        f"best merit {state.best_merit:.6f}{eps}, streak {state.convergence_streak}",
        flush=True,
    )


def _trial_dirs(base: str, trials: int) -> list[str]:
    return [os.path.join(base, f"trial-{i:03d}") for i in range(trials)]


def _cmd_init(args) -> int:
    path = args.config or _DEFAULT_CONFIG
    if os.path.exists(path):
        raise ConfigError(f"{path} already exists; delete it first or pick another path")
    config = _resolve_config(argparse.Namespace(config=None, seed=args.seed,
                                                mode=args.mode, evaluator=None))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(config))
    print(f"wrote {path}")
    return 0


def _finish(directory: str, state) -> None:
    write_reports(directory)
    verdict = "converged" if state.converged else "stopped"
    print(
        f"{directory}: {verdict} after iteration {state.iteration}, "
        f"best merit {state.best_merit:.6f}; reports in {os.path.join(directory, REPORT_DIR)}"
    )


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    if args.trials:
        dirs = _trial_dirs(args.output_dir, args.trials)
        for i, d in enumerate(dirs):
            trial_config = with_overrides(config, seed=config.seed + i)
            state = run_campaign(d, trial_config, progress=_progress)
            _finish(d, state)
        write_amse(dirs, os.path.join(args.output_dir, REPORT_DIR, "amse.csv"))
        print(f"AMSE table in {os.path.join(args.output_dir, REPORT_DIR, 'amse.csv')}")
        return 0
    state = run_campaign(args.output_dir, config, progress=_progress)
    _finish(args.output_dir, state)
    return 0


def _cmd_resume(args) -> int:
    dirs = _trial_dirs(args.output_dir, args.trials) if args.trials else [args.output_dir]
    for d in dirs:
        state = resume_campaign(d, progress=_progress)
        _finish(d, state)
    if args.trials:
        write_amse(dirs, os.path.join(args.output_dir, REPORT_DIR, "amse.csv"))
    return 0


def _cmd_tune(args) -> int:
    config = _resolve_config(args)
    snapshot = os.path.join(args.output_dir, CONFIG_FILE)
    campaign = Campaign.open(args.output_dir) if os.path.exists(snapshot) else \
        Campaign.create(args.output_dir, config)
    campaign.run(max_new_iterations=0)
    print(f"tuned hyperparameters and diagnostics written in {args.output_dir}")
    return 0


def _cmd_report(args) -> int:
    dirs = _trial_dirs(args.output_dir, args.trials) if args.trials else [args.output_dir]
    for d in dirs:
        for path in write_reports(d):
            print(path)
    if args.trials:
        print(write_amse(dirs, os.path.join(args.output_dir, REPORT_DIR, "amse.csv")))
    return 0


_COMMANDS = {
    "init": _cmd_init,
    "run": _cmd_run,
    "resume": _cmd_resume,
    "tune": _cmd_tune,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MeritoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
