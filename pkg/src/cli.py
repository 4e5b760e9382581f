import argparse
import sys

from src.common.common import ConfigError, ParseError, SchemaVersionError, ValidationError, load_settings
from src.Workflow import AttackWorkflow, ReportWorkflow, TrainWorkflow, ValidateWorkflow

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

# Errors caused by the user's input files rather than by the run itself
CONFIG_ERRORS = (ConfigError, ParseError, ValidationError, SchemaVersionError)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters overriding default-parameters.json")
    common.add_argument("--seed", type=int, help="base seed (overrides base-seed)")
    common.add_argument("--workers", type=int, help="number of worker processes (overrides workers)")
    common.add_argument("--out", default=load_settings()["workspace"], help="workspace directory for outputs")
    common.add_argument("-q", "--quiet", action="store_true", help="only write log files")

    parser = argparse.ArgumentParser(
        prog="rmtamper",
        description="Train reward machine agents, attack their labeling functions and report the impact.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("train", parents=[common], help="train agents")
    commands.add_parser("attack", parents=[common], help="evaluate trained agents under attacks")
    report = commands.add_parser("report", parents=[common], help="merge metric tables")
    report.add_argument("paths", nargs="+", help="metric tables written by attack runs")
    commands.add_parser("validate", parents=[common], help="check maps, reward machines, attacks and agent files")
    return parser


def make_workflow(args: argparse.Namespace):
    echo = not args.quiet
    if args.command == "train":
        return TrainWorkflow(args.out, echo)
    if args.command == "attack":
        return AttackWorkflow(args.out, echo)
    if args.command == "report":
        return ReportWorkflow(args.out, args.paths, echo)
    return ValidateWorkflow(args.out, echo)


def main(argv: list[str] | None = None) -> int:
    """
    Run one subcommand.

    Returns:
        int: 0 on success, 1 for invalid configurations or input files, 2 for
        any other error.
    """
    args = build_parser().parse_args(argv)
    try:
        workflow = make_workflow(args)
        workflow.configure(args.config, {"base-seed": args.seed, "workers": args.workers})
        workflow.start_workflow()
    except CONFIG_ERRORS as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK
