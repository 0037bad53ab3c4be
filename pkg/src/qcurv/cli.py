"""CLI for the qcurv lab: analyze a metric spec, run the verification suite, dump tables."""

import argparse
import sys
import time
from pathlib import Path

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from src.common.cli_utils import create_progress_bar, format_duration
from src.common.logging import get_logger, set_level
from src.qcurv.errors import (
    EXIT_CHECK_FAILURES,
    EXIT_INVALID_INPUT,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    InvalidSpec,
    QCurvError,
)
from src.qcurv.pipeline import TABLE_QUANTITIES, cmd_analyze, cmd_table, cmd_verify, write_table
from src.qcurv.specfile import load_spec, load_suite
from src.qcurv.verify import CheckResult, default_suite

_logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcurv", description="Q-curvature and volume entropy lab")
    parser.add_argument("--log-level", default=None, help="Log level override (e.g. INFO, DEBUG)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser("analyze", help="Run the full pipeline on a metric spec")
    analyze.add_argument("--spec", required=True, help="Metric spec file")
    analyze.add_argument("--out", help="Output file (default: stdout)")
    analyze.add_argument(
        "--format",
        choices=("report", "table"),
        default="report",
        help="Structured report or the tabular profile dump (default: report)",
    )

    verify = subparsers.add_parser("verify", help="Run the verification suite")
    verify.add_argument("--spec", help="Suite config file (default: built-in matrix)")
    verify.add_argument("--out", help="Output file (default: stdout)")
    verify.add_argument("--jobs", "-j", type=int, help="Worker processes; 1 runs in-process")
    verify.add_argument("--check", action="append", help="Restrict to a check name (repeatable)")
    verify.add_argument("--dimension", "-n", type=int, action="append", help="Restrict to a dimension (repeatable)")

    table = subparsers.add_parser("table", help="Tabulate one quantity on the spec's grid")
    table.add_argument("--spec", required=True, help="Metric spec file")
    table.add_argument("--quantity", "-q", choices=TABLE_QUANTITIES, required=True, help="Quantity to tabulate")
    table.add_argument("--out", help="Output file (default: stdout)")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")


def _print_checks(results: list[CheckResult], console: Console, title: str) -> None:
    table = Table(title=title)
    table.add_column("Check", style="cyan")
    table.add_column("Subject")
    table.add_column("Status")
    table.add_column("Measured", justify="right")
    table.add_column("Predicted", justify="right")

    styles = {"pass": "[green]pass[/green]", "fail": "[red]fail[/red]", "skipped": "[yellow]skipped[/yellow]"}
    for r in results:
        measured = "-" if r.measured is None else f"{r.measured:.6g}"
        if r.predicate:
            predicted = r.predicate
        else:
            predicted = "-" if r.predicted is None else f"{r.predicted:.6g}"
        table.add_row(r.check_id, r.subject, styles[r.status], measured, predicted)
    console.print(table)


def _run_analyze(args: argparse.Namespace, console: Console) -> int:
    spec = load_spec(args.spec)
    start = time.perf_counter()
    with console.status(f"Analyzing {spec.family} (n={spec.n})..."):
        result = cmd_analyze(spec)

    if args.format == "table":
        if args.out is None:
            write_table(result.table, sys.stdout)
        else:
            write_table(result.table, args.out)
    else:
        _emit(result.report.render(), args.out)

    _print_checks(result.checks, console, f"Checks: {spec.family}, n={spec.n}")
    for warning in result.analysis.warnings:
        console.print(f"[yellow]warning:[/yellow] {escape(warning)}")
    console.print(f"[dim]Done in {format_duration(time.perf_counter() - start)}[/dim]")
    if any(r.status == "fail" for r in result.checks):
        return EXIT_CHECK_FAILURES
    return EXIT_OK


def _run_verify(args: argparse.Namespace, console: Console) -> int:
    config = default_suite() if args.spec is None else load_suite(args.spec)
    if args.jobs is not None:
        if args.jobs < 1:
            raise InvalidSpec(f"--jobs must be a positive integer, got {args.jobs}")
        config.max_workers = args.jobs
    if args.check or args.dimension:
        config = config.restricted(
            None if not args.dimension else set(args.dimension),
            None if not args.check else set(args.check),
        )

    console.print(f"\n[bold]Running verification suite[/bold] ({len(config.entries)} entries)")
    with create_progress_bar(console) as progress:
        task = progress.add_task("Checking...", total=len(config.entries))

        def update_progress(current: int, total: int):
            progress.update(task, total=total, completed=current)

        report, suite = cmd_verify(config, progress_callback=update_progress)

    _emit(report.render(), args.out)

    failures = [r for r in suite.results if r.status == "fail"]
    if failures:
        _print_checks(failures, console, "Failed checks")
    console.print(
        f"[green]{suite.passed} passed[/green], [red]{suite.failed} failed[/red], "
        f"[yellow]{suite.skipped} skipped[/yellow] in {format_duration(suite.duration)}"
    )
    if suite.numerical_failures:
        return EXIT_NUMERICAL_FAILURE
    return EXIT_OK if suite.ok else EXIT_CHECK_FAILURES


def _run_table(args: argparse.Namespace, console: Console) -> int:
    spec = load_spec(args.spec)
    with console.status(f"Tabulating {args.quantity}..."):
        frame = cmd_table(spec, args.quantity)
    if args.out is None:
        write_table(frame, sys.stdout)
    else:
        write_table(frame, args.out)
        console.print(f"[green]Wrote {len(frame)} rows to {args.out}[/green]")
    return EXIT_OK


_COMMANDS = {"analyze": _run_analyze, "verify": _run_verify, "table": _run_table}


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID_INPUT

    if args.log_level:
        try:
            set_level(args.log_level)
        except ValueError as e:
            parser.print_usage(sys.stderr)
            sys.stderr.write(f"qcurv: error: {e}\n")
            return EXIT_INVALID_INPUT

    # Reports own stdout; status goes to stderr
    console = Console(stderr=True)
    try:
        return _COMMANDS[args.command](args, console)
    except InvalidSpec as e:
        console.print("[red]Invalid input:[/red]")
        for violation in e.violations:
            console.print(f"  - {escape(violation)}")
        return e.exit_code
    except QCurvError as e:
        _logger.debug("Command %s failed", args.command, exc_info=True)
        console.print(f"[red]{type(e).__name__}:[/red] {escape(str(e))}")
        return e.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
