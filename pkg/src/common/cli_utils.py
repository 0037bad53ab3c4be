"""Console helpers shared by the qcurv commands."""

from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)


def format_duration(seconds: float) -> str:
    """
    Human readable duration.

    Args:
        seconds: Duration in seconds

    Returns:
        "850ms", "12.4s", "2m 30s" or "1h 15m"
    """
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        return f"{int(seconds // 60)}m {int(seconds % 60)}s"
    return f"{int(seconds // 3600)}h {int((seconds % 3600) // 60)}m"


def create_progress_bar(console, refresh_per_second: int = 10) -> Progress:
    """
    Suite progress bar: spinner, description, bar, completed/total entries, elapsed time.

    Args:
        console: Rich Console the bar renders on
        refresh_per_second: Refresh rate (default: 10)
    """
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        refresh_per_second=refresh_per_second,
        transient=True,
    )
