from tabulate import tabulate

from harness.config import TrainConfig
from harness.report import RunReport


def format_delta(delta: float) -> str:
    """
    Formats a metric difference with ANSI color codes for terminal display.

    Args:
        delta (float): Candidate minus baseline.

    Returns:
        str: Green for an improvement, red for a regression, plain for no change.
    """
    match delta:
        case d if d > 0:
            return f"\x1b[32m+{d:.2f}\x1b[0m"
        case d if d < 0:
            return f"\x1b[31m{d:.2f}\x1b[0m"
        case _:
            return "0.00"


def print_config(config: TrainConfig, extra: dict | None = None) -> None:
    """
    Prints the resolved configuration, its hash and seed.

    Args:
        config (TrainConfig): The resolved configuration.
        extra (dict | None, optional): Additional key/value pairs, e.g. data paths.
    """
    print_settings({**config.to_dict(), **(extra or {})}, config.seed)
    print(f"config hash: {config.hash()}")


def print_settings(settings: dict, seed: int) -> None:
    rows = [[key, value] for key, value in sorted(settings.items())]
    print(tabulate(rows, headers=["setting", "value"]))
    print(f"seed: {seed}")


def get_table_rows(tables: dict[str, dict[str, float]]) -> tuple[list[str], list[list]]:
    """
    Arranges per-split metric tables as rows for tabular display.

    Args:
        tables (dict[str, dict[str, float]]): Metric table per split.

    Returns:
        tuple[list[str], list[list]]: Header and one row per split, metrics in first-seen order.
    """
    metrics: list[str] = []
    for table in tables.values():
        metrics += [m for m in table if m not in metrics]
    rows = [[split] + [_cell(table.get(m)) for m in metrics] for split, table in tables.items()]
    return ["split"] + metrics, rows


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def print_metric_tables(tables: dict[str, dict[str, float]]) -> None:
    header, rows = get_table_rows(tables)
    print(tabulate(rows, headers=header))


def print_report(report: RunReport) -> None:
    """
    Prints the final losses and metric tables of a run.

    Args:
        report (RunReport): The run report.
    """
    losses = [[phase, len(curve), f"{curve[-1]:.5f}" if curve else ""] for phase, curve in report.losses.items()]
    print(tabulate(losses, headers=["curve", "epochs", "last"]))
    print()
    print_metric_tables(report.tables)


def print_comparison(rows: list[tuple[str, str, float, float, float]], baseline: str, candidate: str) -> None:
    """
    Prints per-metric deltas between two run reports.

    Args:
        rows (list[tuple]): (split, metric, baseline, candidate, delta) rows.
        baseline (str): Label of the baseline report.
        candidate (str): Label of the candidate report.
    """
    table = [[split, metric, f"{a:.2f}", f"{b:.2f}", format_delta(delta)] for split, metric, a, b, delta in rows]
    print(tabulate(table, headers=["split", "metric", baseline, candidate, "delta"]))
