import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from core.errors import DataError


METRIC_RANGES = {"cider": (0.0, 1000.0)}
PERCENT_RANGE = (0.0, 100.0)


@dataclass
class RunReport:
    """
    Outcome of one training run.

    Attributes:
        config (dict): Resolved TrainConfig as a plain dict.
        config_hash (str): SHA-256 of the canonical config JSON.
        seed (int): Run seed.
        losses (dict[str, list[float]]): Per-epoch curves keyed by phase.
        tables (dict[str, dict[str, float]]): Metric table per evaluated split.
        wall_clock (float): Seconds spent; kept out of the JSON so reruns compare equal.
    """

    config: dict
    config_hash: str
    seed: int
    losses: dict[str, list[float]] = field(default_factory=dict)
    tables: dict[str, dict[str, float]] = field(default_factory=dict)
    wall_clock: float = 0.0

    def __post_init__(self):
        for split, table in self.tables.items():
            for metric, value in table.items():
                low, high = METRIC_RANGES.get(metric, PERCENT_RANGE)
                if not low <= value <= high:
                    raise ValueError(f"{split} {metric} = {value} outside [{low}, {high}]")

    def to_json(self) -> str:
        data = asdict(self)
        del data["wall_clock"]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def csv_rows(self) -> list[list]:
        metrics = sorted({m for table in self.tables.values() for m in table})
        rows = [["split", *metrics]]
        for split in sorted(self.tables):
            rows.append([split, *[_fmt(self.tables[split].get(m)) for m in metrics]])
        return rows

    def to_csv(self) -> str:
        return "".join(",".join(str(cell) for cell in row) + "\n" for row in self.csv_rows())

    def save(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "report.csv").write_text(self.to_csv(), encoding="utf-8")
        (out / "timing.json").write_text(json.dumps({"wall_clock": self.wall_clock}) + "\n", encoding="utf-8")
        return out / "report.json"


def _fmt(value) -> str:
    return "" if value is None else f"{value:.2f}"


def load_report(path: str | Path) -> RunReport:
    """
    Reads report.json (or a directory containing it).

    Raises:
        DataError: If the file is not a run report.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return RunReport(
            config=data["config"],
            config_hash=data["config_hash"],
            seed=int(data["seed"]),
            losses=data.get("losses", {}),
            tables=data.get("tables", {}),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataError(f"'{path}' is not a run report: {e}")


def compare_reports(baseline: RunReport, candidate: RunReport) -> list[tuple[str, str, float, float, float]]:
    """(split, metric, baseline, candidate, delta) for every metric both reports share."""
    rows = []
    for split in sorted(set(baseline.tables) & set(candidate.tables)):
        a, b = baseline.tables[split], candidate.tables[split]
        for metric in sorted(set(a) & set(b)):
            rows.append((split, metric, a[metric], b[metric], round(b[metric] - a[metric], 2)))
    return rows
