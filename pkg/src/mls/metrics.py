"""Release-metrics bookkeeping: per-release quality figures, the text
report, trend checking, and figure rendering.

The four shipped fixture rows store the published fault rates directly;
their underlying raw fault counts were never recorded and cannot be
back-derived (rate x KLOC is non-integer), so synthetic rows carry a
fault count and compute the rate while fixture rows carry the rate
alone.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

REPORT_COLUMNS = ("Size", "Time", "Fault/KLOC", "FTR", "Acceptance", "Change")


class MetricsError(Exception):
    pass


class ZeroLoc(MetricsError):
    pass


class TooFewRecords(MetricsError):
    pass


@dataclasses.dataclass(frozen=True)
class ReleaseRecord:
    index: int  # 1-based release number
    size_loc: int
    duration_months: int
    fault_rate_per_kloc: float
    ftr_frequency_pct: float
    acceptance_pct: float
    change_ratio_pct: float
    faults: int | None = None

    def __post_init__(self):
        if self.size_loc <= 0:
            raise ValueError("size_loc must be positive")
        if self.fault_rate_per_kloc < 0:
            raise ValueError("fault rate must be non-negative")


def fault_rate(faults: int, loc: int) -> float:
    """Faults per thousand lines of code."""
    if loc <= 0:
        raise ZeroLoc(loc)
    if faults < 0:
        raise ValueError("faults must be non-negative")
    return faults * 1000.0 / loc


def make_record(
    index: int, size_loc: int, duration_months: int, faults: int,
    ftr_frequency_pct: float, acceptance_pct: float, change_ratio_pct: float,
) -> ReleaseRecord:
    return ReleaseRecord(
        index=index, size_loc=size_loc, duration_months=duration_months,
        fault_rate_per_kloc=fault_rate(faults, size_loc),
        ftr_frequency_pct=ftr_frequency_pct,
        acceptance_pct=acceptance_pct,
        change_ratio_pct=change_ratio_pct,
        faults=faults,
    )


def _pct(value: float) -> str:
    return f"{value:g}%"


def render_report(records: list[ReleaseRecord]) -> str:
    """Two-space-separated table, one row per release in input order."""
    lines = ["  ".join(REPORT_COLUMNS)]
    for rec in records:
        lines.append("  ".join([
            str(rec.size_loc),
            str(rec.duration_months),
            f"{rec.fault_rate_per_kloc:.2f}",
            _pct(rec.ftr_frequency_pct),
            _pct(rec.acceptance_pct),
            _pct(rec.change_ratio_pct),
        ]))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[ReleaseRecord]:
    """Inverse of render_report (fault counts are not recoverable)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].split("  ") != list(REPORT_COLUMNS):
        raise MetricsError("missing or malformed report header")
    records = []
    for index, line in enumerate(lines[1:], start=1):
        cells = line.split("  ")
        if len(cells) != 6 or not all(c.endswith("%") for c in cells[3:]):
            raise MetricsError(f"malformed row: {line!r}")
        records.append(ReleaseRecord(
            index=index,
            size_loc=int(cells[0]),
            duration_months=int(cells[1]),
            fault_rate_per_kloc=float(cells[2]),
            ftr_frequency_pct=float(cells[3][:-1]),
            acceptance_pct=float(cells[4][:-1]),
            change_ratio_pct=float(cells[5][:-1]),
        ))
    return records


def trend_check(records: list[ReleaseRecord]) -> tuple[bool, list[str]]:
    """Release-over-release improvement: fault rate strictly decreasing,
    acceptance non-decreasing, change ratio non-increasing.  Returns
    (passed, violations)."""
    if len(records) < 2:
        raise TooFewRecords(len(records))
    violations = []
    for prev, cur in zip(records, records[1:]):
        pair = f"release {prev.index}->{cur.index}"
        if not cur.fault_rate_per_kloc < prev.fault_rate_per_kloc:
            violations.append(f"{pair}: fault rate not decreasing")
        if not cur.acceptance_pct >= prev.acceptance_pct:
            violations.append(f"{pair}: acceptance decreased")
        if not cur.change_ratio_pct <= prev.change_ratio_pct:
            violations.append(f"{pair}: change ratio increased")
    return (not violations, violations)


# --- persistence and export --------------------------------------------------


def record_to_dict(rec: ReleaseRecord) -> dict:
    return {
        "index": rec.index,
        "size_loc": rec.size_loc,
        "duration_months": rec.duration_months,
        "fault_rate_per_kloc": rec.fault_rate_per_kloc,
        "ftr_frequency_pct": rec.ftr_frequency_pct,
        "acceptance_pct": rec.acceptance_pct,
        "change_ratio_pct": rec.change_ratio_pct,
        "faults": rec.faults,
    }


def record_from_dict(obj: dict) -> ReleaseRecord:
    return ReleaseRecord(
        index=obj["index"],
        size_loc=obj["size_loc"],
        duration_months=obj["duration_months"],
        fault_rate_per_kloc=obj["fault_rate_per_kloc"],
        ftr_frequency_pct=obj["ftr_frequency_pct"],
        acceptance_pct=obj["acceptance_pct"],
        change_ratio_pct=obj["change_ratio_pct"],
        faults=obj.get("faults"),
    )


def load_releases(path: str | Path) -> list[ReleaseRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return sorted(records, key=lambda r: r.index)


def write_tsv(records: list[ReleaseRecord], path: str | Path) -> None:
    header = ("release", "size_loc", "duration_months", "fault_rate_per_kloc",
              "ftr_frequency_pct", "acceptance_pct", "change_ratio_pct")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\t".join(header) + "\n")
        for rec in records:
            fh.write("\t".join(str(v) for v in (
                rec.index, rec.size_loc, rec.duration_months,
                rec.fault_rate_per_kloc, rec.ftr_frequency_pct,
                rec.acceptance_pct, rec.change_ratio_pct,
            )) + "\n")


def render_figures(records: list[ReleaseRecord], out_dir: str | Path) -> list[Path]:
    """Trend charts as PNG files: fault rate per release, and acceptance
    vs. change ratio."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    releases = [rec.index for rec in records]
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(releases, [r.fault_rate_per_kloc for r in records], marker="o")
    ax.set_xlabel("Release")
    ax.set_ylabel("Faults / KLOC")
    ax.set_title("Fault rate by release")
    ax.set_xticks(releases)
    fig.tight_layout()
    path = out_dir / "fault_rate.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(releases, [r.acceptance_pct for r in records],
            marker="o", label="Acceptance %")
    ax.plot(releases, [r.change_ratio_pct for r in records],
            marker="s", label="Change ratio %")
    ax.set_xlabel("Release")
    ax.set_ylabel("Percent")
    ax.set_title("Acceptance and rework by release")
    ax.set_xticks(releases)
    ax.legend()
    fig.tight_layout()
    path = out_dir / "acceptance_change.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written
