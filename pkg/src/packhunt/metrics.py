"""Per-episode reward bookkeeping and the CSV schema shared by training,
evaluation, and plotting.

Schema: ``episode,agent_0..agent_{N-1},red_team,green_team,total,wall_ms``.
Floats are written with ``repr`` so a parse-rewrite round trip is
bit-exact.  ``wall_ms`` is a wall-clock diagnostic and is the only column
excluded from determinism comparisons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MetricsParseError(ValueError):
    """A metrics CSV did not match the documented schema."""


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    agent_rewards: tuple[float, ...]
    red_team: float
    green_team: float
    total: float
    wall_ms: float


def make_row(episode: int, rewards, num_red: int, wall_ms: float) -> MetricsRow:
    """Build a row whose team columns are exact sums of the member columns."""
    values = tuple(float(r) for r in rewards)
    red = float(sum(values[:num_red]))
    green = float(sum(values[num_red:]))
    return MetricsRow(
        episode=int(episode),
        agent_rewards=values,
        red_team=red,
        green_team=green,
        total=red + green,
        wall_ms=float(wall_ms),
    )


def csv_header(num_agents: int) -> list[str]:
    return (
        ["episode"]
        + [f"agent_{i}" for i in range(num_agents)]
        + ["red_team", "green_team", "total", "wall_ms"]
    )


def write_metrics_csv(path, rows: list[MetricsRow], num_agents: int | None = None) -> Path:
    """UTF-8, comma-separated, LF line endings, one row per episode."""
    path = Path(path)
    if num_agents is None:
        if not rows:
            raise ValueError("num_agents is required when writing an empty table")
        num_agents = len(rows[0].agent_rewards)
    header = csv_header(num_agents)
    lines = [",".join(header)]
    for row in rows:
        if len(row.agent_rewards) != num_agents:
            raise ValueError("row width does not match the header")
        fields = (
            [str(row.episode)]
            + [repr(v) for v in row.agent_rewards]
            + [repr(row.red_team), repr(row.green_team), repr(row.total), repr(row.wall_ms)]
        )
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_metrics_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a metrics CSV; returns (column names, float matrix).

    Malformed content raises MetricsParseError naming the file and line.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsParseError(f"{path}:1: empty file") from None
        if header[:1] != ["episode"] or header[-4:] != [
            "red_team",
            "green_team",
            "total",
            "wall_ms",
        ]:
            raise MetricsParseError(f"{path}:1: unexpected header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MetricsParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise MetricsParseError(
                    f"{path}:{lineno}: non-numeric field in {row!r}"
                ) from None
    matrix = np.array(rows) if rows else np.empty((0, len(header)))
    return header, matrix


def trajectory_bytes(path) -> bytes:
    """CSV content with the wall-clock column stripped.

    Wall time is a measurement, not part of the training trajectory; this is
    the payload that determinism checks compare byte-for-byte.
    """
    out_lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        out_lines.append(line.rsplit(",", 1)[0])
    return ("\n".join(out_lines) + "\n").encode("utf-8")
