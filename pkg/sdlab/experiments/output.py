"""Artifacts: CSV tables with a reproducibility header, verdict files and plot data."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import aiofiles
import yaml

HEADER_PREFIX = "# "
RESULTS_FILE = "results.csv"
SCAN_FILE = "scan.csv"
VERDICT_FILE = "verdict.yaml"
PLOT_DIR = "plotdata"
MANIFEST_FILE = "manifest.yaml"


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def columns_of(rows: Sequence[dict[str, Any]]) -> list[str]:
    """Union of row keys in first-seen order."""
    seen: dict[str, None] = {}
    for row in rows:
        for key in row:
            seen.setdefault(key, None)
    return list(seen)


def render_csv(header: dict[str, Any], rows: Sequence[dict[str, Any]]) -> str:
    """CSV text preceded by the YAML header, one '# ' comment line per YAML line."""
    buffer = io.StringIO()
    header_text = yaml.safe_dump(header, sort_keys=True, default_flow_style=False)
    for line in header_text.splitlines():
        buffer.write(f"{HEADER_PREFIX}{line}\n")
    columns = columns_of(rows)
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(row.get(key)) for key in columns})
    return buffer.getvalue()


def parse_csv(text: str) -> tuple[dict[str, Any], list[dict[str, str]]]:
    """Inverse of render_csv: (header mapping, rows as strings)."""
    header_lines, body_lines = [], []
    for line in text.splitlines():
        if line.startswith(HEADER_PREFIX.rstrip()) and not body_lines:
            header_lines.append(line[len(HEADER_PREFIX):] if line.startswith(HEADER_PREFIX) else "")
        else:
            body_lines.append(line)
    header = yaml.safe_load("\n".join(header_lines)) or {}
    rows = list(csv.DictReader(body_lines))
    return header, rows


async def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as fh:
        await fh.write(text)
    return path


async def read_text(path: Path) -> str:
    async with aiofiles.open(path, "r", encoding="utf-8") as fh:
        return await fh.read()


async def read_results(path: Path) -> tuple[dict[str, Any], list[dict[str, str]]]:
    return parse_csv(await read_text(path))


async def write_verdict(directory: Path, verdict: dict[str, Any]) -> Path:
    text = yaml.safe_dump(verdict, sort_keys=True, default_flow_style=False)
    return await write_text(directory / VERDICT_FILE, text)


@dataclass(frozen=True)
class Curve:
    """One x/y series destined for a whitespace-delimited plot file."""

    name: str
    x_label: str
    y_label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]


def _numeric(value: Any) -> float | None:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def curves_from_rows(
    rows: Iterable[dict[str, Any]], x: str, ys: Sequence[str], group_by: str | None = None
) -> list[Curve]:
    """Split rows into (x, y) curves, one per y column and group."""
    groups: dict[str, list[dict[str, Any]]] = {}
    for row in rows:
        key = str(row.get(group_by, "")) if group_by else ""
        groups.setdefault(key, []).append(row)
    curves = []
    for key, members in groups.items():
        for y in ys:
            points = [(_numeric(r.get(x)), _numeric(r.get(y))) for r in members]
            points = [(a, b) for a, b in points if a is not None and b is not None]
            if not points:
                continue
            name = f"{y}_vs_{x}" + (f"_{key}" if key else "")
            curves.append(Curve(name, x, y, tuple(p[0] for p in points), tuple(p[1] for p in points)))
    return curves


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


async def emit_plotdata(directory: Path, curves: Sequence[Curve]) -> list[Path]:
    """Write gnuplot-ready two-column files plus a manifest describing them."""
    if not curves:
        raise ValueError("no curves to write")
    plot_dir = directory / PLOT_DIR
    written, manifest = [], []
    for curve in curves:
        filename = f"{_safe_name(curve.name)}.dat"
        lines = [f"# {curve.x_label} {curve.y_label}"]
        lines += [f"{format_value(float(x))} {format_value(float(y))}" for x, y in zip(curve.xs, curve.ys)]
        written.append(await write_text(plot_dir / filename, "\n".join(lines) + "\n"))
        manifest.append({"file": filename, "name": curve.name, "x": curve.x_label, "y": curve.y_label, "points": len(curve.xs)})
    manifest_text = yaml.safe_dump({"curves": manifest}, sort_keys=False, default_flow_style=False)
    written.append(await write_text(plot_dir / MANIFEST_FILE, manifest_text))
    return written
