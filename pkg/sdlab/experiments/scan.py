"""Parameter scans: independent points evaluated concurrently, one writer for the output."""
from __future__ import annotations

import asyncio
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from sdlab.config import ScenarioConfig, Settings
from sdlab.errors import ConfigError
from sdlab.experiments.output import SCAN_FILE, curves_from_rows, emit_plotdata, render_csv, write_text, write_verdict
from sdlab.experiments.registry import Params, Row, Verdict, get_experiment
from sdlab.experiments.runner import output_directory, results_header
from sdlab.log import get_logger

logger = get_logger("scan")


@dataclass
class ScanResult:
    experiment: str
    directory: Path
    rows: list[Row]
    verdict: Verdict


def scan_points(parameters: dict[str, list[Any]]) -> list[Params]:
    """Cartesian product of the scanned values, in a deterministic order."""
    if not parameters:
        raise ConfigError("scan.parameters must name at least one parameter")
    names = list(parameters)
    for name in names:
        if not parameters[name]:
            raise ConfigError(f"scan parameter {name!r} has no values")
    return [dict(zip(names, combo)) for combo in itertools.product(*(parameters[n] for n in names))]


async def run_scan(cfg: ScenarioConfig, settings: Settings) -> ScanResult:
    """Evaluate every scan point with at most ``settings.workers`` in flight."""
    name = cfg.scan.experiment
    if not name:
        raise ConfigError("scan.experiment is required for a scan")
    experiment = get_experiment(name)
    if experiment.point is None or experiment.scan_rule is None:
        raise ConfigError(f"experiment {name!r} does not support scans")
    params = experiment.resolve_params(cfg)
    points = scan_points(cfg.scan.parameters)
    semaphore = asyncio.Semaphore(settings.workers)

    async def evaluate(index: int, point: Params) -> Row:
        async with semaphore:
            logger.info("scan point %d/%d: %s", index + 1, len(points), point)
            try:
                row = await asyncio.to_thread(experiment.point, point, cfg, params)
            except Exception as exc:  # a failed point is recorded, not fatal
                logger.warning("scan point %s failed: %s", point, exc)
                row = {**point, "error": f"{type(exc).__name__}: {exc}"}
            return {"index": index, **row, "error": row.get("error", "")}

    # gather keeps submission order, so the file is independent of completion order
    rows = list(await asyncio.gather(*(evaluate(i, p) for i, p in enumerate(points))))
    verdict = experiment.scan_rule(rows, params, cfg)

    directory = output_directory(name, cfg, settings)
    await write_text(directory / SCAN_FILE, render_csv(results_header(experiment, cfg, params, kind="scan"), rows))
    await write_verdict(directory, {"experiment": name, "kind": "scan", **verdict.to_dict()})
    if cfg.output.plotdata and settings.plotdata:
        x = next(iter(cfg.scan.parameters))
        ys = [k for k in rows[0] if k not in {"index", "error", x}] if rows else []
        curves = curves_from_rows([r for r in rows if not r.get("error")], x, ys)
        if curves:
            await emit_plotdata(directory, curves)
    return ScanResult(name, directory, rows, verdict)
