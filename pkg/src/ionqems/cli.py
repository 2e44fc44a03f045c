"""Command-line front end: one-shot runs against the service layer.

Every command resolves a RunConfig, posts it to the corresponding service
endpoint, and renders the returned table as CSV (RFC-4180 quoting) with a
"# key = value" preamble carrying the resolved parameters, seed and version.
By default the service runs in-process; --server targets a running instance
instead.

Exit codes: 0 success, 2 configuration error, 3 domain error, 4 I/O error.
"""

from __future__ import annotations

import asyncio
import csv
import math
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from typing import Any, Sequence

import httpx

from .config import RunConfig, check_evolve_guardrail, parse_config
from .errors import ConfigError, DomainError
from .service.app import create_app

__all__ = ["main", "build_payload", "render_csv"]

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_DOMAIN = 3
_EXIT_IO = 4


def _wire(record: dict[str, Any]) -> dict[str, Any]:
    """Make a flat float record JSON-transportable.

    Standard JSON cannot carry inf/nan (think q_factor = inf for a lossless
    oscillator), so non-finite values travel as their repr strings; the
    service coerces them back to floats.
    """
    return {
        key: repr(value)
        if isinstance(value, float) and not math.isfinite(value) else value
        for key, value in record.items()
    }


def build_payload(config: RunConfig) -> dict[str, Any]:
    """Assemble the request body for config.command."""
    params = _wire(asdict(config.params))
    device = _wire(asdict(config.device))
    if config.command == "params":
        return {"params": params, "device": device,
                "nbar_b0": config.nbar_b0, "seed": config.seed}
    if config.command == "exchange":
        return {"params": params, "nbar_b0": config.nbar_b0,
                "t_max": config.t_max, "n_points": config.n_points,
                "with_undamped": config.with_undamped}
    if config.command == "evolve":
        n_levels, _ = check_evolve_guardrail(config)
        return {"params": params, "nbar_b0": config.nbar_b0,
                "t_max": config.t_max, "n_points": config.n_points,
                "n_levels": n_levels, "allow_large": config.allow_large}
    if config.command == "readout":
        return {"params": params, "device": device, "nbar": config.nbar,
                "tau": config.tau, "shots": config.shots,
                "drive_g": config.drive_g,
                "drive_duration": config.drive_duration, "seed": config.seed}
    if config.command == "cool":
        return {"device": device, "scheme": config.scheme,
                "nbar_a0": config.params.nbar_a0, "cycles": config.cycles,
                "recool_time": config.recool_time,
                "ion_damping": config.ion_damping}
    if config.command == "force":
        return {"device": device, "force": config.force}
    if config.command == "sweep":
        return {"vary": config.sweep_vary, "start": config.sweep_from,
                "stop": config.sweep_to, "points": config.sweep_points,
                "jobs": config.jobs, "gamma_a": config.params.gamma_a,
                "nbar_a0": config.params.nbar_a0, "nbar_b0": config.nbar_b0}
    raise ConfigError(f"unknown command {config.command!r}")


def _post(config: RunConfig, payload: dict[str, Any]) -> tuple[int, Any]:
    path = f"/{config.command}"
    if config.server:
        with httpx.Client(base_url=config.server, timeout=600.0) as client:
            response = client.post(path, json=payload)
            return response.status_code, response.json()

    async def _in_process() -> tuple[int, Any]:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service"
        ) as client:
            response = await client.post(path, json=payload)
            return response.status_code, response.json()

    return asyncio.run(_in_process())


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DomainError(f"non-finite value {value!r} in output table")
        return repr(value)
    return str(value)


def render_csv(
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    meta: dict[str, Any],
    *,
    timestamp: bool = False,
) -> str:
    """Render the table: commented preamble, header row, data rows."""
    import io

    buffer = io.StringIO()
    for key in sorted(meta):
        buffer.write(f"# {key} = {meta[key]}\n")
    if timestamp:
        stamp = datetime.now(timezone.utc).isoformat()
        buffer.write(f"# generated_at = {stamp}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(cell) for cell in row])
    return buffer.getvalue()


def _output_path(config: RunConfig) -> str:
    if config.output:
        return config.output
    name = f"{config.command}.csv"
    if config.output_dir:
        return os.path.join(config.output_dir, name)
    return name


def _write(path: str, text: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _describe_422(data: Any) -> str:
    try:
        parts = []
        for item in data["detail"]:
            where = ".".join(str(p) for p in item.get("loc", []) if p != "body")
            parts.append(f"{where}: {item.get('msg', 'invalid')}")
        return "; ".join(parts) or "request validation failed"
    except (KeyError, TypeError):
        return "request validation failed"


def _run(config: RunConfig) -> int:
    if config.command == "evolve":
        # surface the cost estimate before any work happens
        _, cost_note = check_evolve_guardrail(config)
        if cost_note:
            print(f"note: {cost_note}", file=sys.stderr)

    payload = build_payload(config)
    try:
        status, data = _post(config, payload)
    except httpx.HTTPError as exc:
        print(f"error[io]: service request failed: {exc}", file=sys.stderr)
        return _EXIT_IO

    if status == 422:
        print(f"error[config]: {_describe_422(data)}", file=sys.stderr)
        return _EXIT_CONFIG
    if status != 200:
        try:
            code = data["error"]["code"]
            message = data["error"]["message"]
        except (KeyError, TypeError):
            code, message = "domain", f"service returned status {status}"
        print(f"error[{code}]: {message}", file=sys.stderr)
        return _EXIT_CONFIG if code == "config" else _EXIT_DOMAIN

    meta = dict(data["meta"])
    meta["command"] = config.command
    text = render_csv(data["columns"], data["rows"], meta,
                      timestamp=config.timestamp)
    path = _output_path(config)
    _write(path, text)
    print(f"wrote {path} ({len(data['rows'])} rows)")
    return _EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return _EXIT_CONFIG

    try:
        return _run(config)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except DomainError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return _EXIT_DOMAIN
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
