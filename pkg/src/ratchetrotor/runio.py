"""CSV and manifest serialization.

Every data file opens with comment lines carrying the run digest and
snapshot metadata, then a plain CSV header.  Floats are written with 17
significant digits so values round-trip exactly and reruns of identical
configurations produce byte-identical files.  The manifest is written last:
a directory holding data files but no manifest.json is a partial run.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .analysis import TimeSeries
from .distribution import MomentumDistribution
from .errors import ConfigError

MANIFEST_NAME = "manifest.json"


def config_digest(resolved: dict) -> str:
    """Stable hash of a fully resolved run configuration."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_distribution_csv(path: str | Path, dist: MomentumDistribution, digest: str) -> None:
    lines = [
        f"# manifest: {digest}",
        f"# n_kicks: {dist.n_kicks}",
        f"# n_samples: {dist.n_samples}",
        f"# overflow_fraction: {_fmt(dist.overflow_fraction)}",
        "p,density",
    ]
    lines += [f"{_fmt(p)},{_fmt(d)}" for p, d in zip(dist.grid, dist.density)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_distribution_csv(path: str | Path) -> MomentumDistribution:
    meta, rows = _read_csv(path, expected_header="p,density", n_fields=2)
    grid = np.array([r[0] for r in rows])
    density = np.array([r[1] for r in rows])
    return MomentumDistribution(
        grid=grid,
        density=density,
        overflow_fraction=float(meta.get("overflow_fraction", 0.0)),
        n_kicks=int(meta.get("n_kicks", 0)),
        n_samples=int(meta.get("n_samples", 0)),
    )


def write_series_csv(path: str | Path, series: TimeSeries, digest: str, name: str) -> None:
    lines = [
        f"# manifest: {digest}",
        f"# series: {name}",
        "n,value",
    ]
    lines += [f"{int(n)},{_fmt(v)}" for n, v in zip(series.kicks, series.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path: str | Path) -> TimeSeries:
    _, rows = _read_csv(path, expected_header="n,value", n_fields=2)
    kicks = np.array([int(r[0]) for r in rows])
    return TimeSeries(kicks=kicks, values=np.array([r[1] for r in rows]))


def write_portrait_csv(path: str | Path, portrait, digest: str) -> None:
    xc = 0.5 * (portrait.x_edges[:-1] + portrait.x_edges[1:])
    pc = 0.5 * (portrait.p_edges[:-1] + portrait.p_edges[1:])
    lines = [f"# manifest: {digest}", "x,p,count"]
    counts = portrait.counts
    for i, x in enumerate(xc):
        for j, p in enumerate(pc):
            lines.append(f"{_fmt(x)},{_fmt(p)},{int(counts[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _read_csv(path: str | Path, expected_header: str, n_fields: int):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"input file not found: {path}") from None
    meta: dict[str, str] = {}
    rows: list[tuple] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if ":" in body:
                key, _, value = body.partition(":")
                meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != expected_header:
                raise ConfigError(
                    f"{path}: row {lineno}: expected header {expected_header!r}, got {line!r}"
                )
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != n_fields:
            raise ConfigError(
                f"{path}: row {lineno}: expected {n_fields} comma-separated fields, got {len(parts)}"
            )
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise ConfigError(f"{path}: row {lineno}: {exc}") from None
    if not header_seen:
        raise ConfigError(f"{path}: missing header row {expected_header!r}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return meta, rows


def write_manifest(out_dir: str | Path, manifest: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(out_dir: str | Path) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise ConfigError(f"no manifest at {path}; directory holds a partial or foreign run")
    return json.loads(path.read_text())


def verify_run_dir(out_dir: str | Path) -> dict:
    """Check the manifest contract: listed files exist and carry its digest."""
    out_dir = Path(out_dir)
    manifest = read_manifest(out_dir)
    digest = manifest["digest"]
    for name in manifest["files"]:
        fp = out_dir / name
        if not fp.exists():
            raise ConfigError(f"manifest lists missing file {name}")
        head = fp.read_text().splitlines()[0]
        if digest not in head:
            raise ConfigError(f"{name} does not carry the manifest digest in its header")
    return manifest
