"""Scene archives: a JSON manifest plus one raw float64 payload per field component and time slice.

Payloads are little-endian 8-byte floats in grid order (x slowest, z
fastest).  Every payload carries a 64-bit FNV-1a checksum in the manifest.
Catalog scenes are rebuilt from the recorded parameters so that they keep
exact derivatives; the payloads are then checked against the rebuilt
fields.  Everything else is loaded as sampled data.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dynamics.catalog import CatalogSpec, make_scene, scale_velocity
from ..fluid.scene import FluidScene
from ..geometry import DEFAULT_MASK_EPS, NumericProvider, SpaceTimeGrid

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
FIELDS = (("velocity", 3), ("pressure", 1), ("phi", 1))
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
CATALOG_AGREEMENT = 1e-12


class ArchiveError(Exception):
    """Malformed or unreadable archive."""


class ChecksumError(ArchiveError):
    """A payload does not match its manifest checksum or length."""


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def payload_name(field: str, component: int, time_index: int) -> str:
    return f"{field}_{component}_t{time_index:03d}.f8"


def _field_arrays(scene: FluidScene) -> dict:
    p = scene.provider
    shape = scene.grid.shape
    comps = list(scene.velocity) + [scene.pressure, scene.phi]
    vals = [np.broadcast_to(np.asarray(v, dtype=float), shape) for v in p.values_many(comps)]
    return {"velocity": vals[:3], "pressure": vals[3:4], "phi": vals[4:5]}


def _stats(a: np.ndarray) -> dict:
    return {
        "min": float(np.min(a)),
        "max": float(np.max(a)),
        "mean": float(np.mean(a)),
        "rms": float(np.sqrt(np.mean(a * a))),
    }


def write_archive(scene: FluidScene, out_dir) -> Path:
    """Write ``scene`` under ``out_dir`` (created if needed) and return the manifest path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ArchiveError(f"cannot create archive directory {out}: {err}") from err
    grid = scene.grid
    files = []
    arrays = _field_arrays(scene)
    for field, count in FIELDS:
        for c in range(count):
            data = arrays[field][c]
            for ti in range(grid.nt):
                block = np.ascontiguousarray(data[ti], dtype="<f8")
                raw = block.tobytes()
                name = payload_name(field, c, ti)
                (out / name).write_bytes(raw)
                files.append(
                    {
                        "path": name,
                        "field": field,
                        "component": c,
                        "time_index": ti,
                        "bytes": len(raw),
                        "fnv1a64": f"{fnv1a64(raw):016x}",
                        "stats": _stats(block),
                    }
                )
    manifest = {
        "format_version": FORMAT_VERSION,
        "grid": {"n_space": grid.n_space, "n_time": grid.nt},
        "box_length": grid.box_length,
        "times": list(grid.times),
        "nu": scene.nu,
        "phi_advected": scene.phi_advected,
        "mask_eps": scene.mask_eps,
        "provider": scene.provider.mode,
        "provenance": scene.provenance,
        "fields": {f: c for f, c in FIELDS},
        "stats": {f: _stats(np.stack(arrays[f])) for f, _ in FIELDS},
        "files": files,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_manifest(archive_dir) -> dict:
    path = Path(archive_dir) / MANIFEST
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError as err:
        raise ArchiveError(f"no manifest at {path}") from err
    except (OSError, json.JSONDecodeError) as err:
        raise ArchiveError(f"unreadable manifest {path}: {err}") from err
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(f"unsupported archive format version {version!r}")
    for key in ("grid", "box_length", "times", "nu", "files"):
        if key not in manifest:
            raise ArchiveError(f"manifest lacks {key!r}")
    return manifest


def read_payloads(archive_dir, manifest: dict) -> dict:
    """Load and checksum every payload; returns ``{field: [array (nt, n, n, n) per component]}``."""
    root = Path(archive_dir)
    n = int(manifest["grid"]["n_space"])
    nt = int(manifest["grid"]["n_time"])
    expected = 8 * n ** 3
    out = {f: [np.empty((nt, n, n, n)) for _ in range(c)] for f, c in FIELDS}
    seen = set()
    for entry in manifest["files"]:
        path = root / entry["path"]
        try:
            raw = path.read_bytes()
        except OSError as err:
            raise ArchiveError(f"missing payload {path.name}: {err}") from err
        if len(raw) != expected:
            raise ChecksumError(f"{path.name}: {len(raw)} bytes, expected {expected}")
        digest = f"{fnv1a64(raw):016x}"
        if digest != entry["fnv1a64"]:
            raise ChecksumError(f"{path.name}: checksum {digest} does not match manifest {entry['fnv1a64']}")
        field, comp, ti = entry["field"], int(entry["component"]), int(entry["time_index"])
        out[field][comp][ti] = np.frombuffer(raw, dtype="<f8").reshape(n, n, n)
        seen.add((field, comp, ti))
    missing = [(f, c, t) for f, cnt in FIELDS for c in range(cnt) for t in range(nt) if (f, c, t) not in seen]
    if missing:
        raise ArchiveError(f"manifest lists no payload for {missing[0]}")
    return out


def _rebuild_catalog(manifest: dict, payloads: dict) -> FluidScene:
    prov = manifest["provenance"]
    spec = CatalogSpec.from_dict(prov["catalog"])
    scene = make_scene(spec)
    factor = prov.get("velocity_scale")
    if factor is not None:
        scene = scale_velocity(scene, float(factor))
    arrays = _field_arrays(scene)
    for field, count in FIELDS:
        for c in range(count):
            a, b = arrays[field][c], payloads[field][c]
            scale = max(float(np.max(np.abs(a))), 1.0)
            if float(np.max(np.abs(a - b))) > CATALOG_AGREEMENT * scale:
                raise ArchiveError(f"payload {field}[{c}] disagrees with the recorded catalog parameters")
    return scene


def read_archive(archive_dir, mode: str = "auto") -> FluidScene:
    """Load a scene.

    ``mode="auto"`` rebuilds catalog scenes analytically and samples the rest;
    ``mode="numeric"`` always uses the payloads with spectral derivatives.
    """
    if mode not in ("auto", "numeric"):
        raise ValueError(f"unknown archive read mode {mode!r}")
    manifest = read_manifest(archive_dir)
    payloads = read_payloads(archive_dir, manifest)
    prov = manifest.get("provenance") or {}
    if mode == "auto" and prov.get("kind") == "catalog" and "catalog" in prov:
        try:
            return _rebuild_catalog(manifest, payloads)
        except (TypeError, ValueError, KeyError) as err:
            raise ArchiveError(f"cannot rebuild catalog scene: {err}") from err
    try:
        grid = SpaceTimeGrid(int(manifest["grid"]["n_space"]), tuple(manifest["times"]), float(manifest["box_length"]))
    except (TypeError, ValueError) as err:
        raise ArchiveError(f"bad grid in manifest: {err}") from err
    provider = NumericProvider(grid)
    provenance = dict(prov)
    provenance.setdefault("name", "archived scene")
    return FluidScene(
        provider,
        tuple(payloads["velocity"]),
        payloads["pressure"][0],
        payloads["phi"][0],
        float(manifest["nu"]),
        provenance,
        bool(manifest.get("phi_advected", False)),
        float(manifest.get("mask_eps", DEFAULT_MASK_EPS)),
    )
