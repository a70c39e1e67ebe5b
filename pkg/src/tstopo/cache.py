"""File formats: diagram cache, checkpoints, metrics.

Diagram cache record: instance id (uint32 LE), pair count (uint32 LE),
then count x (dim, birth, death) as little-endian float64 triples.
A JSON dump of the same records is available for inspection.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .tda import PersistenceDiagram, PersistencePair


class CacheError(ValueError):
    pass


def write_diagram_cache(path, diagrams: dict) -> None:
    """diagrams: {instance_id: PersistenceDiagram} written in id order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for inst_id in sorted(diagrams):
            pairs = diagrams[inst_id].pairs
            fh.write(struct.pack("<II", inst_id, len(pairs)))
            for p in pairs:
                fh.write(struct.pack("<ddd", float(p.dim), p.birth, p.death))


def read_diagram_cache(path) -> dict:
    """Parse a cache file back into {id: PersistenceDiagram}.

    Raises CacheError on truncated or trailing bytes.
    """
    data = Path(path).read_bytes()
    out: dict = {}
    offset = 0
    while offset < len(data):
        if offset + 8 > len(data):
            raise CacheError("truncated record header")
        inst_id, count = struct.unpack_from("<II", data, offset)
        offset += 8
        need = count * 24
        if offset + need > len(data):
            raise CacheError(f"record {inst_id}: truncated pair data")
        pairs = []
        for _ in range(count):
            dim, birth, death = struct.unpack_from("<ddd", data, offset)
            offset += 24
            pairs.append(PersistencePair(dim=int(dim), birth=birth, death=death))
        if inst_id in out:
            raise CacheError(f"duplicate record for instance {inst_id}")
        out[inst_id] = PersistenceDiagram(pairs=pairs)
    return out


def dump_diagrams_json(path, diagrams: dict) -> None:
    records = [{"id": inst_id,
                "pairs": [[p.dim, p.birth, p.death]
                          for p in diagrams[inst_id].pairs]}
               for inst_id in sorted(diagrams)]
    Path(path).write_text(json.dumps({"records": records}, indent=1))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

class CheckpointError(ValueError):
    pass


def save_checkpoint(directory, named_params: list, config_dict: dict,
                    seed: int) -> None:
    """named_params: list of (name, Tensor).  Values go to params.bin in
    manifest order as little-endian float64."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "params": [{"name": n, "shape": list(t.data.shape)} for n, t in named_params],
        "config": config_dict,
        "seed": seed,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    with open(directory / "params.bin", "wb") as fh:
        for _, t in named_params:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(directory) -> tuple:
    """Returns ({name: array}, manifest dict)."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
        blob = (directory / "params.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint at {directory}: {exc}") from exc
    params = {}
    offset = 0
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        chunk = blob[offset: offset + 8 * n]
        if len(chunk) != 8 * n:
            raise CheckpointError("params.bin shorter than manifest declares")
        params[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += 8 * n
    if offset != len(blob):
        raise CheckpointError("params.bin longer than manifest declares")
    return params, manifest


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def write_metrics(out_dir, records: list) -> None:
    """Write metrics as JSON lines plus a CSV mirror.

    Each record: {run_id, task, config_hash, seed, metric, value}.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fields = ["run_id", "task", "config_hash", "seed", "metric", "value"]
    with open(out_dir / "metrics.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps({k: rec[k] for k in fields}) + "\n")
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec[k] for k in fields})


def read_metrics(out_dir) -> list:
    path = Path(out_dir) / "metrics.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines() if line]
