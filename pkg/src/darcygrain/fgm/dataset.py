"""On-disk dataset formats and ingestion.

Layout under a dataset directory:
  sample_<n>.micro       headerless row-major bit-packed solid mask
  sample_<n>.micro.json  {"resolution", "seed", "params", "disks"}
  sample_<n>.uf          binary float64 nodal pressures, row-major
  sample_<n>.uf.json     {"grid", "bc"}

Boundary conditions may differ per sample and are preserved; grids must agree
across a dataset.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from ..microgen import Microstructure, MicrostructureParams
from .darcy import FineField

_SAMPLE_RE = re.compile(r"sample_(\d+)\.micro$")


def write_microstructure(directory, index: int, micro: Microstructure) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / f"sample_{index}.micro"
    base.write_bytes(np.packbits(micro.pixels.ravel()).tobytes())
    sidecar = {
        "resolution": micro.resolution,
        "seed": micro.params.seed if micro.params else None,
        "params": dataclasses.asdict(micro.params) if micro.params else None,
        "disks": micro.disks,
    }
    with open(f"{base}.json", "w") as fh:
        json.dump(sidecar, fh)
    return base


def read_microstructure(base_path) -> Microstructure:
    base = Path(base_path)
    sidecar_path = Path(f"{base}.json")
    if not sidecar_path.exists():
        raise DataFormatError(f"missing sidecar {sidecar_path}")
    try:
        with open(sidecar_path) as fh:
            meta = json.load(fh)
        res = int(meta["resolution"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"corrupted sidecar {sidecar_path}: {exc}") from exc
    raw = np.frombuffer(base.read_bytes(), dtype=np.uint8)
    bits = np.unpackbits(raw, count=res * res)
    pixels = bits.astype(bool).reshape(res, res)
    disks = meta.get("disks")
    if disks is not None:
        disks = [tuple(d) for d in disks]
    params = None
    if meta.get("params"):
        params = MicrostructureParams(**meta["params"])
    return Microstructure(pixels=pixels, disks=disks, params=params)


def write_field(directory, index: int, field: FineField) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / f"sample_{index}.uf"
    base.write_bytes(np.ascontiguousarray(field.values, dtype=np.float64).tobytes())
    with open(f"{base}.json", "w") as fh:
        json.dump({"grid": field.grid, "bc": list(field.bc)}, fh)
    return base


def read_field(base_path) -> FineField:
    base = Path(base_path)
    sidecar_path = Path(f"{base}.json")
    if not sidecar_path.exists():
        raise DataFormatError(f"missing sidecar {sidecar_path}")
    try:
        with open(sidecar_path) as fh:
            meta = json.load(fh)
        grid = int(meta["grid"])
        bc = tuple(float(a) for a in meta["bc"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"corrupted sidecar {sidecar_path}: {exc}") from exc
    values = np.frombuffer(base.read_bytes(), dtype=np.float64).copy()
    if values.size != grid * grid:
        raise DataFormatError(f"{base}: {values.size} values do not fill a {grid}x{grid} grid")
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{base}: non-finite pressure values")
    return FineField(values=values, grid=grid, bc=bc)


@dataclass
class DataSample:
    index: int
    micro: Microstructure
    field: FineField


def ingest_dataset(path) -> list:
    """Load and validate all (microstructure, fine field) pairs in a directory."""
    directory = Path(path)
    indices = sorted(
        int(m.group(1)) for f in directory.iterdir() if (m := _SAMPLE_RE.search(f.name))
    )
    if not indices:
        raise DataFormatError(f"no sample_<n>.micro files under {directory}")
    samples = []
    grid = None
    res = None
    for i in indices:
        micro = read_microstructure(directory / f"sample_{i}.micro")
        field = read_field(directory / f"sample_{i}.uf")
        if grid is None:
            grid, res = field.grid, micro.resolution
        elif field.grid != grid or micro.resolution != res:
            raise DataFormatError(
                f"sample {i}: grid {field.grid}/resolution {micro.resolution} "
                f"differ from dataset ({grid}/{res})"
            )
        samples.append(DataSample(index=i, micro=micro, field=field))
    return samples


def list_micro_indices(path) -> list:
    directory = Path(path)
    return sorted(
        int(m.group(1)) for f in directory.iterdir() if (m := _SAMPLE_RE.search(f.name))
    )
