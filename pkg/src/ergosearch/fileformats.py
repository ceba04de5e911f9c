"""Binary plane files for flows and scalar fields, raw mask bytes, PGM previews.

A plane file is a short text header followed by raw little-endian float32
planes, each row-major with shape (ny, nx)::

    ERGOPLANES 1
    nx 100
    ny 100
    origin 0.0 0.0
    h 0.01
    planes 2
    times 0.0 10.0
    END

Flow files carry ``planes 2`` (wx then wy for every snapshot); scalar field
snapshots carry ``planes 1`` with a single time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import FLUID, OBSTACLE, FlowSeries, Grid2D, ScalarField

MAGIC = "ERGOPLANES 1"
_END = b"END\n"


class FileFormatError(ValueError):
    pass


@dataclass
class PlaneHeader:
    nx: int
    ny: int
    origin: tuple[float, float]
    h: float
    planes: int
    times: list[float]


def _format_header(hdr: PlaneHeader) -> bytes:
    lines = [
        MAGIC,
        f"nx {hdr.nx}",
        f"ny {hdr.ny}",
        f"origin {hdr.origin[0]!r} {hdr.origin[1]!r}",
        f"h {hdr.h!r}",
        f"planes {hdr.planes}",
        "times " + " ".join(repr(float(t)) for t in hdr.times),
        "END",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def _split(raw: bytes) -> tuple[PlaneHeader, bytes]:
    end = raw.find(_END)
    if not raw.startswith(MAGIC.encode()) or end < 0:
        raise FileFormatError("not a plane file (missing magic or END line)")
    fields: dict[str, list[str]] = {}
    for line in raw[:end].decode("ascii").splitlines()[1:]:
        if line.strip():
            key, *rest = line.split()
            fields[key] = rest
    try:
        hdr = PlaneHeader(
            nx=int(fields["nx"][0]),
            ny=int(fields["ny"][0]),
            origin=(float(fields["origin"][0]), float(fields["origin"][1])),
            h=float(fields["h"][0]),
            planes=int(fields["planes"][0]),
            times=[float(t) for t in fields["times"]],
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise FileFormatError(f"bad plane header: {exc}") from exc
    return hdr, raw[end + len(_END):]


def _read_planes(path) -> tuple[PlaneHeader, np.ndarray]:
    hdr, payload = _split(Path(path).read_bytes())
    count = len(hdr.times) * hdr.planes * hdr.nx * hdr.ny
    if len(payload) != 4 * count:
        raise FileFormatError(f"expected {count} floats, found {len(payload) / 4:g}")
    data = np.frombuffer(payload, dtype="<f4")
    return hdr, data.reshape(len(hdr.times), hdr.planes, hdr.ny, hdr.nx).astype(float)


def _header_for(grid: Grid2D, planes: int, times) -> PlaneHeader:
    return PlaneHeader(grid.nx, grid.ny, grid.origin, grid.h, planes, [float(t) for t in times])


def write_flow(path, flow: FlowSeries) -> None:
    grid = flow.grid
    stacked = np.stack([flow.wx, flow.wy], axis=1).astype("<f4")
    Path(path).write_bytes(_format_header(_header_for(grid, 2, flow.times)) + stacked.tobytes())


def read_flow(path, grid: Grid2D | None = None) -> FlowSeries:
    """Load a flow file; without ``grid`` an all-FLUID, all-WALL grid is built from the header."""
    hdr, data = _read_planes(path)
    if hdr.planes != 2:
        raise FileFormatError(f"flow file must have 2 planes per snapshot, has {hdr.planes}")
    if grid is None:
        grid = Grid2D(hdr.origin, hdr.h, hdr.nx, hdr.ny, np.zeros((hdr.ny, hdr.nx), np.uint8))
    elif (grid.nx, grid.ny) != (hdr.nx, hdr.ny) or not np.isclose(grid.h, hdr.h):
        raise FileFormatError(
            f"flow grid {hdr.nx}x{hdr.ny} h={hdr.h} does not match domain {grid.nx}x{grid.ny} h={grid.h}"
        )
    return FlowSeries(grid, np.array(hdr.times), data[:, 0], data[:, 1])


def write_field(path, field: ScalarField, t: float = 0.0) -> None:
    grid = field.grid
    plane = field.values.astype("<f4")
    Path(path).write_bytes(_format_header(_header_for(grid, 1, [t])) + plane.tobytes())


def read_field(path) -> tuple[PlaneHeader, np.ndarray]:
    """Header and the (ny, nx) values of a single-plane field snapshot."""
    hdr, data = _read_planes(path)
    if hdr.planes != 1 or len(hdr.times) != 1:
        raise FileFormatError("field snapshot must hold exactly one plane")
    return hdr, data[0, 0]


def write_mask(path, grid: Grid2D) -> None:
    Path(path).write_bytes(np.where(grid.fluid, FLUID, OBSTACLE).astype(np.uint8).tobytes())


def read_mask(path, nx: int, ny: int) -> np.ndarray:
    raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    if raw.size != nx * ny:
        raise FileFormatError(f"mask has {raw.size} bytes, expected {nx * ny}")
    if np.any(raw > 1):
        raise FileFormatError("mask bytes must be 0 (FLUID) or 1 (OBSTACLE)")
    return raw.reshape(ny, nx).copy()


def write_pgm(path, values: np.ndarray, fluid: np.ndarray | None = None) -> None:
    """8-bit binary PGM, linearly scaled to the finite range; north row first."""
    vals = np.asarray(values, dtype=float)
    valid = np.isfinite(vals) if fluid is None else (fluid & np.isfinite(vals))
    lo = vals[valid].min() if valid.any() else 0.0
    hi = vals[valid].max() if valid.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    img = np.zeros(vals.shape, dtype=np.uint8)
    img[valid] = np.round(255 * (vals[valid] - lo) / span).astype(np.uint8)
    img = img[::-1]
    ny, nx = img.shape
    Path(path).write_bytes(f"P5\n{nx} {ny}\n255\n".encode("ascii") + img.tobytes())
