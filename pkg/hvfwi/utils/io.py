"""File formats: raw little-endian binary64 payloads with a YAML sidecar header.

A grid at PATH is stored as PATH (n_z * n_x doubles, row-major) and PATH.yaml. Gathers are
stored the same way with complex samples interleaved as (re, im), ordered by source, then
frequency, then receiver.
"""
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from PIL import Image

from hvfwi.physics.helmholtz import AcquisitionGeometry, FrequencyGather, VelocityModel2D

from .errors import ConfigError

HEADER_SUFFIX = ".yaml"
GATHER_LAYOUT = "source-major, freq-major, receiver-minor, complex interleaved re/im"


@dataclass
class GridFile:
    values: np.ndarray  # (n_z, n_x) float64
    dx: float
    dz: float

    @classmethod
    def from_model(cls, model: VelocityModel2D) -> "GridFile":
        return cls(values=model.c, dx=model.dx, dz=model.dz)

    def to_model(self) -> VelocityModel2D:
        return VelocityModel2D(c=self.values, dx=self.dx, dz=self.dz)


def header_path(path: str) -> str:
    return path + HEADER_SUFFIX


@contextmanager
def atomic_open(path: str, mode: str = "wb"):
    """Writes to a temporary file next to path and renames it into place on success."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _write_header(path: str, header: Dict) -> None:
    with atomic_open(header_path(path), "w") as f:
        yaml.safe_dump(header, f, sort_keys=False)


def _read_header(path: str) -> Dict:
    with open(header_path(path), "r") as f:
        try:
            header = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError("Malformed header {}: {}".format(header_path(path), e))
    if not isinstance(header, dict):
        raise ConfigError("Header {} must be a mapping".format(header_path(path)))
    return header


def _field(header: Dict, key: str, path: str):
    if key not in header:
        raise ConfigError("Header {} is missing field '{}'".format(header_path(path), key))
    return header[key]


def _expect(header: Dict, key: str, expected, path: str) -> None:
    if _field(header, key, path) != expected:
        raise ConfigError(
            "Header {} has {} = {}, expected {}".format(header_path(path), repr(key), repr(header[key]), repr(expected))
        )


def _positive(header: Dict, key: str, path: str) -> float:
    value = _field(header, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError("Header {} field '{}' must be a positive number".format(header_path(path), key))
    return float(value)


def _read_payload(path: str, dtype: str, count: int, key: str) -> np.ndarray:
    with open(path, "rb") as f:
        payload = f.read()
    itemsize = np.dtype(dtype).itemsize
    if len(payload) != itemsize * count:
        raise ConfigError(
            "Payload {} holds {} bytes but field '{}' implies {}".format(path, len(payload), key, itemsize * count)
        )
    return np.frombuffer(payload, dtype=dtype).astype(dtype[1:])


def write_grid(path: str, grid: Union[GridFile, VelocityModel2D]) -> None:
    grid = GridFile.from_model(grid) if isinstance(grid, VelocityModel2D) else grid
    values = np.ascontiguousarray(grid.values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError("Grids must be two dimensional")
    with atomic_open(path, "wb") as f:
        f.write(values.tobytes(order="C"))
    header = dict(
        dtype="f64",
        shape=[int(n) for n in values.shape],
        dx_m=float(grid.dx),
        dz_m=float(grid.dz),
        byte_order="little",
    )
    _write_header(path, header)


def read_grid(path: str) -> GridFile:
    header = _read_header(path)
    _expect(header, "dtype", "f64", path)
    _expect(header, "byte_order", "little", path)
    shape = _field(header, "shape", path)
    if not (isinstance(shape, list) and len(shape) == 2 and all(isinstance(n, int) and n > 0 for n in shape)):
        raise ConfigError("Header {} field 'shape' must be two positive integers".format(header_path(path)))
    values = _read_payload(path, "<f8", shape[0] * shape[1], "shape").reshape(shape)
    return GridFile(values=values, dx=_positive(header, "dx_m", path), dz=_positive(header, "dz_m", path))


def read_model(path: str) -> VelocityModel2D:
    return read_grid(path).to_model()


def write_gathers(path: str, gathers: Sequence[FrequencyGather], geometry: AcquisitionGeometry) -> None:
    freqs = sorted(set(float(g.freq_hz) for g in gathers))
    lookup = {(g.source_index, float(g.freq_hz)): g.values for g in gathers}
    if len(lookup) != geometry.n_sources * len(freqs):
        raise ConfigError("Gathers must cover every source at every frequency")
    data = np.empty((geometry.n_sources, len(freqs), geometry.n_receivers), dtype="<c16")
    for k in range(geometry.n_sources):
        for j, freq in enumerate(freqs):
            data[k, j] = lookup[(k, freq)]
    with atomic_open(path, "wb") as f:
        f.write(data.tobytes(order="C"))
    header = dict(
        dtype="f64",
        byte_order="little",
        freqs_hz=freqs,
        sources=geometry.sources.tolist(),
        receivers=geometry.receivers.tolist(),
        peak_frequency_hz=None if geometry.peak_frequency_hz is None else float(geometry.peak_frequency_hz),
        layout=GATHER_LAYOUT,
    )
    _write_header(path, header)


def read_gathers(path: str) -> Tuple[List[FrequencyGather], AcquisitionGeometry]:
    header = _read_header(path)
    _expect(header, "dtype", "f64", path)
    _expect(header, "byte_order", "little", path)
    _expect(header, "layout", GATHER_LAYOUT, path)
    freqs = _field(header, "freqs_hz", path)
    if not isinstance(freqs, list) or len(freqs) == 0:
        raise ConfigError("Header {} field 'freqs_hz' must be a non-empty list".format(header_path(path)))
    try:
        geometry = AcquisitionGeometry(
            sources=_field(header, "sources", path),
            receivers=_field(header, "receivers", path),
            peak_frequency_hz=header.get("peak_frequency_hz"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError("Header {} has invalid positions: {}".format(header_path(path), e))
    count = geometry.n_sources * len(freqs) * geometry.n_receivers
    data = _read_payload(path, "<c16", count, "freqs_hz").reshape(geometry.n_sources, len(freqs), -1)
    gathers = [
        FrequencyGather(source_index=k, freq_hz=float(freq), values=data[k, j])
        for k in range(geometry.n_sources)
        for j, freq in enumerate(freqs)
    ]
    return gathers, geometry


def write_frame(path: str, df: pd.DataFrame) -> None:
    with atomic_open(path, "w") as f:
        df.to_csv(f, index=False)


def export_image(grid: Union[GridFile, VelocityModel2D], out: str) -> Tuple[float, float]:
    """Writes an 8-bit binary graymap with linear min-max scaling. The range goes to OUT.yaml."""
    values = grid.c if isinstance(grid, VelocityModel2D) else grid.values
    low, high = float(np.min(values)), float(np.max(values))
    if high > low:
        pixels = np.rint(255.0 * (values - low) / (high - low))
    else:
        pixels = np.zeros(values.shape)
    image = Image.fromarray(pixels.astype(np.uint8))
    with atomic_open(out, "wb") as f:
        image.save(f, format="PPM")
    _write_header(out, dict(min=low, max=high, shape=[int(n) for n in values.shape]))
    return low, high


def read_image(path: str) -> np.ndarray:
    """Reconstructs values from a graymap written by export_image."""
    header = _read_header(path)
    low, high = float(_field(header, "min", path)), float(_field(header, "max", path))
    pixels = np.asarray(Image.open(path), dtype=np.float64)
    return low + pixels / 255.0 * (high - low)


def read_signal(path: str) -> Tuple[np.ndarray, float]:
    """A signal stored as a one-row (real) or two-row (real, imaginary) grid."""
    grid = read_grid(path)
    if grid.values.shape[0] == 1:
        return grid.values[0], grid.dx
    elif grid.values.shape[0] == 2:
        return grid.values[0] + 1j * grid.values[1], grid.dx
    raise ConfigError(
        "Signal file {} must hold one or two rows, header field 'shape' is {}".format(path, list(grid.values.shape))
    )


def write_signal(path: str, values: np.ndarray, step: float = 1.0) -> None:
    values = np.asarray(values)
    rows = np.stack([values.real, values.imag]) if np.iscomplexobj(values) else values[None, :]
    write_grid(path, GridFile(values=rows.astype(np.float64), dx=step, dz=1.0))
