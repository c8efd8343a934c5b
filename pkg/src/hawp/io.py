"""File formats: wireframe/homography/proposal/weight JSON, planar containers and PGM images.

Planar containers are little-endian: a 4-byte magic, then ``u32`` version,
width, height and stride, an ``f32`` distance threshold and the planes as
row-major ``f32``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from hawp.binding import Proposal, proposals_to_array
from hawp.errors import FormatError, IoFailure
from hawp.geometry import Homography, Wireframe
from hawp.hatfield import PLANE_NAMES, HatField
from hawp.junctions import JunctionMaps
from hawp.loi import MlpWeights
from hawp.ssl import EdgeMap

_HEADER = struct.Struct("<4sIIIIf")
VERSION = 1
_PLANE_COUNT = {b"HATF": 6, b"JUNC": 3, b"EDGE": 1}


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def dump_json(obj, path) -> None:
    _write_bytes(path, (json.dumps(obj, indent=1) + "\n").encode("utf-8"))


def load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _schema(fn, path, kind):
    try:
        return fn(load_json(path))
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"{path}: not a valid {kind} file ({exc!r})") from exc


def save_wireframe(wf: Wireframe, path) -> None:
    dump_json(wf.to_dict(), path)


def load_wireframe(path) -> Wireframe:
    return _schema(Wireframe.from_dict, path, "wireframe")


def save_homography(h: Homography, path) -> None:
    dump_json(h.to_dict(), path)


def load_homography(path) -> Homography:
    return _schema(Homography.from_dict, path, "homography")


def save_proposals(props, path, units: float) -> None:
    dump_json({"proposals": proposals_to_array(props).tolist(), "units": float(units)}, path)


def load_proposals(path) -> tuple[list[Proposal], float]:
    def parse(d):
        return [Proposal.from_row(r) for r in d["proposals"]], float(d.get("units", 1.0))
    return _schema(parse, path, "proposal")


def save_weights(w: MlpWeights, path) -> None:
    dump_json(w.to_dict(), path)


def load_weights(path) -> MlpWeights:
    return _schema(MlpWeights.from_dict, path, "weights")


# --- planar containers -------------------------------------------------------

def pack_planes(magic: bytes, planes, stride: int, tau_d: float) -> bytes:
    planes = [np.asarray(p, dtype="<f4") for p in planes]
    if len(planes) != _PLANE_COUNT[magic]:
        raise FormatError(f"{magic.decode()} holds {_PLANE_COUNT[magic]} planes, got {len(planes)}")
    h, w = planes[0].shape
    head = _HEADER.pack(magic, VERSION, w, h, int(stride), float(tau_d))
    return head + b"".join(np.ascontiguousarray(p).tobytes() for p in planes)


def unpack_planes(data: bytes, magic: bytes | None = None):
    """Parse a container; returns ``(magic, width, height, stride, tau_d, planes)``."""
    if len(data) < _HEADER.size:
        raise FormatError("truncated container header")
    tag, version, w, h, stride, tau_d = _HEADER.unpack_from(data)
    if tag not in _PLANE_COUNT:
        raise FormatError(f"unknown container magic {tag!r}")
    if magic is not None and tag != magic:
        raise FormatError(f"expected a {magic.decode()} container, found {tag.decode(errors='replace')}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    n = _PLANE_COUNT[tag]
    expected = _HEADER.size + 4 * n * w * h
    if len(data) != expected:
        raise FormatError(f"container size {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, h, w)
    return tag, w, h, stride, float(tau_d), [arr[i].astype(np.float32) for i in range(n)]


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def save_hat_field(f: HatField, path) -> None:
    _write_bytes(path, pack_planes(b"HATF", f.planes(), f.stride, f.tau_d))


def load_hat_field(path) -> HatField:
    _, w, h, stride, tau_d, planes = unpack_planes(_read_bytes(path), b"HATF")
    return HatField(w, h, stride, tau_d, **dict(zip(PLANE_NAMES, planes)))


def save_junction_maps(m: JunctionMaps, path) -> None:
    _write_bytes(path, pack_planes(b"JUNC", [m.heatmap, m.offset_x, m.offset_y], m.stride, 0.0))


def load_junction_maps(path) -> JunctionMaps:
    _, _, _, stride, _, (heat, ox, oy) = unpack_planes(_read_bytes(path), b"JUNC")
    return JunctionMaps(heat, ox, oy, stride)


def save_edge_map(e: EdgeMap, path) -> None:
    """Write an edge map; ``.pgm`` paths get an 8-bit image, anything else an EDGE container."""
    if str(path).lower().endswith(".pgm"):
        save_pgm(np.round(e.grid * 255.0).astype(np.uint8), path)
    else:
        _write_bytes(path, pack_planes(b"EDGE", [e.grid], 1, 0.0))


def load_edge_map(path) -> EdgeMap:
    data = _read_bytes(path)
    if data[:4] == b"EDGE":
        _, _, _, _, _, (grid,) = unpack_planes(data, b"EDGE")
        return EdgeMap(grid.astype(np.float64))
    return EdgeMap(load_pgm(path).astype(np.float64) / 255.0)


# --- images ------------------------------------------------------------------

def save_pgm(image: np.ndarray, path) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise FormatError(f"PGM needs a 2-D array, got shape {img.shape}")
    try:
        Image.fromarray(img.astype(np.uint8), mode="L").save(path, format="PPM")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_pgm(path) -> np.ndarray:
    """Grayscale image as ``uint8`` (colour inputs are converted to luminance)."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except FileNotFoundError as exc:
        raise IoFailure(f"cannot read {path}: no such file") from exc
    except OSError as exc:
        raise FormatError(f"{path}: unreadable image ({exc})") from exc
