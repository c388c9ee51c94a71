"""Named-array container (.nac) reader and writer.

Layout: magic bytes ``NAC1``, a little-endian u32 manifest length, a UTF-8
JSON manifest mapping array name to ``{dtype, shape, offset, length}``, then
the concatenated little-endian array payloads. ``offset`` is relative to the
end of the manifest; ``length`` is in bytes. Supported dtypes are ``f32``
and ``u32``.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"NAC1"

_DTYPES = {
    "f32": np.dtype("<f4"),
    "u32": np.dtype("<u4"),
}

_U32_MAX = 0xFFFFFFFF


def _dtype_tag(name: str, arr: np.ndarray) -> str:
    if np.issubdtype(arr.dtype, np.floating):
        return "f32"
    if np.issubdtype(arr.dtype, np.integer):
        if arr.size and (arr.min() < 0 or arr.max() > _U32_MAX):
            raise ValidationError(f"array '{name}': integer values do not fit u32")
        return "u32"
    raise ValidationError(f"array '{name}': unsupported dtype {arr.dtype}")


def write_nac(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays to ``path``.

    Floating arrays are stored as f32, integer arrays as u32. Arrays are laid
    out in name order and the manifest uses sorted keys, so the output bytes
    are a pure function of the contents.
    """
    if not arrays:
        raise ValidationError("cannot write an empty container")
    manifest: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        tag = _dtype_tag(name, arr)
        data = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        manifest[name] = {
            "dtype": tag,
            "shape": list(arr.shape),
            "offset": offset,
            "length": len(data),
        }
        chunks.append(data)
        offset += len(data)
    manifest_bytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(manifest_bytes)))
        fh.write(manifest_bytes)
        for chunk in chunks:
            fh.write(chunk)


def read_nac(path: str | Path) -> dict[str, np.ndarray]:
    """Read a container, returning arrays in their stored dtype (f32/u32)."""
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise ValidationError(f"{path}: too short to be a NAC container")
    if blob[:4] != MAGIC:
        raise ValidationError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    (manifest_len,) = struct.unpack("<I", blob[4:8])
    if 8 + manifest_len > len(blob):
        raise ValidationError(f"{path}: manifest length {manifest_len} exceeds file size")
    try:
        manifest = json.loads(blob[8 : 8 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")

    payload = blob[8 + manifest_len :]
    arrays: dict[str, np.ndarray] = {}
    for name, entry in manifest.items():
        if not isinstance(entry, dict):
            raise ValidationError(f"array '{name}': manifest entry must be an object")
        for key in ("dtype", "shape", "offset", "length"):
            if key not in entry:
                raise ValidationError(f"array '{name}': manifest entry missing '{key}'")
        tag = entry["dtype"]
        if tag not in _DTYPES:
            raise ValidationError(f"array '{name}': unknown dtype '{tag}'")
        shape = entry["shape"]
        if not isinstance(shape, list) or not all(isinstance(d, int) and d >= 0 for d in shape):
            raise ValidationError(f"array '{name}': shape must be a list of nonnegative ints")
        offset, length = entry["offset"], entry["length"]
        if not isinstance(offset, int) or not isinstance(length, int) or offset < 0 or length < 0:
            raise ValidationError(f"array '{name}': offset/length must be nonnegative ints")
        dtype = _DTYPES[tag]
        expected = math.prod(shape) * dtype.itemsize
        if length != expected:
            raise ValidationError(
                f"array '{name}': length {length} does not match shape {shape} ({expected} bytes)"
            )
        if offset + length > len(payload):
            raise ValidationError(f"array '{name}': payload range exceeds file size")
        arrays[name] = np.frombuffer(payload, dtype=dtype, count=math.prod(shape), offset=offset).reshape(shape).copy()
    return arrays
