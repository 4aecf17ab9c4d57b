"""CNOC binary container and 8-bit PNG previews.

Layout: a 16-byte little-endian header

    magic    4s   b"CNOC"
    version  u16  currently 1
    width    u16
    height   u16
    channels u16
    variant  u8   0=constant 1=identity 2=spherical 3=raw
    degree   u8   spherical degree, 0 otherwise
    (2 reserved zero bytes pad the header to 16)

followed by float32 samples in row-major (v, u, c) order. The container is
lossless for the float32 payload; the PNG preview maps [-1, 1] to [0, 255]
on the first three channels and exists for display only.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .render import CnocsMap, EncodingSpec, Variant

__all__ = [
    "VARIANT_CODES",
    "Container",
    "write_container",
    "read_container",
    "map_to_bytes",
    "array_to_bytes",
    "preview_png",
]

MAGIC = b"CNOC"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHBBxx")
assert _HEADER.size == 16

VARIANT_CODES = {Variant.CONSTANT: 0, Variant.IDENTITY: 1, Variant.SPHERICAL: 2}
RAW_CODE = 3
_CODE_VARIANTS = {v: k for k, v in VARIANT_CODES.items()}


@dataclass(frozen=True)
class Container:
    """Decoded container: (height, width, channels) float32 data."""

    data: np.ndarray
    variant_code: int
    degree: int

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def array_to_bytes(data: np.ndarray, variant_code: int = RAW_CODE, degree: int = 0) -> bytes:
    """Serialize an (H, W, C) array; values are stored as little-endian float32."""
    data = np.asarray(data)
    if data.ndim != 3:
        raise ValueError("expected an (H, W, C) array")
    h, w, c = data.shape
    if max(h, w, c) > 0xFFFF:
        raise ValueError("dimension exceeds u16 range")
    header = _HEADER.pack(MAGIC, VERSION, w, h, c, variant_code, degree)
    return header + np.ascontiguousarray(data, dtype="<f4").tobytes()


def map_to_bytes(cnocs_map: CnocsMap) -> bytes:
    spec = cnocs_map.encoding
    return array_to_bytes(cnocs_map.data, VARIANT_CODES[spec.variant],
                          spec.degree if spec.variant is Variant.SPHERICAL else 0)


def bytes_to_container(blob: bytes) -> Container:
    if len(blob) < _HEADER.size:
        raise ValueError("truncated container")
    magic, version, w, h, c, variant_code, degree = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError("bad magic, not a CNOC container")
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    expected = _HEADER.size + 4 * w * h * c
    if len(blob) != expected:
        raise ValueError(f"container payload length {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    return Container(data=data.copy(), variant_code=variant_code, degree=degree)


def write_container(data_or_map, path, variant_code: int = RAW_CODE, degree: int = 0) -> None:
    if isinstance(data_or_map, CnocsMap):
        blob = map_to_bytes(data_or_map)
    else:
        blob = array_to_bytes(data_or_map, variant_code, degree)
    with open(path, "wb") as f:
        f.write(blob)


def read_container(path) -> Container:
    with open(path, "rb") as f:
        return bytes_to_container(f.read())


def container_encoding(container: Container) -> EncodingSpec | None:
    """Best-effort EncodingSpec for a decoded map container (None for raw)."""
    variant = _CODE_VARIANTS.get(container.variant_code)
    if variant is None:
        return None
    if variant is Variant.SPHERICAL:
        base = (container.degree + 1) ** 2
        return EncodingSpec(variant=variant, degree=container.degree,
                            include_radius=container.channels == base + 1)
    return EncodingSpec(variant=variant)


def preview_png(data: np.ndarray, background: np.ndarray | None = None) -> bytes:
    """RGB PNG of the first three channels, [-1, 1] mapped to [0, 255].

    Maps with fewer than three channels are zero-padded. When a background
    mask is given (True = background pixel), those pixels render black
    instead of the mid-gray that a raw 0 would map to.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError("expected an (H, W, C) array")
    h, w, c = data.shape
    rgb = np.zeros((h, w, 3))
    rgb[:, :, : min(3, c)] = data[:, :, :3]
    img8 = np.clip(np.rint((rgb + 1.0) * 127.5), 0, 255).astype(np.uint8)
    if background is not None:
        img8[np.asarray(background, dtype=bool)] = 0
    buf = io.BytesIO()
    Image.fromarray(img8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
