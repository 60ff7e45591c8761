"""Image I/O without imaging libraries: binary PGM/PPM and raw float maps.

The raw format is a 16-byte header (``b"DPTF"`` then channels, height and
width as little-endian u32) followed by little-endian float32 data in
planar (channel-major) order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

RAW_MAGIC = b"DPTF"


class ImageFormatError(ValueError):
    pass


def _pnm_header(data: bytes):
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PNM header")
        fields.append(int(data[start:pos]))
    return fields, pos + 1


def decode_pnm(data: bytes) -> tuple[np.ndarray, int]:
    """Return ``(C x H x W uint16 array, maxval)`` for P5 (gray) or P6 (RGB)."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError("only binary PGM (P5) and PPM (P6) are supported")
    (width, height, maxval), offset = _pnm_header(data)
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"invalid maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    body = data[offset : offset + count * dtype.itemsize]
    if len(body) < count * dtype.itemsize:
        raise ImageFormatError("truncated PNM pixel data")
    pixels = np.frombuffer(body, dtype=dtype).reshape(height, width, channels)
    return pixels.transpose(2, 0, 1).astype(np.uint16), maxval


def encode_pnm(image: np.ndarray, maxval: int = 255) -> bytes:
    """Encode a ``C x H x W`` (C = 1 or 3) integer image."""
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[None]
    c, h, w = image.shape
    if c not in (1, 3):
        raise ImageFormatError(f"PNM needs 1 or 3 channels, got {c}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if image.min() < 0 or image.max() > maxval:
        raise ImageFormatError(f"pixel values outside [0, {maxval}]")
    header = f"{'P6' if c == 3 else 'P5'}\n{w} {h}\n{maxval}\n".encode()
    return header + image.transpose(1, 2, 0).astype(dtype).tobytes()


def decode_raw(data: bytes) -> np.ndarray:
    if len(data) < 16 or data[:4] != RAW_MAGIC:
        raise ImageFormatError("not a DPTF raw float file")
    c, h, w = struct.unpack("<III", data[4:16])
    n = c * h * w
    if len(data) != 16 + 4 * n:
        raise ImageFormatError(f"raw file size {len(data)} does not match {c}x{h}x{w}")
    return np.frombuffer(data[16:], dtype="<f4").reshape(c, h, w).astype(np.float32)


def encode_raw(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.float32)
    if array.ndim == 2:
        array = array[None]
    if array.ndim != 3:
        raise ImageFormatError(f"raw maps must be 2-D or 3-D, got shape {array.shape}")
    return RAW_MAGIC + struct.pack("<III", *array.shape) + array.astype("<f4").tobytes()


def read_image(path) -> tuple[np.ndarray, int | None]:
    """Read PGM/PPM or raw; returns ``(C x H x W array, maxval or None for raw)``."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from None
    if data[:4] == RAW_MAGIC:
        return decode_raw(data), None
    pixels, maxval = decode_pnm(data)
    return pixels, maxval


def read_map(path) -> np.ndarray:
    """Read a single-channel map (raw float or PGM) as float64 ``H x W``."""
    arr, _ = read_image(path)
    if arr.shape[0] != 1:
        raise ImageFormatError(f"{path}: expected one channel, got {arr.shape[0]}")
    return arr[0].astype(np.float64)


def write_raw(path, array) -> None:
    Path(path).write_bytes(encode_raw(array))


def write_pnm(path, image, maxval: int = 255) -> None:
    Path(path).write_bytes(encode_pnm(image, maxval))


def to_rgb8_range(pixels: np.ndarray, maxval: int | None) -> np.ndarray:
    """Map PNM samples onto [0, 255] floats; grayscale is replicated to RGB."""
    img = pixels.astype(np.float64)
    if maxval is not None and maxval != 255:
        img = img * (255.0 / maxval)
    if img.shape[0] == 1:
        img = np.repeat(img, 3, axis=0)
    return img
