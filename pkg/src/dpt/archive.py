"""Binary weight archive (``DPTW``).

Layout, all integers little-endian::

    b"DPTW"  u64 record_count
    per record:
        u32 name_length, name (utf-8)
        u8 dtype_code (1 = float32, 2 = float64)
        u8 rank, rank x u64 extents
        raw little-endian IEEE-754 data, row-major
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DPTW"
_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class ArchiveError(ValueError):
    pass


def dumps(arrays: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<Q", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(getattr(arr, "data", arr))
        dtype = arr.dtype.newbyteorder("<")
        if dtype not in _CODES:
            raise ArchiveError(f"{name}: unsupported dtype {arr.dtype}")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<BB", _CODES[dtype], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ArchiveError(f"truncated archive while reading {what} at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def loads(data: bytes) -> dict[str, np.ndarray]:
    """Parse a whole archive; nothing is returned unless every record is valid."""
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise ArchiveError("not a DPTW archive (bad magic)")
    (count,) = struct.unpack("<Q", r.take(8, "record count"))
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (n,) = struct.unpack("<I", r.take(4, f"record {i} name length"))
        try:
            name = r.take(n, f"record {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise ArchiveError(f"record {i}: name is not valid utf-8") from None
        code, rank = struct.unpack("<BB", r.take(2, f"{name} header"))
        if code not in _DTYPES:
            raise ArchiveError(f"{name}: unknown dtype code {code}")
        shape = struct.unpack(f"<{rank}Q", r.take(8 * rank, f"{name} extents"))
        dtype = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = r.take(nbytes, f"{name} data")
        if name in out:
            raise ArchiveError(f"duplicate record {name!r}")
        out[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    if r.pos != len(data):
        raise ArchiveError(f"{len(data) - r.pos} trailing bytes after last record")
    return out


def save(arrays: dict, path) -> None:
    Path(path).write_bytes(dumps(arrays))


def load(path) -> dict[str, np.ndarray]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArchiveError(f"cannot read {path}: {exc}") from None
    return loads(data)


def save_weights(model, path) -> None:
    save({name: t.data for name, t in model.params.items()}, path)


def load_weights(path, cfg):
    """Build a :class:`~dpt.model.DPT` from an archive, checking it against ``cfg``."""
    from .config import parse_config
    from .model import DPT
    from .params import param_plan
    from .tensor import Tensor

    cfg = parse_config(cfg)
    arrays = load(path)
    plan = param_plan(cfg)
    missing = [k for k in plan if k not in arrays]
    if missing:
        raise ArchiveError(f"archive is missing record {missing[0]!r}" + (f" (+{len(missing) - 1} more)" if len(missing) > 1 else ""))
    extra = [k for k in arrays if k not in plan]
    if extra:
        raise ArchiveError(f"archive has unexpected record {extra[0]!r}")
    dtypes = {a.dtype for a in arrays.values()}
    if len(dtypes) > 1:
        raise ArchiveError("archive mixes float32 and float64 records")
    for name, spec in plan.items():
        if tuple(arrays[name].shape) != tuple(spec.shape):
            raise ArchiveError(f"record {name!r} has shape {arrays[name].shape}, config expects {spec.shape}")
    params = {name: Tensor(arrays[name].copy(), requires_grad=spec.trainable, name=name) for name, spec in plan.items()}
    return DPT(cfg, params)
