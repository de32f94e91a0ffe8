"""Raw tensor file format shared by the CLI and checkpointing.

Layout (all integers little-endian):

    magic   4 bytes  b"FQT1"
    rank    u32
    dims    u32 * rank
    data    f64 * prod(dims), little-endian, C order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FQT1"


def write_tensor(path: str | Path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", data.ndim))
        fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
        fh.write(data.astype("<f8").tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor file (bad magic {blob[:4]!r})")
    (rank,) = struct.unpack_from("<I", blob, 4)
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    offset = 8 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    expected = offset + 8 * count
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=offset, count=count)
    return data.reshape(dims).astype(np.float64)
