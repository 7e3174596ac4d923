"""
分数矩阵文件

    "TCMNSCORE1" | 查询数 (uint32) | P (uint32)
    每条查询：id 长度 (uint32) | id (UTF-8) | P*P 个 float32（行优先）
全部小端。
"""

from __future__ import annotations

import os
import struct
from typing import Dict, Mapping

import numpy as np

from modules.errors import DataError, ShapeError

SCORE_MAGIC = b"TCMNSCORE1"


def write_score_file(path: str, matrices: Mapping[str, np.ndarray]) -> None:
    """写出同一 P 下的全部查询分数矩阵"""
    sizes = {np.asarray(m).shape for m in matrices.values()}
    if len(sizes) > 1:
        raise ShapeError(f"all score matrices must share one shape, got {sorted(sizes)}")
    size = next(iter(sizes))[0] if sizes else 0
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(SCORE_MAGIC)
        fh.write(struct.pack("<II", len(matrices), size))
        for query_id, matrix in matrices.items():
            encoded = str(query_id).encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_score_file(path: str) -> Dict[str, np.ndarray]:
    """读取分数文件，返回 query_id -> P x P float32 矩阵（保持文件顺序）"""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read score file: {exc}", path=path) from exc
    if not data.startswith(SCORE_MAGIC):
        raise DataError("not a TCMNSCORE1 score file", path=path)

    offset = len(SCORE_MAGIC)
    matrices: Dict[str, np.ndarray] = {}
    try:
        count, size = struct.unpack_from("<II", data, offset)
        offset += 8
        for _ in range(count):
            (length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            query_id = data[offset:offset + length].decode("utf-8")
            offset += length
            values = np.frombuffer(data, dtype="<f4", count=size * size, offset=offset)
            offset += 4 * size * size
            matrices[query_id] = values.reshape(size, size).astype(np.float32)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"truncated score file at byte {offset}: {exc}", path=path) from exc
    if offset != len(data):
        raise DataError(f"{len(data) - offset} trailing bytes", path=path)
    return matrices
