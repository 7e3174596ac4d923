"""
参数检查点读写

格式：魔数 "TCMN1"，随后每个参数依次为
名字长度(uint32)、名字(UTF-8)、秩(uint32)、各维(uint32)、float32 数据（行优先），全部小端。
"""

from __future__ import annotations

import logging
import os
import struct

import numpy as np

from modules.errors import DataError
from .optimizer import ParameterStore

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"TCMN1"


def save_checkpoint(path: str, store: ParameterStore) -> None:
    """把参数写入检查点文件

    Args:
        path: 输出路径
        store: 参数存储
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name, value in store.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", value.ndim))
            fh.write(struct.pack(f"<{value.ndim}I", *value.shape))
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    logger.info(f"Saved checkpoint with {len(store)} tensors ({store.count()} values) to {path}")


def load_checkpoint(path: str, dtype=np.float32) -> ParameterStore:
    """读取检查点文件

    Args:
        path: 检查点路径
        dtype: 载入后的参数精度

    Returns:
        新的 ParameterStore（矩缓冲区清零）
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint: {exc}", path=path) from exc

    if not data.startswith(CHECKPOINT_MAGIC):
        raise DataError("not a TCMN1 checkpoint", path=path)

    store = ParameterStore(dtype)
    offset = len(CHECKPOINT_MAGIC)
    try:
        while offset < len(data):
            (name_length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset:offset + name_length].decode("utf-8")
            offset += name_length
            (rank,) = struct.unpack_from("<I", data, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            payload = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
            offset += 4 * count
            store.add(name, payload.reshape(shape))
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"truncated or corrupt checkpoint at byte {offset}: {exc}", path=path) from exc
    return store
