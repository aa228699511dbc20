"""Binary checkpoint format.

Layout (all integers little-endian):

    magic   b"FDP1"
    u32     format version (currently 1)
    u32     config text length, then UTF-8 canonical config
    u32     tensor count
    per tensor:
        u16  name length, name bytes
        u8   dtype code (0 = float32, 1 = float64)
        u8   rank
        u32* dims
        raw  little-endian element payload
    u32     crc32 of every byte after the magic

Saving the result of a load reproduces the file byte for byte: tensor
order follows the model's deterministic parameter/buffer iteration and
the config text is canonical.
"""

import struct
import zlib

import numpy as np

from fdp.config import format_config, parse_config

MAGIC = b"FDP1"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(ValueError):
    pass


def _named_arrays(model):
    for name, p in model.named_parameters():
        yield name, p.data
    for name, b in model.named_buffers():
        yield "buffer." + name, b


def save_checkpoint(path, model, cfg):
    entries = list(_named_arrays(model))
    body = bytearray()
    body += struct.pack("<I", VERSION)
    config_text = format_config(cfg).encode("utf-8")
    body += struct.pack("<I", len(config_text)) + config_text
    body += struct.pack("<I", len(entries))
    for name, arr in entries:
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"non-finite values in tensor {name!r}")
        code = _CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        nm = name.encode("utf-8")
        body += struct.pack("<H", len(nm)) + nm
        body += struct.pack("<BB", code, arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes(body))


def load_checkpoint(path):
    """Returns (config, {name: ndarray})."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    body = blob[4:]
    if len(body) < 8:
        raise CheckpointError(f"{path}: truncated checkpoint")
    stored_crc = struct.unpack("<I", body[-4:])[0]
    if zlib.crc32(body[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, body, off)
        off += size
        return vals if len(vals) > 1 else vals[0]

    version = take("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    cfg_len = take("<I")
    cfg = parse_config(body[off : off + cfg_len].decode("utf-8"))
    off += cfg_len
    count = take("<I")
    tensors = {}
    for _ in range(count):
        nm_len = take("<H")
        name = body[off : off + nm_len].decode("utf-8")
        off += nm_len
        code, rank = take("<BB")
        dims = take(f"<{rank}I") if rank else ()
        if rank == 1:
            dims = (dims,)
        dtype = _DTYPES.get(code)
        if dtype is None:
            raise CheckpointError(f"{path}: unknown dtype code {code}")
        n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if dims else dtype.itemsize
        payload = body[off : off + n_bytes]
        if len(payload) != n_bytes:
            raise CheckpointError(f"{path}: truncated tensor {name!r}")
        off += n_bytes
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    return cfg, tensors


def restore_model(model, tensors):
    """Copy checkpoint arrays into an already-constructed model."""
    wanted = dict(_named_arrays(model))
    missing = set(wanted) - set(tensors)
    extra = set(tensors) - set(wanted)
    if missing or extra:
        raise CheckpointError(
            f"checkpoint/model mismatch: missing {sorted(missing)[:3]}, "
            f"unexpected {sorted(extra)[:3]}"
        )
    for name, arr in wanted.items():
        src = tensors[name]
        if src.shape != arr.shape:
            raise CheckpointError(
                f"tensor {name!r}: shape {src.shape} != model {arr.shape}"
            )
        arr[...] = src
